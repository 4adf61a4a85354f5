#include "decennt/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace decennt {

std::size_t GtaParams::hidden_width(std::size_t components, double gamma_ratio) {
    const double m = std::round(gamma_ratio * static_cast<double>(components * components));
    return m < 1.0 ? 1 : static_cast<std::size_t>(m);
}

GtaParams GtaParams::init(std::size_t components, double gamma_ratio, Rng& rng) {
    if (gamma_ratio <= 0.0) throw Error::config("gta: gamma must be positive");
    const std::size_t n2 = components * components;
    const std::size_t m = hidden_width(components, gamma_ratio);
    auto uniform = [&](std::size_t r, std::size_t c) {
        const double bound = std::sqrt(6.0 / static_cast<double>(r + c));
        std::vector<double> v(r * c);
        for (auto& x : v) x = rng.uniform(-bound, bound);
        return make_tensor({r, c}, std::move(v), true);
    };
    GtaParams p;
    p.w_hidden = uniform(n2, m);
    p.w_score = uniform(m, 1);
    p.bn = BatchNormParams::init(m);
    p.gamma_ratio = gamma_ratio;
    return p;
}

std::vector<TensorPtr> GtaParams::parameters() const { return {w_hidden, w_score, bn.scale, bn.shift}; }

AggregateTaped aggregate_taped(Tape& tape, GtaParams& p, const TensorPtr& graphs, std::size_t batch,
                               AlphaMode mode, bool training) {
    if (graphs->rank() != 2 || graphs->cols() != p.graph_size()) {
        throw Error::dimension("aggregate: graph width does not match n^2");
    }
    if (batch == 0 || graphs->rows() % batch != 0) {
        throw Error::dimension("aggregate: rows are not divisible into samples");
    }
    const std::size_t timepoints = graphs->rows() / batch;
    if (timepoints == 0) throw Error::input("aggregate: no timepoints");

    // global view per sample, broadcast back over its T rows
    auto global = tape.block_sum_rows(graphs, batch);  // [batch x n^2]
    auto tilde = tape.hadamard(graphs, tape.repeat_rows(global, timepoints));

    auto hidden = tape.matmul(tilde, p.w_hidden);                     // [batch*T x m]
    hidden = tape.batchnorm(hidden, p.bn, training);
    hidden = tape.apply_activation(hidden, Activation::Relu);
    auto scores_col = tape.matmul(hidden, p.w_score);                 // [batch*T x 1]

    AggregateTaped out;
    out.scores = tape.reshape(scores_col, {batch, timepoints});
    out.alpha = mode == AlphaMode::Softmax ? tape.softmax_rows(out.scores)
                                           : tape.apply_activation(out.scores, Activation::Relu);
    out.final_graph = tape.block_weighted_rows(out.alpha, graphs, batch);  // [batch x n^2]
    return out;
}

TemporalAttention aggregate(GtaParams& p, const DynamicGraph& graph, AlphaMode mode, bool training) {
    if (graph.timepoints() == 0) throw Error::input("aggregate: empty graph sequence");
    const std::size_t n = graph.components;
    const std::size_t timepoints = graph.timepoints();

    std::vector<double> stacked(timepoints * n * n);
    for (std::size_t t = 0; t < timepoints; ++t) {
        if (graph.graphs[t].rows != n || graph.graphs[t].cols != n) {
            throw Error::dimension("aggregate: graph matrices are not n x n");
        }
        std::copy(graph.graphs[t].data.begin(), graph.graphs[t].data.end(),
                  stacked.begin() + static_cast<std::ptrdiff_t>(t * n * n));
    }

    Tape tape(false);
    auto res = aggregate_taped(tape, p, make_tensor({timepoints, n * n}, std::move(stacked)), 1, mode, training);

    TemporalAttention att;
    att.mode = mode;
    att.scores = res.scores->values;
    att.alpha = res.alpha->values;
    att.final_graph = Matrix(n, n, res.final_graph->values);
    return att;
}

std::vector<bool> attention_threshold(const TemporalAttention& att) {
    const std::size_t timepoints = att.alpha.size();
    std::vector<bool> mask(timepoints, false);
    if (att.mode == AlphaMode::Softmax) {
        const double baseline = 1.0 / static_cast<double>(timepoints);
        for (std::size_t t = 0; t < timepoints; ++t) mask[t] = att.alpha[t] > baseline;
    } else {
        for (std::size_t t = 0; t < timepoints; ++t) mask[t] = att.scores[t] > 0.0;
    }
    return mask;
}

std::vector<std::size_t> top_fraction_of(const std::vector<double>& weights, double fraction, bool largest) {
    if (fraction <= 0.0 || fraction > 1.0) {
        throw Error::parameter("top_fraction: fraction must lie in (0, 1]");
    }
    const std::size_t timepoints = weights.size();
    const std::size_t count = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(timepoints)));
    std::vector<std::size_t> order(timepoints);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return largest ? weights[a] > weights[b] : weights[a] < weights[b];
    });
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::size_t> top_fraction_timepoints(const TemporalAttention& att, double fraction) {
    return top_fraction_of(att.alpha, fraction, true);
}

}  // namespace decennt
