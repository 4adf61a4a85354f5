#include "decennt/model.hpp"

#include <cmath>
#include <unordered_set>

namespace decennt {

ClassifierParams ClassifierParams::init(std::size_t graph_size, std::size_t hidden, Rng& rng) {
    auto uniform = [&](std::size_t r, std::size_t c) {
        const double bound = std::sqrt(6.0 / static_cast<double>(r + c));
        std::vector<double> v(r * c);
        for (auto& x : v) x = rng.uniform(-bound, bound);
        return make_tensor({r, c}, std::move(v), true);
    };
    ClassifierParams p;
    p.w1 = uniform(graph_size, hidden);
    p.b1 = make_tensor({hidden}, std::vector<double>(hidden, 0.0), true);
    p.w2 = uniform(hidden, 2);
    p.b2 = make_tensor({2}, std::vector<double>(2, 0.0), true);
    return p;
}

std::vector<TensorPtr> ClassifierParams::parameters() const { return {w1, b1, w2, b2}; }

std::vector<TensorPtr> ModelParams::all() const {
    std::vector<TensorPtr> out = encoder.parameters();
    for (const auto& t : attention.parameters()) out.push_back(t);
    for (const auto& t : gta.parameters()) out.push_back(t);
    for (const auto& t : classifier.parameters()) out.push_back(t);
    return out;
}

DecenntModel DecenntModel::init(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.components == 0 || cfg.timepoints == 0) {
        throw Error::config("model: components and timepoints must be positive");
    }
    DecenntModel m;
    m.cfg_ = cfg;
    Rng rng(derive_seed(seed, 0x4D4F44454CULL));  // "MODEL"
    m.params_.encoder = BiLstmEncoder::init(cfg.lstm_hidden, rng);
    m.params_.attention = AttentionParams::init(2 * cfg.lstm_hidden, cfg.attn_dim, rng);
    m.params_.gta = GtaParams::init(cfg.components, cfg.gamma_ratio, rng);
    m.params_.classifier = ClassifierParams::init(cfg.components * cfg.components, cfg.classifier_hidden, rng);
    return m;
}

DecenntModel DecenntModel::from_parts(const ModelConfig& cfg, ModelParams params) {
    DecenntModel m;
    m.cfg_ = cfg;
    m.params_ = std::move(params);
    return m;
}

BatchTapedResult DecenntModel::forward_batch_taped(Tape& tape, std::span<const Sample* const> batch,
                                                   bool training, bool compute_updated) {
    if (batch.empty()) throw Error::input("forward: empty batch");
    const std::size_t n = cfg_.components;
    const std::size_t timepoints = cfg_.timepoints;
    const std::size_t b = batch.size();
    for (const Sample* s : batch) {
        if (s->series.rows != n || s->series.cols != timepoints) {
            throw Error::dimension("forward: sample shape does not match the configured model");
        }
    }

    // stacked input columns: row s*n+i is component i of sample s
    std::vector<TensorPtr> x_cols(timepoints);
    for (std::size_t t = 0; t < timepoints; ++t) {
        std::vector<double> col(b * n);
        for (std::size_t s = 0; s < b; ++s) {
            for (std::size_t i = 0; i < n; ++i) col[s * n + i] = batch[s]->series.at(i, t);
        }
        x_cols[t] = make_tensor({b * n, 1}, std::move(col));
    }

    auto embeddings = bilstm_encode_taped(tape, params_.encoder, x_cols);

    std::vector<TensorPtr> flat_graphs(timepoints);
    for (std::size_t t = 0; t < timepoints; ++t) {
        auto att = attend_taped(tape, params_.attention, embeddings[t], b, compute_updated, cfg_.scale_scores);
        flat_graphs[t] = tape.reshape(att.weights, {b, n * n});
    }
    auto graphs = tape.interleave_rows(flat_graphs);  // [b*T x n^2], per-sample blocks

    auto agg = aggregate_taped(tape, params_.gta, graphs, b, cfg_.alpha_mode, training);

    auto hidden = tape.add_rowvec(tape.matmul(agg.final_graph, params_.classifier.w1), params_.classifier.b1);
    hidden = tape.apply_activation(hidden, Activation::Relu);
    auto logits = tape.add_rowvec(tape.matmul(hidden, params_.classifier.w2), params_.classifier.b2);

    BatchTapedResult out;
    out.logits = logits;
    out.graphs = graphs;
    out.scores = agg.scores;
    out.alpha = agg.alpha;
    out.final_graph = agg.final_graph;
    return out;
}

ForwardResult DecenntModel::forward(const Sample& sample, bool compute_updated) {
    Tape tape(false);
    const Sample* one[] = {&sample};
    auto res = forward_batch_taped(tape, one, false, compute_updated);

    const std::size_t n = cfg_.components;
    const std::size_t timepoints = cfg_.timepoints;
    ForwardResult out;
    out.logits = {res.logits->values[0], res.logits->values[1]};
    out.graph.components = n;
    out.graph.graphs.reserve(timepoints);
    for (std::size_t t = 0; t < timepoints; ++t) {
        Matrix w(n, n);
        std::copy(res.graphs->values.begin() + static_cast<std::ptrdiff_t>(t * n * n),
                  res.graphs->values.begin() + static_cast<std::ptrdiff_t>((t + 1) * n * n), w.data.begin());
        out.graph.graphs.push_back(std::move(w));
    }
    out.attention.mode = cfg_.alpha_mode;
    out.attention.scores = res.scores->values;
    out.attention.alpha = res.alpha->values;
    out.attention.final_graph = Matrix(n, n, res.final_graph->values);
    return out;
}

double DecenntModel::positive_score(const std::array<double, 2>& logits) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    return e1 / (e0 + e1);
}

std::vector<std::vector<double>> DecenntModel::snapshot() const {
    std::vector<std::vector<double>> snap;
    for (const auto& p : params_.all()) snap.push_back(p->values);
    snap.push_back(params_.gta.bn.running_mean);
    snap.push_back(params_.gta.bn.running_var);
    return snap;
}

void DecenntModel::restore(const std::vector<std::vector<double>>& snap) {
    auto all = params_.all();
    if (snap.size() != all.size() + 2) throw Error::usage("restore: snapshot does not match parameter set");
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (snap[i].size() != all[i]->size()) throw Error::usage("restore: parameter size changed");
        all[i]->values = snap[i];
    }
    params_.gta.bn.running_mean = snap[all.size()];
    params_.gta.bn.running_var = snap[all.size() + 1];
}

TensorPtr model_loss(Tape& tape, const TensorPtr& logits, std::span<const int> labels,
                     std::span<const TensorPtr> params, double lambda) {
    if (labels.empty()) throw Error::input("loss: empty batch");
    auto ce = tape.cross_entropy_logits(logits, labels);
    if (lambda == 0.0) return ce;
    return tape.add(ce, tape.scale(tape.l1_norm(params), lambda));
}

AdamOptimizer::AdamOptimizer(std::vector<TensorPtr> params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    std::unordered_set<const DiffTensor*> seen;
    for (auto& p : params) {
        if (!p->requires_grad) throw Error::usage("optimizer: parameter does not require gradients");
        if (!seen.insert(p.get()).second) throw Error::usage("optimizer: parameter registered twice");
        slots_.push_back({p, std::vector<double>(p->size(), 0.0), std::vector<double>(p->size(), 0.0)});
    }
}

void AdamOptimizer::arm() { armed_ = true; }

void AdamOptimizer::zero_grad() {
    for (auto& s : slots_) s.param->zero_grad();
    armed_ = false;
}

void AdamOptimizer::step(double lr) {
    if (!armed_) throw Error::usage("optimizer: step called before backward populated gradients");
    ++steps_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (auto& s : slots_) {
        for (std::size_t i = 0; i < s.param->size(); ++i) {
            const double g = s.param->grad[i];
            s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g;
            s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g * g;
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            s.param->values[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
    zero_grad();
}

}  // namespace decennt
