#include "decennt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "decennt/error.hpp"

namespace decennt {

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error::input("auc_roc: scores and labels differ in length");
    std::size_t positives = 0, negatives = 0;
    for (int y : labels) {
        if (y == 1) {
            ++positives;
        } else if (y == 0) {
            ++negatives;
        } else {
            throw Error::input("auc_roc: labels must be 0/1");
        }
    }
    if (positives == 0 || negatives == 0) {
        throw Error::metric("auc_roc: both classes must be present");
    }

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == 1) rank_sum_pos += rank[k];
    }
    const double p = static_cast<double>(positives);
    const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(negatives));
}

MetricsReport classification_report(std::span<const double> scores, std::span<const int> labels) {
    MetricsReport report;
    report.auc = auc_roc(scores, labels);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] > 0.5;
        const bool actual = labels[i] == 1;
        if (predicted && actual) {
            ++report.counts.tp;
        } else if (predicted && !actual) {
            ++report.counts.fp;
        } else if (!predicted && !actual) {
            ++report.counts.tn;
        } else {
            ++report.counts.fn;
        }
    }
    report.accuracy = report.counts.accuracy();
    report.precision = report.counts.precision();
    report.recall = report.counts.sensitivity();
    report.specificity = report.counts.specificity();
    return report;
}

ConfusionCounts localization_stats(const std::vector<bool>& attended, const std::vector<std::uint8_t>& truth) {
    if (attended.size() != truth.size()) throw Error::input("localization_stats: mask lengths differ");
    ConfusionCounts c;
    for (std::size_t t = 0; t < attended.size(); ++t) {
        const bool a = attended[t];
        const bool y = truth[t] != 0;
        if (a && y) {
            ++c.tp;
        } else if (a && !y) {
            ++c.fp;
        } else if (!a && !y) {
            ++c.tn;
        } else {
            ++c.fn;
        }
    }
    return c;
}

Matrix pcc_fnc(std::span<const Sample> cohort) {
    if (cohort.empty()) throw Error::input("pcc_fnc: empty cohort");
    const std::size_t n = cohort.front().series.rows;
    const std::size_t timepoints = cohort.front().series.cols;
    Matrix mean_r(n, n, 0.0);

    std::vector<double> mu(n), sd(n);
    for (const Sample& s : cohort) {
        if (s.series.rows != n || s.series.cols != timepoints) {
            throw Error::input("pcc_fnc: cohort samples have mixed shapes");
        }
        for (std::size_t i = 0; i < n; ++i) {
            double m = 0.0;
            for (std::size_t t = 0; t < timepoints; ++t) m += s.series.at(i, t);
            m /= static_cast<double>(timepoints);
            double v = 0.0;
            for (std::size_t t = 0; t < timepoints; ++t) {
                const double d = s.series.at(i, t) - m;
                v += d * d;
            }
            if (v <= 0.0) {
                throw Error::correlation("pcc_fnc: component " + std::to_string(i) + " of sample " + s.id +
                                         " is constant");
            }
            mu[i] = m;
            sd[i] = std::sqrt(v);
        }
        for (std::size_t i = 0; i < n; ++i) {
            mean_r.at(i, i) += 1.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                double cov = 0.0;
                for (std::size_t t = 0; t < timepoints; ++t) {
                    cov += (s.series.at(i, t) - mu[i]) * (s.series.at(j, t) - mu[j]);
                }
                const double r = cov / (sd[i] * sd[j]);
                mean_r.at(i, j) += r;
                mean_r.at(j, i) += r;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(cohort.size());
    for (auto& v : mean_r.data) v = (v * inv + 1.0) * 0.5;  // [-1,1] -> [0,1]
    for (std::size_t i = 0; i < n; ++i) mean_r.at(i, i) = 1.0;
    return mean_r;
}

double LogisticProbe::score(std::span<const double> features) const {
    double z = bias;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double x = (features[i] - feature_mean[i]) * feature_scale[i];
        z += weights[i] * x;
    }
    return 1.0 / (1.0 + std::exp(-z));
}

LogisticProbe fit_logistic_probe(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                                 double l2, std::size_t steps, double lr) {
    if (features.empty() || features.size() != labels.size()) {
        throw Error::input("logistic probe: features/labels mismatch");
    }
    const std::size_t n = features.size();
    const std::size_t d = features.front().size();

    LogisticProbe probe;
    probe.weights.assign(d, 0.0);
    probe.feature_mean.assign(d, 0.0);
    probe.feature_scale.assign(d, 1.0);

    for (const auto& f : features) {
        for (std::size_t j = 0; j < d; ++j) probe.feature_mean[j] += f[j];
    }
    for (std::size_t j = 0; j < d; ++j) probe.feature_mean[j] /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (const auto& f : features) {
        for (std::size_t j = 0; j < d; ++j) {
            const double x = f[j] - probe.feature_mean[j];
            var[j] += x * x;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        var[j] /= static_cast<double>(n);
        probe.feature_scale[j] = var[j] > 1e-18 ? 1.0 / std::sqrt(var[j]) : 0.0;
    }

    std::vector<double> z(n);
    std::vector<double> grad_w(d);
    for (std::size_t step = 0; step < steps; ++step) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = probe.bias;
            const auto& f = features[i];
            for (std::size_t j = 0; j < d; ++j) {
                acc += probe.weights[j] * (f[j] - probe.feature_mean[j]) * probe.feature_scale[j];
            }
            const double prob = 1.0 / (1.0 + std::exp(-acc));
            z[i] = prob - static_cast<double>(labels[i]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto& f = features[i];
            const double e = z[i];
            for (std::size_t j = 0; j < d; ++j) {
                grad_w[j] += e * (f[j] - probe.feature_mean[j]) * probe.feature_scale[j];
            }
            grad_b += e;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) {
            probe.weights[j] -= lr * (grad_w[j] * inv_n + l2 * probe.weights[j]);
        }
        probe.bias -= lr * grad_b * inv_n;
    }
    return probe;
}

// --- model-dependent analyses --------------------------------------------

std::size_t top_edge_count(std::size_t components, double percent) {
    const std::size_t off_diag = components * components - components;
    return static_cast<std::size_t>(std::ceil(percent / 100.0 * static_cast<double>(off_diag)));
}

EncSummary mean_enc(std::span<DecenntModel> models, std::span<const Sample* const> cohort, double top_percent) {
    if (cohort.empty()) throw Error::input("mean_enc: empty cohort");
    if (models.empty()) throw Error::input("mean_enc: no models");
    const std::size_t n = models.front().config().components;

    EncSummary out;
    out.mean_graph = Matrix(n, n, 0.0);
    for (auto& model : models) {
        for (const Sample* s : cohort) {
            auto fwd = model.forward(*s);
            for (std::size_t i = 0; i < n * n; ++i) out.mean_graph.data[i] += fwd.attention.final_graph.data[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(models.size() * cohort.size());
    for (auto& v : out.mean_graph.data) v *= inv;

    const std::size_t count = top_edge_count(n, top_percent);
    std::vector<DirectedEdge> edges;
    edges.reserve(n * n - n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            edges.push_back({j, i, out.mean_graph.at(i, j)});  // column j sends to row i
        }
    }
    std::stable_sort(edges.begin(), edges.end(), [](const DirectedEdge& a, const DirectedEdge& b) {
        return a.weight > b.weight;
    });
    edges.resize(std::min(count, edges.size()));
    out.top_edges = std::move(edges);
    return out;
}

double edge_ranking_auc(const Matrix& weights, const Matrix& support) {
    if (weights.rows != support.rows || weights.cols != support.cols || weights.rows != weights.cols) {
        throw Error::input("edge_ranking_auc: matrices must be square and same size");
    }
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < weights.rows; ++i) {
        for (std::size_t j = 0; j < weights.cols; ++j) {
            if (i == j) continue;
            scores.push_back(weights.at(i, j));
            labels.push_back(support.at(i, j) != 0.0 ? 1 : 0);
        }
    }
    return auc_roc(scores, labels);
}

Matrix restricted_final_graph(const ForwardResult& fwd, const std::vector<std::size_t>& keep, AlphaMode mode) {
    if (keep.empty()) throw Error::parameter("restricted_final_graph: selection is empty");
    const std::size_t n = fwd.attention.final_graph.rows;
    Matrix out(n, n, 0.0);
    double norm = 0.0;
    if (mode == AlphaMode::Softmax) {
        for (std::size_t t : keep) norm += fwd.attention.alpha[t];
        if (norm <= 0.0) norm = 1.0;
    } else {
        norm = 1.0;  // relu-raw weights are used unrenormalized
    }
    for (std::size_t t : keep) {
        const double w = fwd.attention.alpha[t] / norm;
        const Matrix& g = fwd.graph.graphs[t];
        for (std::size_t i = 0; i < n * n; ++i) out.data[i] += w * g.data[i];
    }
    return out;
}

double ablation_topk(DecenntModel& model, std::span<const Sample* const> train,
                     std::span<const Sample* const> test, double fraction, AblationSide side) {
    if (train.empty() || test.empty()) throw Error::input("ablation_topk: empty split");
    if (fraction <= 0.0 || fraction > 1.0) throw Error::parameter("ablation_topk: fraction must lie in (0,1]");

    const std::size_t timepoints = model.config().timepoints;
    const std::size_t count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(timepoints)));
    if (count == 0) throw Error::parameter("ablation_topk: fraction selects zero timepoints");

    auto features_of = [&](std::span<const Sample* const> split) {
        std::vector<std::vector<double>> feats;
        std::vector<int> labels;
        feats.reserve(split.size());
        for (const Sample* s : split) {
            auto fwd = model.forward(*s);
            auto keep = top_fraction_of(fwd.attention.alpha, fraction, side == AblationSide::Top);
            auto graph = restricted_final_graph(fwd, keep, model.config().alpha_mode);
            feats.push_back(std::move(graph.data));
            labels.push_back(s->label);
        }
        return std::pair{std::move(feats), std::move(labels)};
    };

    auto [train_x, train_y] = features_of(train);
    auto probe = fit_logistic_probe(train_x, train_y);

    auto [test_x, test_y] = features_of(test);
    std::vector<double> scores;
    scores.reserve(test_x.size());
    for (const auto& f : test_x) scores.push_back(probe.score(f));
    return auc_roc(scores, test_y);
}

}  // namespace decennt
