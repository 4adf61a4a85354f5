#pragma once

#include <vector>

#include "decennt/connectivity.hpp"
#include "decennt/rng.hpp"
#include "decennt/tape.hpp"

namespace decennt {

enum class AlphaMode { Softmax, ReluRaw };

// Global temporal attention: a two-layer MLP scores each per-timepoint
// graph against the summed global graph. Hidden width is
// max(1, round(gamma * n^2)).
struct GtaParams {
    TensorPtr w_hidden;  // [n^2 x m]
    TensorPtr w_score;   // [m x 1]
    BatchNormParams bn;  // over the m hidden features
    double gamma_ratio = 0.25;

    static std::size_t hidden_width(std::size_t components, double gamma_ratio);
    static GtaParams init(std::size_t components, double gamma_ratio, Rng& rng);
    std::size_t graph_size() const { return w_hidden->rows(); }
    std::size_t hidden() const { return w_hidden->cols(); }
    std::vector<TensorPtr> parameters() const;
};

struct TemporalAttention {
    std::vector<double> scores;  // raw MLP outputs s_t
    std::vector<double> alpha;   // normalized weights
    Matrix final_graph;          // n x n
    AlphaMode mode = AlphaMode::Softmax;
};

struct AggregateTaped {
    TensorPtr scores;       // [batch x T]
    TensorPtr alpha;        // [batch x T]
    TensorPtr final_graph;  // [batch x n^2]
};

// Aggregate a stack of flattened graphs ([batch*T x n^2], per-sample
// blocks of T rows) into per-sample final graphs. Batch normalization in
// training mode spans all batch*T instances.
AggregateTaped aggregate_taped(Tape& tape, GtaParams& p, const TensorPtr& graphs, std::size_t batch,
                               AlphaMode mode, bool training);

TemporalAttention aggregate(GtaParams& p, const DynamicGraph& graph, AlphaMode mode, bool training = false);

// Timepoints attended above baseline: alpha > 1/T in softmax mode,
// raw score > 0 in relu-raw mode.
std::vector<bool> attention_threshold(const TemporalAttention& att);

// Indices of the ceil(fraction*T) largest alpha, ties to the smaller
// index, returned in ascending index order.
std::vector<std::size_t> top_fraction_timepoints(const TemporalAttention& att, double fraction);
std::vector<std::size_t> top_fraction_of(const std::vector<double>& weights, double fraction, bool largest = true);

}  // namespace decennt
