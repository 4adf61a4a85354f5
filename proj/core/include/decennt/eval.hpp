#pragma once

#include <span>
#include <string>
#include <vector>

#include "decennt/metrics.hpp"
#include "decennt/model.hpp"

namespace decennt {

struct DirectedEdge {
    std::size_t source = 0;  // sender (column)
    std::size_t target = 0;  // receiver (row)
    double weight = 0.0;
};

// Mean final graph over a cohort (and over independently trained models)
// plus its strongest off-diagonal directed edges.
struct EncSummary {
    Matrix mean_graph;
    std::vector<DirectedEdge> top_edges;  // descending by weight
};

// ceil(percent/100 * (n^2 - n)) ranked off-diagonal cells.
std::size_t top_edge_count(std::size_t components, double percent);

EncSummary mean_enc(std::span<DecenntModel> models, std::span<const Sample* const> cohort,
                    double top_percent);

// AUC of the edge weights against a 0/1 support matrix, off-diagonal
// cells only.
double edge_ranking_auc(const Matrix& weights, const Matrix& support);

enum class AblationSide { Top, Bottom };

// Recompute W^f from the selected fraction of timepoints (softmax-mode
// alphas renormalized over the selection, relu-raw used as-is), then
// train a logistic probe on the train split and score the test split.
double ablation_topk(DecenntModel& model, std::span<const Sample* const> train,
                     std::span<const Sample* const> test, double fraction, AblationSide side);

// Restricted final graph for one sample, the primitive behind
// ablation_topk and the explain command.
Matrix restricted_final_graph(const ForwardResult& fwd, const std::vector<std::size_t>& keep,
                              AlphaMode mode);

// --- report rendering ----------------------------------------------------

std::string metrics_json(const MetricsReport& m);
std::string cross_val_json(const CrossValResult& cv, const std::string& task, std::uint64_t config_hash,
                           std::uint64_t seed);
std::string history_jsonl(const std::vector<EpochStats>& history, std::uint64_t config_hash,
                          std::uint64_t seed);

}  // namespace decennt
