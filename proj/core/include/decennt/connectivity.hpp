#pragma once

#include <vector>

#include "decennt/encoder.hpp"
#include "decennt/rng.hpp"
#include "decennt/tape.hpp"

namespace decennt {

// Key/value/query projections, shared across timepoints and samples.
struct AttentionParams {
    TensorPtr w_key;    // [input_width x attn_dim]
    TensorPtr w_value;  // [input_width x attn_dim]
    TensorPtr w_query;  // [input_width x attn_dim]

    static AttentionParams init(std::size_t input_width, std::size_t attn_dim, Rng& rng);
    std::size_t input_width() const { return w_key->rows(); }
    std::size_t attn_dim() const { return w_key->cols(); }
    std::vector<TensorPtr> parameters() const;
};

// One directed graph per timepoint. Convention throughout the library
// and all exports: entry (i, j) is the attention of receiver i over
// sender j, so an edge j -> i lives at row i, column j.
struct DynamicGraph {
    std::size_t components = 0;
    std::vector<Matrix> graphs;

    std::size_t timepoints() const { return graphs.size(); }
};

struct AttendTaped {
    TensorPtr weights;  // [blocks*n x n], row-stochastic per row
    TensorPtr updated;  // [blocks*n x attn_dim]; null when not requested
};

// Self-attention over `blocks` independent groups of n component
// embeddings stacked row-wise. Scores are plain q.k products, no
// 1/sqrt(d) factor unless scale_scores is set.
AttendTaped attend_taped(Tape& tape, const AttentionParams& p, const TensorPtr& h, std::size_t blocks,
                         bool want_updated = true, bool scale_scores = false);

// Single-timepoint value-level attention: returns (W_t, updated embeddings).
std::pair<Matrix, Matrix> attend(const AttentionParams& p, const Matrix& h, bool scale_scores = false);

struct SequenceAttention {
    DynamicGraph graph;
    std::vector<Matrix> updated;  // per-timepoint n x attn_dim
};

SequenceAttention attend_sequence(const AttentionParams& p, const Embeddings& emb, bool scale_scores = false);

}  // namespace decennt
