#include "decennt/connectivity.hpp"

#include <cmath>

namespace decennt {

AttentionParams AttentionParams::init(std::size_t input_width, std::size_t attn_dim, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(input_width + attn_dim));
    auto make = [&] {
        std::vector<double> v(input_width * attn_dim);
        for (auto& x : v) x = rng.uniform(-bound, bound);
        return make_tensor({input_width, attn_dim}, std::move(v), true);
    };
    AttentionParams p;
    p.w_key = make();
    p.w_value = make();
    p.w_query = make();
    return p;
}

std::vector<TensorPtr> AttentionParams::parameters() const { return {w_key, w_value, w_query}; }

AttendTaped attend_taped(Tape& tape, const AttentionParams& p, const TensorPtr& h, std::size_t blocks,
                         bool want_updated, bool scale_scores) {
    if (h->rank() != 2 || h->cols() != p.input_width()) {
        throw Error::dimension("attend: embedding width does not match projection input width");
    }
    if (blocks == 0 || h->rows() % blocks != 0) {
        throw Error::dimension("attend: rows are not divisible into blocks");
    }
    auto keys = tape.matmul(h, p.w_key);
    auto values = tape.matmul(h, p.w_value);
    auto queries = tape.matmul(h, p.w_query);
    auto scores = tape.block_matmul_nt(queries, keys, blocks);
    if (scale_scores) {
        scores = tape.scale(scores, 1.0 / std::sqrt(static_cast<double>(p.attn_dim())));
    }
    AttendTaped out;
    out.weights = tape.softmax_rows(scores);
    if (want_updated) out.updated = tape.block_matmul_nn(out.weights, values, blocks);
    return out;
}

std::pair<Matrix, Matrix> attend(const AttentionParams& p, const Matrix& h, bool scale_scores) {
    if (h.rows == 0) throw Error::input("attend: no components");
    Tape tape(false);
    auto res = attend_taped(tape, p, from_matrix(h), 1, true, scale_scores);
    return {to_matrix(*res.weights), to_matrix(*res.updated)};
}

SequenceAttention attend_sequence(const AttentionParams& p, const Embeddings& emb, bool scale_scores) {
    if (emb.components == 0 || emb.timepoints == 0) throw Error::input("attend_sequence: empty embeddings");
    SequenceAttention out;
    out.graph.components = emb.components;
    out.graph.graphs.reserve(emb.timepoints);
    out.updated.reserve(emb.timepoints);
    for (std::size_t t = 0; t < emb.timepoints; ++t) {
        Matrix h_t(emb.components, emb.width);
        for (std::size_t i = 0; i < emb.components; ++i) {
            for (std::size_t k = 0; k < emb.width; ++k) h_t.at(i, k) = emb.at(i, t, k);
        }
        auto [weights, updated] = attend(p, h_t, scale_scores);
        out.graph.graphs.push_back(std::move(weights));
        out.updated.push_back(std::move(updated));
    }
    return out;
}

}  // namespace decennt
