#pragma once

#include <utility>
#include <vector>

#include "decennt/rng.hpp"
#include "decennt/tape.hpp"

namespace decennt {

// One LSTM cell, scalar input per timestep. Input-to-gate weights are
// stored as [1 x hidden] rows so the batched step is a plain product of
// the input column against them; hidden-to-gate weights are
// [hidden x hidden] and right-multiply the state row block.
struct LstmParams {
    TensorPtr w_xi, w_xf, w_xg, w_xo;  // [1 x hidden]
    TensorPtr w_hi, w_hf, w_hg, w_ho;  // [hidden x hidden]
    TensorPtr b_xi, b_xf, b_xg, b_xo;  // [hidden]
    TensorPtr b_hi, b_hf, b_hg, b_ho;  // [hidden]

    static LstmParams init(std::size_t hidden, Rng& rng);
    std::size_t hidden() const { return w_hi->rows(); }
    std::vector<TensorPtr> parameters() const;
};

// Shared-weight bidirectional encoder: the same two cells run over every
// component's scalar series, one left-to-right and one right-to-left.
struct BiLstmEncoder {
    LstmParams forward_cell;
    LstmParams backward_cell;

    static BiLstmEncoder init(std::size_t hidden, Rng& rng);
    std::size_t hidden() const { return forward_cell.hidden(); }
    std::vector<TensorPtr> parameters() const;
};

// Value-level per-component embeddings, components x timepoints x width.
struct Embeddings {
    std::size_t components = 0;
    std::size_t timepoints = 0;
    std::size_t width = 0;
    std::vector<double> data;

    double at(std::size_t i, std::size_t t, std::size_t k) const {
        return data[(i * timepoints + t) * width + k];
    }
};

struct LstmState {
    TensorPtr h;  // [rows x hidden]
    TensorPtr c;  // [rows x hidden]
};

// One batched cell update over `rows` independent scalar streams.
LstmState lstm_step(Tape& tape, const LstmParams& p, const TensorPtr& x_col, const LstmState& prev);

// Taped bidirectional encoding. x_cols holds T column tensors [rows x 1];
// returns T embeddings [rows x 2*hidden], forward half first.
std::vector<TensorPtr> bilstm_encode_taped(Tape& tape, const BiLstmEncoder& enc,
                                           const std::vector<TensorPtr>& x_cols);

// Single-stream cell update on plain vectors.
std::pair<std::vector<double>, std::vector<double>> lstm_cell_step(const LstmParams& p, double x,
                                                                   const std::vector<double>& h_prev,
                                                                   const std::vector<double>& c_prev);

// Encode one multivariate series (components x timepoints).
Embeddings bilstm_encode(const BiLstmEncoder& enc, const Matrix& series);

}  // namespace decennt
