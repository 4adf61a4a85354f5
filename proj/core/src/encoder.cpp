#include "decennt/encoder.hpp"

#include <cmath>

namespace decennt {

namespace {

TensorPtr uniform_init(std::vector<std::size_t> shape, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    const std::size_t n = DiffTensor::element_count(shape);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return make_tensor(std::move(shape), std::move(v), true);
}

}  // namespace

LstmParams LstmParams::init(std::size_t hidden, Rng& rng) {
    LstmParams p;
    p.w_xi = uniform_init({1, hidden}, rng, 1, hidden);
    p.w_xf = uniform_init({1, hidden}, rng, 1, hidden);
    p.w_xg = uniform_init({1, hidden}, rng, 1, hidden);
    p.w_xo = uniform_init({1, hidden}, rng, 1, hidden);
    p.w_hi = uniform_init({hidden, hidden}, rng, hidden, hidden);
    p.w_hf = uniform_init({hidden, hidden}, rng, hidden, hidden);
    p.w_hg = uniform_init({hidden, hidden}, rng, hidden, hidden);
    p.w_ho = uniform_init({hidden, hidden}, rng, hidden, hidden);
    for (TensorPtr* b : {&p.b_xi, &p.b_xf, &p.b_xg, &p.b_xo, &p.b_hi, &p.b_hf, &p.b_hg, &p.b_ho}) {
        *b = make_tensor({hidden}, std::vector<double>(hidden, 0.0), true);
    }
    return p;
}

std::vector<TensorPtr> LstmParams::parameters() const {
    return {w_xi, w_xf, w_xg, w_xo, w_hi, w_hf, w_hg, w_ho,
            b_xi, b_xf, b_xg, b_xo, b_hi, b_hf, b_hg, b_ho};
}

BiLstmEncoder BiLstmEncoder::init(std::size_t hidden, Rng& rng) {
    BiLstmEncoder enc;
    enc.forward_cell = LstmParams::init(hidden, rng);
    enc.backward_cell = LstmParams::init(hidden, rng);
    return enc;
}

std::vector<TensorPtr> BiLstmEncoder::parameters() const {
    auto out = forward_cell.parameters();
    auto back = backward_cell.parameters();
    out.insert(out.end(), back.begin(), back.end());
    return out;
}

LstmState lstm_step(Tape& tape, const LstmParams& p, const TensorPtr& x_col, const LstmState& prev) {
    if (x_col->rank() != 2 || x_col->cols() != 1) {
        throw Error::dimension("lstm_step: input must be a column of scalars");
    }
    if (prev.h->rows() != x_col->rows() || prev.h->cols() != p.hidden()) {
        throw Error::dimension("lstm_step: state shape does not match input rows and hidden size");
    }

    auto gate = [&](const TensorPtr& wx, const TensorPtr& bx, const TensorPtr& wh, const TensorPtr& bh,
                    Activation act) {
        auto pre = tape.add(tape.matmul(x_col, wx), tape.matmul(prev.h, wh));
        pre = tape.add_rowvec(pre, bx);
        pre = tape.add_rowvec(pre, bh);
        return tape.apply_activation(pre, act);
    };

    auto i_gate = gate(p.w_xi, p.b_xi, p.w_hi, p.b_hi, Activation::Sigmoid);
    auto f_gate = gate(p.w_xf, p.b_xf, p.w_hf, p.b_hf, Activation::Sigmoid);
    auto g_gate = gate(p.w_xg, p.b_xg, p.w_hg, p.b_hg, Activation::Tanh);
    auto o_gate = gate(p.w_xo, p.b_xo, p.w_ho, p.b_ho, Activation::Sigmoid);

    auto c_next = tape.add(tape.hadamard(f_gate, prev.c), tape.hadamard(i_gate, g_gate));
    auto h_next = tape.hadamard(o_gate, tape.apply_activation(c_next, Activation::Tanh));
    return {h_next, c_next};
}

std::vector<TensorPtr> bilstm_encode_taped(Tape& tape, const BiLstmEncoder& enc,
                                           const std::vector<TensorPtr>& x_cols) {
    if (x_cols.empty()) throw Error::input("bilstm_encode: empty input");
    const std::size_t rows = x_cols.front()->rows();
    const std::size_t hidden = enc.hidden();
    const std::size_t timepoints = x_cols.size();

    LstmState fwd{make_zeros({rows, hidden}), make_zeros({rows, hidden})};
    std::vector<TensorPtr> h_fwd(timepoints);
    for (std::size_t t = 0; t < timepoints; ++t) {
        fwd = lstm_step(tape, enc.forward_cell, x_cols[t], fwd);
        h_fwd[t] = fwd.h;
    }

    LstmState bwd{make_zeros({rows, hidden}), make_zeros({rows, hidden})};
    std::vector<TensorPtr> h_bwd(timepoints);
    for (std::size_t t = timepoints; t-- > 0;) {
        bwd = lstm_step(tape, enc.backward_cell, x_cols[t], bwd);
        h_bwd[t] = bwd.h;
    }

    std::vector<TensorPtr> embeddings(timepoints);
    for (std::size_t t = 0; t < timepoints; ++t) {
        const TensorPtr parts[] = {h_fwd[t], h_bwd[t]};
        embeddings[t] = tape.concat(parts, 1);
    }
    return embeddings;
}

std::pair<std::vector<double>, std::vector<double>> lstm_cell_step(const LstmParams& p, double x,
                                                                   const std::vector<double>& h_prev,
                                                                   const std::vector<double>& c_prev) {
    const std::size_t hidden = p.hidden();
    if (h_prev.size() != hidden || c_prev.size() != hidden) {
        throw Error::dimension("lstm_cell_step: state length does not match hidden size");
    }
    Tape tape(false);
    LstmState prev{make_tensor({1, hidden}, h_prev), make_tensor({1, hidden}, c_prev)};
    auto next = lstm_step(tape, p, make_tensor({1, 1}, {x}), prev);
    return {next.h->values, next.c->values};
}

Embeddings bilstm_encode(const BiLstmEncoder& enc, const Matrix& series) {
    if (series.rows == 0 || series.cols == 0) throw Error::input("bilstm_encode: empty series");
    const std::size_t n = series.rows, timepoints = series.cols;

    Tape tape(false);
    std::vector<TensorPtr> x_cols(timepoints);
    for (std::size_t t = 0; t < timepoints; ++t) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = series.at(i, t);
        x_cols[t] = make_tensor({n, 1}, std::move(col));
    }
    auto taped = bilstm_encode_taped(tape, enc, x_cols);

    Embeddings out;
    out.components = n;
    out.timepoints = timepoints;
    out.width = 2 * enc.hidden();
    out.data.resize(n * timepoints * out.width);
    for (std::size_t t = 0; t < timepoints; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < out.width; ++k) {
                out.data[(i * timepoints + t) * out.width + k] = taped[t]->at(i, k);
            }
        }
    }
    return out;
}

}  // namespace decennt
