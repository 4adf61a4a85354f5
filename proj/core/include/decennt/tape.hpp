#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "decennt/tensor.hpp"

namespace decennt {

enum class Activation { Sigmoid, Tanh, Relu };
enum class Axis { Rows, Cols };

// Learnable affine + running statistics for batch normalization.
// scale/shift are ordinary leaf tensors; the running buffers are plain
// state updated only in training mode.
struct BatchNormParams {
    TensorPtr scale;  // gamma, rank-1 [features]
    TensorPtr shift;  // beta,  rank-1 [features]
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    static BatchNormParams init(std::size_t features);
    std::size_t features() const { return running_mean.size(); }
};

// Reverse-mode tape. Forward ops execute eagerly and, when the result
// requires grad, push a backward closure; backward() replays the
// closures in reverse and then clears the record. A second backward()
// without new forward work is rejected.
class Tape {
public:
    Tape() = default;
    // A tape constructed with grad_enabled=false runs forward-only: results
    // never require grad, no closures or gradient buffers are built.
    explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}

    // --- primitive forward ops -------------------------------------------
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    // Per-block products over tensors that stack `blocks` independent row
    // groups: out_s = a_s * b_s (nn) or a_s * b_s^T (nt).
    TensorPtr block_matmul_nn(const TensorPtr& a, const TensorPtr& b, std::size_t blocks);
    TensorPtr block_matmul_nt(const TensorPtr& a, const TensorPtr& b, std::size_t blocks);

    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr add_rowvec(const TensorPtr& x, const TensorPtr& row);  // row: rank-1 [cols]
    TensorPtr scale(const TensorPtr& x, double c);
    TensorPtr hadamard(const TensorPtr& a, const TensorPtr& b);
    TensorPtr apply_activation(const TensorPtr& x, Activation kind);
    TensorPtr softmax_rows(const TensorPtr& x);

    // Per-block column sums / weighted row combinations over stacks of
    // `blocks` groups. Both accumulate each output cell with sorted
    // summation, so the result is a function of the multiset of rows:
    // reordering rows within a block cannot change a single bit.
    TensorPtr block_sum_rows(const TensorPtr& x, std::size_t blocks);
    TensorPtr block_weighted_rows(const TensorPtr& weights, const TensorPtr& x, std::size_t blocks);

    TensorPtr concat(std::span<const TensorPtr> parts, std::size_t axis);
    // out row b*parts.size()+p = parts[p] row b; groups per-timepoint
    // tensors into contiguous per-sample blocks.
    TensorPtr interleave_rows(std::span<const TensorPtr> parts);
    TensorPtr repeat_rows(const TensorPtr& x, std::size_t times);
    TensorPtr reshape(const TensorPtr& x, std::vector<std::size_t> shape);
    TensorPtr flatten(const TensorPtr& x);
    TensorPtr sum_over(const TensorPtr& x, Axis axis);
    TensorPtr sum_all(const TensorPtr& x);

    TensorPtr batchnorm(const TensorPtr& x, BatchNormParams& bn, bool training);
    TensorPtr cross_entropy_logits(const TensorPtr& logits, std::span<const int> labels);
    TensorPtr l1_norm(std::span<const TensorPtr> params);

    // --- reverse pass -----------------------------------------------------
    void backward(const TensorPtr& loss);

    std::size_t recorded_ops() const { return nodes_.size(); }

private:
    TensorPtr make_result(std::vector<std::size_t> shape, bool requires_grad);
    void record(const TensorPtr& out, std::function<void()> fn);

    std::vector<std::function<void()>> nodes_;
    bool grad_enabled_ = true;
    bool spent_ = false;
};

}  // namespace decennt
