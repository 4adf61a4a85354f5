#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "decennt/error.hpp"

namespace decennt {

// Plain value matrix used at module boundaries (samples, exported graphs).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != r * c) throw Error::dimension("Matrix: data size does not match rows*cols");
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }
};

// Dense 64-bit tensor with a gradient slot. Rank is 1 (vector) or 2
// (matrix); scalars are rank-1 tensors of size one. All differentiable
// computation in the library runs through these.
struct DiffTensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;  // row-major
    std::vector<double> grad;    // same length as values when requires_grad
    bool requires_grad = false;

    DiffTensor(std::vector<std::size_t> s, std::vector<double> v, bool rg)
        : shape(std::move(s)), values(std::move(v)), requires_grad(rg) {
        if (values.size() != element_count(shape)) {
            throw Error::dimension("DiffTensor: value count does not match shape");
        }
        if (requires_grad) grad.assign(values.size(), 0.0);
    }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t rank() const { return shape.size(); }
    std::size_t size() const { return values.size(); }
    std::size_t rows() const { return rank() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return rank() == 2 ? shape[1] : (shape.empty() ? 1 : shape[0]); }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    void zero_grad() {
        if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0);
    }
};

using TensorPtr = std::shared_ptr<DiffTensor>;

inline TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad = false) {
    return std::make_shared<DiffTensor>(std::move(shape), std::move(values), requires_grad);
}

inline TensorPtr make_zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    const std::size_t n = DiffTensor::element_count(shape);
    return make_tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

inline TensorPtr make_scalar(double v, bool requires_grad = false) {
    return make_tensor({1}, {v}, requires_grad);
}

inline TensorPtr from_matrix(const Matrix& m, bool requires_grad = false) {
    return make_tensor({m.rows, m.cols}, m.data, requires_grad);
}

inline Matrix to_matrix(const DiffTensor& t) {
    if (t.rank() != 2) throw Error::dimension("to_matrix: tensor is not rank 2");
    return Matrix(t.shape[0], t.shape[1], t.values);
}

}  // namespace decennt
