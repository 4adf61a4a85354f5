#pragma once

// Central finite-difference oracle used across the gradient tests. The
// oracle re-runs an arbitrary forward functional, so it stays independent
// of the tape's backward path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "decennt/tensor.hpp"

namespace testsupport {

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t coordinates = 0;
};

// Compares the gradients already accumulated in `leaves` against central
// differences of `loss_fn`, which must recompute the loss from the
// leaves' current values.
inline GradCheck finite_difference_check(const std::function<double()>& loss_fn,
                                         const std::vector<decennt::TensorPtr>& leaves, double h = 1e-5) {
    GradCheck res;
    for (const auto& leaf : leaves) {
        for (std::size_t i = 0; i < leaf->size(); ++i) {
            const double saved = leaf->values[i];
            leaf->values[i] = saved + h;
            const double up = loss_fn();
            leaf->values[i] = saved - h;
            const double down = loss_fn();
            leaf->values[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            res.max_rel_err = std::max(res.max_rel_err, rel_err(leaf->grad[i], fd));
            ++res.coordinates;
        }
    }
    return res;
}

}  // namespace testsupport
