#include "decennt/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>

namespace decennt {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

CMap cmap(const DiffTensor& t, std::size_t rows, std::size_t cols, std::size_t row_offset = 0) {
    return CMap(t.values.data() + row_offset * cols, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

CMap cmap_grad(const DiffTensor& t, std::size_t rows, std::size_t cols, std::size_t row_offset = 0) {
    return CMap(t.grad.data() + row_offset * cols, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Map gmap(DiffTensor& t, std::size_t rows, std::size_t cols, std::size_t row_offset = 0) {
    return Map(t.grad.data() + row_offset * cols, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Map vmap(DiffTensor& t, std::size_t rows, std::size_t cols, std::size_t row_offset = 0) {
    return Map(t.values.data() + row_offset * cols, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void require_rank2(const TensorPtr& t, const char* who) {
    if (t->rank() != 2) throw Error::dimension(std::string(who) + ": expected a rank-2 tensor");
}

// Sum after sorting ascending: the result depends only on the multiset of
// addends, never on their arrival order.
double sorted_sum(std::vector<double>& scratch) {
    std::sort(scratch.begin(), scratch.end());
    double s = 0.0;
    for (double v : scratch) s += v;
    return s;
}

}  // namespace

BatchNormParams BatchNormParams::init(std::size_t features) {
    BatchNormParams bn;
    bn.scale = make_tensor({features}, std::vector<double>(features, 1.0), true);
    bn.shift = make_tensor({features}, std::vector<double>(features, 0.0), true);
    bn.running_mean.assign(features, 0.0);
    bn.running_var.assign(features, 1.0);
    return bn;
}

TensorPtr Tape::make_result(std::vector<std::size_t> shape, bool requires_grad) {
    return make_zeros(std::move(shape), requires_grad && grad_enabled_);
}

void Tape::record(const TensorPtr& out, std::function<void()> fn) {
    if (out->requires_grad) {
        spent_ = false;
        nodes_.push_back(std::move(fn));
    }
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
    return block_matmul_nn(a, b, 1);
}

TensorPtr Tape::block_matmul_nn(const TensorPtr& a, const TensorPtr& b, std::size_t blocks) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (blocks == 0 || a->rows() % blocks != 0 || b->rows() % blocks != 0) {
        throw Error::dimension("matmul: row counts are not divisible into blocks");
    }
    const std::size_t ra = a->rows() / blocks;
    const std::size_t ca = a->cols();
    const std::size_t rb = b->rows() / blocks;
    const std::size_t cb = b->cols();
    if (ca != rb) throw Error::dimension("matmul: inner dimensions disagree");

    auto out = make_result({blocks * ra, cb}, a->requires_grad || b->requires_grad);
    for (std::size_t s = 0; s < blocks; ++s) {
        vmap(*out, ra, cb, s * ra).noalias() = cmap(*a, ra, ca, s * ra) * cmap(*b, ca, cb, s * ca);
    }
    record(out, [a, b, out, blocks, ra, ca, cb] {
        for (std::size_t s = 0; s < blocks; ++s) {
            if (a->requires_grad) {
                gmap(*a, ra, ca, s * ra).noalias() += cmap_grad(*out, ra, cb, s * ra) * cmap(*b, ca, cb, s * ca).transpose();
            }
            if (b->requires_grad) {
                gmap(*b, ca, cb, s * ca).noalias() += cmap(*a, ra, ca, s * ra).transpose() * cmap_grad(*out, ra, cb, s * ra);
            }
        }
    });
    return out;
}

TensorPtr Tape::block_matmul_nt(const TensorPtr& a, const TensorPtr& b, std::size_t blocks) {
    require_rank2(a, "matmul_nt");
    require_rank2(b, "matmul_nt");
    if (blocks == 0 || a->rows() % blocks != 0 || b->rows() % blocks != 0) {
        throw Error::dimension("matmul_nt: row counts are not divisible into blocks");
    }
    const std::size_t ra = a->rows() / blocks;
    const std::size_t rb = b->rows() / blocks;
    const std::size_t c = a->cols();
    if (c != b->cols()) throw Error::dimension("matmul_nt: column counts disagree");

    auto out = make_result({blocks * ra, rb}, a->requires_grad || b->requires_grad);
    for (std::size_t s = 0; s < blocks; ++s) {
        vmap(*out, ra, rb, s * ra).noalias() = cmap(*a, ra, c, s * ra) * cmap(*b, rb, c, s * rb).transpose();
    }
    record(out, [a, b, out, blocks, ra, rb, c] {
        for (std::size_t s = 0; s < blocks; ++s) {
            if (a->requires_grad) {
                gmap(*a, ra, c, s * ra).noalias() += cmap_grad(*out, ra, rb, s * ra) * cmap(*b, rb, c, s * rb);
            }
            if (b->requires_grad) {
                gmap(*b, rb, c, s * rb).noalias() += cmap_grad(*out, ra, rb, s * ra).transpose() * cmap(*a, ra, c, s * ra);
            }
        }
    });
    return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw Error::dimension("add: shapes differ");
    auto out = make_result(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = a->values[i] + b->values[i];
    record(out, [a, b, out] {
        if (a->requires_grad) {
            for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i];
        }
        if (b->requires_grad) {
            for (std::size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i];
        }
    });
    return out;
}

TensorPtr Tape::add_rowvec(const TensorPtr& x, const TensorPtr& row) {
    require_rank2(x, "add_rowvec");
    if (row->rank() != 1 || row->size() != x->cols()) {
        throw Error::dimension("add_rowvec: row vector length does not match columns");
    }
    const std::size_t r = x->rows(), c = x->cols();
    auto out = make_result(x->shape, x->requires_grad || row->requires_grad);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out->values[i * c + j] = x->values[i * c + j] + row->values[j];
    }
    record(out, [x, row, out, r, c] {
        if (x->requires_grad) {
            for (std::size_t i = 0; i < r * c; ++i) x->grad[i] += out->grad[i];
        }
        if (row->requires_grad) {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) row->grad[j] += out->grad[i * c + j];
            }
        }
    });
    return out;
}

TensorPtr Tape::scale(const TensorPtr& x, double cfactor) {
    auto out = make_result(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = cfactor * x->values[i];
    record(out, [x, out, cfactor] {
        for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += cfactor * out->grad[i];
    });
    return out;
}

TensorPtr Tape::hadamard(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw Error::dimension("hadamard: shapes differ");
    auto out = make_result(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = a->values[i] * b->values[i];
    record(out, [a, b, out] {
        if (a->requires_grad) {
            for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * b->values[i];
        }
        if (b->requires_grad) {
            for (std::size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i] * a->values[i];
        }
    });
    return out;
}

TensorPtr Tape::apply_activation(const TensorPtr& x, Activation kind) {
    auto out = make_result(x->shape, x->requires_grad);
    switch (kind) {
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = stable_sigmoid(x->values[i]);
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = std::tanh(x->values[i]);
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < out->size(); ++i) out->values[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
            break;
    }
    record(out, [x, out, kind] {
        switch (kind) {
            case Activation::Sigmoid:
                for (std::size_t i = 0; i < out->size(); ++i) {
                    const double y = out->values[i];
                    x->grad[i] += out->grad[i] * y * (1.0 - y);
                }
                break;
            case Activation::Tanh:
                for (std::size_t i = 0; i < out->size(); ++i) {
                    const double y = out->values[i];
                    x->grad[i] += out->grad[i] * (1.0 - y * y);
                }
                break;
            case Activation::Relu:
                for (std::size_t i = 0; i < out->size(); ++i) {
                    if (x->values[i] > 0.0) x->grad[i] += out->grad[i];
                }
                break;
        }
    });
    return out;
}

TensorPtr Tape::softmax_rows(const TensorPtr& x) {
    require_rank2(x, "softmax_rows");
    const std::size_t r = x->rows(), c = x->cols();
    auto out = make_result(x->shape, x->requires_grad);
    std::vector<double> scratch(c);
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = x->values.data() + i * c;
        double* yi = out->values.data() + i * c;
        double mx = xi[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
        for (std::size_t j = 0; j < c; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            scratch[j] = yi[j];
        }
        // order-canonical normalizer: permuting the row permutes the output
        const double z = sorted_sum(scratch);
        for (std::size_t j = 0; j < c; ++j) yi[j] /= z;
    }
    record(out, [x, out, r, c] {
        for (std::size_t i = 0; i < r; ++i) {
            const double* yi = out->values.data() + i * c;
            const double* gi = out->grad.data() + i * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += gi[j] * yi[j];
            for (std::size_t j = 0; j < c; ++j) x->grad[i * c + j] += yi[j] * (gi[j] - dot);
        }
    });
    return out;
}

TensorPtr Tape::block_sum_rows(const TensorPtr& x, std::size_t blocks) {
    require_rank2(x, "block_sum_rows");
    if (blocks == 0 || x->rows() % blocks != 0) {
        throw Error::dimension("block_sum_rows: rows are not divisible into blocks");
    }
    const std::size_t group = x->rows() / blocks;
    const std::size_t c = x->cols();
    auto out = make_result({blocks, c}, x->requires_grad);
    std::vector<double> scratch(group);
    for (std::size_t s = 0; s < blocks; ++s) {
        for (std::size_t j = 0; j < c; ++j) {
            for (std::size_t t = 0; t < group; ++t) scratch[t] = x->values[(s * group + t) * c + j];
            out->values[s * c + j] = sorted_sum(scratch);
        }
    }
    record(out, [x, out, blocks, group, c] {
        for (std::size_t s = 0; s < blocks; ++s) {
            for (std::size_t t = 0; t < group; ++t) {
                double* dst = x->grad.data() + (s * group + t) * c;
                const double* g = out->grad.data() + s * c;
                for (std::size_t j = 0; j < c; ++j) dst[j] += g[j];
            }
        }
    });
    return out;
}

TensorPtr Tape::block_weighted_rows(const TensorPtr& weights, const TensorPtr& x, std::size_t blocks) {
    require_rank2(weights, "block_weighted_rows");
    require_rank2(x, "block_weighted_rows");
    if (blocks == 0 || x->rows() % blocks != 0 || weights->rows() != blocks) {
        throw Error::dimension("block_weighted_rows: block structure mismatch");
    }
    const std::size_t group = x->rows() / blocks;
    if (weights->cols() != group) {
        throw Error::dimension("block_weighted_rows: weight count does not match rows per block");
    }
    const std::size_t c = x->cols();
    auto out = make_result({blocks, c}, weights->requires_grad || x->requires_grad);
    std::vector<double> scratch(group);
    for (std::size_t s = 0; s < blocks; ++s) {
        const double* w = weights->values.data() + s * group;
        for (std::size_t j = 0; j < c; ++j) {
            for (std::size_t t = 0; t < group; ++t) scratch[t] = w[t] * x->values[(s * group + t) * c + j];
            out->values[s * c + j] = sorted_sum(scratch);
        }
    }
    record(out, [weights, x, out, blocks, group, c] {
        for (std::size_t s = 0; s < blocks; ++s) {
            const double* g = out->grad.data() + s * c;
            for (std::size_t t = 0; t < group; ++t) {
                const double* xrow = x->values.data() + (s * group + t) * c;
                const double w = weights->values[s * group + t];
                if (weights->requires_grad) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < c; ++j) acc += g[j] * xrow[j];
                    weights->grad[s * group + t] += acc;
                }
                if (x->requires_grad) {
                    double* dst = x->grad.data() + (s * group + t) * c;
                    for (std::size_t j = 0; j < c; ++j) dst[j] += w * g[j];
                }
            }
        }
    });
    return out;
}

TensorPtr Tape::concat(std::span<const TensorPtr> parts, std::size_t axis) {
    if (parts.empty()) throw Error::dimension("concat: no operands");
    const std::size_t rank = parts.front()->rank();
    for (const auto& p : parts) {
        if (p->rank() != rank) throw Error::dimension("concat: mixed ranks");
    }
    if (axis >= rank) throw Error::dimension("concat: axis out of range");

    bool rg = false;
    for (const auto& p : parts) rg = rg || p->requires_grad;

    if (rank == 1) {
        std::size_t total = 0;
        for (const auto& p : parts) total += p->size();
        auto out = make_result({total}, rg);
        std::size_t off = 0;
        for (const auto& p : parts) {
            std::copy(p->values.begin(), p->values.end(), out->values.begin() + static_cast<std::ptrdiff_t>(off));
            off += p->size();
        }
        std::vector<TensorPtr> held(parts.begin(), parts.end());
        record(out, [held, out] {
            std::size_t o = 0;
            for (const auto& p : held) {
                if (p->requires_grad) {
                    for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[o + i];
                }
                o += p->size();
            }
        });
        return out;
    }

    if (axis == 0) {
        const std::size_t c = parts.front()->cols();
        std::size_t rtotal = 0;
        for (const auto& p : parts) {
            if (p->cols() != c) throw Error::dimension("concat: column counts differ");
            rtotal += p->rows();
        }
        auto out = make_result({rtotal, c}, rg);
        std::size_t off = 0;
        for (const auto& p : parts) {
            std::copy(p->values.begin(), p->values.end(), out->values.begin() + static_cast<std::ptrdiff_t>(off));
            off += p->size();
        }
        std::vector<TensorPtr> held(parts.begin(), parts.end());
        record(out, [held, out] {
            std::size_t o = 0;
            for (const auto& p : held) {
                if (p->requires_grad) {
                    for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[o + i];
                }
                o += p->size();
            }
        });
        return out;
    }

    // axis == 1: column concatenation
    const std::size_t r = parts.front()->rows();
    std::size_t ctotal = 0;
    for (const auto& p : parts) {
        if (p->rows() != r) throw Error::dimension("concat: row counts differ");
        ctotal += p->cols();
    }
    auto out = make_result({r, ctotal}, rg);
    std::size_t coff = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p->cols();
        for (std::size_t i = 0; i < r; ++i) {
            std::copy(p->values.begin() + static_cast<std::ptrdiff_t>(i * pc),
                      p->values.begin() + static_cast<std::ptrdiff_t>((i + 1) * pc),
                      out->values.begin() + static_cast<std::ptrdiff_t>(i * ctotal + coff));
        }
        coff += pc;
    }
    std::vector<TensorPtr> held(parts.begin(), parts.end());
    record(out, [held, out, r, ctotal] {
        std::size_t co = 0;
        for (const auto& p : held) {
            const std::size_t pc = p->cols();
            if (p->requires_grad) {
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < pc; ++j) p->grad[i * pc + j] += out->grad[i * ctotal + co + j];
                }
            }
            co += pc;
        }
    });
    return out;
}

TensorPtr Tape::interleave_rows(std::span<const TensorPtr> parts) {
    if (parts.empty()) throw Error::dimension("interleave_rows: no operands");
    const std::size_t b = parts.front()->rows();
    const std::size_t c = parts.front()->cols();
    bool rg = false;
    for (const auto& p : parts) {
        require_rank2(p, "interleave_rows");
        if (p->rows() != b || p->cols() != c) throw Error::dimension("interleave_rows: shapes differ");
        rg = rg || p->requires_grad;
    }
    const std::size_t np = parts.size();
    auto out = make_result({b * np, c}, rg);
    for (std::size_t p = 0; p < np; ++p) {
        for (std::size_t i = 0; i < b; ++i) {
            std::copy(parts[p]->values.begin() + static_cast<std::ptrdiff_t>(i * c),
                      parts[p]->values.begin() + static_cast<std::ptrdiff_t>((i + 1) * c),
                      out->values.begin() + static_cast<std::ptrdiff_t>((i * np + p) * c));
        }
    }
    std::vector<TensorPtr> held(parts.begin(), parts.end());
    record(out, [held, out, b, c, np] {
        for (std::size_t p = 0; p < np; ++p) {
            if (!held[p]->requires_grad) continue;
            for (std::size_t i = 0; i < b; ++i) {
                const double* g = out->grad.data() + (i * np + p) * c;
                double* d = held[p]->grad.data() + i * c;
                for (std::size_t j = 0; j < c; ++j) d[j] += g[j];
            }
        }
    });
    return out;
}

TensorPtr Tape::repeat_rows(const TensorPtr& x, std::size_t times) {
    require_rank2(x, "repeat_rows");
    if (times == 0) throw Error::dimension("repeat_rows: times must be positive");
    const std::size_t r = x->rows(), c = x->cols();
    auto out = make_result({r * times, c}, x->requires_grad);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < times; ++k) {
            std::copy(x->values.begin() + static_cast<std::ptrdiff_t>(i * c),
                      x->values.begin() + static_cast<std::ptrdiff_t>((i + 1) * c),
                      out->values.begin() + static_cast<std::ptrdiff_t>((i * times + k) * c));
        }
    }
    record(out, [x, out, r, c, times] {
        for (std::size_t i = 0; i < r; ++i) {
            double* d = x->grad.data() + i * c;
            for (std::size_t k = 0; k < times; ++k) {
                const double* g = out->grad.data() + (i * times + k) * c;
                for (std::size_t j = 0; j < c; ++j) d[j] += g[j];
            }
        }
    });
    return out;
}

TensorPtr Tape::reshape(const TensorPtr& x, std::vector<std::size_t> shape) {
    if (DiffTensor::element_count(shape) != x->size()) {
        throw Error::dimension("reshape: element count changes");
    }
    auto out = make_tensor(std::move(shape), x->values, x->requires_grad && grad_enabled_);
    record(out, [x, out] {
        for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr Tape::flatten(const TensorPtr& x) { return reshape(x, {x->size()}); }

TensorPtr Tape::sum_over(const TensorPtr& x, Axis axis) {
    require_rank2(x, "sum_over");
    const std::size_t r = x->rows(), c = x->cols();
    if (axis == Axis::Rows) {
        auto out = make_result({c}, x->requires_grad);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) out->values[j] += x->values[i * c + j];
        }
        record(out, [x, out, r, c] {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) x->grad[i * c + j] += out->grad[j];
            }
        });
        return out;
    }
    auto out = make_result({r}, x->requires_grad);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out->values[i] += x->values[i * c + j];
    }
    record(out, [x, out, r, c] {
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) x->grad[i * c + j] += out->grad[i];
        }
    });
    return out;
}

TensorPtr Tape::sum_all(const TensorPtr& x) {
    auto out = make_result({1}, x->requires_grad);
    double s = 0.0;
    for (double v : x->values) s += v;
    out->values[0] = s;
    record(out, [x, out] {
        const double g = out->grad[0];
        for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += g;
    });
    return out;
}

TensorPtr Tape::batchnorm(const TensorPtr& x, BatchNormParams& bn, bool training) {
    require_rank2(x, "batchnorm");
    const std::size_t r = x->rows(), f = x->cols();
    if (f != bn.features()) throw Error::dimension("batchnorm: feature count mismatch");

    const TensorPtr scale = bn.scale;
    const TensorPtr shift = bn.shift;
    auto out = make_result(x->shape, x->requires_grad || scale->requires_grad || shift->requires_grad);

    if (training) {
        if (r < 2) throw Error::config("batchnorm: training mode needs at least 2 instances");
        auto mean = std::make_shared<std::vector<double>>(f, 0.0);
        auto inv_std = std::make_shared<std::vector<double>>(f, 0.0);
        auto xhat = std::make_shared<std::vector<double>>(r * f, 0.0);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < f; ++j) (*mean)[j] += x->values[i * f + j];
        }
        for (std::size_t j = 0; j < f; ++j) (*mean)[j] /= static_cast<double>(r);
        std::vector<double> var(f, 0.0);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < f; ++j) {
                const double d = x->values[i * f + j] - (*mean)[j];
                var[j] += d * d;
            }
        }
        for (std::size_t j = 0; j < f; ++j) {
            var[j] /= static_cast<double>(r);
            (*inv_std)[j] = 1.0 / std::sqrt(var[j] + bn.eps);
        }
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < f; ++j) {
                const double xn = (x->values[i * f + j] - (*mean)[j]) * (*inv_std)[j];
                (*xhat)[i * f + j] = xn;
                out->values[i * f + j] = scale->values[j] * xn + shift->values[j];
            }
        }
        // running stats track the unbiased variance
        const double unbias = static_cast<double>(r) / static_cast<double>(r - 1);
        for (std::size_t j = 0; j < f; ++j) {
            bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * (*mean)[j];
            bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * var[j] * unbias;
        }
        record(out, [x, scale, shift, out, inv_std, xhat, r, f] {
            for (std::size_t j = 0; j < f; ++j) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t i = 0; i < r; ++i) {
                    const double dy = out->grad[i * f + j];
                    sum_dy += dy;
                    sum_dy_xhat += dy * (*xhat)[i * f + j];
                }
                if (shift->requires_grad) shift->grad[j] += sum_dy;
                if (scale->requires_grad) scale->grad[j] += sum_dy_xhat;
                if (x->requires_grad) {
                    const double g = scale->values[j];
                    const double istd = (*inv_std)[j];
                    const double rn = static_cast<double>(r);
                    for (std::size_t i = 0; i < r; ++i) {
                        const double dy = out->grad[i * f + j];
                        x->grad[i * f + j] += g * istd * (dy - sum_dy / rn - (*xhat)[i * f + j] * sum_dy_xhat / rn);
                    }
                }
            }
        });
        return out;
    }

    // inference: normalize with running statistics
    auto inv_std = std::make_shared<std::vector<double>>(f, 0.0);
    auto xhat = std::make_shared<std::vector<double>>(r * f, 0.0);
    for (std::size_t j = 0; j < f; ++j) (*inv_std)[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            const double xn = (x->values[i * f + j] - bn.running_mean[j]) * (*inv_std)[j];
            (*xhat)[i * f + j] = xn;
            out->values[i * f + j] = scale->values[j] * xn + shift->values[j];
        }
    }
    record(out, [x, scale, shift, out, inv_std, xhat, r, f] {
        for (std::size_t j = 0; j < f; ++j) {
            for (std::size_t i = 0; i < r; ++i) {
                const double dy = out->grad[i * f + j];
                if (shift->requires_grad) shift->grad[j] += dy;
                if (scale->requires_grad) scale->grad[j] += dy * (*xhat)[i * f + j];
                if (x->requires_grad) x->grad[i * f + j] += dy * scale->values[j] * (*inv_std)[j];
            }
        }
    });
    return out;
}

TensorPtr Tape::cross_entropy_logits(const TensorPtr& logits, std::span<const int> labels) {
    require_rank2(logits, "cross_entropy_logits");
    const std::size_t b = logits->rows(), cls = logits->cols();
    if (labels.size() != b) throw Error::input("cross_entropy_logits: one label per row required");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= cls) {
            throw Error::input("cross_entropy_logits: label out of range");
        }
    }
    auto probs = std::make_shared<std::vector<double>>(b * cls, 0.0);
    auto out = make_result({1}, logits->requires_grad);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double* li = logits->values.data() + i * cls;
        double mx = li[0];
        for (std::size_t j = 1; j < cls; ++j) mx = std::max(mx, li[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cls; ++j) z += std::exp(li[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < cls; ++j) (*probs)[i * cls + j] = std::exp(li[j] - lse);
        total += lse - li[static_cast<std::size_t>(labels[i])];
    }
    out->values[0] = total / static_cast<double>(b);
    std::vector<int> held(labels.begin(), labels.end());
    record(out, [logits, out, probs, held, b, cls] {
        const double g = out->grad[0] / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < cls; ++j) {
                const double delta = (static_cast<std::size_t>(held[i]) == j) ? 1.0 : 0.0;
                logits->grad[i * cls + j] += g * ((*probs)[i * cls + j] - delta);
            }
        }
    });
    return out;
}

TensorPtr Tape::l1_norm(std::span<const TensorPtr> params) {
    bool rg = false;
    double total = 0.0;
    for (const auto& p : params) {
        rg = rg || p->requires_grad;
        for (double v : p->values) total += std::abs(v);
    }
    auto out = make_result({1}, rg);
    out->values[0] = total;
    std::vector<TensorPtr> held(params.begin(), params.end());
    record(out, [held, out] {
        const double g = out->grad[0];
        for (const auto& p : held) {
            if (!p->requires_grad) continue;
            for (std::size_t i = 0; i < p->size(); ++i) {
                const double v = p->values[i];
                // subgradient at 0 is 0
                if (v > 0.0) {
                    p->grad[i] += g;
                } else if (v < 0.0) {
                    p->grad[i] -= g;
                }
            }
        }
    });
    return out;
}

void Tape::backward(const TensorPtr& loss) {
    if (loss->size() != 1) throw Error::usage("backward: loss must be scalar");
    if (!loss->requires_grad) throw Error::usage("backward: loss was not produced by a taped forward pass");
    if (spent_) throw Error::usage("backward: tape already consumed; re-run the forward pass");
    loss->grad[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
    spent_ = true;
}

}  // namespace decennt
