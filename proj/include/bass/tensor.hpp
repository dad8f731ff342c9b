#pragma once

// Reverse-mode autodiff over dense row-major tensors. Every trainable
// computation in the project is expressed through the ops in this header.
// Ops record backward closures on a thread-local tape; backward(loss)
// replays them in reverse creation order and clears the tape.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bass {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e < 0) throw std::invalid_argument("tensor: negative extent in shape");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

template <typename Real>
struct TensorData {
    Shape shape;
    std::vector<Real> values;
    std::vector<Real> grad;  // same size as values when requires_grad
    bool requires_grad = false;
};

template <typename Real>
class Tensor {
  public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false) {
        if (shape_numel(shape) != values.size()) {
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                        std::to_string(values.size()) + " values");
        }
        d_ = std::make_shared<TensorData<Real>>();
        d_->shape = std::move(shape);
        d_->values = std::move(values);
        d_->requires_grad = requires_grad;
        if (requires_grad) d_->grad.assign(d_->values.size(), Real(0));
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<Real> v(shape_numel(shape), Real(0));
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor full(Shape shape, Real fill, bool requires_grad = false) {
        std::vector<Real> v(shape_numel(shape), fill);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor scalar(Real v, bool requires_grad = false) {
        return Tensor(Shape{1}, std::vector<Real>{v}, requires_grad);
    }

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    int dim(int axis) const { return d_->shape.at(static_cast<std::size_t>(axis)); }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    std::size_t numel() const { return d_->values.size(); }
    bool requires_grad() const { return d_->requires_grad; }

    std::vector<Real>& values() { return d_->values; }
    const std::vector<Real>& values() const { return d_->values; }
    std::vector<Real>& grad() {
        if (!d_->requires_grad) throw std::logic_error("tensor: grad on a non-grad tensor");
        return d_->grad;
    }
    const std::vector<Real>& grad() const {
        if (!d_->requires_grad) throw std::logic_error("tensor: grad on a non-grad tensor");
        return d_->grad;
    }

    Real item() const {
        if (numel() != 1) throw std::logic_error("tensor: item() on non-scalar " + shape_str(d_->shape));
        return d_->values[0];
    }

    Real at(std::size_t i) const { return d_->values[i]; }

    void zero_grad() {
        if (d_->requires_grad) std::fill(d_->grad.begin(), d_->grad.end(), Real(0));
    }

    // Constant copy with no gradient linkage to the graph that produced this.
    Tensor detach() const { return Tensor(d_->shape, d_->values, false); }

    std::shared_ptr<TensorData<Real>> data() const { return d_; }

    bool same_storage(const Tensor& other) const { return d_ == other.d_; }

  private:
    std::shared_ptr<TensorData<Real>> d_;
};

// ---------------------------------------------------------------------------
// Tape

namespace autograd {

template <typename Real>
struct Tape {
    std::vector<std::function<void()>> nodes;

    static Tape& instance() {
        thread_local Tape tape;
        return tape;
    }
};

template <typename Real>
struct EnabledFlag {
    static bool& get() {
        thread_local bool enabled = true;
        return enabled;
    }
};

template <typename Real>
inline bool enabled() {
    return EnabledFlag<Real>::get();
}

template <typename Real>
inline void record(std::function<void()> backward_fn) {
    Tape<Real>::instance().nodes.push_back(std::move(backward_fn));
}

// Disables tape recording for the lifetime of the guard (inference paths).
template <typename Real>
class NoGradGuard {
  public:
    NoGradGuard() : prev_(EnabledFlag<Real>::get()) { EnabledFlag<Real>::get() = false; }
    ~NoGradGuard() { EnabledFlag<Real>::get() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

template <typename Real>
inline void clear_tape() {
    Tape<Real>::instance().nodes.clear();
}

}  // namespace autograd

template <typename Real>
inline bool grad_needed(const Tensor<Real>& t) {
    return autograd::enabled<Real>() && t.requires_grad();
}

// Runs backprop from a scalar loss through every recorded node, then clears
// the tape. Gradients accumulate (+=) into requires_grad tensors.
template <typename Real>
inline void backward(Tensor<Real>& loss) {
    if (loss.numel() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(loss.shape()));
    }
    auto& tape = autograd::Tape<Real>::instance();
    if (tape.nodes.empty()) {
        throw std::logic_error("backward: tape is empty (forward pass not recorded or already consumed)");
    }
    if (!loss.requires_grad()) {
        throw std::logic_error("backward: loss does not require grad");
    }
    loss.grad()[0] += Real(1);
    for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) (*it)();
    tape.nodes.clear();
}

// ---------------------------------------------------------------------------
// Elementwise ops

namespace detail {

template <typename Real>
inline void check_same_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
}

}  // namespace detail

template <typename Real>
inline Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    const bool b_scalar = b.numel() == 1 && a.numel() != 1;
    if (!b_scalar) detail::check_same_shape(a, b, "add");
    Tensor<Real> out = Tensor<Real>::zeros(a.shape(), grad_needed(a) || grad_needed(b));
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.at(i) + (b_scalar ? b.at(0) : b.at(i));
    if (out.requires_grad()) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        autograd::record<Real>([ad, bd, od, b_scalar, n]() {
            if (ad->requires_grad)
                for (std::size_t i = 0; i < n; ++i) ad->grad[i] += od->grad[i];
            if (bd->requires_grad) {
                if (b_scalar) {
                    for (std::size_t i = 0; i < n; ++i) bd->grad[0] += od->grad[i];
                } else {
                    for (std::size_t i = 0; i < n; ++i) bd->grad[i] += od->grad[i];
                }
            }
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    const bool b_scalar = b.numel() == 1 && a.numel() != 1;
    if (!b_scalar) detail::check_same_shape(a, b, "sub");
    Tensor<Real> out = Tensor<Real>::zeros(a.shape(), grad_needed(a) || grad_needed(b));
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.at(i) - (b_scalar ? b.at(0) : b.at(i));
    if (out.requires_grad()) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        autograd::record<Real>([ad, bd, od, b_scalar, n]() {
            if (ad->requires_grad)
                for (std::size_t i = 0; i < n; ++i) ad->grad[i] += od->grad[i];
            if (bd->requires_grad) {
                if (b_scalar) {
                    for (std::size_t i = 0; i < n; ++i) bd->grad[0] -= od->grad[i];
                } else {
                    for (std::size_t i = 0; i < n; ++i) bd->grad[i] -= od->grad[i];
                }
            }
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    const bool b_scalar = b.numel() == 1 && a.numel() != 1;
    if (!b_scalar) detail::check_same_shape(a, b, "mul");
    Tensor<Real> out = Tensor<Real>::zeros(a.shape(), grad_needed(a) || grad_needed(b));
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.at(i) * (b_scalar ? b.at(0) : b.at(i));
    if (out.requires_grad()) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        autograd::record<Real>([ad, bd, od, b_scalar, n]() {
            if (ad->requires_grad) {
                for (std::size_t i = 0; i < n; ++i)
                    ad->grad[i] += od->grad[i] * (b_scalar ? bd->values[0] : bd->values[i]);
            }
            if (bd->requires_grad) {
                if (b_scalar) {
                    for (std::size_t i = 0; i < n; ++i) bd->grad[0] += od->grad[i] * ad->values[i];
                } else {
                    for (std::size_t i = 0; i < n; ++i) bd->grad[i] += od->grad[i] * ad->values[i];
                }
            }
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> scale(const Tensor<Real>& a, Real s) {
    Tensor<Real> out = Tensor<Real>::zeros(a.shape(), grad_needed(a));
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.at(i) * s;
    if (out.requires_grad()) {
        auto ad = a.data();
        auto od = out.data();
        autograd::record<Real>([ad, od, s, n]() {
            for (std::size_t i = 0; i < n; ++i) ad->grad[i] += od->grad[i] * s;
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> relu(const Tensor<Real>& a) {
    Tensor<Real> out = Tensor<Real>::zeros(a.shape(), grad_needed(a));
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.at(i) > Real(0) ? a.at(i) : Real(0);
    if (out.requires_grad()) {
        auto ad = a.data();
        auto od = out.data();
        autograd::record<Real>([ad, od, n]() {
            for (std::size_t i = 0; i < n; ++i)
                if (ad->values[i] > Real(0)) ad->grad[i] += od->grad[i];
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> exp(const Tensor<Real>& a) {
    Tensor<Real> out = Tensor<Real>::zeros(a.shape(), grad_needed(a));
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::exp(a.at(i));
    if (out.requires_grad()) {
        auto ad = a.data();
        auto od = out.data();
        autograd::record<Real>([ad, od, n]() {
            for (std::size_t i = 0; i < n; ++i) ad->grad[i] += od->grad[i] * od->values[i];
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> log(const Tensor<Real>& a) {
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(a.at(i) > Real(0))) {
            throw std::domain_error("log: non-positive input at flat index " + std::to_string(i));
        }
    }
    Tensor<Real> out = Tensor<Real>::zeros(a.shape(), grad_needed(a));
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::log(a.at(i));
    if (out.requires_grad()) {
        auto ad = a.data();
        auto od = out.data();
        autograd::record<Real>([ad, od, n]() {
            for (std::size_t i = 0; i < n; ++i) ad->grad[i] += od->grad[i] / ad->values[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix ops (2-D)

template <typename Real>
inline Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw std::invalid_argument("matmul: expects 2-D tensors, got " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
    Tensor<Real> out = Tensor<Real>::zeros({m, n}, grad_needed(a) || grad_needed(b));
    const Real* av = a.values().data();
    const Real* bv = b.values().data();
    Real* ov = out.values().data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const Real aip = av[i * k + p];
            const Real* brow = bv + p * n;
            Real* orow = ov + i * n;
            for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    if (out.requires_grad()) {
        auto ad = a.data(), bd = b.data(), od = out.data();
        autograd::record<Real>([ad, bd, od, m, k, n]() {
            // grad_a = grad_out . b^T ; grad_b = a^T . grad_out
            if (ad->requires_grad) {
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        Real acc = 0;
                        const Real* gorow = od->grad.data() + i * n;
                        const Real* brow = bd->values.data() + p * n;
                        for (int j = 0; j < n; ++j) acc += gorow[j] * brow[j];
                        ad->grad[i * k + p] += acc;
                    }
            }
            if (bd->requires_grad) {
                for (int i = 0; i < m; ++i) {
                    const Real* arow = ad->values.data() + i * k;
                    const Real* gorow = od->grad.data() + i * n;
                    for (int p = 0; p < k; ++p) {
                        const Real aip = arow[p];
                        Real* gbrow = bd->grad.data() + p * n;
                        for (int j = 0; j < n; ++j) gbrow[j] += aip * gorow[j];
                    }
                }
            }
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> transpose(const Tensor<Real>& a) {
    if (a.rank() != 2) throw std::invalid_argument("transpose: expects a 2-D tensor");
    const int m = a.dim(0), n = a.dim(1);
    Tensor<Real> out = Tensor<Real>::zeros({n, m}, grad_needed(a));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.values()[j * m + i] = a.at(static_cast<std::size_t>(i) * n + j);
    if (out.requires_grad()) {
        auto ad = a.data();
        auto od = out.data();
        autograd::record<Real>([ad, od, m, n]() {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) ad->grad[i * n + j] += od->grad[j * m + i];
        });
    }
    return out;
}

// x[n,d] + b[d], b broadcast over rows.
template <typename Real>
inline Tensor<Real> add_rowwise(const Tensor<Real>& x, const Tensor<Real>& b) {
    if (x.rank() != 2 || b.rank() != 1 || b.dim(0) != x.dim(1)) {
        throw std::invalid_argument("add_rowwise: incompatible shapes " + shape_str(x.shape()) + " and " +
                                    shape_str(b.shape()));
    }
    const int n = x.dim(0), d = x.dim(1);
    Tensor<Real> out = Tensor<Real>::zeros(x.shape(), grad_needed(x) || grad_needed(b));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.values()[i * d + j] = x.at(static_cast<std::size_t>(i) * d + j) + b.at(j);
    if (out.requires_grad()) {
        auto xd = x.data(), bd = b.data(), od = out.data();
        autograd::record<Real>([xd, bd, od, n, d]() {
            if (xd->requires_grad)
                for (std::size_t i = 0; i < static_cast<std::size_t>(n) * d; ++i) xd->grad[i] += od->grad[i];
            if (bd->requires_grad)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j) bd->grad[j] += od->grad[i * d + j];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Axis reductions / softmax

namespace detail {

struct AxisView {
    std::size_t outer, len, inner;
};

inline AxisView axis_view(const Shape& shape, int axis) {
    if (axis < 0 || axis >= static_cast<int>(shape.size())) {
        throw std::invalid_argument("invalid axis " + std::to_string(axis) + " for shape " + shape_str(shape));
    }
    AxisView v{1, static_cast<std::size_t>(shape[static_cast<std::size_t>(axis)]), 1};
    for (int i = 0; i < axis; ++i) v.outer *= static_cast<std::size_t>(shape[static_cast<std::size_t>(i)]);
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i)
        v.inner *= static_cast<std::size_t>(shape[i]);
    return v;
}

}  // namespace detail

template <typename Real>
inline Tensor<Real> softmax(const Tensor<Real>& x, int axis) {
    const auto v = detail::axis_view(x.shape(), axis);
    Tensor<Real> out = Tensor<Real>::zeros(x.shape(), grad_needed(x));
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t c = 0; c < v.inner; ++c) {
            const std::size_t base = o * v.len * v.inner + c;
            Real mx = x.at(base);
            for (std::size_t j = 1; j < v.len; ++j) mx = std::max(mx, x.at(base + j * v.inner));
            Real denom = 0;
            for (std::size_t j = 0; j < v.len; ++j) {
                const Real e = std::exp(x.at(base + j * v.inner) - mx);
                out.values()[base + j * v.inner] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < v.len; ++j) out.values()[base + j * v.inner] /= denom;
        }
    if (out.requires_grad()) {
        auto xd = x.data();
        auto od = out.data();
        autograd::record<Real>([xd, od, v]() {
            // dx = y * (dy - sum_j dy_j y_j) along the axis
            for (std::size_t o = 0; o < v.outer; ++o)
                for (std::size_t c = 0; c < v.inner; ++c) {
                    const std::size_t base = o * v.len * v.inner + c;
                    Real dot = 0;
                    for (std::size_t j = 0; j < v.len; ++j) {
                        const std::size_t k = base + j * v.inner;
                        dot += od->grad[k] * od->values[k];
                    }
                    for (std::size_t j = 0; j < v.len; ++j) {
                        const std::size_t k = base + j * v.inner;
                        xd->grad[k] += od->values[k] * (od->grad[k] - dot);
                    }
                }
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> log_softmax(const Tensor<Real>& x, int axis) {
    const auto v = detail::axis_view(x.shape(), axis);
    Tensor<Real> out = Tensor<Real>::zeros(x.shape(), grad_needed(x));
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t c = 0; c < v.inner; ++c) {
            const std::size_t base = o * v.len * v.inner + c;
            Real mx = x.at(base);
            for (std::size_t j = 1; j < v.len; ++j) mx = std::max(mx, x.at(base + j * v.inner));
            Real denom = 0;
            for (std::size_t j = 0; j < v.len; ++j) denom += std::exp(x.at(base + j * v.inner) - mx);
            const Real lse = mx + std::log(denom);
            for (std::size_t j = 0; j < v.len; ++j)
                out.values()[base + j * v.inner] = x.at(base + j * v.inner) - lse;
        }
    if (out.requires_grad()) {
        auto xd = x.data();
        auto od = out.data();
        autograd::record<Real>([xd, od, v]() {
            // dx = dy - softmax(x) * sum_j dy_j
            for (std::size_t o = 0; o < v.outer; ++o)
                for (std::size_t c = 0; c < v.inner; ++c) {
                    const std::size_t base = o * v.len * v.inner + c;
                    Real gsum = 0;
                    for (std::size_t j = 0; j < v.len; ++j) gsum += od->grad[base + j * v.inner];
                    for (std::size_t j = 0; j < v.len; ++j) {
                        const std::size_t k = base + j * v.inner;
                        xd->grad[k] += od->grad[k] - std::exp(od->values[k]) * gsum;
                    }
                }
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> sum_all(const Tensor<Real>& x) {
    Tensor<Real> out = Tensor<Real>::zeros({1}, grad_needed(x));
    Real acc = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) acc += x.at(i);
    out.values()[0] = acc;
    if (out.requires_grad()) {
        auto xd = x.data();
        auto od = out.data();
        const std::size_t n = x.numel();
        autograd::record<Real>([xd, od, n]() {
            for (std::size_t i = 0; i < n; ++i) xd->grad[i] += od->grad[0];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops

template <typename Real>
inline Tensor<Real> reshape(const Tensor<Real>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                                    " changes element count");
    }
    Tensor<Real> out(new_shape, x.values(), grad_needed(x));
    if (out.requires_grad()) {
        auto xd = x.data();
        auto od = out.data();
        const std::size_t n = x.numel();
        autograd::record<Real>([xd, od, n]() {
            for (std::size_t i = 0; i < n; ++i) xd->grad[i] += od->grad[i];
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& ref = parts[0].shape();
    if (axis < 0 || axis >= static_cast<int>(ref.size()))
        throw std::invalid_argument("concat: invalid axis " + std::to_string(axis));
    Shape out_shape = ref;
    int total = 0;
    bool needs = false;
    for (const auto& p : parts) {
        if (p.rank() != static_cast<int>(ref.size()))
            throw std::invalid_argument("concat: rank mismatch across inputs");
        for (int a = 0; a < p.rank(); ++a)
            if (a != axis && p.dim(a) != ref[static_cast<std::size_t>(a)])
                throw std::invalid_argument("concat: non-concat extent mismatch, " + shape_str(p.shape()) +
                                            " vs " + shape_str(ref));
        total += p.dim(axis);
        needs = needs || grad_needed(p);
    }
    out_shape[static_cast<std::size_t>(axis)] = total;
    Tensor<Real> out = Tensor<Real>::zeros(out_shape, needs);
    const auto ov = detail::axis_view(out_shape, axis);
    std::size_t offset = 0;  // running offset along the concat axis
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const auto pv = detail::axis_view(p.shape(), axis);
        for (std::size_t o = 0; o < pv.outer; ++o)
            for (std::size_t j = 0; j < pv.len; ++j)
                for (std::size_t c = 0; c < pv.inner; ++c)
                    out.values()[(o * ov.len + offset + j) * ov.inner + c] =
                        p.at((o * pv.len + j) * pv.inner + c);
        offset += pv.len;
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<TensorData<Real>>> pds;
        for (const auto& p : parts) pds.push_back(p.data());
        auto od = out.data();
        autograd::record<Real>([pds, offsets, od, ov, axis]() {
            for (std::size_t pi = 0; pi < pds.size(); ++pi) {
                auto& pd = pds[pi];
                if (!pd->requires_grad) continue;
                const auto pv = detail::axis_view(pd->shape, axis);
                for (std::size_t o = 0; o < pv.outer; ++o)
                    for (std::size_t j = 0; j < pv.len; ++j)
                        for (std::size_t c = 0; c < pv.inner; ++c)
                            pd->grad[(o * pv.len + j) * pv.inner + c] +=
                                od->grad[(o * ov.len + offsets[pi] + j) * ov.inner + c];
            }
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> slice(const Tensor<Real>& x, int axis, int start, int end) {
    if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("slice: invalid axis");
    if (start < 0 || end > x.dim(axis) || start >= end) {
        throw std::invalid_argument("slice: bounds [" + std::to_string(start) + "," + std::to_string(end) +
                                    ") outside extent " + std::to_string(x.dim(axis)));
    }
    Shape out_shape = x.shape();
    out_shape[static_cast<std::size_t>(axis)] = end - start;
    Tensor<Real> out = Tensor<Real>::zeros(out_shape, grad_needed(x));
    const auto xv = detail::axis_view(x.shape(), axis);
    const auto ov = detail::axis_view(out_shape, axis);
    for (std::size_t o = 0; o < ov.outer; ++o)
        for (std::size_t j = 0; j < ov.len; ++j)
            for (std::size_t c = 0; c < ov.inner; ++c)
                out.values()[(o * ov.len + j) * ov.inner + c] =
                    x.at((o * xv.len + static_cast<std::size_t>(start) + j) * xv.inner + c);
    if (out.requires_grad()) {
        auto xd = x.data();
        auto od = out.data();
        autograd::record<Real>([xd, od, xv, ov, start]() {
            for (std::size_t o = 0; o < ov.outer; ++o)
                for (std::size_t j = 0; j < ov.len; ++j)
                    for (std::size_t c = 0; c < ov.inner; ++c)
                        xd->grad[(o * xv.len + static_cast<std::size_t>(start) + j) * xv.inner + c] +=
                            od->grad[(o * ov.len + j) * ov.inner + c];
        });
    }
    return out;
}

// Rows of `table` selected by integer ids; backward scatter-adds.
template <typename Real>
inline Tensor<Real> embedding_lookup(const Tensor<Real>& table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw std::invalid_argument("embedding_lookup: table must be 2-D");
    const int v = table.dim(0), d = table.dim(1);
    for (int id : ids)
        if (id < 0 || id >= v)
            throw std::out_of_range("embedding_lookup: id " + std::to_string(id) + " outside vocabulary of " +
                                    std::to_string(v));
    const int n = static_cast<int>(ids.size());
    if (n == 0) throw std::invalid_argument("embedding_lookup: empty id list");
    Tensor<Real> out = Tensor<Real>::zeros({n, d}, grad_needed(table));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out.values()[i * d + j] = table.at(static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d + j);
    if (out.requires_grad()) {
        auto td = table.data();
        auto od = out.data();
        autograd::record<Real>([td, od, ids, n, d]() {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j)
                    td->grad[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d + j] +=
                        od->grad[i * d + j];
        });
    }
    return out;
}

// Sliding windows over the time axis of x[N,C]: output row t is the
// concatenation of rows t*stride .. t*stride+kernel-1. Used by the
// convolutional subsampler (im2col, conv = windows . weight).
template <typename Real>
inline Tensor<Real> gather_time_windows(const Tensor<Real>& x, int kernel, int stride) {
    if (x.rank() != 2) throw std::invalid_argument("gather_time_windows: expects 2-D input");
    if (kernel < 1 || stride < 1) throw std::invalid_argument("gather_time_windows: kernel/stride must be >= 1");
    const int n = x.dim(0), c = x.dim(1);
    if (n < kernel)
        throw std::invalid_argument("gather_time_windows: input length " + std::to_string(n) +
                                    " shorter than kernel " + std::to_string(kernel));
    const int l = (n - kernel) / stride + 1;
    Tensor<Real> out = Tensor<Real>::zeros({l, kernel * c}, grad_needed(x));
    for (int t = 0; t < l; ++t)
        for (int k = 0; k < kernel; ++k)
            for (int j = 0; j < c; ++j)
                out.values()[(t * kernel + k) * c + j] =
                    x.at(static_cast<std::size_t>(t * stride + k) * c + j);
    if (out.requires_grad()) {
        auto xd = x.data();
        auto od = out.data();
        autograd::record<Real>([xd, od, l, kernel, stride, c]() {
            for (int t = 0; t < l; ++t)
                for (int k = 0; k < kernel; ++k)
                    for (int j = 0; j < c; ++j)
                        xd->grad[static_cast<std::size_t>(t * stride + k) * c + j] +=
                            od->grad[(t * kernel + k) * c + j];
        });
    }
    return out;
}

template <typename Real>
inline bool all_finite(const Tensor<Real>& t) {
    for (std::size_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(t.at(i))) return false;
    return true;
}

}  // namespace bass
