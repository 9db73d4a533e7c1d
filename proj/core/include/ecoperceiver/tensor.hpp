#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "ecoperceiver/errors.hpp"
#include "ecoperceiver/parallel.hpp"

namespace ecp {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

// Boolean mask with tensor shape semantics. Masks are plain data: they never
// carry gradients and never sit on the tape.
struct BoolTensor {
    Shape shape;
    std::vector<uint8_t> v;

    BoolTensor() = default;
    BoolTensor(Shape s, uint8_t fill) : shape(std::move(s)), v(static_cast<size_t>(shape_numel(shape)), fill) {}

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    uint8_t operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }
};

// Repeats each row of a (rows, n) mask `times` times: row r of the output is
// row r/times of the input. Used to expand a per-(b,t) mask across heads.
inline BoolTensor repeat_rows(const BoolTensor& m, int64_t times, Shape out_shape) {
    if (m.shape.empty()) throw ShapeError("repeat_rows: empty mask shape");
    const int64_t n = m.shape.back();
    const int64_t rows = m.numel() / n;
    BoolTensor out;
    out.shape = std::move(out_shape);
    out.v.resize(static_cast<size_t>(rows * times * n));
    if (shape_numel(out.shape) != static_cast<int64_t>(out.v.size()))
        throw ShapeError("repeat_rows: out shape " + shape_str(out.shape) + " does not hold " +
                         std::to_string(out.v.size()) + " entries");
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t t = 0; t < times; ++t)
            std::memcpy(out.v.data() + (r * times + t) * n, m.v.data() + r * n, static_cast<size_t>(n));
    return out;
}

// Tiles a whole mask `times` times along a new leading axis.
inline BoolTensor tile(const BoolTensor& m, int64_t times) {
    BoolTensor out;
    out.shape = Shape{times};
    out.shape.insert(out.shape.end(), m.shape.begin(), m.shape.end());
    out.v.resize(static_cast<size_t>(times) * m.v.size());
    for (int64_t t = 0; t < times; ++t)
        std::memcpy(out.v.data() + static_cast<size_t>(t) * m.v.size(), m.v.data(), m.v.size());
    return out;
}

// Lower-triangular (T, T) causal mask: query t may attend keys <= t.
inline BoolTensor causal_mask(int64_t t_len) {
    BoolTensor m(Shape{t_len, t_len}, 0);
    for (int64_t q = 0; q < t_len; ++q)
        for (int64_t k = 0; k <= q; ++k) m.v[static_cast<size_t>(q * t_len + k)] = 1;
    return m;
}

// Collapses the last axis with OR: (..., n) -> (...).
inline BoolTensor any_lastdim(const BoolTensor& m) {
    const int64_t n = m.shape.back();
    const int64_t rows = m.numel() / n;
    BoolTensor out;
    out.shape = Shape(m.shape.begin(), m.shape.end() - 1);
    out.v.assign(static_cast<size_t>(rows), 0);
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < n; ++j)
            if (m.v[static_cast<size_t>(r * n + j)]) {
                out.v[static_cast<size_t>(r)] = 1;
                break;
            }
    return out;
}

template <class S>
struct Storage {
    std::vector<S> values;
    std::vector<S> grad;  // sized like values iff requires_grad
    bool requires_grad = false;
};

// Dense row-major tensor handle. Copying a Tensor copies the handle, not the
// buffer; reshaped() views share values and gradient storage.
template <class S>
class Tensor {
    static_assert(std::is_floating_point_v<S>);

public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.st_ = std::make_shared<Storage<S>>();
        t.st_->values.assign(static_cast<size_t>(shape_numel(t.shape_)), S(0));
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor full(Shape shape, S fill) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.st_->values.begin(), t.st_->values.end(), fill);
        return t;
    }

    static Tensor from(Shape shape, std::vector<S> values, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<int64_t>(values.size()))
            throw ShapeError("tensor shape " + shape_str(shape) + " does not hold " +
                             std::to_string(values.size()) + " values");
        Tensor t;
        t.shape_ = std::move(shape);
        t.st_ = std::make_shared<Storage<S>>();
        t.st_->values = std::move(values);
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor scalar(S v, bool requires_grad = false) { return from(Shape{1}, {v}, requires_grad); }

    bool defined() const { return static_cast<bool>(st_); }
    const Shape& shape() const { return shape_; }
    int64_t dim(size_t i) const { return shape_.at(i); }
    size_t ndim() const { return shape_.size(); }
    int64_t numel() const { return shape_numel(shape_); }

    // Handles are shallow-const: storage is shared, so accessors hand out
    // mutable pointers regardless of handle constness (as any shared-storage
    // tensor handle does).
    S* data() const { return st_->values.data(); }
    std::vector<S>& values() const { return st_->values; }

    bool requires_grad() const { return st_ && st_->requires_grad; }
    void set_requires_grad(bool rg) const {
        st_->requires_grad = rg;
        if (rg)
            st_->grad.assign(st_->values.size(), S(0));
        else
            st_->grad.clear();
    }
    S* grad() const { return st_->grad.data(); }
    const std::vector<S>& grad_values() const { return st_->grad; }
    void zero_grad() const {
        if (requires_grad()) std::fill(st_->grad.begin(), st_->grad.end(), S(0));
    }

    // Same storage (values and grad), new shape. Element count must match.
    Tensor reshaped(Shape new_shape) const {
        if (shape_numel(new_shape) != numel())
            throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape) +
                             ": element count differs");
        Tensor t;
        t.shape_ = std::move(new_shape);
        t.st_ = st_;
        return t;
    }

    S item() const {
        if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape_));
        return st_->values[0];
    }

    bool same_storage(const Tensor& o) const { return st_ == o.st_; }

private:
    Shape shape_;
    std::shared_ptr<Storage<S>> st_;
};

// Records backward closures in execution order; backward() replays them in
// reverse, which is a valid topological order for the DAG by construction.
template <class S>
class Tape {
public:
    bool recording = true;

    void push(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

    size_t size() const { return nodes_.size(); }

    void backward(Tensor<S>& loss) {
        if (loss.numel() != 1)
            throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
        if (backward_done_) throw StateError("backward: tape already differentiated; reset() first");
        if (!loss.requires_grad())
            throw ContractError("backward: loss does not require grad (nothing recorded)");
        backward_done_ = true;
        loss.grad()[0] += S(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    void reset() {
        nodes_.clear();
        backward_done_ = false;
    }

private:
    std::vector<std::function<void()>> nodes_;
    bool backward_done_ = false;
};

namespace detail {

template <class S>
inline Tensor<S> make_out(Tape<S>& tape, Shape shape, bool any_rg) {
    Tensor<S> out = Tensor<S>::zeros(std::move(shape));
    if (tape.recording && any_rg) out.set_requires_grad(true);
    return out;
}

template <class S>
inline void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// y[r, :] += alpha * x[r, :], the only inner-loop pattern the kernels use.
template <class S>
inline void axpy(int64_t n, S alpha, const S* __restrict x, S* __restrict y) {
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast ops
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> add(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_same_shape(a, b, "add");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor<S> out = detail::make_out(tape, a.shape(), rg);
    const int64_t n = a.numel();
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    if (out.requires_grad())
        tape.push([a, b, out]() mutable {
            const S* g = out.grad();
            const int64_t n2 = out.numel();
            if (a.requires_grad()) detail::axpy(n2, S(1), g, a.grad());
            if (b.requires_grad()) detail::axpy(n2, S(1), g, b.grad());
        });
    return out;
}

template <class S>
Tensor<S> sub(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_same_shape(a, b, "sub");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor<S> out = detail::make_out(tape, a.shape(), rg);
    const int64_t n = a.numel();
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    if (out.requires_grad())
        tape.push([a, b, out]() mutable {
            const S* g = out.grad();
            const int64_t n2 = out.numel();
            if (a.requires_grad()) detail::axpy(n2, S(1), g, a.grad());
            if (b.requires_grad()) detail::axpy(n2, S(-1), g, b.grad());
        });
    return out;
}

template <class S>
Tensor<S> mul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_same_shape(a, b, "mul");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor<S> out = detail::make_out(tape, a.shape(), rg);
    const int64_t n = a.numel();
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    if (out.requires_grad())
        tape.push([a, b, out]() mutable {
            const S* g = out.grad();
            const int64_t n2 = out.numel();
            if (a.requires_grad()) {
                S* ga = a.grad();
                const S* pb2 = b.data();
                for (int64_t i = 0; i < n2; ++i) ga[i] += g[i] * pb2[i];
            }
            if (b.requires_grad()) {
                S* gb = b.grad();
                const S* pa2 = a.data();
                for (int64_t i = 0; i < n2; ++i) gb[i] += g[i] * pa2[i];
            }
        });
    return out;
}

template <class S>
Tensor<S> scale(Tape<S>& tape, const Tensor<S>& a, double c) {
    Tensor<S> out = detail::make_out(tape, a.shape(), a.requires_grad());
    const int64_t n = a.numel();
    const S* pa = a.data();
    S* po = out.data();
    const S sc = static_cast<S>(c);
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * sc;
    if (out.requires_grad())
        tape.push([a, out, sc]() mutable { detail::axpy(out.numel(), sc, out.grad(), a.grad()); });
    return out;
}

// b's shape must be a trailing suffix of a's shape; b is added to every
// leading slice. Covers bias adds and the (T, H) positional offset.
template <class S>
Tensor<S> add_suffix(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    const size_t ad = a.ndim(), bd = b.ndim();
    bool ok = bd <= ad;
    if (ok)
        for (size_t i = 0; i < bd; ++i) ok = ok && a.shape()[ad - bd + i] == b.shape()[i];
    if (!ok)
        throw ShapeError("add_suffix: " + shape_str(b.shape()) + " is not a suffix of " +
                         shape_str(a.shape()));
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor<S> out = detail::make_out(tape, a.shape(), rg);
    const int64_t nb = b.numel();
    const int64_t reps = a.numel() / nb;
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    for (int64_t r = 0; r < reps; ++r)
        for (int64_t j = 0; j < nb; ++j) po[r * nb + j] = pa[r * nb + j] + pb[j];
    if (out.requires_grad())
        tape.push([a, b, out, nb, reps]() mutable {
            const S* g = out.grad();
            if (a.requires_grad()) detail::axpy(a.numel(), S(1), g, a.grad());
            if (b.requires_grad()) {
                S* gb = b.grad();
                for (int64_t r = 0; r < reps; ++r) detail::axpy(nb, S(1), g + r * nb, gb);
            }
        });
    return out;
}

// (shape...) -> (reps, shape...). Gradient sums over the new axis.
template <class S>
Tensor<S> broadcast0(Tape<S>& tape, const Tensor<S>& a, int64_t reps) {
    Shape out_shape{reps};
    out_shape.insert(out_shape.end(), a.shape().begin(), a.shape().end());
    Tensor<S> out = detail::make_out(tape, std::move(out_shape), a.requires_grad());
    const int64_t n = a.numel();
    const S* pa = a.data();
    S* po = out.data();
    for (int64_t r = 0; r < reps; ++r) std::memcpy(po + r * n, pa, sizeof(S) * static_cast<size_t>(n));
    if (out.requires_grad())
        tape.push([a, out, reps, n]() mutable {
            const S* g = out.grad();
            S* ga = a.grad();
            for (int64_t r = 0; r < reps; ++r) detail::axpy(n, S(1), g + r * n, ga);
        });
    return out;
}

// Zeroes the slices whose mask entry is false. The mask shape must be a
// leading prefix of x's shape. Gradients through zeroed slices are zero, so
// masked content can never influence anything downstream.
template <class S>
Tensor<S> mask_mul(Tape<S>& tape, const Tensor<S>& x, const BoolTensor& m) {
    const size_t md = m.shape.size();
    bool ok = md <= x.ndim();
    if (ok)
        for (size_t i = 0; i < md; ++i) ok = ok && x.shape()[i] == m.shape[i];
    if (!ok)
        throw ShapeError("mask_mul: mask " + shape_str(m.shape) + " is not a prefix of " +
                         shape_str(x.shape()));
    Tensor<S> out = detail::make_out(tape, x.shape(), x.requires_grad());
    const int64_t rows = m.numel();
    const int64_t inner = x.numel() / rows;
    const S* px = x.data();
    S* po = out.data();
    for (int64_t r = 0; r < rows; ++r)
        if (m[r]) std::memcpy(po + r * inner, px + r * inner, sizeof(S) * static_cast<size_t>(inner));
    if (out.requires_grad()) {
        BoolTensor mc = m;
        tape.push([x, out, mc = std::move(mc), rows, inner]() mutable {
            const S* g = out.grad();
            S* gx = x.grad();
            for (int64_t r = 0; r < rows; ++r)
                if (mc[r]) detail::axpy(inner, S(1), g + r * inner, gx + r * inner);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

// (..., k) x (k, n) -> (..., n). Leading dims of a are flattened into rows;
// this is the affine-layer workhorse.
template <class S>
Tensor<S> matmul(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& w) {
    if (a.ndim() < 1 || w.ndim() != 2 || a.shape().back() != w.shape()[0])
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(w.shape()));
    const int64_t k = w.shape()[0];
    const int64_t n = w.shape()[1];
    const int64_t rows = a.numel() / k;
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    const bool rg = a.requires_grad() || w.requires_grad();
    Tensor<S> out = detail::make_out(tape, std::move(out_shape), rg);
    {
        const S* pa = a.data();
        const S* pw = w.data();
        S* po = out.data();
        parallel_for(rows, [&](int64_t rb, int64_t re) {
            for (int64_t r = rb; r < re; ++r) {
                S* orow = po + r * n;
                const S* arow = pa + r * k;
                for (int64_t kk = 0; kk < k; ++kk) detail::axpy(n, arow[kk], pw + kk * n, orow);
            }
        });
    }
    if (out.requires_grad())
        tape.push([a, w, out, rows, k, n]() mutable {
            const S* g = out.grad();
            if (a.requires_grad()) {
                // da = g . w^T ; transpose w once so the inner loop is contiguous
                std::vector<S> wt(static_cast<size_t>(k * n));
                const S* pw = w.data();
                for (int64_t kk = 0; kk < k; ++kk)
                    for (int64_t j = 0; j < n; ++j) wt[static_cast<size_t>(j * k + kk)] = pw[kk * n + j];
                S* ga = a.grad();
                const S* pwt = wt.data();
                parallel_for(rows, [&](int64_t rb, int64_t re) {
                    for (int64_t r = rb; r < re; ++r) {
                        S* garow = ga + r * k;
                        const S* grow = g + r * n;
                        for (int64_t j = 0; j < n; ++j) detail::axpy(k, grow[j], pwt + j * k, garow);
                    }
                });
            }
            if (w.requires_grad()) {
                // dw = a^T . g, accumulated over fixed-order row chunks
                const S* pa = a.data();
                S* gw = w.grad();
                const int workers = num_threads();
                if (workers <= 1 || rows < 64) {
                    for (int64_t r = 0; r < rows; ++r) {
                        const S* arow = pa + r * k;
                        const S* grow = g + r * n;
                        for (int64_t kk = 0; kk < k; ++kk) detail::axpy(n, arow[kk], grow, gw + kk * n);
                    }
                } else {
                    std::vector<std::vector<S>> partial(static_cast<size_t>(workers));
                    const int64_t chunk = (rows + workers - 1) / workers;
                    parallel_for(workers, [&](int64_t wb, int64_t we) {
                        for (int64_t wi = wb; wi < we; ++wi) {
                            auto& acc = partial[static_cast<size_t>(wi)];
                            acc.assign(static_cast<size_t>(k * n), S(0));
                            const int64_t rb = wi * chunk;
                            const int64_t re = std::min(rows, rb + chunk);
                            for (int64_t r = rb; r < re; ++r) {
                                const S* arow = pa + r * k;
                                const S* grow = g + r * n;
                                for (int64_t kk = 0; kk < k; ++kk)
                                    detail::axpy(n, arow[kk], grow, acc.data() + kk * n);
                            }
                        }
                    });
                    for (const auto& acc : partial)
                        if (!acc.empty()) detail::axpy(k * n, S(1), acc.data(), gw);
                }
            }
        });
    return out;
}

// Batched (B, m, k) x (B, k, n) -> (B, m, n).
template <class S>
Tensor<S> bmm(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[1])
        throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const int64_t bs = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[2];
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor<S> out = detail::make_out(tape, Shape{bs, m, n}, rg);
    {
        const S* pa = a.data();
        const S* pb = b.data();
        S* po = out.data();
        parallel_for(bs, [&](int64_t b0, int64_t b1) {
            for (int64_t bi = b0; bi < b1; ++bi) {
                const S* A = pa + bi * m * k;
                const S* B = pb + bi * k * n;
                S* O = po + bi * m * n;
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t kk = 0; kk < k; ++kk) detail::axpy(n, A[i * k + kk], B + kk * n, O + i * n);
            }
        });
    }
    if (out.requires_grad())
        tape.push([a, b, out, bs, m, k, n]() mutable {
            const S* g = out.grad();
            const S* pa = a.data();
            const S* pb = b.data();
            parallel_for(bs, [&](int64_t b0, int64_t b1) {
                std::vector<S> bt(static_cast<size_t>(k * n));
                for (int64_t bi = b0; bi < b1; ++bi) {
                    const S* G = g + bi * m * n;
                    if (a.requires_grad()) {
                        const S* B = pb + bi * k * n;
                        for (int64_t kk = 0; kk < k; ++kk)
                            for (int64_t j = 0; j < n; ++j) bt[static_cast<size_t>(j * k + kk)] = B[kk * n + j];
                        S* GA = a.grad() + bi * m * k;
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t j = 0; j < n; ++j) detail::axpy(k, G[i * n + j], bt.data() + j * k, GA + i * k);
                    }
                    if (b.requires_grad()) {
                        const S* A = pa + bi * m * k;
                        S* GB = b.grad() + bi * k * n;
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t kk = 0; kk < k; ++kk) detail::axpy(n, A[i * k + kk], G + i * n, GB + kk * n);
                    }
                }
            });
        });
    return out;
}

// Batched (B, m, k) x (B, n, k)^T -> (B, m, n): attention score kernel.
template <class S>
Tensor<S> bmm_nt(Tape<S>& tape, const Tensor<S>& a, const Tensor<S>& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[2])
        throw ShapeError("bmm_nt: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
    const int64_t bs = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[1];
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor<S> out = detail::make_out(tape, Shape{bs, m, n}, rg);
    {
        const S* pa = a.data();
        const S* pb = b.data();
        S* po = out.data();
        parallel_for(bs, [&](int64_t b0, int64_t b1) {
            std::vector<S> bt(static_cast<size_t>(k * n));
            for (int64_t bi = b0; bi < b1; ++bi) {
                const S* A = pa + bi * m * k;
                const S* B = pb + bi * n * k;
                for (int64_t j = 0; j < n; ++j)
                    for (int64_t kk = 0; kk < k; ++kk) bt[static_cast<size_t>(kk * n + j)] = B[j * k + kk];
                S* O = po + bi * m * n;
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t kk = 0; kk < k; ++kk) detail::axpy(n, A[i * k + kk], bt.data() + kk * n, O + i * n);
            }
        });
    }
    if (out.requires_grad())
        tape.push([a, b, out, bs, m, k, n]() mutable {
            const S* g = out.grad();
            const S* pa = a.data();
            const S* pb = b.data();
            parallel_for(bs, [&](int64_t b0, int64_t b1) {
                for (int64_t bi = b0; bi < b1; ++bi) {
                    const S* G = g + bi * m * n;
                    if (a.requires_grad()) {
                        const S* B = pb + bi * n * k;
                        S* GA = a.grad() + bi * m * k;
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t j = 0; j < n; ++j) detail::axpy(k, G[i * n + j], B + j * k, GA + i * k);
                    }
                    if (b.requires_grad()) {
                        const S* A = pa + bi * m * k;
                        S* GB = b.grad() + bi * n * k;
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t j = 0; j < n; ++j) detail::axpy(k, G[i * n + j], A + i * k, GB + j * k);
                    }
                }
            });
        });
    return out;
}

// (A, B, C, D) -> (A, C, B, D). Self-inverse as an index mapping; used to
// split and merge attention heads.
template <class S>
Tensor<S> permute_0213(Tape<S>& tape, const Tensor<S>& x) {
    if (x.ndim() != 4) throw ShapeError("permute_0213 expects 4 dims, got " + shape_str(x.shape()));
    const int64_t A = x.shape()[0], B = x.shape()[1], C = x.shape()[2], D = x.shape()[3];
    Tensor<S> out = detail::make_out(tape, Shape{A, C, B, D}, x.requires_grad());
    const S* px = x.data();
    S* po = out.data();
    for (int64_t a = 0; a < A; ++a)
        for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < C; ++c)
                std::memcpy(po + (((a * C + c) * B) + b) * D, px + (((a * B + b) * C) + c) * D,
                            sizeof(S) * static_cast<size_t>(D));
    if (out.requires_grad())
        tape.push([x, out, A, B, C, D]() mutable {
            const S* g = out.grad();
            S* gx = x.grad();
            for (int64_t a = 0; a < A; ++a)
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t c = 0; c < C; ++c)
                        detail::axpy(D, S(1), g + (((a * C + c) * B) + b) * D, gx + (((a * B + b) * C) + c) * D);
        });
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities, normalization, reductions
// ---------------------------------------------------------------------------

// Row softmax over the last axis. Masked entries come out exactly 0 and rows
// with no unmasked entry come out all-zero (optionally reported through
// fully_masked). Masked inputs never enter the max/exp path, so the output
// is bitwise independent of their values.
template <class S>
Tensor<S> softmax_masked(Tape<S>& tape, const Tensor<S>& x, const BoolTensor* mask = nullptr,
                         std::vector<uint8_t>* fully_masked = nullptr) {
    const int64_t n = x.shape().back();
    const int64_t rows = x.numel() / n;
    if (mask && mask->shape != x.shape())
        throw ShapeError("softmax_masked: mask " + shape_str(mask->shape) + " vs x " +
                         shape_str(x.shape()));
    Tensor<S> out = detail::make_out(tape, x.shape(), x.requires_grad());
    if (fully_masked) fully_masked->assign(static_cast<size_t>(rows), 0);
    const S* px = x.data();
    S* po = out.data();
    const uint8_t* pm = mask ? mask->v.data() : nullptr;
    for (int64_t r = 0; r < rows; ++r) {
        const S* xr = px + r * n;
        S* orow = po + r * n;
        const uint8_t* mr = pm ? pm + r * n : nullptr;
        S mx = -std::numeric_limits<S>::infinity();
        for (int64_t j = 0; j < n; ++j)
            if (!mr || mr[j]) mx = std::max(mx, xr[j]);
        if (mx == -std::numeric_limits<S>::infinity()) {
            if (fully_masked) (*fully_masked)[static_cast<size_t>(r)] = 1;
            continue;  // all-zero row
        }
        S sum = S(0);
        for (int64_t j = 0; j < n; ++j) {
            if (!mr || mr[j]) {
                orow[j] = std::exp(xr[j] - mx);
                sum += orow[j];
            }
        }
        const S inv = S(1) / sum;
        for (int64_t j = 0; j < n; ++j)
            if (!mr || mr[j]) orow[j] *= inv;
    }
    if (out.requires_grad()) {
        BoolTensor mcopy = mask ? *mask : BoolTensor();
        const bool has_mask = mask != nullptr;
        tape.push([x, out, mcopy = std::move(mcopy), has_mask, rows, n]() mutable {
            const S* y = out.data();
            const S* g = out.grad();
            S* gx = x.grad();
            const uint8_t* pm = has_mask ? mcopy.v.data() : nullptr;
            for (int64_t r = 0; r < rows; ++r) {
                const S* yr = y + r * n;
                const S* gr = g + r * n;
                S* gxr = gx + r * n;
                S dot = S(0);
                for (int64_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
                if (!pm) {
                    for (int64_t j = 0; j < n; ++j) gxr[j] += yr[j] * (gr[j] - dot);
                } else {
                    const uint8_t* mr = pm + r * n;
                    for (int64_t j = 0; j < n; ++j)
                        if (mr[j]) gxr[j] += yr[j] * (gr[j] - dot);
                }
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> softmax(Tape<S>& tape, const Tensor<S>& x) {
    return softmax_masked<S>(tape, x, nullptr, nullptr);
}

// Per-row standardization over the last axis (population variance, eps under
// the square root), then the gamma/beta affine.
template <class S>
Tensor<S> layer_norm(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     double eps = 1e-5) {
    const int64_t h = x.shape().back();
    if (gamma.numel() != h || beta.numel() != h)
        throw ShapeError("layer_norm: gamma/beta " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " vs feature dim " + std::to_string(h));
    if (h < 1) throw ContractError("layer_norm: empty feature axis");
    const int64_t rows = x.numel() / h;
    const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    Tensor<S> out = detail::make_out(tape, x.shape(), rg);
    // xhat retained for backward
    auto xhat = std::make_shared<std::vector<S>>(static_cast<size_t>(x.numel()));
    auto inv_std = std::make_shared<std::vector<S>>(static_cast<size_t>(rows));
    const S* px = x.data();
    const S* pg = gamma.data();
    const S* pb = beta.data();
    S* po = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const S* xr = px + r * h;
        S mean = S(0);
        for (int64_t j = 0; j < h; ++j) mean += xr[j];
        mean /= static_cast<S>(h);
        S var = S(0);
        for (int64_t j = 0; j < h; ++j) {
            const S d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<S>(h);
        const S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
        (*inv_std)[static_cast<size_t>(r)] = inv;
        S* xh = xhat->data() + r * h;
        S* orow = po + r * h;
        for (int64_t j = 0; j < h; ++j) {
            xh[j] = (xr[j] - mean) * inv;
            orow[j] = pg[j] * xh[j] + pb[j];
        }
    }
    if (out.requires_grad())
        tape.push([x, gamma, beta, out, xhat, inv_std, rows, h]() mutable {
            const S* g = out.grad();
            const S* pg = gamma.data();
            for (int64_t r = 0; r < rows; ++r) {
                const S* gr = g + r * h;
                const S* xh = xhat->data() + r * h;
                if (gamma.requires_grad()) {
                    S* gg = gamma.grad();
                    for (int64_t j = 0; j < h; ++j) gg[j] += gr[j] * xh[j];
                }
                if (beta.requires_grad()) {
                    S* gb = beta.grad();
                    for (int64_t j = 0; j < h; ++j) gb[j] += gr[j];
                }
                if (x.requires_grad()) {
                    const S inv = (*inv_std)[static_cast<size_t>(r)];
                    S sum1 = S(0), sum2 = S(0);
                    for (int64_t j = 0; j < h; ++j) {
                        const S dxh = gr[j] * pg[j];
                        sum1 += dxh;
                        sum2 += dxh * xh[j];
                    }
                    sum1 /= static_cast<S>(h);
                    sum2 /= static_cast<S>(h);
                    S* gx = x.grad() + r * h;
                    for (int64_t j = 0; j < h; ++j) {
                        const S dxh = gr[j] * pg[j];
                        gx[j] += inv * (dxh - sum1 - xh[j] * sum2);
                    }
                }
            }
        });
    return out;
}

// tanh-form GELU.
template <class S>
Tensor<S> gelu(Tape<S>& tape, const Tensor<S>& x) {
    Tensor<S> out = detail::make_out(tape, x.shape(), x.requires_grad());
    const int64_t n = x.numel();
    const S* px = x.data();
    S* po = out.data();
    const S c = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
    const S a = static_cast<S>(0.044715);
    for (int64_t i = 0; i < n; ++i) {
        const S v = px[i];
        const S t = std::tanh(c * (v + a * v * v * v));
        po[i] = S(0.5) * v * (S(1) + t);
    }
    if (out.requires_grad())
        tape.push([x, out, n, c, a]() mutable {
            const S* px2 = x.data();
            const S* g = out.grad();
            S* gx = x.grad();
            for (int64_t i = 0; i < n; ++i) {
                const S v = px2[i];
                const S u = c * (v + a * v * v * v);
                const S t = std::tanh(u);
                const S sech2 = S(1) - t * t;
                const S du = c * (S(1) + S(3) * a * v * v);
                gx[i] += g[i] * (S(0.5) * (S(1) + t) + S(0.5) * v * sech2 * du);
            }
        });
    return out;
}

template <class S>
Tensor<S> sum_all(Tape<S>& tape, const Tensor<S>& x) {
    Tensor<S> out = detail::make_out(tape, Shape{1}, x.requires_grad());
    const int64_t n = x.numel();
    const S* px = x.data();
    S acc = S(0);
    for (int64_t i = 0; i < n; ++i) acc += px[i];
    out.data()[0] = acc;
    if (out.requires_grad())
        tape.push([x, out, n]() mutable {
            const S g = out.grad()[0];
            S* gx = x.grad();
            for (int64_t i = 0; i < n; ++i) gx[i] += g;
        });
    return out;
}

template <class S>
Tensor<S> mean_all(Tape<S>& tape, const Tensor<S>& x) {
    if (x.numel() == 0) throw ContractError("mean_all: empty tensor");
    return scale(tape, sum_all(tape, x), 1.0 / static_cast<double>(x.numel()));
}

// ---------------------------------------------------------------------------
// Concat / slice
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> concat(Tape<S>& tape, const std::vector<Tensor<S>>& parts, size_t axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size()) throw ShapeError("concat: axis out of range");
    int64_t cat_dim = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p.ndim() != s0.size()) throw ShapeError("concat: rank mismatch");
        for (size_t i = 0; i < s0.size(); ++i)
            if (i != axis && p.shape()[i] != s0[i])
                throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(s0));
        cat_dim += p.shape()[axis];
        rg = rg || p.requires_grad();
    }
    Shape out_shape = s0;
    out_shape[axis] = cat_dim;
    Tensor<S> out = detail::make_out(tape, out_shape, rg);
    int64_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= s0[i];
    for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
    S* po = out.data();
    int64_t offset = 0;
    for (const auto& p : parts) {
        const int64_t c = p.shape()[axis];
        const S* pp = p.data();
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(po + (o * cat_dim + offset) * inner, pp + o * c * inner,
                        sizeof(S) * static_cast<size_t>(c * inner));
        offset += c;
    }
    if (out.requires_grad()) {
        std::vector<Tensor<S>> parts_copy = parts;
        tape.push([parts_copy, out, outer, inner, cat_dim]() mutable {
            const S* g = out.grad();
            int64_t off = 0;
            for (auto& p : parts_copy) {
                const int64_t c = p.numel() / (outer * inner);
                if (p.requires_grad()) {
                    S* gp = p.grad();
                    for (int64_t o = 0; o < outer; ++o)
                        detail::axpy(c * inner, S(1), g + (o * cat_dim + off) * inner, gp + o * c * inner);
                }
                off += c;
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> slice(Tape<S>& tape, const Tensor<S>& x, size_t axis, int64_t start, int64_t len) {
    if (axis >= x.ndim()) throw ShapeError("slice: axis out of range");
    if (start < 0 || len < 0 || start + len > x.shape()[axis])
        throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                         ") outside axis of size " + std::to_string(x.shape()[axis]));
    Shape out_shape = x.shape();
    out_shape[axis] = len;
    Tensor<S> out = detail::make_out(tape, out_shape, x.requires_grad());
    int64_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.shape()[i];
    const int64_t c = x.shape()[axis];
    const S* px = x.data();
    S* po = out.data();
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(po + o * len * inner, px + (o * c + start) * inner,
                    sizeof(S) * static_cast<size_t>(len * inner));
    if (out.requires_grad())
        tape.push([x, out, outer, inner, c, start, len]() mutable {
            const S* g = out.grad();
            S* gx = x.grad();
            for (int64_t o = 0; o < outer; ++o)
                detail::axpy(len * inner, S(1), g + o * len * inner, gx + (o * c + start) * inner);
        });
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean of squared differences; target carries no gradient.
template <class S>
Tensor<S> mse_loss(Tape<S>& tape, const Tensor<S>& pred, const Tensor<S>& target) {
    if (pred.numel() == 0) throw ContractError("mse_loss: empty batch");
    detail::require_same_shape(pred, target, "mse_loss");
    Tensor<S> d = sub(tape, pred, target);
    return mean_all(tape, mul(tape, d, d));
}

}  // namespace ecp
