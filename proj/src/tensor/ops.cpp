// SPDX-License-Identifier: Apache-2.0
#include "wfm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

namespace wfm {

namespace detail {
extern std::atomic<std::uint64_t> g_node_seq;
}

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

[[noreturn]] void shape_fail(const char* op, const std::string& detail)
{
    throw ShapeError(std::string(op) + ": " + detail);
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> fn)
{
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->op = op;
    node->seq = detail::g_node_seq.fetch_add(1, std::memory_order_relaxed);
    bool any = false;
    for (const auto* in : inputs)
        any = any || in->requires_grad();
    if (any) {
        node->requires_grad = true;
        for (const auto* in : inputs)
            node->inputs.push_back(in->node());
        node->backward_fn = std::move(fn);
    }
    return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> make_result_n(const char* op, Shape shape, std::vector<T> values,
                        const std::vector<Tensor<T>>& inputs, BackwardFn<T> fn)
{
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->op = op;
    node->seq = detail::g_node_seq.fetch_add(1, std::memory_order_relaxed);
    bool any = false;
    for (const auto& in : inputs)
        any = any || in.requires_grad();
    if (any) {
        node->requires_grad = true;
        for (const auto& in : inputs)
            node->inputs.push_back(in.node());
        node->backward_fn = std::move(fn);
    }
    return Tensor<T>(std::move(node));
}

template <typename T>
void require_rank2(const char* op, const Tensor<T>& x)
{
    if (x.rank() != 2)
        shape_fail(op, "expected a matrix, got " + shape_str(x.shape()));
}

template <typename T>
void require_same(const char* op, const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.shape() != b.shape())
        shape_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Row-major last-dimension split: (rows, cols).
template <typename T>
std::pair<std::size_t, std::size_t> rows_cols(const Tensor<T>& x)
{
    const std::size_t cols = x.rank() == 0 ? 1 : x.shape().back();
    return {cols == 0 ? 0 : x.numel() / cols, cols};
}

// C += A * B with A [m,k], B [k,n]; row-major, sequential accumulation order.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n)
{
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            if (av == T(0))
                continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j)
                crow[j] += av * brow[j];
        }
    }
}

// C += A^T * B with A [k,m], B [k,n].
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n)
{
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = arow[i];
            if (av == T(0))
                continue;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j)
                crow[j] += av * brow[j];
        }
    }
}

// C += A * B^T with A [m,k], B [n,k].
template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n)
{
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T s = T(0);
            for (std::size_t p = 0; p < k; ++p)
                s += arow[p] * brow[p];
            c[i * n + j] += s;
        }
    }
}

template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, D dfdx)
{
    std::vector<T> out(x.numel());
    const auto xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = f(xv[i]);
    return make_result<T>(op, x.shape(), std::move(out), {&x}, [dfdx](Node<T>& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad)
            return;
        T* g = in.grad_buffer();
        for (std::size_t i = 0; i < self.value.size(); ++i)
            g[i] += self.grad[i] * dfdx(in.value[i], self.value[i]);
    });
}

} // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        shape_fail("matmul", "cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(m * n, T(0));
    gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
    return make_result<T>("matmul", {m, n}, std::move(out), {&a, &b}, [m, k, n](Node<T>& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        if (A.requires_grad)
            gemm_nt_acc(self.grad.data(), B.value.data(), A.grad_buffer(), m, n, k);
        if (B.requires_grad)
            gemm_tn_acc(A.value.data(), self.grad.data(), B.grad_buffer(), k, m, n);
    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a)
{
    require_rank2("transpose", a);
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<T> out(m * n);
    const auto av = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[j * m + i] = av[i * n + j];
    return make_result<T>("transpose", {n, m}, std::move(out), {&a}, [m, n](Node<T>& self) {
        auto& A = *self.inputs[0];
        T* g = A.grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                g[i * n + j] += self.grad[j * m + i];
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same("add", a, b);
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a.values()[i] + b.values()[i];
    return make_result<T>("add", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
        for (auto& in : self.inputs)
            if (in->requires_grad) {
                T* g = in->grad_buffer();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    g[i] += self.grad[i];
            }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same("sub", a, b);
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a.values()[i] - b.values()[i];
    return make_result<T>("sub", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
        if (self.inputs[0]->requires_grad) {
            T* g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += self.grad[i];
        }
        if (self.inputs[1]->requires_grad) {
            T* g = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same("mul", a, b);
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a.values()[i] * b.values()[i];
    return make_result<T>("mul", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        if (A.requires_grad) {
            T* g = A.grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += self.grad[i] * B.value[i];
        }
        if (B.requires_grad) {
            T* g = B.grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += self.grad[i] * A.value[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s)
{
    return unary<T>("scale", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s)
{
    return unary<T>("add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b)
{
    const auto [m, n] = rows_cols(x);
    if (b.numel() != n)
        shape_fail("add_rowvec", "row vector " + shape_str(b.shape()) + " vs matrix " + shape_str(x.shape()));
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = x.values()[i * n + j] + b.values()[j];
    return make_result<T>("add_rowvec", x.shape(), std::move(out), {&x, &b}, [m, n](Node<T>& self) {
        if (self.inputs[0]->requires_grad) {
            T* g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < m * n; ++i)
                g[i] += self.grad[i];
        }
        if (self.inputs[1]->requires_grad) {
            T* g = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g[j] += self.grad[i * n + j];
        }
    });
}

template <typename T>
Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& gvec)
{
    const auto [m, n] = rows_cols(x);
    if (gvec.numel() != n)
        shape_fail("mul_rowvec", "row vector " + shape_str(gvec.shape()) + " vs matrix " + shape_str(x.shape()));
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = x.values()[i * n + j] * gvec.values()[j];
    return make_result<T>("mul_rowvec", x.shape(), std::move(out), {&x, &gvec}, [m, n](Node<T>& self) {
        auto& X = *self.inputs[0];
        auto& G = *self.inputs[1];
        if (X.requires_grad) {
            T* g = X.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g[i * n + j] += self.grad[i * n + j] * G.value[j];
        }
        if (G.requires_grad) {
            T* g = G.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g[j] += self.grad[i * n + j] * X.value[i * n + j];
        }
    });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps)
{
    const auto [m, n] = rows_cols(x);
    if (gamma.numel() != n || beta.numel() != n)
        shape_fail("layer_norm", "affine params " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                                     " vs input " + shape_str(x.shape()));
    auto xhat = std::make_shared<std::vector<T>>(x.numel());
    auto inv = std::make_shared<std::vector<T>>(m);
    std::vector<T> out(x.numel());
    const auto xv = x.values();
    for (std::size_t i = 0; i < m; ++i) {
        T mu = T(0);
        for (std::size_t j = 0; j < n; ++j)
            mu += xv[i * n + j];
        mu /= T(n);
        T var = T(0);
        for (std::size_t j = 0; j < n; ++j) {
            const T d = xv[i * n + j] - mu;
            var += d * d;
        }
        var /= T(n);
        const T r = T(1) / std::sqrt(var + eps);
        (*inv)[i] = r;
        for (std::size_t j = 0; j < n; ++j) {
            const T h = (xv[i * n + j] - mu) * r;
            (*xhat)[i * n + j] = h;
            out[i * n + j] = h * gamma.values()[j] + beta.values()[j];
        }
    }
    return make_result<T>("layer_norm", x.shape(), std::move(out), {&x, &gamma, &beta},
                          [m, n, xhat, inv](Node<T>& self) {
        auto& X = *self.inputs[0];
        auto& G = *self.inputs[1];
        auto& B = *self.inputs[2];
        const T* g = self.grad.data();
        if (B.requires_grad) {
            T* gb = B.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    gb[j] += g[i * n + j];
        }
        if (G.requires_grad) {
            T* gg = G.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    gg[j] += g[i * n + j] * (*xhat)[i * n + j];
        }
        if (X.requires_grad) {
            T* gx = X.grad_buffer();
            std::vector<T> dxhat(n);
            for (std::size_t i = 0; i < m; ++i) {
                T s1 = T(0), s2 = T(0);
                for (std::size_t j = 0; j < n; ++j) {
                    dxhat[j] = g[i * n + j] * G.value[j];
                    s1 += dxhat[j];
                    s2 += dxhat[j] * (*xhat)[i * n + j];
                }
                const T r = (*inv)[i] / T(n);
                for (std::size_t j = 0; j < n; ++j)
                    gx[i * n + j] += r * (T(n) * dxhat[j] - s1 - (*xhat)[i * n + j] * s2);
            }
        }
    });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x)
{
    const auto [m, n] = rows_cols(x);
    std::vector<T> out(x.numel());
    const auto xv = x.values();
    for (std::size_t i = 0; i < m; ++i) {
        T mx = xv[i * n];
        for (std::size_t j = 1; j < n; ++j)
            mx = std::max(mx, xv[i * n + j]);
        T s = T(0);
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = std::exp(xv[i * n + j] - mx);
            s += out[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] /= s;
    }
    return make_result<T>("softmax", x.shape(), std::move(out), {&x}, [m, n](Node<T>& self) {
        T* gx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
            T dot = T(0);
            for (std::size_t j = 0; j < n; ++j)
                dot += self.grad[i * n + j] * self.value[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                gx[i * n + j] += self.value[i * n + j] * (self.grad[i * n + j] - dot);
        }
    });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x)
{
    const auto [m, n] = rows_cols(x);
    std::vector<T> out(x.numel());
    const auto xv = x.values();
    for (std::size_t i = 0; i < m; ++i) {
        T mx = xv[i * n];
        for (std::size_t j = 1; j < n; ++j)
            mx = std::max(mx, xv[i * n + j]);
        T s = T(0);
        for (std::size_t j = 0; j < n; ++j)
            s += std::exp(xv[i * n + j] - mx);
        const T lse = mx + std::log(s);
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = xv[i * n + j] - lse;
    }
    return make_result<T>("log_softmax", x.shape(), std::move(out), {&x}, [m, n](Node<T>& self) {
        T* gx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
            T gs = T(0);
            for (std::size_t j = 0; j < n; ++j)
                gs += self.grad[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                gx[i * n + j] += self.grad[i * n + j] - std::exp(self.value[i * n + j]) * gs;
        }
    });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x)
{
    constexpr T inv_sqrt2 = T(0.70710678118654752440);
    constexpr T inv_sqrt2pi = T(0.39894228040143267794);
    return unary<T>(
        "gelu", x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
        [](T v, T) { return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x)
{
    return unary<T>("relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x)
{
    return unary<T>("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x)
{
    return unary<T>(
        "sigmoid", x,
        [](T v) { return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x)
{
    return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x)
{
    return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x)
{
    return unary<T>(
        "sqrt", x, [](T v) { return std::sqrt(std::max(v, T(0))); },
        [](T, T y) { return y > T(0) ? T(0.5) / y : T(0); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x)
{
    return unary<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x)
{
    return unary<T>(
        "softplus", x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
        [](T v, T) { return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); });
}

template <typename T>
Tensor<T> atan2(const Tensor<T>& y, const Tensor<T>& x)
{
    require_same("atan2", y, x);
    std::vector<T> out(y.numel());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::atan2(y.values()[i], x.values()[i]);
    return make_result<T>("atan2", y.shape(), std::move(out), {&y, &x}, [](Node<T>& self) {
        auto& Y = *self.inputs[0];
        auto& X = *self.inputs[1];
        T* gy = Y.requires_grad ? Y.grad_buffer() : nullptr;
        T* gx = X.requires_grad ? X.grad_buffer() : nullptr;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T r2 = X.value[i] * X.value[i] + Y.value[i] * Y.value[i];
            if (r2 <= T(0))
                continue;
            if (gy)
                gy[i] += self.grad[i] * X.value[i] / r2;
            if (gx)
                gx[i] -= self.grad[i] * Y.value[i] / r2;
        }
    });
}

template <typename T>
Tensor<T> wrap_angle(const Tensor<T>& x)
{
    constexpr T pi = std::numbers::pi_v<T>;
    return unary<T>(
        "wrap_angle", x, [](T v) { return v - T(2) * pi * std::ceil((v - pi) / (T(2) * pi)); },
        [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same("maximum", a, b);
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::max(a.values()[i], b.values()[i]);
    return make_result<T>("maximum", a.shape(), std::move(out), {&a, &b}, [](Node<T>& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        T* ga = A.requires_grad ? A.grad_buffer() : nullptr;
        T* gb = B.requires_grad ? B.grad_buffer() : nullptr;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (A.value[i] >= B.value[i]) {
                if (ga)
                    ga[i] += self.grad[i];
            } else if (gb) {
                gb[i] += self.grad[i];
            }
        }
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape)
{
    if (shape_numel(shape) != x.numel())
        shape_fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    std::vector<T> out(x.values().begin(), x.values().end());
    return make_result<T>("reshape", std::move(shape), std::move(out), {&x}, [](Node<T>& self) {
        T* g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::vector<std::int64_t> index, Shape out_shape)
{
    if (shape_numel(out_shape) != index.size())
        shape_fail("gather", std::to_string(index.size()) + " indices for output " + shape_str(out_shape));
    const auto n = static_cast<std::int64_t>(x.numel());
    std::vector<T> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto k = index[i];
        if (k >= n)
            shape_fail("gather", "index " + std::to_string(k) + " out of range for " + shape_str(x.shape()));
        out[i] = k < 0 ? T(0) : x.values()[static_cast<std::size_t>(k)];
    }
    auto idx = std::make_shared<std::vector<std::int64_t>>(std::move(index));
    return make_result<T>("gather", std::move(out_shape), std::move(out), {&x}, [idx](Node<T>& self) {
        T* g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < idx->size(); ++i)
            if ((*idx)[i] >= 0)
                g[(*idx)[i]] += self.grad[i];
    });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::vector<std::size_t> rows)
{
    require_rank2("gather_rows", x);
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<T> out(rows.size() * n);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= m)
            shape_fail("gather_rows", "row " + std::to_string(rows[r]) + " out of range for " + shape_str(x.shape()));
        std::copy_n(x.values().data() + rows[r] * n, n, out.data() + r * n);
    }
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(rows));
    return make_result<T>("gather_rows", {idx->size(), n}, std::move(out), {&x}, [idx, n](Node<T>& self) {
        T* g = self.inputs[0]->grad_buffer();
        for (std::size_t r = 0; r < idx->size(); ++r)
            for (std::size_t j = 0; j < n; ++j)
                g[(*idx)[r] * n + j] += self.grad[r * n + j];
    });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t len)
{
    require_rank2("slice_cols", x);
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (start + len > n)
        shape_fail("slice_cols", "columns [" + std::to_string(start) + "," + std::to_string(start + len) +
                                     ") out of range for " + shape_str(x.shape()));
    std::vector<T> out(m * len);
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(x.values().data() + i * n + start, len, out.data() + i * len);
    return make_result<T>("slice_cols", {m, len}, std::move(out), {&x}, [m, n, start, len](Node<T>& self) {
        T* g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < len; ++j)
                g[i * n + start + j] += self.grad[i * len + j];
    });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts)
{
    if (parts.empty())
        shape_fail("concat_rows", "no inputs");
    const std::size_t n = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
    std::size_t m = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(1) != n)
            shape_fail("concat_rows", "column mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
        m += p.dim(0);
    }
    std::vector<T> out;
    out.reserve(m * n);
    for (const auto& p : parts)
        out.insert(out.end(), p.values().begin(), p.values().end());
    return make_result_n<T>("concat_rows", {m, n}, std::move(out), parts, [](Node<T>& self) {
        std::size_t off = 0;
        for (auto& in : self.inputs) {
            const std::size_t sz = in->value.size();
            if (in->requires_grad) {
                T* g = in->grad_buffer();
                for (std::size_t i = 0; i < sz; ++i)
                    g[i] += self.grad[off + i];
            }
            off += sz;
        }
    });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts)
{
    if (parts.empty())
        shape_fail("concat_cols", "no inputs");
    const std::size_t m = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
    std::size_t n = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(0) != m)
            shape_fail("concat_cols", "row mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
        n += p.dim(1);
    }
    std::vector<T> out(m * n);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.dim(1);
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(p.values().data() + i * w, w, out.data() + i * n + off);
        off += w;
    }
    return make_result_n<T>("concat_cols", {m, n}, std::move(out), parts, [m, n](Node<T>& self) {
        std::size_t col = 0;
        for (auto& in : self.inputs) {
            const std::size_t w = in->shape[1];
            if (in->requires_grad) {
                T* g = in->grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        g[i * w + j] += self.grad[i * n + col + j];
            }
            col += w;
        }
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x)
{
    T s = T(0);
    for (const T v : x.values())
        s += v;
    return make_result<T>("sum", {1}, {s}, {&x}, [](Node<T>& self) {
        auto& X = *self.inputs[0];
        T* g = X.grad_buffer();
        for (std::size_t i = 0; i < X.value.size(); ++i)
            g[i] += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x)
{
    if (x.numel() == 0)
        shape_fail("mean", "empty input");
    T s = T(0);
    for (const T v : x.values())
        s += v;
    const T inv_n = T(1) / T(x.numel());
    return make_result<T>("mean", {1}, {s * inv_n}, {&x}, [inv_n](Node<T>& self) {
        auto& X = *self.inputs[0];
        T* g = X.grad_buffer();
        for (std::size_t i = 0; i < X.value.size(); ++i)
            g[i] += self.grad[0] * inv_n;
    });
}

// ---------------------------------------------------------------------------

namespace {
struct KindName {
    OpKind kind;
    const char* name;
};
constexpr KindName kKindNames[] = {
    {OpKind::MatMul, "matmul"},         {OpKind::Transpose, "transpose"},   {OpKind::Add, "add"},
    {OpKind::Sub, "sub"},               {OpKind::Mul, "mul"},               {OpKind::Scale, "scale"},
    {OpKind::AddScalar, "add_scalar"},  {OpKind::AddRowVec, "add_rowvec"},  {OpKind::MulRowVec, "mul_rowvec"},
    {OpKind::LayerNorm, "layer_norm"},  {OpKind::Softmax, "softmax"},       {OpKind::LogSoftmax, "log_softmax"},
    {OpKind::Gelu, "gelu"},             {OpKind::Relu, "relu"},             {OpKind::Tanh, "tanh"},
    {OpKind::Sigmoid, "sigmoid"},       {OpKind::Exp, "exp"},               {OpKind::Log, "log"},
    {OpKind::Sqrt, "sqrt"},             {OpKind::Square, "square"},         {OpKind::Softplus, "softplus"},
    {OpKind::Atan2, "atan2"},           {OpKind::WrapAngle, "wrap_angle"},  {OpKind::Maximum, "maximum"},
    {OpKind::Reshape, "reshape"},       {OpKind::Gather, "gather"},         {OpKind::GatherRows, "gather_rows"},
    {OpKind::SliceCols, "slice_cols"},  {OpKind::ConcatRows, "concat_rows"}, {OpKind::ConcatCols, "concat_cols"},
    {OpKind::Sum, "sum"},               {OpKind::Mean, "mean"},
};
} // namespace

std::string op_kind_name(OpKind kind)
{
    for (const auto& kn : kKindNames)
        if (kn.kind == kind)
            return kn.name;
    return "unknown";
}

OpKind op_kind_from_name(const std::string& name)
{
    for (const auto& kn : kKindNames)
        if (name == kn.name)
            return kn.kind;
    throw std::invalid_argument("unknown op kind '" + name + "'");
}

const std::vector<OpKind>& all_op_kinds()
{
    static const std::vector<OpKind> kinds = [] {
        std::vector<OpKind> v;
        for (const auto& kn : kKindNames)
            v.push_back(kn.kind);
        return v;
    }();
    return kinds;
}

template <typename T>
Tensor<T> forward(OpKind kind, const std::vector<Tensor<T>>& in, const OpAttrs& attrs)
{
    auto need = [&](std::size_t n) {
        if (in.size() != n)
            throw std::invalid_argument(op_kind_name(kind) + ": expected " + std::to_string(n) + " inputs, got " +
                                        std::to_string(in.size()));
    };
    const T s = static_cast<T>(attrs.scalar);
    switch (kind) {
    case OpKind::MatMul: need(2); return matmul(in[0], in[1]);
    case OpKind::Transpose: need(1); return transpose(in[0]);
    case OpKind::Add: need(2); return add(in[0], in[1]);
    case OpKind::Sub: need(2); return sub(in[0], in[1]);
    case OpKind::Mul: need(2); return mul(in[0], in[1]);
    case OpKind::Scale: need(1); return scale(in[0], s);
    case OpKind::AddScalar: need(1); return add_scalar(in[0], s);
    case OpKind::AddRowVec: need(2); return add_rowvec(in[0], in[1]);
    case OpKind::MulRowVec: need(2); return mul_rowvec(in[0], in[1]);
    case OpKind::LayerNorm: need(3); return layer_norm(in[0], in[1], in[2], attrs.scalar > 0 ? s : T(1e-5));
    case OpKind::Softmax: need(1); return softmax(in[0]);
    case OpKind::LogSoftmax: need(1); return log_softmax(in[0]);
    case OpKind::Gelu: need(1); return gelu(in[0]);
    case OpKind::Relu: need(1); return relu(in[0]);
    case OpKind::Tanh: need(1); return tanh(in[0]);
    case OpKind::Sigmoid: need(1); return sigmoid(in[0]);
    case OpKind::Exp: need(1); return exp(in[0]);
    case OpKind::Log: need(1); return log(in[0]);
    case OpKind::Sqrt: need(1); return sqrt(in[0]);
    case OpKind::Square: need(1); return square(in[0]);
    case OpKind::Softplus: need(1); return softplus(in[0]);
    case OpKind::Atan2: need(2); return atan2(in[0], in[1]);
    case OpKind::WrapAngle: need(1); return wrap_angle(in[0]);
    case OpKind::Maximum: need(2); return maximum(in[0], in[1]);
    case OpKind::Reshape: need(1); return reshape(in[0], attrs.shape);
    case OpKind::Gather: need(1); return gather(in[0], attrs.index, attrs.shape);
    case OpKind::GatherRows: {
        need(1);
        std::vector<std::size_t> rows(attrs.index.begin(), attrs.index.end());
        return gather_rows(in[0], std::move(rows));
    }
    case OpKind::SliceCols: need(1); return slice_cols(in[0], attrs.start, attrs.len);
    case OpKind::ConcatRows: return concat_rows(in);
    case OpKind::ConcatCols: return concat_cols(in);
    case OpKind::Sum: need(1); return sum(in[0]);
    case OpKind::Mean: need(1); return mean(in[0]);
    }
    throw std::invalid_argument("forward: unhandled op kind");
}

#define WFM_INSTANTIATE_OPS(T)                                                                         \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                    \
    template Tensor<T> transpose(const Tensor<T>&);                                                   \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> scale(const Tensor<T>&, T);                                                    \
    template Tensor<T> add_scalar(const Tensor<T>&, T);                                               \
    template Tensor<T> add_rowvec(const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> mul_rowvec(const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);           \
    template Tensor<T> softmax(const Tensor<T>&);                                                     \
    template Tensor<T> log_softmax(const Tensor<T>&);                                                 \
    template Tensor<T> gelu(const Tensor<T>&);                                                        \
    template Tensor<T> relu(const Tensor<T>&);                                                        \
    template Tensor<T> tanh(const Tensor<T>&);                                                        \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                     \
    template Tensor<T> exp(const Tensor<T>&);                                                         \
    template Tensor<T> log(const Tensor<T>&);                                                         \
    template Tensor<T> sqrt(const Tensor<T>&);                                                        \
    template Tensor<T> square(const Tensor<T>&);                                                      \
    template Tensor<T> softplus(const Tensor<T>&);                                                    \
    template Tensor<T> atan2(const Tensor<T>&, const Tensor<T>&);                                     \
    template Tensor<T> wrap_angle(const Tensor<T>&);                                                  \
    template Tensor<T> maximum(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                              \
    template Tensor<T> gather(const Tensor<T>&, std::vector<std::int64_t>, Shape);                    \
    template Tensor<T> gather_rows(const Tensor<T>&, std::vector<std::size_t>);                       \
    template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                        \
    template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                                    \
    template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                    \
    template Tensor<T> sum(const Tensor<T>&);                                                         \
    template Tensor<T> mean(const Tensor<T>&);                                                        \
    template Tensor<T> forward(OpKind, const std::vector<Tensor<T>>&, const OpAttrs&);

WFM_INSTANTIATE_OPS(float)
WFM_INSTANTIATE_OPS(double)

} // namespace wfm
