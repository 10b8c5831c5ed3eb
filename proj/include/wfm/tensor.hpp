// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major real tensors with reverse-mode automatic differentiation.
//
// Every operation produces a new Tensor. When at least one input requires
// gradients, the result keeps shared ownership of its inputs together with a
// closure that propagates the output gradient back into them, so the graph is
// implicit in the tensors that are alive. Nodes are stamped with a monotone
// sequence number at creation; since an op can only consume tensors that
// already exist, descending sequence order is a reverse topological order.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wfm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised for incompatible operand shapes; the message names the op and shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when NaN or Inf values cross a graph boundary (leaf creation, backward).
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad; // empty until first touched
    bool requires_grad = false;
    std::uint64_t seq = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    /// Gradient buffer, zero-filled on first access.
    T* grad_buffer()
    {
        if (grad.size() != value.size())
            grad.assign(value.size(), T(0));
        return grad.data();
    }
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->value.size(); }

    std::span<const T> values() const { return node_->value; }
    /// Direct mutation of a leaf's storage (optimizers, checkpoint loading).
    std::span<T> mutable_values() { return node_->value; }
    T item() const;
    T at(std::size_t i) const { return node_->value.at(i); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool is_leaf() const { return !node_->backward_fn; }
    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    /// Accumulated gradient; zeros when nothing has been accumulated.
    std::vector<T> grad() const;
    std::span<T> mutable_grad() { return {node_->grad_buffer(), node_->value.size()}; }
    void zero_grad();

    /// Reverse pass from a single-element tensor. Leaf gradients accumulate
    /// across calls; interior gradients are reset on every call.
    void backward() const;

    /// Same values, cut from the graph.
    Tensor detach() const;

    const char* op_name() const { return node_->op; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Throws NonFiniteError when any value is NaN/Inf; `where` names the boundary.
template <typename T>
void require_finite(std::span<const T> values, const std::string& where);

// ---------------------------------------------------------------------------
// Operations. All are defined for float and double.
// ---------------------------------------------------------------------------

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
/// x[m,n] + b[n] broadcast over rows.
template <typename T> Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b);
/// x[m,n] * g[n] broadcast over rows.
template <typename T> Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& g);
/// Row-wise normalization over the last dimension with affine gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));
template <typename T> Tensor<T> softmax(const Tensor<T>& x);
template <typename T> Tensor<T> log_softmax(const Tensor<T>& x);
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
/// sqrt with a zero subgradient at 0, so RMSE-style losses are defined at a perfect fit.
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> softplus(const Tensor<T>& x);
template <typename T> Tensor<T> atan2(const Tensor<T>& y, const Tensor<T>& x);
/// Maps angles into (-pi, pi]; unit derivative away from the wrap points.
template <typename T> Tensor<T> wrap_angle(const Tensor<T>& x);
template <typename T> Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// out[i] = x.flat[index[i]], or 0 where index[i] < 0 (zero padding).
template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::vector<std::int64_t> index, Shape out_shape);
/// Rows of a 2D tensor; indices may repeat.
template <typename T> Tensor<T> gather_rows(const Tensor<T>& x, std::vector<std::size_t> rows);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t len);
template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

// ---------------------------------------------------------------------------
// Dispatch by kind, used by the gradient checker and the CLI.
// ---------------------------------------------------------------------------

enum class OpKind {
    MatMul, Transpose, Add, Sub, Mul, Scale, AddScalar, AddRowVec, MulRowVec,
    LayerNorm, Softmax, LogSoftmax, Gelu, Relu, Tanh, Sigmoid, Exp, Log, Sqrt,
    Square, Softplus, Atan2, WrapAngle, Maximum, Reshape, Gather, GatherRows,
    SliceCols, ConcatRows, ConcatCols, Sum, Mean,
};

struct OpAttrs {
    double scalar = 0.0;
    Shape shape;
    std::vector<std::int64_t> index;
    std::size_t start = 0;
    std::size_t len = 0;
};

std::string op_kind_name(OpKind kind);
OpKind op_kind_from_name(const std::string& name);
const std::vector<OpKind>& all_op_kinds();

template <typename T>
Tensor<T> forward(OpKind kind, const std::vector<Tensor<T>>& inputs, const OpAttrs& attrs = {});

} // namespace wfm
