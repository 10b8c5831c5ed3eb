// SPDX-License-Identifier: Apache-2.0
#include "wfm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace wfm {

namespace detail {
std::atomic<std::uint64_t> g_node_seq{1};
}

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

template <typename T>
void require_finite(std::span<const T> values, const std::string& where)
{
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i])) {
            std::ostringstream os;
            os << where << ": non-finite value " << values[i] << " at element " << i;
            throw NonFiniteError(os.str());
        }
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
{
    if (shape_numel(shape) != values.size())
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " elements");
    require_finite<T>(values, "tensor");
    node_ = std::make_shared<Node<T>>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
    node_->seq = detail::g_node_seq.fetch_add(1, std::memory_order_relaxed);
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad)
{
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad)
{
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad)
{
    return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const
{
    if (numel() != 1)
        throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    return node_->value[0];
}

template <typename T>
std::vector<T> Tensor<T>::grad() const
{
    if (has_grad())
        return node_->grad;
    return std::vector<T>(numel(), T(0));
}

template <typename T>
void Tensor<T>::zero_grad()
{
    node_->grad.clear();
}

template <typename T>
void Tensor<T>::backward() const
{
    if (!defined() || numel() != 1)
        throw ShapeError("backward: loss must be a scalar, got shape " +
                         (defined() ? shape_str(shape()) : std::string("(undefined)")));
    require_finite<T>(node_->value, "backward");
    if (!node_->requires_grad)
        return;

    // Collect every reachable node that participates in differentiation.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<Node<T>*> stack{node_.get()};
    while (!stack.empty()) {
        Node<T>* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second)
            continue;
        order.push_back(n);
        for (const auto& in : n->inputs)
            if (in->requires_grad && !seen.count(in.get()))
                stack.push_back(in.get());
    }
    std::sort(order.begin(), order.end(), [](const Node<T>* a, const Node<T>* b) { return a->seq > b->seq; });

    for (Node<T>* n : order)
        if (n->backward_fn)
            n->grad.assign(n->value.size(), T(0));
    node_->grad_buffer()[0] += T(1);

    for (Node<T>* n : order)
        if (n->backward_fn)
            n->backward_fn(*n);
}

template <typename T>
Tensor<T> Tensor<T>::detach() const
{
    return Tensor(node_->shape, node_->value, false);
}

template class Tensor<float>;
template class Tensor<double>;
template void require_finite<float>(std::span<const float>, const std::string&);
template void require_finite<double>(std::span<const double>, const std::string&);

} // namespace wfm
