// SPDX-License-Identifier: Apache-2.0
#include "wfm/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace wfm {

template <typename T>
Tensor<T> ParameterSet<T>::create(const std::string& name, Shape shape, Init init, Rng& rng, double stddev)
{
    for (const auto& [n, t] : items_)
        if (n == name)
            throw std::invalid_argument("parameter '" + name + "' registered twice");
    std::vector<T> v(shape_numel(shape));
    switch (init) {
    case Init::TruncNormal:
        for (auto& x : v)
            x = static_cast<T>(rng.truncated_normal(stddev));
        break;
    case Init::Zeros:
        break;
    case Init::Ones:
        for (auto& x : v)
            x = T(1);
        break;
    }
    Tensor<T> t(std::move(shape), std::move(v), true);
    items_.emplace_back(name, t);
    return t;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::get(const std::string& name) const
{
    for (const auto& [n, t] : items_)
        if (n == name)
            return t;
    throw std::out_of_range("no parameter named '" + name + "'");
}

template <typename T>
std::size_t ParameterSet<T>::count() const
{
    std::size_t c = 0;
    for (const auto& [n, t] : items_)
        c += t.numel();
    return c;
}

template <typename T>
void ParameterSet<T>::zero_grad()
{
    for (auto& [n, t] : items_)
        t.zero_grad();
}

template <typename T>
std::vector<CheckpointRecord> ParameterSet<T>::to_records(const std::string& prefix) const
{
    std::vector<CheckpointRecord> out;
    for (const auto& [n, t] : items_) {
        CheckpointRecord r;
        r.name = prefix + n;
        r.shape = t.shape();
        r.values.assign(t.values().begin(), t.values().end());
        out.push_back(std::move(r));
    }
    return out;
}

template <typename T>
void ParameterSet<T>::load_records(const std::vector<CheckpointRecord>& records, const std::string& prefix)
{
    for (auto& [n, t] : items_) {
        const auto& r = find_record(records, prefix + n);
        if (r.shape != t.shape())
            throw CheckpointError("parameter '" + n + "' has shape " + shape_str(t.shape()) +
                                  " but checkpoint holds " + shape_str(r.shape));
        auto dst = t.mutable_values();
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] = static_cast<T>(r.values[i]);
    }
}

template <typename T>
void ParameterSet<T>::copy_values_from(const ParameterSet& other)
{
    if (other.items_.size() != items_.size())
        throw std::invalid_argument("copy_values_from: parameter sets differ");
    for (std::size_t i = 0; i < items_.size(); ++i) {
        auto& dst = items_[i].second;
        const auto& src = other.items_[i].second;
        if (items_[i].first != other.items_[i].first || dst.shape() != src.shape())
            throw std::invalid_argument("copy_values_from: mismatch at '" + items_[i].first + "'");
        auto d = dst.mutable_values();
        std::copy(src.values().begin(), src.values().end(), d.begin());
    }
}

template <typename T>
Linear<T>::Linear(ParameterSet<T>& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : w(ps.create(name + ".w", {in, out}, Init::TruncNormal, rng)), b(ps.create(name + ".b", {out}, Init::Zeros, rng))
{
}

template <typename T>
LayerNorm<T>::LayerNorm(ParameterSet<T>& ps, const std::string& name, std::size_t dim, Rng& rng)
    : gamma(ps.create(name + ".gamma", {dim}, Init::Ones, rng)), beta(ps.create(name + ".beta", {dim}, Init::Zeros, rng))
{
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParameterSet<T>& ps, const std::string& name, std::size_t dim,
                                          std::size_t heads_, Rng& rng)
    : q(ps, name + ".q", dim, dim, rng), k(ps, name + ".k", dim, dim, rng), v(ps, name + ".v", dim, dim, rng),
      o(ps, name + ".o", dim, dim, rng), heads(heads_)
{
    if (heads == 0 || dim % heads != 0)
        throw std::invalid_argument("attention: dim " + std::to_string(dim) + " not divisible by " +
                                    std::to_string(heads) + " heads");
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::operator()(const Tensor<T>& x, AttentionRecord* record) const
{
    const std::size_t dim = x.dim(1);
    const std::size_t dh = dim / heads;
    const std::size_t seq = x.dim(0);
    const auto Q = q(x), K = k(x), V = v(x);
    const T sc = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
    if (record) {
        record->seq = seq;
        record->probs.assign(seq * seq, 0.0);
    }
    std::vector<Tensor<T>> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const auto qh = slice_cols(Q, h * dh, dh);
        const auto kh = slice_cols(K, h * dh, dh);
        const auto vh = slice_cols(V, h * dh, dh);
        const auto p = softmax(scale(matmul(qh, transpose(kh)), sc));
        if (record)
            for (std::size_t i = 0; i < seq * seq; ++i)
                record->probs[i] += static_cast<double>(p.values()[i]) / static_cast<double>(heads);
        outs.push_back(matmul(p, vh));
    }
    return o(heads == 1 ? outs[0] : concat_cols(outs));
}

template <typename T>
TransformerBlock<T>::TransformerBlock(ParameterSet<T>& ps, const std::string& name, std::size_t dim,
                                      std::size_t heads, std::size_t mlp_ratio, Rng& rng)
    : ln1(ps, name + ".ln1", dim, rng), ln2(ps, name + ".ln2", dim, rng), attn(ps, name + ".attn", dim, heads, rng),
      fc1(ps, name + ".fc1", dim, dim * mlp_ratio, rng), fc2(ps, name + ".fc2", dim * mlp_ratio, dim, rng)
{
}

template <typename T>
Tensor<T> TransformerBlock<T>::operator()(const Tensor<T>& x, AttentionRecord* record) const
{
    const auto h = add(x, attn(ln1(x), record));
    return add(h, fc2(gelu(fc1(ln2(h)))));
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct MultiHeadAttention<float>;
template struct MultiHeadAttention<double>;
template struct TransformerBlock<float>;
template struct TransformerBlock<double>;

} // namespace wfm
