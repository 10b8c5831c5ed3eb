// SPDX-License-Identifier: Apache-2.0
//
// Parameter registry and transformer building blocks on Tensor<T>.
#pragma once

#include "wfm/checkpoint.hpp"
#include "wfm/rng.hpp"
#include "wfm/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace wfm {

enum class Init { TruncNormal, Zeros, Ones };

template <typename T>
class ParameterSet {
public:
    Tensor<T> create(const std::string& name, Shape shape, Init init, Rng& rng, double stddev = 0.02);

    const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }
    std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }
    const Tensor<T>& get(const std::string& name) const;
    std::size_t count() const;
    void zero_grad();

    std::vector<CheckpointRecord> to_records(const std::string& prefix = "") const;
    /// Copies values from matching records; shapes must agree.
    void load_records(const std::vector<CheckpointRecord>& records, const std::string& prefix = "");
    /// Copies values from another set with identical names and shapes.
    void copy_values_from(const ParameterSet& other);

private:
    std::vector<std::pair<std::string, Tensor<T>>> items_;
};

template <typename T>
struct Linear {
    Tensor<T> w; // in x out
    Tensor<T> b; // out

    Linear() = default;
    Linear(ParameterSet<T>& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
    Tensor<T> operator()(const Tensor<T>& x) const { return add_rowvec(matmul(x, w), b); }
};

template <typename T>
struct LayerNorm {
    Tensor<T> gamma, beta;

    LayerNorm() = default;
    LayerNorm(ParameterSet<T>& ps, const std::string& name, std::size_t dim, Rng& rng);
    Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, T(1e-5)); }
};

/// Head-averaged attention probabilities of one layer, seq x seq row-major.
struct AttentionRecord {
    std::size_t seq = 0;
    std::vector<double> probs;
};

template <typename T>
struct MultiHeadAttention {
    Linear<T> q, k, v, o;
    std::size_t heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(ParameterSet<T>& ps, const std::string& name, std::size_t dim, std::size_t heads, Rng& rng);
    Tensor<T> operator()(const Tensor<T>& x, AttentionRecord* record = nullptr) const;
};

/// Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x)) with GELU.
template <typename T>
struct TransformerBlock {
    LayerNorm<T> ln1, ln2;
    MultiHeadAttention<T> attn;
    Linear<T> fc1, fc2;

    TransformerBlock() = default;
    TransformerBlock(ParameterSet<T>& ps, const std::string& name, std::size_t dim, std::size_t heads,
                     std::size_t mlp_ratio, Rng& rng);
    Tensor<T> operator()(const Tensor<T>& x, AttentionRecord* record = nullptr) const;
};

} // namespace wfm
