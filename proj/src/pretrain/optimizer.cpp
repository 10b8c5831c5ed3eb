// SPDX-License-Identifier: Apache-2.0
#include "wfm/pretrain.hpp"

#include <cmath>
#include <numbers>

namespace wfm {

double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps)
{
    if (total_steps == 0)
        return base_lr;
    const double f = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * f));
}

template <typename T>
Adam<T>::Adam(ParameterSet<T>& params, AdamConfig cfg) : params_(&params), cfg_(cfg)
{
    for (const auto& [n, t] : params.items()) {
        m_.emplace_back(t.numel(), T(0));
        v_.emplace_back(t.numel(), T(0));
    }
}

template <typename T>
double Adam<T>::step(double lr, double grad_scale)
{
    auto& items = params_->items();
    double sq = 0.0;
    for (auto& [n, t] : items)
        for (T g : t.grad())
            sq += static_cast<double>(g) * grad_scale * static_cast<double>(g) * grad_scale;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm))
        throw NonFiniteError("adam: gradient norm is not finite");
    double s = grad_scale;
    if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm)
        s *= cfg_.clip_norm / norm;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(lr / bc1);
    const T sbc2 = static_cast<T>(std::sqrt(bc2));
    const T eps = static_cast<T>(cfg_.eps);
    const T gs = static_cast<T>(s);
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& t = items[i].second;
        const auto g = t.grad();
        auto w = t.mutable_values();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const T gk = g[k] * gs;
            m[k] = b1 * m[k] + (T(1) - b1) * gk;
            v[k] = b2 * v[k] + (T(1) - b2) * gk * gk;
            w[k] -= step_size * m[k] / (std::sqrt(v[k]) / sbc2 + eps);
        }
    }
    return norm;
}

template <typename T>
std::vector<CheckpointRecord> Adam<T>::to_records() const
{
    std::vector<CheckpointRecord> out;
    const auto& items = params_->items();
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.push_back({"adam_m/" + items[i].first, items[i].second.shape(), {m_[i].begin(), m_[i].end()}});
        out.push_back({"adam_v/" + items[i].first, items[i].second.shape(), {v_[i].begin(), v_[i].end()}});
    }
    return out;
}

template <typename T>
void Adam<T>::load_records(const std::vector<CheckpointRecord>& records, std::size_t steps)
{
    const auto& items = params_->items();
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& rm = find_record(records, "adam_m/" + items[i].first);
        const auto& rv = find_record(records, "adam_v/" + items[i].first);
        if (rm.values.size() != m_[i].size() || rv.values.size() != v_[i].size())
            throw CheckpointError("optimizer state for '" + items[i].first + "' has the wrong size");
        m_[i].assign(rm.values.begin(), rm.values.end());
        v_[i].assign(rv.values.begin(), rv.values.end());
    }
    t_ = steps;
}

template class Adam<float>;
template class Adam<double>;

} // namespace wfm
