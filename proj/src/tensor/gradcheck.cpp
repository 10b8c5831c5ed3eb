// SPDX-License-Identifier: Apache-2.0
#include "wfm/gradcheck.hpp"

#include "wfm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wfm {

GradCheckReport grad_check_fn(const GraphFn& f, const std::vector<Tensor<double>>& inputs, std::uint64_t seed,
                              double step)
{
    std::vector<Tensor<double>> leaves;
    leaves.reserve(inputs.size());
    for (const auto& in : inputs)
        leaves.emplace_back(in.shape(), std::vector<double>(in.values().begin(), in.values().end()), true);

    const auto probe = f(leaves);
    Rng rng(stream_seed(seed, 0x6772616463ULL));
    std::vector<double> w(probe.numel());
    for (auto& v : w)
        v = rng.uniform(-1.0, 1.0);
    const Tensor<double> weights(probe.shape(), w);

    auto loss_of = [&](const std::vector<Tensor<double>>& xs) { return sum(mul(f(xs), weights)); };

    loss_of(leaves).backward();

    GradCheckReport report;
    for (std::size_t t = 0; t < leaves.size(); ++t) {
        const auto analytic = leaves[t].grad();
        std::vector<double> base(leaves[t].values().begin(), leaves[t].values().end());
        for (std::size_t i = 0; i < base.size(); ++i) {
            auto eval = [&](double delta) {
                std::vector<Tensor<double>> xs;
                for (std::size_t u = 0; u < leaves.size(); ++u) {
                    if (u != t) {
                        xs.push_back(leaves[u].detach());
                        continue;
                    }
                    auto v = base;
                    v[i] += delta;
                    xs.emplace_back(leaves[u].shape(), std::move(v));
                }
                return loss_of(xs).item();
            };
            const double numeric = (eval(step) - eval(-step)) / (2.0 * step);
            const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(numeric), 1e-8);
            report.max_rel_error = std::max(report.max_rel_error, err);
            ++report.elements;
        }
    }
    return report;
}

namespace {

using TD = Tensor<double>;

TD random_tensor(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0)
{
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v)
        x = rng.uniform(lo, hi);
    return TD(std::move(shape), std::move(v));
}

struct Case {
    std::vector<TD> inputs;
    OpAttrs attrs;
};

constexpr double kMargin = 1e-3;

bool near_kink(OpKind kind, const Case& c)
{
    constexpr double pi = std::numbers::pi;
    switch (kind) {
    case OpKind::Relu:
        for (double v : c.inputs[0].values())
            if (std::abs(v) < kMargin)
                return true;
        return false;
    case OpKind::Maximum:
        for (std::size_t i = 0; i < c.inputs[0].numel(); ++i)
            if (std::abs(c.inputs[0].at(i) - c.inputs[1].at(i)) < kMargin)
                return true;
        return false;
    case OpKind::WrapAngle:
        for (double v : c.inputs[0].values()) {
            const double r = std::remainder(v - pi, 2.0 * pi);
            if (std::abs(r) < kMargin)
                return true;
        }
        return false;
    case OpKind::Atan2:
        for (std::size_t i = 0; i < c.inputs[0].numel(); ++i) {
            const double y = c.inputs[0].at(i), x = c.inputs[1].at(i);
            if (std::hypot(x, y) < 0.1 || (x < 0.0 && std::abs(y) < kMargin))
                return true;
        }
        return false;
    default:
        return false;
    }
}

Case make_case(OpKind kind, Rng& rng)
{
    Case c;
    switch (kind) {
    case OpKind::MatMul:
        c.inputs = {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})};
        break;
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Maximum:
    case OpKind::Atan2:
        c.inputs = {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})};
        break;
    case OpKind::Scale:
    case OpKind::AddScalar:
        c.inputs = {random_tensor(rng, {3, 4})};
        c.attrs.scalar = rng.uniform(-2.0, 2.0);
        break;
    case OpKind::AddRowVec:
    case OpKind::MulRowVec:
        c.inputs = {random_tensor(rng, {3, 4}), random_tensor(rng, {4})};
        break;
    case OpKind::LayerNorm:
        c.inputs = {random_tensor(rng, {3, 5}), random_tensor(rng, {5}), random_tensor(rng, {5})};
        c.attrs.scalar = 1e-5;
        break;
    case OpKind::Softmax:
    case OpKind::LogSoftmax:
        c.inputs = {random_tensor(rng, {3, 5})};
        break;
    case OpKind::Log:
    case OpKind::Sqrt:
        c.inputs = {random_tensor(rng, {3, 4}, 0.2, 2.0)};
        break;
    case OpKind::WrapAngle:
        c.inputs = {random_tensor(rng, {3, 4}, -10.0, 10.0)};
        break;
    case OpKind::Reshape:
        c.inputs = {random_tensor(rng, {3, 4})};
        c.attrs.shape = {2, 6};
        break;
    case OpKind::Gather: {
        c.inputs = {random_tensor(rng, {3, 4})};
        c.attrs.shape = {2, 5};
        for (int i = 0; i < 10; ++i)
            c.attrs.index.push_back(static_cast<std::int64_t>(rng.uniform_index(13)) - 1);
        break;
    }
    case OpKind::GatherRows:
        c.inputs = {random_tensor(rng, {4, 3})};
        c.attrs.index = {0, 2, 2, 3, 1};
        break;
    case OpKind::SliceCols:
        c.inputs = {random_tensor(rng, {3, 5})};
        c.attrs.start = 1;
        c.attrs.len = 3;
        break;
    case OpKind::ConcatRows:
        c.inputs = {random_tensor(rng, {2, 3}), random_tensor(rng, {3, 3})};
        break;
    case OpKind::ConcatCols:
        c.inputs = {random_tensor(rng, {3, 2}), random_tensor(rng, {3, 4})};
        break;
    default:
        c.inputs = {random_tensor(rng, {3, 4})};
        break;
    }
    return c;
}

} // namespace

GradCheckReport grad_check(OpKind kind, std::uint64_t seed)
{
    constexpr int kMaxAttempts = 50;
    Rng rng(stream_seed(seed, static_cast<std::uint64_t>(kind)));
    for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
        Case c = make_case(kind, rng);
        if (near_kink(kind, c))
            continue;
        const OpAttrs attrs = c.attrs;
        auto report = grad_check_fn([kind, attrs](const std::vector<TD>& xs) { return forward(kind, xs, attrs); },
                                    c.inputs, seed);
        report.attempts = attempt;
        return report;
    }
    throw std::runtime_error("grad_check: no smooth sample for " + op_kind_name(kind) + " after " +
                             std::to_string(kMaxAttempts) + " attempts");
}

} // namespace wfm
