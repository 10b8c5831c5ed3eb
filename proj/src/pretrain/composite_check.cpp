// SPDX-License-Identifier: Apache-2.0
#include "wfm/composite_check.hpp"

#include "wfm/nn.hpp"
#include "wfm/pretrain.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wfm {

namespace {

using TD = Tensor<double>;

TD random_tensor(Rng& rng, Shape shape, double lo, double hi)
{
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v)
        x = rng.uniform(lo, hi);
    return TD(std::move(shape), std::move(v));
}

std::vector<double> values_of(const TD& t) { return {t.values().begin(), t.values().end()}; }

GradCheckReport check_block(std::uint64_t seed)
{
    constexpr std::size_t dim = 8, heads = 2, seq = 5;
    ParameterSet<double> ps;
    Rng init(stream_seed(seed, 0x626c6f636bULL));
    TransformerBlock<double> block(ps, "b", dim, heads, 2, init);

    // Parameters are moved well away from their init so every path carries signal.
    Rng rng(stream_seed(seed, 0x626c6f636bULL, 1));
    std::vector<TD> inputs{random_tensor(rng, {seq, dim}, -1.0, 1.0)};
    TD key_bias;
    for (auto& [name, t] : ps.items()) {
        auto v = values_of(t);
        for (auto& x : v)
            x += rng.uniform(-0.5, 0.5);
        if (name == "b.attn.k.b")
            key_bias = TD(t.shape(), v);
        else
            inputs.emplace_back(t.shape(), v);
    }

    auto bind = [&](const std::vector<TD>& xs, const TD& kb) {
        TransformerBlock<double> b = block;
        std::size_t i = 1;
        b.ln1.gamma = xs[i++];
        b.ln1.beta = xs[i++];
        b.ln2.gamma = xs[i++];
        b.ln2.beta = xs[i++];
        b.attn.q.w = xs[i++];
        b.attn.q.b = xs[i++];
        b.attn.k.w = xs[i++];
        b.attn.k.b = kb;
        b.attn.v.w = xs[i++];
        b.attn.v.b = xs[i++];
        b.attn.o.w = xs[i++];
        b.attn.o.b = xs[i++];
        b.fc1.w = xs[i++];
        b.fc1.b = xs[i++];
        b.fc2.w = xs[i++];
        b.fc2.b = xs[i++];
        return b(xs[0]);
    };
    if (ps.items().size() != inputs.size())
        throw std::logic_error("check_block: unexpected parameter layout");

    auto report = grad_check_fn([&](const std::vector<TD>& xs) { return bind(xs, key_bias); }, inputs, seed);

    std::vector<TD> leaves;
    for (const auto& t : inputs)
        leaves.push_back(t.detach());
    TD kb(key_bias.shape(), values_of(key_bias), true);
    Rng wr(stream_seed(seed, 0x6b62ULL));
    const auto out = bind(leaves, kb);
    std::vector<double> w(out.numel());
    for (auto& x : w)
        x = wr.uniform(-1.0, 1.0);
    sum(mul(out, TD(out.shape(), w))).backward();
    for (double g : kb.grad())
        report.zero_grad_max = std::max(report.zero_grad_max, std::abs(g));
    return report;
}

TD softmax_ce(const TD& logits, const TD& onehot)
{
    return scale(mean(mul(log_softmax(logits), onehot)), -1.0);
}

GradCheckReport check_once(CompositeKind kind, Rng& rng, std::uint64_t seed, bool& smooth)
{
    constexpr double pi = std::numbers::pi;
    smooth = true;
    switch (kind) {
    case CompositeKind::SoftmaxCrossEntropy: {
        std::vector<double> oh(4 * 5, 0.0);
        for (std::size_t r = 0; r < 4; ++r)
            oh[r * 5 + rng.uniform_index(5)] = 1.0;
        const TD y({4, 5}, oh);
        return grad_check_fn([y](const std::vector<TD>& xs) { return softmax_ce(xs[0], y); },
                             {random_tensor(rng, {4, 5}, -2.0, 2.0)}, seed);
    }
    case CompositeKind::LossCsi: {
        const TD pred = random_tensor(rng, {3, 6}, -2.0, 2.0);
        const TD truth = random_tensor(rng, {3, 6}, -2.0, 2.0);
        for (std::size_t i = 0; i < pred.numel(); i += 2) {
            const double a = std::atan2(pred.at(i + 1), pred.at(i));
            const double b = std::atan2(truth.at(i + 1), truth.at(i));
            const double r = std::remainder(a - b - pi, 2.0 * pi);
            if (std::hypot(pred.at(i), pred.at(i + 1)) < 0.1 || std::abs(r) < 1e-3 ||
                (pred.at(i) < 0.0 && std::abs(pred.at(i + 1)) < 1e-3))
                smooth = false;
        }
        return grad_check_fn([truth](const std::vector<TD>& xs) { return loss_csi(xs[0], truth); }, {pred}, seed);
    }
    case CompositeKind::LossLoc: {
        const TD truth = random_tensor(rng, {4, 2}, -1.0, 1.0);
        const TD pred = random_tensor(rng, {4, 2}, -1.0, 1.0);
        for (std::size_t r = 0; r < 4; ++r)
            if (std::hypot(pred.at(2 * r) - truth.at(2 * r), pred.at(2 * r + 1) - truth.at(2 * r + 1)) < 0.05)
                smooth = false;
        return grad_check_fn([truth](const std::vector<TD>& xs) { return loss_loc(xs[0], truth); }, {pred}, seed);
    }
    case CompositeKind::LossOcc: {
        std::vector<double> y(12);
        for (auto& v : y)
            v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const TD labels({12, 1}, y);
        return grad_check_fn([labels](const std::vector<TD>& xs) { return loss_occ(xs[0], labels); },
                             {random_tensor(rng, {12, 1}, -3.0, 3.0)}, seed);
    }
    case CompositeKind::LossSpectrum: {
        const TD truth = random_tensor(rng, {16}, 0.05, 3.0);
        const double alpha = rng.uniform(0.1, 0.9);
        return grad_check_fn(
            [truth, alpha](const std::vector<TD>& xs) { return loss_spectrum(xs[0], truth, alpha, 1e-6); },
            {random_tensor(rng, {16}, 0.05, 3.0)}, seed);
    }
    case CompositeKind::TransformerBlock:
        break;
    }
    throw std::logic_error("check_once: unhandled kind");
}

} // namespace

std::string composite_kind_name(CompositeKind kind)
{
    switch (kind) {
    case CompositeKind::TransformerBlock:
        return "transformer_block";
    case CompositeKind::SoftmaxCrossEntropy:
        return "softmax_cross_entropy";
    case CompositeKind::LossCsi:
        return "loss_csi";
    case CompositeKind::LossLoc:
        return "loss_loc";
    case CompositeKind::LossOcc:
        return "loss_occ";
    case CompositeKind::LossSpectrum:
        return "loss_spectrum";
    }
    return "?";
}

const std::vector<CompositeKind>& all_composite_kinds()
{
    static const std::vector<CompositeKind> kinds{
        CompositeKind::TransformerBlock, CompositeKind::SoftmaxCrossEntropy, CompositeKind::LossCsi,
        CompositeKind::LossLoc,          CompositeKind::LossOcc,             CompositeKind::LossSpectrum};
    return kinds;
}

GradCheckReport grad_check_composite(CompositeKind kind, std::uint64_t seed)
{
    if (kind == CompositeKind::TransformerBlock)
        return check_block(seed);
    constexpr int kMaxAttempts = 50;
    Rng rng(stream_seed(seed, 0x636f6d70ULL, static_cast<std::uint64_t>(kind)));
    for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
        bool smooth = true;
        auto report = check_once(kind, rng, seed, smooth);
        if (!smooth)
            continue;
        report.attempts = attempt;
        return report;
    }
    throw std::runtime_error("grad_check_composite: no smooth sample for " + composite_kind_name(kind));
}

} // namespace wfm
