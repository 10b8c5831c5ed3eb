// SPDX-License-Identifier: Apache-2.0
#include "wfm/downstream.hpp"
#include "wfm/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wfm {

ProbeKind probe_kind_from_name(const std::string& name)
{
    if (name == "linear")
        return ProbeKind::Linear;
    if (name == "mlp")
        return ProbeKind::Mlp;
    if (name == "cnn")
        return ProbeKind::Cnn;
    throw std::invalid_argument("unknown probe kind '" + name + "' (expected linear, mlp or cnn)");
}

void FeatureSet::push(const std::vector<double>& row)
{
    if (dim == 0)
        dim = row.size();
    if (row.size() != dim || dim == 0)
        throw std::invalid_argument("features: row width " + std::to_string(row.size()) + ", expected " +
                                    std::to_string(dim));
    values.insert(values.end(), row.begin(), row.end());
}

FeatureSet FeatureSet::subset(const std::vector<std::size_t>& rows) const
{
    FeatureSet out;
    out.dim = dim;
    for (auto r : rows)
        out.values.insert(out.values.end(), values.begin() + static_cast<std::ptrdiff_t>(r * dim),
                          values.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
    return out;
}

std::vector<double> class_weights(const std::vector<std::size_t>& labels, std::size_t n_classes)
{
    std::vector<double> count(n_classes, 0.0);
    for (auto l : labels)
        count.at(l) += 1.0;
    const double present = static_cast<double>(std::count_if(count.begin(), count.end(), [](double c) { return c > 0; }));
    std::vector<double> w(n_classes, 1.0);
    for (std::size_t c = 0; c < n_classes; ++c)
        if (count[c] > 0)
            w[c] = std::clamp(static_cast<double>(labels.size()) / (present * count[c]), 0.1, 10.0);
    return w;
}

Probe::Probe(std::size_t in_dim, std::size_t out, const ProbeConfig& cfg) : cfg_(cfg), out_(out)
{
    build(in_dim);
}

Probe::Probe(std::size_t in_dim, std::vector<std::size_t> segments, const ProbeConfig& cfg)
    : cfg_(cfg), out_(std::accumulate(segments.begin(), segments.end(), std::size_t{0})), segments_(std::move(segments))
{
    build(in_dim);
}

void Probe::build(std::size_t in_dim)
{
    if (in_dim == 0 || out_ == 0)
        throw std::invalid_argument("probe: input and output widths must be positive");
    Rng rng(stream_seed(cfg_.seed, 0x70726f6265ULL));
    std::size_t d = in_dim;
    if (cfg_.proj_dim > 0) {
        proj_ = Linear<double>(params_, "proj", d, cfg_.proj_dim, rng);
        d = cfg_.proj_dim;
    }
    switch (cfg_.kind) {
    case ProbeKind::Linear:
        layers_.emplace_back(params_, "fc0", d, out_, rng);
        break;
    case ProbeKind::Mlp:
        layers_.emplace_back(params_, "fc0", d, 64, rng);
        layers_.emplace_back(params_, "fc1", 64, 64, rng);
        layers_.emplace_back(params_, "fc2", 64, out_, rng);
        break;
    case ProbeKind::Cnn: {
        if (cfg_.proj_dim > 0)
            throw std::invalid_argument("probe: the CNN baseline takes raw grids, not projections");
        if (cfg_.cnn_channels * cfg_.grid_x * cfg_.grid_y != in_dim)
            throw std::invalid_argument("probe: CNN grid " + std::to_string(cfg_.cnn_channels) + "x" +
                                        std::to_string(cfg_.grid_x) + "x" + std::to_string(cfg_.grid_y) +
                                        " does not match input width " + std::to_string(in_dim));
        std::size_t c = cfg_.cnn_channels;
        int b = 0;
        for (std::size_t co : {16, 32, 64}) {
            convs_.emplace_back(params_, "conv" + std::to_string(b++), 9 * c, co, rng);
            c = co;
        }
        layers_.emplace_back(params_, "fc0", c, out_, rng);
        break;
    }
    }
}

Tensor<double> Probe::forward(const Tensor<double>& x) const
{
    Tensor<double> h = cfg_.proj_dim > 0 ? proj_(x) : x;
    if (cfg_.kind == ProbeKind::Cnn) {
        const std::size_t B = x.dim(0), C = cfg_.cnn_channels, gx = cfg_.grid_x, gy = cfg_.grid_y, hw = gx * gy;
        const std::size_t in = C * hw;
        std::vector<std::int64_t> idx(B * hw * C);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t cell = 0; cell < hw; ++cell)
                for (std::size_t c = 0; c < C; ++c)
                    idx[(b * hw + cell) * C + c] = static_cast<std::int64_t>(b * in + c * hw + cell);
        h = gather(h, idx, {B * hw, C});
        std::size_t cin = C;
        for (const auto& conv : convs_) {
            std::vector<std::int64_t> col(B * hw * 9 * cin, -1);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t ix = 0; ix < gx; ++ix)
                    for (std::size_t iy = 0; iy < gy; ++iy)
                        for (int dx = -1; dx <= 1; ++dx)
                            for (int dy = -1; dy <= 1; ++dy) {
                                const long nx = static_cast<long>(ix) + dx, ny = static_cast<long>(iy) + dy;
                                if (nx < 0 || ny < 0 || nx >= static_cast<long>(gx) || ny >= static_cast<long>(gy))
                                    continue;
                                const std::size_t row = b * hw + ix * gy + iy;
                                const std::size_t src = b * hw + static_cast<std::size_t>(nx) * gy +
                                                        static_cast<std::size_t>(ny);
                                const std::size_t k = static_cast<std::size_t>((dx + 1) * 3 + (dy + 1));
                                for (std::size_t c = 0; c < cin; ++c)
                                    col[row * 9 * cin + k * cin + c] = static_cast<std::int64_t>(src * cin + c);
                            }
            h = relu(conv(gather(h, col, {B * hw, 9 * cin})));
            cin = conv.w.dim(1);
        }
        std::vector<double> pool(B * B * hw, 0.0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t cell = 0; cell < hw; ++cell)
                pool[b * B * hw + b * hw + cell] = 1.0 / static_cast<double>(hw);
        h = layers_[0](matmul(Tensor<double>({B, B * hw}, std::move(pool)), h));
    } else {
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            h = layers_[i](h);
            if (i + 1 < layers_.size())
                h = relu(h);
        }
    }
    if (cfg_.tanh_output)
        h = tanh(h);
    return h;
}

namespace {

Tensor<double> batch_of(const FeatureSet& x, const std::vector<std::size_t>& order, std::size_t b0, std::size_t b1)
{
    std::vector<double> v;
    v.reserve((b1 - b0) * x.dim);
    for (std::size_t k = b0; k < b1; ++k)
        v.insert(v.end(), x.values.begin() + static_cast<std::ptrdiff_t>(order[k] * x.dim),
                 x.values.begin() + static_cast<std::ptrdiff_t>((order[k] + 1) * x.dim));
    return Tensor<double>({b1 - b0, x.dim}, std::move(v));
}

template <typename LossFn>
void fit_loop(Probe& probe, const ProbeConfig& cfg, std::size_t n, LossFn&& loss_of)
{
    if (n < 2)
        throw std::invalid_argument("probe: need at least 2 training samples");
    AdamConfig ac;
    ac.lr = cfg.lr;
    ac.clip_norm = 0.0;
    Adam<double> opt(probe.params(), ac);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(stream_seed(cfg.seed, 0x666974ULL));
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch);
    for (std::size_t ep = 0; ep < cfg.epochs; ++ep) {
        rng.shuffle(order);
        for (std::size_t b0 = 0; b0 < n; b0 += bs) {
            const std::size_t b1 = std::min(n, b0 + bs);
            probe.params().zero_grad();
            loss_of(order, b0, b1).backward();
            opt.step(cfg.lr);
        }
    }
}

} // namespace

void Probe::fit_regression(const FeatureSet& x, const std::vector<double>& y)
{
    const std::size_t n = x.rows();
    if (!segments_.empty() || y.size() != n * out_)
        throw std::invalid_argument("probe: regression targets do not match the head");
    require_finite<double>(x.values, "probe features");
    fit_loop(*this, cfg_, n, [&](const std::vector<std::size_t>& order, std::size_t b0, std::size_t b1) {
        std::vector<double> t;
        for (std::size_t k = b0; k < b1; ++k)
            t.insert(t.end(), y.begin() + static_cast<std::ptrdiff_t>(order[k] * out_),
                     y.begin() + static_cast<std::ptrdiff_t>((order[k] + 1) * out_));
        const auto pred = forward(batch_of(x, order, b0, b1));
        return sqrt(mean(square(sub(pred, Tensor<double>({b1 - b0, out_}, std::move(t))))));
    });
}

void Probe::fit_classifier(const FeatureSet& x, const std::vector<std::size_t>& labels)
{
    const std::size_t n = x.rows(), S = segments_.size();
    if (S == 0 || labels.size() != n * S)
        throw std::invalid_argument("probe: classification labels do not match the head");
    require_finite<double>(x.values, "probe features");
    std::vector<std::vector<double>> weights;
    degenerate_ = false;
    for (std::size_t s = 0; s < S; ++s) {
        std::vector<std::size_t> ls;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i * S + s] >= segments_[s])
                throw std::invalid_argument("probe: label out of range");
            ls.push_back(labels[i * S + s]);
        }
        if (std::all_of(ls.begin(), ls.end(), [&](std::size_t l) { return l == ls[0]; }))
            degenerate_ = true;
        weights.push_back(class_weights(ls, segments_[s]));
    }
    fit_loop(*this, cfg_, n, [&](const std::vector<std::size_t>& order, std::size_t b0, std::size_t b1) {
        const std::size_t B = b1 - b0;
        const auto out = forward(batch_of(x, order, b0, b1));
        std::optional<Tensor<double>> total;
        std::size_t off = 0;
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t m = segments_[s];
            const auto ls = log_softmax(S == 1 ? out : slice_cols(out, off, m));
            std::vector<std::int64_t> idx(B);
            std::vector<double> w(B);
            double wsum = 0.0;
            for (std::size_t k = 0; k < B; ++k) {
                const auto l = labels[order[b0 + k] * S + s];
                idx[k] = static_cast<std::int64_t>(k * m + l);
                w[k] = weights[s][l];
                wsum += w[k];
            }
            const auto picked = gather(ls, idx, {B});
            const auto term = scale(sum(mul(picked, Tensor<double>({B}, std::move(w)))), -1.0 / wsum);
            total = total ? add(*total, term) : term;
            off += m;
        }
        return *total;
    });
}

std::vector<double> Probe::predict(const FeatureSet& x) const
{
    const std::size_t n = x.rows();
    std::vector<double> out;
    out.reserve(n * out_);
    const std::size_t chunk = 256;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t b0 = 0; b0 < n; b0 += chunk) {
        const std::size_t b1 = std::min(n, b0 + chunk);
        const auto y = forward(batch_of(x, order, b0, b1));
        out.insert(out.end(), y.values().begin(), y.values().end());
    }
    return out;
}

std::vector<std::size_t> top_k(const double* logits, std::size_t n, std::size_t k)
{
    if (k > n)
        throw std::invalid_argument("top_k: k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " classes");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    idx.resize(k);
    return idx;
}

double top_k_accuracy(const std::vector<double>& logits, std::size_t n_out, std::size_t offset, std::size_t n_classes,
                      const std::vector<std::size_t>& labels, std::size_t stride, std::size_t label_offset,
                      std::size_t k)
{
    const std::size_t n = logits.size() / n_out;
    if (n == 0)
        return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto t = top_k(logits.data() + i * n_out + offset, n_classes, k);
        if (std::find(t.begin(), t.end(), labels.at(i * stride + label_offset)) != t.end())
            ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(n);
}

} // namespace wfm
