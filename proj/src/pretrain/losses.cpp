// SPDX-License-Identifier: Apache-2.0
#include "wfm/pretrain.hpp"

namespace wfm {

void LossWeights::validate() const
{
    if (csi < 0 || loc < 0 || occ < 0 || spec < 0)
        throw std::invalid_argument("loss weights must be non-negative");
    if (csi + loc + occ + spec <= 0)
        throw std::invalid_argument("at least one loss weight must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("spectrum alpha must lie in [0,1]");
    if (!(eps > 0.0))
        throw std::invalid_argument("spectrum eps must be positive");
}

namespace {

template <typename T>
void same_shape(const char* what, const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": prediction " + shape_str(a.shape()) + " vs target " +
                         shape_str(b.shape()));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_reim(const Tensor<T>& x)
{
    const std::size_t rows = x.dim(0), f = x.dim(1);
    if (f % 2 != 0)
        throw ShapeError("loss_csi: feature width " + std::to_string(f) + " is not re/im interleaved");
    std::vector<std::int64_t> re, im;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t e = 0; e < f / 2; ++e) {
            re.push_back(static_cast<std::int64_t>(r * f + 2 * e));
            im.push_back(static_cast<std::int64_t>(r * f + 2 * e + 1));
        }
    return {gather(x, re, {rows, f / 2}), gather(x, im, {rows, f / 2})};
}

} // namespace

template <typename T>
Tensor<T> loss_csi(const Tensor<T>& pred, const Tensor<T>& truth, bool raw_phase)
{
    same_shape("loss_csi", pred, truth);
    if (pred.rank() != 2)
        throw ShapeError("loss_csi: expected a [masked, 2*entries] matrix, got " + shape_str(pred.shape()));
    if (pred.dim(0) == 0)
        return Tensor<T>::scalar(T(0));
    const auto [pr, pi] = split_reim(pred);
    const auto [tr, ti] = split_reim(truth.detach());
    const auto dmag = sub(sqrt(add(square(pr), square(pi))), sqrt(add(square(tr), square(ti))));
    auto dph = sub(atan2(pi, pr), atan2(ti, tr));
    if (!raw_phase)
        dph = wrap_angle(dph);
    return sqrt(mean(add(square(dmag), square(dph))));
}

template <typename T>
Tensor<T> loss_loc(const Tensor<T>& pred, const Tensor<T>& truth)
{
    same_shape("loss_loc", pred, truth);
    if (pred.rank() != 2 || pred.dim(1) != 2)
        throw ShapeError("loss_loc: expected [n, 2], got " + shape_str(pred.shape()));
    const auto d = sub(pred, truth.detach());
    const auto ones = Tensor<T>::full({2, 1}, T(1));
    return mean(sqrt(matmul(square(d), ones)));
}

template <typename T>
Tensor<T> loss_occ(const Tensor<T>& logits, const Tensor<T>& labels)
{
    same_shape("loss_occ", logits, labels);
    return mean(sub(softplus(logits), mul(labels.detach(), logits)));
}

template <typename T>
Tensor<T> loss_spectrum(const Tensor<T>& pred, const Tensor<T>& truth, double alpha, double eps)
{
    same_shape("loss_spectrum", pred, truth);
    if (!(eps > 0.0) || !(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("loss_spectrum: need eps > 0 and alpha in [0,1]");
    const auto t = truth.detach();
    std::optional<Tensor<T>> out;
    if (alpha > 0.0)
        out = scale(sqrt(mean(square(sub(pred, t)))), static_cast<T>(alpha));
    if (alpha < 1.0) {
        const T e = static_cast<T>(eps);
        const auto lg = sqrt(mean(square(sub(log(add_scalar(pred, e)), log(add_scalar(t, e))))));
        const auto term = scale(lg, static_cast<T>(1.0 - alpha));
        out = out ? add(*out, term) : term;
    }
    return *out;
}

template <typename T>
Tensor<T> total_loss(const LossComponents<T>& c, const LossWeights& w)
{
    std::optional<Tensor<T>> acc;
    auto put = [&](const std::optional<Tensor<T>>& part, double lambda) {
        if (!part)
            return;
        const auto term = scale(*part, static_cast<T>(lambda));
        acc = acc ? add(*acc, term) : term;
    };
    put(c.csi, w.csi);
    put(c.loc, w.loc);
    put(c.occ, w.occ);
    put(c.spec, w.spec);
    if (!acc)
        throw std::invalid_argument("total_loss: no active loss component");
    return *acc;
}

#define WFM_INSTANTIATE_LOSSES(T)                                                                 \
    template Tensor<T> loss_csi(const Tensor<T>&, const Tensor<T>&, bool);                        \
    template Tensor<T> loss_loc(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> loss_occ(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> loss_spectrum(const Tensor<T>&, const Tensor<T>&, double, double);         \
    template Tensor<T> total_loss(const LossComponents<T>&, const LossWeights&);

WFM_INSTANTIATE_LOSSES(float)
WFM_INSTANTIATE_LOSSES(double)

} // namespace wfm
