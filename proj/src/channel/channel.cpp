// SPDX-License-Identifier: Apache-2.0
#include "wfm/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wfm {

ArrayGeometry tx_array(const Profile& p)
{
    return {p.n_x, p.n_y, p.spacing, p.carrier_hz};
}

ArrayGeometry rx_array(const Profile& p, std::size_t n)
{
    return {n, 1, 0.5, p.carrier_hz};
}

Angles direction_angles(Vec3 d)
{
    const double len = norm(d);
    if (len == 0.0)
        return {};
    return {std::acos(std::clamp(d.y / len, -1.0, 1.0)), std::atan2(d.z, d.x)};
}

std::vector<cd> steering_vector(const ArrayGeometry& array, double theta, double phi)
{
    const double ux = std::sin(theta) * std::cos(phi);
    const double uz = std::sin(theta) * std::sin(phi);
    std::vector<cd> a(array.size());
    for (std::size_t m = 0; m < array.n_y; ++m)
        for (std::size_t n = 0; n < array.n_x; ++n) {
            const double ph = -2.0 * std::numbers::pi * array.spacing *
                              (static_cast<double>(n) * ux + static_cast<double>(m) * uz);
            a[n + m * array.n_x] = std::polar(1.0, ph);
        }
    return a;
}

namespace {

PathComponent make_path(PathKind kind, double length, Vec3 depart, Vec3 arrive, double carrier_hz)
{
    const double lambda = kSpeedOfLight / carrier_hz;
    PathComponent p;
    p.kind = kind;
    p.length_m = length;
    p.delay_s = length / kSpeedOfLight;
    p.gain = lambda / (4.0 * std::numbers::pi * length) * std::polar(1.0, -2.0 * std::numbers::pi * length / lambda);
    if (kind == PathKind::Reflection)
        p.gain *= kReflectionCoefficient;
    p.aod = direction_angles(depart);
    p.aoa = direction_angles(arrive);
    return p;
}

double component(Vec3 v, int axis)
{
    return axis == 0 ? v.x : v.y;
}

} // namespace

std::vector<PathComponent> trace_paths(const SceneMap& scene, const std::vector<Face>& faces, Vec3 tx, Vec3 rx,
                                       double carrier_hz)
{
    std::vector<PathComponent> paths;
    const double d = norm(rx - tx);
    if (d > 0.0 && !los_blocked(scene, tx, rx))
        paths.push_back(make_path(PathKind::Los, d, rx - tx, tx - rx, carrier_hz));

    const double nudge = 1e-6 * scene.cell_m;
    for (const auto& f : faces) {
        const double st = f.outward * (component(tx, f.axis) - f.coord);
        const double sr = f.outward * (component(rx, f.axis) - f.coord);
        if (st <= 0.0 || sr <= 0.0)
            continue;
        Vec3 img = tx;
        if (f.axis == 0)
            img.x = 2.0 * f.coord - tx.x;
        else
            img.y = 2.0 * f.coord - tx.y;
        const double denom = component(rx, f.axis) - component(img, f.axis);
        if (denom == 0.0)
            continue;
        const double t = (f.coord - component(img, f.axis)) / denom;
        Vec3 hit = img + t * (rx - img);
        const double along = f.axis == 0 ? hit.y : hit.x;
        if (along < f.span_lo || along > f.span_hi || hit.z < f.z_lo || hit.z > f.z_hi)
            continue;
        Vec3 off = hit;
        if (f.axis == 0)
            off.x += f.outward * nudge;
        else
            off.y += f.outward * nudge;
        if (los_blocked(scene, tx, off) || los_blocked(scene, off, rx))
            continue;
        paths.push_back(make_path(PathKind::Reflection, norm(rx - img), hit - tx, hit - rx, carrier_hz));
    }
    return paths;
}

std::vector<PathComponent> trace_paths(const SceneMap& scene, Vec3 tx, Vec3 rx, double carrier_hz)
{
    return trace_paths(scene, extract_faces(scene), tx, rx, carrier_hz);
}

ComplexMatrix synthesize_channel(const std::vector<PathComponent>& paths, const ArrayGeometry& tx,
                                 const ArrayGeometry& rx, double carrier_hz)
{
    if (tx.size() == 0 || rx.size() == 0)
        throw std::invalid_argument("synthesize_channel: empty array");
    ComplexMatrix H(rx.size(), tx.size());
    for (const auto& p : paths) {
        const auto at = steering_vector(tx, p.aod.theta, p.aod.phi);
        const auto ar = steering_vector(rx, p.aoa.theta, p.aoa.phi);
        const cd c = p.gain * std::polar(1.0, -2.0 * std::numbers::pi * carrier_hz * p.delay_s);
        for (std::size_t r = 0; r < rx.size(); ++r) {
            const cd cr = c * ar[r];
            for (std::size_t t = 0; t < tx.size(); ++t)
                H(r, t) += cr * std::conj(at[t]);
        }
    }
    return H;
}

std::vector<cd> ChannelSample::csi_vector(std::size_t r) const
{
    auto v = H.row(r);
    for (auto& z : v)
        z = std::conj(z);
    return v;
}

ComplexMatrix add_noise(const ComplexMatrix& H, double snr_db, Rng& rng)
{
    const double power = frobenius_norm_sq(H);
    if (power == 0.0)
        throw std::invalid_argument("add_noise: zero channel has no defined SNR");
    if (std::isinf(snr_db) && snr_db > 0.0)
        return H;
    const double elems = static_cast<double>(H.rows() * H.cols());
    const double var = power / (elems * std::pow(10.0, snr_db / 10.0));
    const double sd = std::sqrt(var / 2.0);
    ComplexMatrix out = H;
    for (auto& z : out.data()) {
        const double re = rng.normal(0.0, sd);
        const double im = rng.normal(0.0, sd);
        z += cd(re, im);
    }
    return out;
}

} // namespace wfm
