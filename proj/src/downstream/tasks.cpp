// SPDX-License-Identifier: Apache-2.0
#include "wfm/downstream.hpp"
#include "wfm/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wfm {

double median_error_m(const std::vector<std::array<double, 2>>& pred, const std::vector<std::array<double, 2>>& truth)
{
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("median_error_m: need equally sized, non-empty inputs");
    std::vector<double> e(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        e[i] = std::hypot(pred[i][0] - truth[i][0], pred[i][1] - truth[i][1]);
    return sum_rate_ecdf(std::move(e)).quantile(0.5);
}

namespace {

ComplexMatrix noisy_channel(const ChannelSample& s, double snr_db, std::uint64_t seed, std::size_t id)
{
    if (std::isinf(snr_db))
        return s.H;
    Rng rng(stream_seed(seed, 0x6e6f697365ULL, id));
    return add_noise(s.H, snr_db, rng);
}

std::vector<std::size_t> nested_prefix(std::vector<std::size_t> ids, double ratio)
{
    const auto n = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ids.size()))));
    ids.resize(std::min(n, ids.size()));
    return ids;
}

} // namespace

TaskFeatures task_features(const WfmModel<float>& model, const Dataset& ds, const std::vector<std::size_t>& ids,
                           const Normalization& norm, const std::vector<std::size_t>& visible, double snr_db,
                           std::uint64_t noise_seed, std::size_t rx)
{
    const auto& p = model.profile();
    TaskFeatures f;
    const std::size_t hw = p.n_t();
    std::vector<std::uint8_t> vis_ant(hw, 0);
    for (auto i : visible)
        for (auto a : csi_patch_antennas(p, i))
            vis_ant[a] = 1;
    for (auto id : ids) {
        const auto& s = ds.samples.at(id);
        const auto H = noisy_channel(s, snr_db, noise_seed, id);
        const auto row = H.row(rx);
        const auto tb = tokenize(row, ds.scene_of(s), s.rx_x, s.rx_y, p, norm);
        f.physc.push(encode_partial(model, tb, visible));
        f.raw.push(raw_partial_features(tb, visible));
        std::vector<double> grid(2 * hw, 0.0);
        for (std::size_t m = 0; m < p.n_y; ++m)
            for (std::size_t n = 0; n < p.n_x; ++n) {
                const std::size_t a = n + m * p.n_x;
                if (!vis_ant[a])
                    continue;
                grid[n * p.n_y + m] = row[a].real() / norm.csi_rms;
                grid[hw + n * p.n_y + m] = row[a].imag() / norm.csi_rms;
            }
        f.full.push(grid);
    }
    return f;
}

LocalizationReport eval_localization(const WfmModel<float>& model, const Dataset& ds,
                                     const std::vector<std::size_t>& train_ids, const std::vector<std::size_t>& test_ids,
                                     const Normalization& norm, const LocalizationConfig& cfg)
{
    const auto& p = model.profile();
    const auto visible = visible_patches({cfg.visible_fraction, cfg.seed}, p.csi_tokens());
    const auto tr = task_features(model, ds, train_ids, norm, visible, cfg.snr_db, cfg.seed);
    const auto te = task_features(model, ds, test_ids, norm, visible, cfg.snr_db, cfg.seed);
    std::vector<double> y;
    for (auto id : train_ids) {
        const auto l = normalize_location(norm, ds.samples[id].rx_x, ds.samples[id].rx_y);
        y.insert(y.end(), l.begin(), l.end());
    }
    std::vector<std::array<double, 2>> truth;
    for (auto id : test_ids)
        truth.push_back({ds.samples[id].rx_x, ds.samples[id].rx_y});
    auto median_of = [&](const Probe& probe, const FeatureSet& x) {
        const auto out = probe.predict(x);
        std::vector<std::array<double, 2>> pred;
        for (std::size_t i = 0; i < x.rows(); ++i)
            pred.push_back(denormalize_location(norm, out[2 * i], out[2 * i + 1]));
        return median_error_m(pred, truth);
    };

    LocalizationReport r;
    r.n_train = train_ids.size();
    r.n_test = test_ids.size();
    ProbeConfig pc = cfg.probe;
    pc.tanh_output = pc.kind == ProbeKind::Mlp;
    if (pc.kind == ProbeKind::Cnn)
        throw std::invalid_argument("eval_localization: the CNN baseline runs on raw grids only");
    Probe physc(tr.physc.dim, 2, pc);
    physc.fit_regression(tr.physc, y);
    r.median_physc_m = median_of(physc, te.physc);

    ProbeConfig rc = pc;
    rc.proj_dim = p.embed_dim;
    Probe raw(tr.raw.dim, 2, rc);
    raw.fit_regression(tr.raw, y);
    r.median_raw_m = median_of(raw, te.raw);
    return r;
}

RateTable eval_sum_rate_mu(const Dataset& ds, const std::vector<std::vector<std::size_t>>& groups,
                           const std::vector<std::size_t>& predicted_beam, const std::vector<std::size_t>& oracle_beam)
{
    const auto& p = ds.manifest.profile;
    const auto cb = dft_codebook(p.n_x, p.n_y);
    RateTable t;
    for (const auto& g : groups) {
        ComplexMatrix H(g.size(), p.n_t());
        std::vector<std::size_t> pb, ob;
        for (std::size_t k = 0; k < g.size(); ++k) {
            for (std::size_t a = 0; a < p.n_t(); ++a)
                H(k, a) = ds.samples.at(g[k]).H(0, a);
            pb.push_back(predicted_beam.at(g[k]));
            ob.push_back(oracle_beam.at(g[k]));
        }
        const double s2 = noise_power_for_snr(H, 1.0, p.snr_db);
        const double alpha = default_rzf_alpha(g.size(), s2, 1.0);
        const double rp = mu_solution_for_beams(H, cb, pb, alpha, 1.0, s2).sum_rate;
        const double ro = mu_solution_for_beams(H, cb, ob, alpha, 1.0, s2).sum_rate;
        t.predicted.push_back(rp);
        t.oracle.push_back(ro);
        t.ratio.push_back(ro > 0.0 ? rp / ro : 0.0);
    }
    if (!t.ratio.empty())
        t.mean_ratio = std::accumulate(t.ratio.begin(), t.ratio.end(), 0.0) / static_cast<double>(t.ratio.size());
    t.ecdf = sum_rate_ecdf(t.predicted);
    return t;
}

RateTable eval_sum_rate_su(const Dataset& ds, const std::vector<std::size_t>& ids,
                           const std::vector<std::vector<std::size_t>>& predicted,
                           const std::vector<std::vector<std::size_t>>& oracle)
{
    const auto& p = ds.manifest.profile;
    const auto cb = dft_codebook(p.n_x, p.n_y);
    const auto cb_rx = dft_codebook(p.su_rx, 1);
    const std::size_t ns = p.su_streams;
    auto rate = [&](const ComplexMatrix& H, const std::vector<std::size_t>& sel) {
        if (sel.size() != 2 * ns)
            throw std::invalid_argument("eval_sum_rate_su: selection must hold tx then rx indices");
        const std::vector<std::size_t> tx(sel.begin(), sel.begin() + static_cast<std::ptrdiff_t>(ns));
        const std::vector<std::size_t> rx(sel.begin() + static_cast<std::ptrdiff_t>(ns), sel.end());
        return su_digital(H, rf_from_beams(cb, tx), rf_from_beams(cb_rx, rx), ns, p.snr_db).spectral_efficiency;
    };
    RateTable t;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& H = ds.samples.at(ids[i]).H;
        const double rp = rate(H, predicted.at(i));
        const double ro = rate(H, oracle.at(i));
        t.predicted.push_back(rp);
        t.oracle.push_back(ro);
        t.ratio.push_back(ro > 0.0 ? rp / ro : 0.0);
    }
    if (!t.ratio.empty())
        t.mean_ratio = std::accumulate(t.ratio.begin(), t.ratio.end(), 0.0) / static_cast<double>(t.ratio.size());
    t.ecdf = sum_rate_ecdf(t.predicted);
    return t;
}

MuTaskReport run_mu_task(const WfmModel<float>& model, const Dataset& ds, const std::vector<std::size_t>& train_ids,
                         const std::vector<std::size_t>& test_ids, const Normalization& norm, const MuTaskConfig& cfg)
{
    const auto& p = model.profile();
    const auto cb = dft_codebook(p.n_x, p.n_y);
    const std::size_t nc = cb.size();
    std::vector<std::size_t> oracle(ds.samples.size(), 0);
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        oracle[i] = select_beams_mu(ComplexMatrix(1, p.n_t(), ds.samples[i].H.row(0)), cb).index[0];

    const auto visible = visible_patches({cfg.visible_fraction, cfg.seed}, p.csi_tokens());
    auto shuffled = train_ids;
    Rng rng(stream_seed(cfg.seed, 0x6d75ULL));
    rng.shuffle(shuffled);
    const auto tr_all = task_features(model, ds, shuffled, norm, visible, p.snr_db, cfg.seed);
    const auto te = task_features(model, ds, test_ids, norm, visible, p.snr_db, cfg.seed);
    std::vector<std::size_t> test_labels;
    for (auto id : test_ids)
        test_labels.push_back(oracle[id]);
    const auto groups = mu_groups(ds, test_ids, p.mu_users);

    MuTaskReport rep;
    for (double ratio : cfg.ratios) {
        const auto sub_ids = nested_prefix(shuffled, ratio);
        std::vector<std::size_t> rows(sub_ids.size()), labels;
        std::iota(rows.begin(), rows.end(), 0);
        for (auto id : sub_ids)
            labels.push_back(oracle[id]);
        Probe probe(tr_all.physc.dim, std::vector<std::size_t>{nc}, cfg.probe);
        probe.fit_classifier(tr_all.physc.subset(rows), labels);
        const auto logits = probe.predict(te.physc);
        MuSweepRow row;
        row.ratio = ratio;
        row.n_train = sub_ids.size();
        row.top1 = top_k_accuracy(logits, nc, 0, nc, test_labels, 1, 0, 1);
        row.top5 = top_k_accuracy(logits, nc, 0, nc, test_labels, 1, 0, std::min<std::size_t>(5, nc));
        std::vector<std::size_t> pred = oracle;
        for (std::size_t i = 0; i < test_ids.size(); ++i)
            pred[test_ids[i]] = top_k(logits.data() + i * nc, nc, 1)[0];
        row.mean_rate_ratio = eval_sum_rate_mu(ds, groups, pred, oracle).mean_ratio;
        rep.rows.push_back(row);
    }
    std::vector<std::size_t> rnd = oracle;
    Rng rr(stream_seed(cfg.seed, 0x72616e64ULL));
    for (auto id : test_ids)
        rnd[id] = rr.uniform_index(nc);
    rep.random_rate_ratio = eval_sum_rate_mu(ds, groups, rnd, oracle).mean_ratio;
    rep.oracle_rate_ratio = eval_sum_rate_mu(ds, groups, oracle, oracle).mean_ratio;
    return rep;
}

std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n)
{
    if (i >= j || j >= n)
        throw std::invalid_argument("pair_index: need i < j < n");
    // Pairs (0,1), (0,2), ..., (0,n-1), (1,2), ...
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

std::pair<std::size_t, std::size_t> pair_from_index(std::size_t idx, std::size_t n)
{
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t row = n - 1 - i;
        if (idx < row)
            return {i, i + 1 + idx};
        idx -= row;
    }
    throw std::out_of_range("pair_from_index: index out of range");
}

std::vector<std::size_t> decode_pair(const double* pos0, const double* pos1, std::size_t n)
{
    const std::size_t a = top_k(pos0, n, 1)[0];
    const auto b2 = top_k(pos1, n, 2);
    const std::size_t b = b2[0] != a ? b2[0] : b2[1];
    return {std::min(a, b), std::max(a, b)};
}

std::vector<double> su_features(const WfmModel<float>& model, const Dataset& ds, std::size_t id,
                                const Normalization& norm, const std::vector<std::size_t>& visible)
{
    const auto& s = ds.samples.at(id);
    std::vector<double> out;
    for (std::size_t r = 0; r < s.H.rows(); ++r) {
        const auto tb = tokenize(s.H.row(r), ds.scene_of(s), s.rx_x, s.rx_y, model.profile(), norm);
        const auto z = encode_partial(model, tb, visible);
        out.insert(out.end(), z.begin(), z.end());
    }
    return out;
}

SuTaskReport finetune_su(const WfmModel<float>& model, const Dataset& ds, const LabelSet& labels,
                         const std::vector<std::size_t>& train_ids, const std::vector<std::size_t>& test_ids,
                         const Normalization& norm, const SuTaskConfig& cfg)
{
    const auto& p = model.profile();
    if (p.su_streams != 2)
        throw std::invalid_argument("finetune_su: the pair heads need su_streams = 2");
    if (labels.task != LabelTask::SuPair)
        throw std::invalid_argument("finetune_su: expects su-pair labels");
    const std::size_t nc = p.n_t(), nrx = p.su_rx, npair = binomial(nrx, 2);
    const std::size_t nr = ds.manifest.n_r;
    const auto visible = visible_patches({cfg.visible_fraction, cfg.seed}, p.csi_tokens());

    WfmModel<float> trunk(p, 0);
    trunk.params().copy_values_from(model.params());
    ParameterSet<float> head_ps;
    Rng hr(stream_seed(cfg.seed, 0x737568656164ULL));
    Linear<float> head(head_ps, "su_head", nr * p.embed_dim, 2 * nc + npair, hr);

    std::vector<std::size_t> l0, l1, lr;
    for (auto id : train_ids) {
        const auto& v = labels.indices.at(id);
        l0.push_back(v.at(0));
        l1.push_back(v.at(1));
        lr.push_back(pair_index(v.at(2), v.at(3), nrx));
    }
    const auto w0 = class_weights(l0, nc), w1 = class_weights(l1, nc), wr = class_weights(lr, npair);

    std::vector<std::vector<TokenBatch>> tokens_of;
    auto tokens_for = [&](std::size_t id) {
        const auto& s = ds.samples.at(id);
        std::vector<TokenBatch> t;
        for (std::size_t r = 0; r < s.H.rows(); ++r)
            t.push_back(tokenize(s.H.row(r), ds.scene_of(s), s.rx_x, s.rx_y, p, norm));
        return t;
    };
    for (auto id : train_ids)
        tokens_of.push_back(tokens_for(id));
    const auto vis = partial_visibility(trunk.layout(), visible);
    auto logits_of = [&](const std::vector<TokenBatch>& tbs) {
        std::vector<Tensor<float>> z;
        for (const auto& tb : tbs)
            z.push_back(trunk.encode(tb, vis).physc);
        return head(z.size() == 1 ? z[0] : concat_cols(z));
    };

    AdamConfig ha;
    ha.lr = cfg.head_lr;
    AdamConfig ta = ha;
    ta.lr = cfg.head_lr * cfg.trunk_lr_scale;
    Adam<float> opt_head(head_ps, ha), opt_trunk(trunk.params(), ta);
    std::vector<std::size_t> order(train_ids.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(stream_seed(cfg.seed, 0x7375ULL));
    const std::size_t bs = 16;
    for (std::size_t ep = 0; ep < cfg.epochs; ++ep) {
        rng.shuffle(order);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
            const std::size_t b1 = std::min(order.size(), b0 + bs);
            head_ps.zero_grad();
            trunk.params().zero_grad();
            for (std::size_t k = b0; k < b1; ++k) {
                const std::size_t i = order[k];
                const auto lg = logits_of(tokens_of[i]);
                auto ce = [&](std::size_t off, std::size_t m, std::size_t label, double w) {
                    const auto ls = log_softmax(slice_cols(lg, off, m));
                    return scale(gather(ls, {static_cast<std::int64_t>(label)}, {1}), static_cast<float>(-w));
                };
                const auto loss = add(add(ce(0, nc, l0[i], w0[l0[i]]), ce(nc, nc, l1[i], w1[l1[i]])),
                                      ce(2 * nc, npair, lr[i], wr[lr[i]]));
                sum(loss).backward();
            }
            const double scl = 1.0 / static_cast<double>(b1 - b0);
            opt_head.step(ha.lr, scl);
            opt_trunk.step(ta.lr, scl);
        }
    }

    SuTaskReport rep;
    rep.feature_dim = nr * p.embed_dim;
    std::vector<std::vector<std::size_t>> pred, oracle, rnd;
    Rng rr(stream_seed(cfg.seed, 0x72616e64ULL));
    std::size_t tx_ok = 0, rx_ok = 0, joint = 0;
    for (auto id : test_ids) {
        const auto lg = logits_of(tokens_for(id));
        std::vector<double> v(lg.values().begin(), lg.values().end());
        auto tx = decode_pair(v.data(), v.data() + nc, nc);
        const auto [r0, r1] = pair_from_index(top_k(v.data() + 2 * nc, npair, 1)[0], nrx);
        const auto& o = labels.indices.at(id);
        const bool t_ok = tx[0] == o[0] && tx[1] == o[1];
        const bool r_ok = r0 == o[2] && r1 == o[3];
        tx_ok += t_ok;
        rx_ok += r_ok;
        joint += t_ok && r_ok;
        pred.push_back({tx[0], tx[1], r0, r1});
        oracle.push_back(o);
        auto rt = rr.sample_without_replacement(nc, 2);
        auto rx2 = rr.sample_without_replacement(nrx, 2);
        std::sort(rt.begin(), rt.end());
        std::sort(rx2.begin(), rx2.end());
        rnd.push_back({rt[0], rt[1], rx2[0], rx2[1]});
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, test_ids.size()));
    rep.tx_pair_accuracy = static_cast<double>(tx_ok) / n;
    rep.rx_pair_accuracy = static_cast<double>(rx_ok) / n;
    rep.joint_accuracy = static_cast<double>(joint) / n;
    rep.mean_rate_ratio = eval_sum_rate_su(ds, test_ids, pred, oracle).mean_ratio;
    rep.random_rate_ratio = eval_sum_rate_su(ds, test_ids, rnd, oracle).mean_ratio;
    return rep;
}

} // namespace wfm
