// SPDX-License-Identifier: Apache-2.0
#include "wfm/pretrain.hpp"
#include "wfm/spectra.hpp"

#include <cmath>
#include <cstring>

namespace wfm {

std::vector<float> spectrum_target(const ChannelSample& s, const Profile& p, double csi_rms)
{
    auto h = s.csi_vector(0);
    for (auto& z : h)
        z /= csi_rms;
    const auto fine = spatial_spectrum(h, p.n_x, p.n_y);
    const auto coarse = coarsen_spectrum(fine, p.n_x, p.n_y, p.coarse_x, p.coarse_y);
    std::vector<float> out(coarse.size());
    const double nt = static_cast<double>(p.n_t());
    for (std::size_t i = 0; i < coarse.size(); ++i)
        out[i] = static_cast<float>(coarse[i] / nt);
    return out;
}

PretrainExample make_example(const Dataset& ds, std::size_t sample_id, const Normalization& norm)
{
    const auto& p = ds.manifest.profile;
    const auto& s = ds.samples.at(sample_id);
    const auto& scene = ds.scene_of(s);
    PretrainExample ex;
    ex.sample_id = sample_id;
    ex.tokens = tokenize(s.H.row(0), scene, s.rx_x, s.rx_y, p, norm);
    ex.csi_target = ex.tokens.csi;
    const auto occ = build_occupancy(scene, p.scene_patch);
    ex.occupancy.assign(occ.bits.begin(), occ.bits.end());
    ex.spectrum = spectrum_target(s, p, norm.csi_rms);
    ex.mask = mask_context(p, scene, s);
    return ex;
}

namespace {

Tensor<float> rows_of(const std::vector<float>& data, std::size_t width, const std::vector<std::size_t>& rows)
{
    std::vector<float> v;
    v.reserve(rows.size() * width);
    for (auto r : rows)
        v.insert(v.end(), data.begin() + static_cast<std::ptrdiff_t>(r * width),
                 data.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    return Tensor<float>({rows.size(), width}, std::move(v));
}

// Doubles travel through f32 records as their two 32-bit halves, bit for bit.
void split_double(double x, float& hi, float& lo)
{
    std::uint32_t w[2];
    std::memcpy(w, &x, 8);
    std::memcpy(&lo, &w[0], 4);
    std::memcpy(&hi, &w[1], 4);
}

double join_double(float hi, float lo)
{
    std::uint32_t w[2];
    std::memcpy(&w[0], &lo, 4);
    std::memcpy(&w[1], &hi, 4);
    double x;
    std::memcpy(&x, w, 8);
    return x;
}

} // namespace

LossComponents<float> example_losses(const WfmModel<float>& model, const PretrainExample& ex, const MaskPlan& plan,
                                     const LossWeights& w, bool raw_phase)
{
    const auto vis = plan.visibility(model.layout());
    const auto enc = model.encode(ex.tokens, vis);
    const auto dec = model.decode(enc, vis);
    LossComponents<float> c;
    if (w.csi > 0 && dec.csi.defined())
        c.csi = loss_csi(dec.csi, rows_of(ex.csi_target, ex.tokens.csi_feat, dec.csi_idx), raw_phase);
    if (w.occ > 0 && dec.occ.defined())
        c.occ = loss_occ(dec.occ, rows_of(ex.occupancy, 1, dec.scene_idx));
    if (w.loc > 0 && dec.loc.defined())
        c.loc = loss_loc(dec.loc, Tensor<float>({1, 2}, {ex.tokens.loc[0], ex.tokens.loc[1]}));
    if (w.spec > 0)
        c.spec = loss_spectrum(dec.physc_map, Tensor<float>({ex.spectrum.size()}, ex.spectrum), w.alpha, w.eps);
    return c;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir) { return dir / "checkpoint.wfmc"; }

void save_training_checkpoint(const std::filesystem::path& path, const WfmModel<float>& model, const Adam<float>& opt,
                              const TrainState& state, const Normalization& norm)
{
    if (state.step >= (1u << 24))
        throw CheckpointError("step counter exceeds the exactly representable range");
    auto recs = model.params().to_records("param/");
    const auto a = opt.to_records();
    recs.insert(recs.end(), a.begin(), a.end());
    recs.push_back({"train/state", {2}, {static_cast<float>(state.epoch), static_cast<float>(state.step)}});
    CheckpointRecord h{"train/history", {state.history.size(), 16}, {}};
    for (const auto& e : state.history)
        for (double v : {double(e.epoch), double(e.step), e.csi, e.loc, e.occ, e.spec, e.total, e.lr}) {
            float hi, lo;
            split_double(v, hi, lo);
            h.values.push_back(hi);
            h.values.push_back(lo);
        }
    recs.push_back(std::move(h));
    CheckpointRecord nr{"norm", {10}, std::vector<float>(10)};
    const double nv[5] = {norm.csi_rms, norm.height_scale, norm.half_extent, norm.center_x, norm.center_y};
    for (int i = 0; i < 5; ++i)
        split_double(nv[i], nr.values[2 * i], nr.values[2 * i + 1]);
    recs.push_back(std::move(nr));
    write_checkpoint(path, recs);
}

TrainState load_training_checkpoint(const std::filesystem::path& path, WfmModel<float>& model, Adam<float>* opt,
                                    Normalization* norm)
{
    const auto recs = read_checkpoint(path);
    model.params().load_records(recs, "param/");
    TrainState st;
    const auto& s = find_record(recs, "train/state");
    st.epoch = static_cast<std::size_t>(s.values.at(0));
    st.step = static_cast<std::size_t>(s.values.at(1));
    const auto& h = find_record(recs, "train/history");
    for (std::size_t i = 0; i + 16 <= h.values.size(); i += 16) {
        double v[8];
        for (int k = 0; k < 8; ++k)
            v[k] = join_double(h.values[i + 2 * k], h.values[i + 2 * k + 1]);
        EpochLog e;
        e.epoch = static_cast<std::size_t>(v[0]);
        e.step = static_cast<std::size_t>(v[1]);
        e.csi = v[2];
        e.loc = v[3];
        e.occ = v[4];
        e.spec = v[5];
        e.total = v[6];
        e.lr = v[7];
        st.history.push_back(e);
    }
    if (opt)
        opt->load_records(recs, st.step);
    if (norm) {
        const auto& n = find_record(recs, "norm").values;
        norm->csi_rms = join_double(n.at(0), n.at(1));
        norm->height_scale = join_double(n.at(2), n.at(3));
        norm->half_extent = join_double(n.at(4), n.at(5));
        norm->center_x = join_double(n.at(6), n.at(7));
        norm->center_y = join_double(n.at(8), n.at(9));
    }
    return st;
}

void write_train_log(const std::filesystem::path& path, const TrainState& state, std::uint64_t config_hash,
                     std::uint64_t seed)
{
    CsvWriter w(path, config_hash, seed, {"epoch", "step", "L_csi", "L_loc", "L_occ", "L_spec", "total", "lr"});
    for (const auto& e : state.history)
        w.row({std::to_string(e.epoch), std::to_string(e.step), fmt_double(e.csi), fmt_double(e.loc),
               fmt_double(e.occ), fmt_double(e.spec), fmt_double(e.total), fmt_double(e.lr)});
    w.close();
}

TrainState train(WfmModel<float>& model, const Dataset& ds, const std::vector<std::size_t>& train_ids,
                 const TrainConfig& cfg)
{
    if (train_ids.empty())
        throw std::invalid_argument("train: empty training set");
    if (cfg.batch_size == 0 || cfg.epochs == 0)
        throw std::invalid_argument("train: batch size and epochs must be positive");
    cfg.weights.validate();
    const auto norm = make_normalization(ds.manifest.profile, ds.manifest.csi_rms);

    std::vector<PretrainExample> examples;
    examples.reserve(train_ids.size());
    for (auto id : train_ids)
        examples.push_back(make_example(ds, id, norm));

    Adam<float> opt(model.params(), cfg.adam);
    TrainState st;
    const bool files = !cfg.out_dir.empty();
    const auto ckpt = files ? checkpoint_path(cfg.out_dir) : std::filesystem::path();
    if (files) {
        std::filesystem::create_directories(cfg.out_dir);
        if (std::filesystem::exists(ckpt))
            st = load_training_checkpoint(ckpt, model, &opt);
    }

    const std::size_t n = examples.size();
    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    std::size_t ran = 0;
    for (std::size_t epoch = st.epoch; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i)
            order[i] = i;
        Rng shuffle_rng(stream_seed(cfg.seed, 0x6f72646572ULL, epoch));
        shuffle_rng.shuffle(order);

        double sum[4] = {0, 0, 0, 0}, total_sum = 0.0;
        std::size_t cnt[4] = {0, 0, 0, 0};
        double lr = 0.0;
        for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(n, b0 + cfg.batch_size);
            model.params().zero_grad();
            for (std::size_t k = b0; k < b1; ++k) {
                const auto& ex = examples[order[k]];
                Rng rng(stream_seed(cfg.seed, epoch + 1, ex.sample_id));
                const auto plan = make_mask_plan(epoch, cfg.epochs, ex.mask, rng, cfg.stage1_fraction);
                const auto comps = example_losses(model, ex, plan, cfg.weights, cfg.raw_phase);
                const auto total = total_loss(comps, cfg.weights);
                const double tv = total.item();
                if (!std::isfinite(tv))
                    throw TrainingDivergedError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                                ", sample " + std::to_string(ex.sample_id));
                try {
                    total.backward();
                } catch (const NonFiniteError& e) {
                    throw TrainingDivergedError(std::string("train: non-finite gradient: ") + e.what());
                }
                const std::optional<Tensor<float>>* parts[4] = {&comps.csi, &comps.loc, &comps.occ, &comps.spec};
                for (int c = 0; c < 4; ++c)
                    if (*parts[c]) {
                        sum[c] += (*parts[c])->item();
                        ++cnt[c];
                    }
                total_sum += tv;
            }
            lr = cosine_lr(cfg.adam.lr, st.step, total_steps);
            try {
                opt.step(lr, 1.0 / static_cast<double>(b1 - b0));
            } catch (const NonFiniteError& e) {
                throw TrainingDivergedError(std::string("train: ") + e.what());
            }
            ++st.step;
        }
        EpochLog log;
        log.epoch = epoch + 1;
        log.step = st.step;
        double* dst[4] = {&log.csi, &log.loc, &log.occ, &log.spec};
        for (int c = 0; c < 4; ++c)
            *dst[c] = cnt[c] ? sum[c] / static_cast<double>(cnt[c]) : 0.0;
        log.total = total_sum / static_cast<double>(n);
        log.lr = lr;
        st.history.push_back(log);
        st.epoch = epoch + 1;
        ++ran;

        const bool last = st.epoch == cfg.epochs || (cfg.stop_after && ran == cfg.stop_after);
        if (files && ((cfg.checkpoint_every && st.epoch % cfg.checkpoint_every == 0) || last)) {
            save_training_checkpoint(ckpt, model, opt, st, norm);
            write_train_log(cfg.out_dir / "train_log.csv", st, ds.manifest.config_hash(), cfg.seed);
        }
        if (cfg.stop_after && ran == cfg.stop_after)
            break;
    }
    return st;
}

CsiEval evaluate_masked_csi(const WfmModel<float>& model, const Dataset& fit_ds, const std::vector<std::size_t>& fit_ids,
                            const Dataset& eval_ds, const std::vector<std::size_t>& eval_ids, double ratio,
                            std::uint64_t seed)
{
    const auto& p = model.profile();
    const auto norm = make_normalization(p, fit_ds.manifest.csi_rms);
    const std::size_t n_csi = p.csi_tokens();
    const std::size_t feat = 2 * p.csi_patch * p.csi_patch;
    const std::size_t entries = n_csi * feat / 2;

    std::vector<double> mag(entries, 0.0), cre(entries, 0.0), cim(entries, 0.0);
    for (auto id : fit_ids) {
        const auto f = csi_patch_features(fit_ds.samples.at(id).H.row(0), p, norm.csi_rms);
        for (std::size_t e = 0; e < entries; ++e) {
            const double m = std::hypot(f[2 * e], f[2 * e + 1]);
            mag[e] += m;
            if (m > 0) {
                cre[e] += f[2 * e] / m;
                cim[e] += f[2 * e + 1] / m;
            }
        }
    }
    std::vector<float> base(n_csi * feat);
    for (std::size_t e = 0; e < entries; ++e) {
        const double m = mag[e] / static_cast<double>(std::max<std::size_t>(1, fit_ids.size()));
        const double ph = std::atan2(cim[e], cre[e]);
        base[2 * e] = static_cast<float>(m * std::cos(ph));
        base[2 * e + 1] = static_cast<float>(m * std::sin(ph));
    }

    CsiEval out;
    double sq_model = 0.0, sq_base = 0.0;
    std::size_t count = 0;
    for (auto id : eval_ids) {
        const auto& s = eval_ds.samples.at(id);
        const auto tb = tokenize(s.H.row(0), eval_ds.scene_of(s), s.rx_x, s.rx_y, p, norm);
        Rng rng(stream_seed(seed, 0x6576616cULL, id));
        auto masked = rng.sample_without_replacement(n_csi, mask_count(ratio, n_csi));
        std::sort(masked.begin(), masked.end());
        auto vis = Visibility::all_visible(model.layout());
        for (auto i : masked)
            vis.csi_masked[i] = 1;
        const auto dec = model.decode(model.encode(tb, vis), vis);
        const auto truth = rows_of(tb.csi, feat, masked);
        const double lm = loss_csi(dec.csi.detach(), truth).item();
        const double lb = loss_csi(rows_of(base, feat, masked), truth).item();
        const double m = static_cast<double>(masked.size() * feat / 2);
        sq_model += lm * lm * m;
        sq_base += lb * lb * m;
        count += masked.size() * feat / 2;
        ++out.samples;
    }
    if (count == 0)
        throw std::invalid_argument("evaluate_masked_csi: empty evaluation set");
    out.model_rmse = std::sqrt(sq_model / static_cast<double>(count));
    out.baseline_rmse = std::sqrt(sq_base / static_cast<double>(count));
    return out;
}

} // namespace wfm
