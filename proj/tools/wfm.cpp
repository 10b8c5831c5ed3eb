// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, pretraining, downstream
// evaluation and inspection utilities. Every file written carries the
// reproducibility header.
#include "wfm/composite_check.hpp"
#include "wfm/downstream.hpp"
#include "wfm/gradcheck.hpp"
#include "wfm/pretrain.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

using namespace wfm;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string profile = "desk";
    std::uint64_t seed = 1;
    std::string config;
    std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--profile", c.profile, "Scale profile: desk or paper")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    cmd->add_option("--config", c.config, "key=value file overriding profile fields");
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

void warn_if_paper(const Profile& p)
{
    if (p.name == "paper")
        std::cerr << "warning: the paper profile (" << p.n_x << "x" << p.n_y << " array, " << p.grid_n << "x"
                  << p.grid_n << " scenes, " << p.enc_layers
                  << " encoder layers) needs hours of CPU time and several GB of memory per run\n";
}

Profile resolve_profile(const Common& c)
{
    Profile p = profile_by_name(c.profile);
    if (!c.config.empty())
        apply_overrides(p, read_kv_file(c.config));
    warn_if_paper(p);
    return p;
}

std::uint64_t profile_hash(const Profile& p)
{
    std::ostringstream os;
    for (const auto& [k, v] : profile_fields(p))
        os << k << '=' << v << ';';
    return fnv1a(os.str());
}

fs::path out_dir(const Common& c)
{
    fs::create_directories(c.out);
    return c.out;
}

Dataset load_data(const std::string& dir)
{
    auto ds = read_dataset(dir);
    warn_if_paper(ds.manifest.profile);
    return ds;
}

std::vector<std::size_t> all_ids(const Dataset& ds)
{
    std::vector<std::size_t> ids(ds.samples.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        ids[i] = i;
    return ids;
}

/// Model for a dataset, with weights and normalization from a checkpoint when given.
struct LoadedModel {
    std::unique_ptr<WfmModel<float>> model;
    Normalization norm;
};

LoadedModel load_model(const Dataset& ds, const std::string& checkpoint, std::uint64_t seed)
{
    LoadedModel m;
    m.model = std::make_unique<WfmModel<float>>(ds.manifest.profile, seed);
    m.norm = make_normalization(ds.manifest.profile, ds.manifest.csi_rms);
    if (!checkpoint.empty()) {
        fs::path path = checkpoint;
        if (fs::is_directory(path))
            path = checkpoint_path(path);
        load_training_checkpoint(path, *m.model, nullptr, &m.norm);
    } else {
        std::cerr << "note: no checkpoint given, using an untrained model\n";
    }
    return m;
}

SplitScheme scheme_from_name(const std::string& s)
{
    if (s == "cross")
        return SplitScheme::CrossScene;
    if (s == "within")
        return SplitScheme::WithinScene;
    throw std::invalid_argument("unknown split scheme '" + s + "' (expected cross or within)");
}

// ------------------------------------------------------------------ commands

int cmd_gen_data(const Common& c, std::size_t scenes, std::size_t users, std::size_t n_r)
{
    const Profile p = resolve_profile(c);
    const auto m = make_manifest(p, scenes, users ? users : p.users_per_scene, n_r, c.seed);
    const auto ds = generate_dataset(m);
    write_dataset(c.out, ds);
    std::cout << "wrote " << ds.samples.size() << " samples in " << ds.scenes.size() << " scenes to " << c.out
              << " (config_hash=" << m.config_hash() << ")\n";
    return 0;
}

int cmd_pretrain(const Common& c, const std::string& data, TrainConfig cfg)
{
    const auto ds = load_data(data);
    WfmModel<float> model(ds.manifest.profile, c.seed);
    cfg.seed = c.seed;
    cfg.out_dir = out_dir(c);
    const auto st = train(model, ds, all_ids(ds), cfg);
    for (const auto& e : st.history)
        std::cout << "epoch " << e.epoch << "  total " << fmt_double(e.total) << "  csi " << fmt_double(e.csi)
                  << "  occ " << fmt_double(e.occ) << "  loc " << fmt_double(e.loc) << "  spec "
                  << fmt_double(e.spec) << "\n";
    std::cout << "checkpoint: " << checkpoint_path(cfg.out_dir).string() << "\n";
    return 0;
}

int cmd_probe(const Common& c, const std::string& data, const std::string& ckpt, const std::string& task,
              ProbeConfig pc, double train_fraction, double visible_fraction)
{
    const auto ds = load_data(data);
    const auto lm = load_model(ds, ckpt, c.seed);
    const auto& p = ds.manifest.profile;
    const auto split = split_dataset(ds, SplitScheme::CrossScene, train_fraction, c.seed);
    const auto visible = visible_patches({visible_fraction, c.seed}, p.csi_tokens());
    const auto tr = task_features(*lm.model, ds, split.train, lm.norm, visible, p.snr_db, c.seed).physc;
    const auto te = task_features(*lm.model, ds, split.test, lm.norm, visible, p.snr_db, c.seed).physc;
    pc.seed = c.seed;
    const auto dir = out_dir(c);
    const auto hash = ds.manifest.config_hash();

    if (task == "location") {
        std::vector<double> y;
        for (auto i : split.train) {
            const auto u = normalize_location(lm.norm, ds.samples[i].rx_x, ds.samples[i].rx_y);
            y.insert(y.end(), u.begin(), u.end());
        }
        pc.tanh_output = pc.kind == ProbeKind::Mlp;
        Probe probe(tr.dim, 2, pc);
        probe.fit_regression(tr, y);
        const auto out = probe.predict(te);
        CsvWriter w(dir / "predictions.csv", hash, c.seed, {"sample", "x", "y", "pred_x", "pred_y"});
        std::vector<std::array<double, 2>> pred, truth;
        for (std::size_t r = 0; r < split.test.size(); ++r) {
            const auto& s = ds.samples[split.test[r]];
            pred.push_back(denormalize_location(lm.norm, out[2 * r], out[2 * r + 1]));
            truth.push_back({s.rx_x, s.rx_y});
            w.row({std::to_string(split.test[r]), fmt_double(s.rx_x), fmt_double(s.rx_y), fmt_double(pred.back()[0]),
                   fmt_double(pred.back()[1])});
        }
        w.close();
        std::cout << "median error " << fmt_double(median_error_m(pred, truth)) << " m over " << pred.size()
                  << " test samples\n";
        return 0;
    }
    if (task == "mu-beam") {
        const auto labels = oracle_labels(ds, LabelTask::MuBeam);
        std::vector<std::size_t> y, yt;
        for (auto i : split.train)
            y.push_back(labels.indices[i][0]);
        for (auto i : split.test)
            yt.push_back(labels.indices[i][0]);
        Probe probe(tr.dim, std::vector<std::size_t>{p.n_t()}, pc);
        probe.fit_classifier(tr, y);
        const auto out = probe.predict(te);
        CsvWriter w(dir / "predictions.csv", hash, c.seed, {"sample", "label", "predicted"});
        for (std::size_t r = 0; r < split.test.size(); ++r)
            w.row({std::to_string(split.test[r]), std::to_string(yt[r]),
                   std::to_string(top_k(&out[r * p.n_t()], p.n_t(), 1)[0])});
        w.close();
        std::cout << "top-1 " << fmt_double(top_k_accuracy(out, p.n_t(), 0, p.n_t(), yt, 1, 0, 1)) << "  top-5 "
                  << fmt_double(top_k_accuracy(out, p.n_t(), 0, p.n_t(), yt, 1, 0, 5)) << "\n";
        return 0;
    }
    throw std::invalid_argument("probe: unknown task '" + task + "' (expected location or mu-beam)");
}

int cmd_eval_loc(const Common& c, const std::string& data, const std::string& ckpt, LocalizationConfig lc,
                 const std::string& scheme, double train_fraction, std::uint32_t scene)
{
    const auto ds = load_data(data);
    const auto lm = load_model(ds, ckpt, c.seed);
    const auto split = split_dataset(ds, scheme_from_name(scheme), train_fraction, c.seed, scene);
    lc.seed = c.seed;
    lc.probe.seed = c.seed;
    const auto r = eval_localization(*lm.model, ds, split.train, split.test, lm.norm, lc);
    CsvWriter w(out_dir(c) / "localization.csv", ds.manifest.config_hash(), c.seed, {"metric", "value"});
    w.row({"median_error_physc_m", fmt_double(r.median_physc_m)});
    w.row({"median_error_raw_m", fmt_double(r.median_raw_m)});
    w.row({"n_train", std::to_string(r.n_train)});
    w.row({"n_test", std::to_string(r.n_test)});
    w.close();
    std::cout << "median error: physc " << fmt_double(r.median_physc_m) << " m, raw " << fmt_double(r.median_raw_m)
              << " m (" << r.n_train << " train / " << r.n_test << " test)\n";
    return 0;
}

int cmd_eval_mu(const Common& c, const std::string& data, const std::string& ckpt, MuTaskConfig mc,
                double train_fraction)
{
    const auto ds = load_data(data);
    const auto lm = load_model(ds, ckpt, c.seed);
    const auto split = split_dataset(ds, SplitScheme::CrossScene, train_fraction, c.seed);
    mc.seed = c.seed;
    mc.probe.seed = c.seed;
    const auto r = run_mu_task(*lm.model, ds, split.train, split.test, lm.norm, mc);
    CsvWriter w(out_dir(c) / "mu_sweep.csv", ds.manifest.config_hash(), c.seed,
                {"ratio", "n_train", "top1", "top5", "mean_rate_ratio"});
    for (const auto& row : r.rows) {
        w.row({fmt_double(row.ratio), std::to_string(row.n_train), fmt_double(row.top1), fmt_double(row.top5),
               fmt_double(row.mean_rate_ratio)});
        std::cout << "ratio " << fmt_double(row.ratio) << "  top1 " << fmt_double(row.top1) << "  top5 "
                  << fmt_double(row.top5) << "  rate ratio " << fmt_double(row.mean_rate_ratio) << "\n";
    }
    w.row({"random", "0", "", "", fmt_double(r.random_rate_ratio)});
    w.row({"oracle", "0", "", "", fmt_double(r.oracle_rate_ratio)});
    w.close();
    std::cout << "random beams " << fmt_double(r.random_rate_ratio) << ", oracle " << fmt_double(r.oracle_rate_ratio)
              << "\n";
    return 0;
}

int cmd_eval_su(const Common& c, const std::string& data, const std::string& ckpt, SuTaskConfig sc,
                double train_fraction, std::uint64_t su_budget)
{
    const auto ds = load_data(data);
    const auto lm = load_model(ds, ckpt, c.seed);
    const auto split = split_dataset(ds, SplitScheme::CrossScene, train_fraction, c.seed);
    const auto labels = oracle_labels(ds, LabelTask::SuPair, su_budget);
    sc.seed = c.seed;
    const auto r = finetune_su(*lm.model, ds, labels, split.train, split.test, lm.norm, sc);
    CsvWriter w(out_dir(c) / "su.csv", ds.manifest.config_hash(), c.seed, {"metric", "value"});
    w.row({"tx_pair_accuracy", fmt_double(r.tx_pair_accuracy)});
    w.row({"rx_pair_accuracy", fmt_double(r.rx_pair_accuracy)});
    w.row({"joint_accuracy", fmt_double(r.joint_accuracy)});
    w.row({"mean_rate_ratio", fmt_double(r.mean_rate_ratio)});
    w.row({"random_rate_ratio", fmt_double(r.random_rate_ratio)});
    w.row({"feature_dim", std::to_string(r.feature_dim)});
    w.close();
    std::cout << "tx " << fmt_double(r.tx_pair_accuracy) << "  rx " << fmt_double(r.rx_pair_accuracy) << "  joint "
              << fmt_double(r.joint_accuracy) << "  rate ratio " << fmt_double(r.mean_rate_ratio) << " (random "
              << fmt_double(r.random_rate_ratio) << ")\n";
    return 0;
}

int cmd_oracle_labels(const Common& c, const std::string& data, const std::string& task, std::uint64_t su_budget)
{
    const auto ds = load_data(data);
    const auto labels = oracle_labels(ds, label_task_from_name(task), su_budget);
    const auto path = out_dir(c) / "labels.csv";
    write_labels_csv(path, labels, ds.manifest.config_hash(), c.seed);
    std::cout << "wrote " << labels.indices.size() << " labels to " << path.string() << "\n";
    return 0;
}

int cmd_dump_attn(const Common& c, const std::string& data, const std::string& ckpt, std::size_t sample,
                  std::size_t layer)
{
    const auto ds = load_data(data);
    const auto lm = load_model(ds, ckpt, c.seed);
    const auto& s = ds.samples.at(sample);
    const auto& p = ds.manifest.profile;
    const auto tb = tokenize(s.H.row(0), ds.scene_of(s), s.rx_x, s.rx_y, p, lm.norm);
    const auto map = lm.model->attention_map(tb, Visibility::all_visible(lm.model->layout()), layer);
    const std::size_t P = p.scene_grid_patches();
    CsvWriter w(out_dir(c) / "attention.csv", ds.manifest.config_hash(), c.seed, {"patch", "px", "py", "weight"});
    for (std::size_t i = 0; i < map.size(); ++i)
        w.row({std::to_string(i), std::to_string(i % P), std::to_string(i / P), fmt_double(map[i])});
    w.close();
    std::cout << "attention map of layer " << layer << " for sample " << sample << " (" << P << "x" << P
              << " patches)\n";
    return 0;
}

int cmd_codebook(const Common& c)
{
    const Profile p = resolve_profile(c);
    const auto cb = dft_codebook(p.n_x, p.n_y);
    CsvWriter w(out_dir(c) / "codebook.csv", profile_hash(p), c.seed, {"beam", "kx", "ky", "antenna", "re", "im"});
    for (std::size_t j = 0; j < cb.size(); ++j) {
        const auto [kx, ky] = cb.kxky(j);
        for (std::size_t i = 0; i < cb.n_t(); ++i)
            w.row({std::to_string(j), std::to_string(kx), std::to_string(ky), std::to_string(i),
                   fmt_double(cb.beams(j, i).real()), fmt_double(cb.beams(j, i).imag())});
    }
    w.close();
    std::cout << cb.size() << " beams of " << p.n_x << "x" << p.n_y << "\n";
    return 0;
}

int cmd_spectrum(const Common& c, const std::string& data, std::size_t sample, std::size_t rx)
{
    const auto ds = load_data(data);
    const auto& p = ds.manifest.profile;
    const auto& s = ds.samples.at(sample);
    if (rx >= s.H.rows())
        throw std::invalid_argument("spectrum: receive antenna " + std::to_string(rx) + " out of range");
    const auto S = spatial_spectrum(s.csi_vector(rx), p.n_x, p.n_y);
    CsvWriter w(out_dir(c) / "spectrum.csv", ds.manifest.config_hash(), c.seed, {"bin", "kx", "ky", "power"});
    for (std::size_t j = 0; j < S.size(); ++j)
        w.row({std::to_string(j), std::to_string(j / p.n_y), std::to_string(j % p.n_y), fmt_double(S[j])});
    w.close();
    const auto peak = static_cast<std::size_t>(std::max_element(S.begin(), S.end()) - S.begin());
    std::cout << "peak bin " << peak << " (kx " << peak / p.n_y << ", ky " << peak % p.n_y << ")\n";
    return 0;
}

int cmd_grad_check(const Common& c, std::size_t seeds, double tol)
{
    CsvWriter w(out_dir(c) / "grad_check.csv", profile_hash(profile_by_name(c.profile)), c.seed,
                {"check", "seed", "max_rel_error", "elements"});
    double worst = 0.0;
    std::string worst_name;
    auto record = [&](const std::string& name, std::uint64_t seed, const GradCheckReport& r) {
        w.row({name, std::to_string(seed), fmt_double(r.max_rel_error), std::to_string(r.elements)});
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_name = name;
        }
    };
    for (std::uint64_t s = c.seed; s < c.seed + seeds; ++s) {
        for (auto k : all_op_kinds())
            record(op_kind_name(k), s, grad_check(k, s));
        for (auto k : all_composite_kinds())
            record(composite_kind_name(k), s, grad_check_composite(k, s));
    }
    w.close();
    const bool ok = worst < tol;
    std::cout << (ok ? "ok" : "FAILED") << ": max relative error " << fmt_double(worst) << " (" << worst_name
              << ")\n";
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Wireless foundation model toolkit"};
    app.require_subcommand(1);
    Common c;

    auto* gen = app.add_subcommand("gen-data", "Generate scenes and channels into binary shards");
    add_common(gen, c);
    std::size_t scenes = 20, users = 0, n_r = 1;
    gen->add_option("--scenes", scenes, "Number of scenes")->capture_default_str();
    gen->add_option("--users", users, "Users per scene (default: profile value)");
    gen->add_option("--nr", n_r, "Receive antennas per user (4 for the SU-MIMO task)")->capture_default_str();

    std::string data, ckpt;
    std::uint64_t su_budget = kDefaultSuBudget;
    auto add_budget = [&](CLI::App* cmd) {
        cmd->add_option("--su-budget", su_budget,
                        "Single-user search cap in candidate sets per sample; the paper profile needs about 3.1e6")
            ->capture_default_str();
    };
    auto add_data = [&](CLI::App* cmd) { cmd->add_option("--data", data, "Dataset directory")->required(); };
    auto add_ckpt = [&](CLI::App* cmd) {
        cmd->add_option("--checkpoint", ckpt, "Pretrained checkpoint file or pretrain output directory");
    };

    auto* pre = app.add_subcommand("pretrain", "Self-supervised pretraining");
    add_common(pre, c);
    add_data(pre);
    TrainConfig tc;
    pre->add_option("--epochs", tc.epochs)->capture_default_str();
    pre->add_option("--batch", tc.batch_size)->capture_default_str();
    pre->add_option("--lr", tc.adam.lr)->capture_default_str();
    pre->add_option("--stop-after", tc.stop_after, "Stop after this many epochs in this run")->capture_default_str();
    pre->add_flag("--raw-phase", tc.raw_phase, "Use the unwrapped phase difference in the CSI loss");

    ProbeConfig pc;
    std::string kind = "linear", task = "location", scheme = "cross";
    double train_fraction = 0.8, visible = kLocalizationVisibleFraction;
    std::uint32_t scene = 0;
    auto add_probe = [&](CLI::App* cmd) {
        cmd->add_option("--kind", kind, "Probe head: linear or mlp")->capture_default_str();
        cmd->add_option("--probe-lr", pc.lr)->capture_default_str();
        cmd->add_option("--probe-epochs", pc.epochs)->capture_default_str();
        cmd->add_option("--train-fraction", train_fraction)->capture_default_str();
    };

    auto* probe = app.add_subcommand("probe", "Fit a probe on PHYSC features and write test predictions");
    add_common(probe, c);
    add_data(probe);
    add_ckpt(probe);
    add_probe(probe);
    probe->add_option("--task", task, "location or mu-beam")->capture_default_str();
    probe->add_option("--visible", visible, "Visible CSI fraction")->capture_default_str();

    auto* loc = app.add_subcommand("eval-loc", "Localization: PHYSC probe versus raw partial CSI");
    add_common(loc, c);
    add_data(loc);
    add_ckpt(loc);
    add_probe(loc);
    LocalizationConfig lc;
    loc->add_option("--scheme", scheme, "Split scheme: cross or within")->capture_default_str();
    loc->add_option("--scene", scene, "Scene for the within-scene split")->capture_default_str();
    loc->add_option("--snr", lc.snr_db)->capture_default_str();
    loc->add_option("--visible", lc.visible_fraction)->capture_default_str();

    auto* mu = app.add_subcommand("eval-mu", "Multi-user beam selection over training ratios");
    add_common(mu, c);
    add_data(mu);
    add_ckpt(mu);
    add_probe(mu);
    MuTaskConfig mc;
    mu->add_option("--ratios", mc.ratios, "Training ratios")->capture_default_str();
    mu->add_option("--visible", mc.visible_fraction)->capture_default_str();

    auto* su = app.add_subcommand("eval-su", "Single-user beam pairs with trunk fine-tuning");
    add_common(su, c);
    add_data(su);
    add_ckpt(su);
    SuTaskConfig sc;
    su->add_option("--epochs", sc.epochs)->capture_default_str();
    su->add_option("--head-lr", sc.head_lr)->capture_default_str();
    su->add_option("--trunk-lr-scale", sc.trunk_lr_scale)->capture_default_str();
    su->add_option("--train-fraction", train_fraction)->capture_default_str();
    add_budget(su);

    auto* lab = app.add_subcommand("oracle-labels", "Exhaustive-search labels");
    add_common(lab, c);
    add_data(lab);
    std::string label_task = "mu-beam";
    lab->add_option("--task", label_task, "mu-beam, su-pair or location")->capture_default_str();
    add_budget(lab);

    auto* attn = app.add_subcommand("dump-attn", "PHYSC attention over scene patches");
    add_common(attn, c);
    add_data(attn);
    add_ckpt(attn);
    std::size_t sample = 0, layer = 0, rx = 0;
    attn->add_option("--sample", sample)->capture_default_str();
    attn->add_option("--layer", layer)->capture_default_str();

    auto* cbk = app.add_subcommand("codebook", "Write the DFT codebook of the profile array");
    add_common(cbk, c);

    auto* spec = app.add_subcommand("spectrum", "Spatial spectrum of one sample");
    add_common(spec, c);
    add_data(spec);
    spec->add_option("--sample", sample)->capture_default_str();
    spec->add_option("--rx", rx, "Receive antenna")->capture_default_str();

    auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks of all ops and composites");
    add_common(gc, c);
    std::size_t seeds = 10;
    double tol = 1e-5;
    gc->add_option("--seeds", seeds)->capture_default_str();
    gc->add_option("--tol", tol)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        pc.kind = probe_kind_from_name(kind);
        if (*gen)
            return cmd_gen_data(c, scenes, users, n_r);
        if (*pre)
            return cmd_pretrain(c, data, tc);
        if (*probe)
            return cmd_probe(c, data, ckpt, task, pc, train_fraction, visible);
        if (*loc) {
            lc.probe = pc;
            return cmd_eval_loc(c, data, ckpt, lc, scheme, train_fraction, scene);
        }
        if (*mu) {
            mc.probe = pc;
            return cmd_eval_mu(c, data, ckpt, mc, train_fraction);
        }
        if (*su)
            return cmd_eval_su(c, data, ckpt, sc, train_fraction, su_budget);
        if (*lab)
            return cmd_oracle_labels(c, data, label_task, su_budget);
        if (*attn)
            return cmd_dump_attn(c, data, ckpt, sample, layer);
        if (*cbk)
            return cmd_codebook(c);
        if (*spec)
            return cmd_spectrum(c, data, sample, rx);
        if (*gc)
            return cmd_grad_check(c, seeds, tol);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
