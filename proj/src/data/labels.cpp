// SPDX-License-Identifier: Apache-2.0
#include "wfm/data.hpp"
#include "wfm/precoding.hpp"

namespace wfm {

LabelTask label_task_from_name(const std::string& name)
{
    if (name == "mu-beam")
        return LabelTask::MuBeam;
    if (name == "su-pair")
        return LabelTask::SuPair;
    if (name == "location")
        return LabelTask::Location;
    throw std::invalid_argument("unknown label task '" + name + "' (expected mu-beam, su-pair or location)");
}

std::vector<std::vector<std::size_t>> mu_groups(const Dataset& ds, const std::vector<std::size_t>& samples, std::size_t K)
{
    if (K == 0)
        throw std::invalid_argument("mu_groups: K must be positive");
    std::map<std::uint32_t, std::vector<std::size_t>> by_scene;
    for (auto i : samples)
        by_scene[ds.samples.at(i).scene_id].push_back(i);
    std::vector<std::vector<std::size_t>> out;
    for (const auto& [id, v] : by_scene)
        for (std::size_t g = 0; g + K <= v.size(); g += K)
            out.emplace_back(v.begin() + g, v.begin() + g + K);
    return out;
}

LabelSet oracle_labels(const Dataset& ds, LabelTask task, std::uint64_t su_budget)
{
    const auto& p = ds.manifest.profile;
    LabelSet out;
    out.task = task;
    const std::size_t n = ds.samples.size();
    out.indices.resize(n);
    out.locations.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.locations[i] = {ds.samples[i].rx_x, ds.samples[i].rx_y};
    if (task == LabelTask::Location)
        return out;

    const auto cb = dft_codebook(p.n_x, p.n_y);
    if (task == LabelTask::MuBeam) {
        out.group_size = p.mu_users;
        for (std::size_t i = 0; i < n; ++i) {
            ComplexMatrix row(1, p.n_t(), ds.samples[i].H.row(0));
            out.indices[i] = {select_beams_mu(row, cb).index[0]};
        }
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i)
            all[i] = i;
        for (const auto& g : mu_groups(ds, all, p.mu_users)) {
            ComplexMatrix H(g.size(), p.n_t());
            for (std::size_t k = 0; k < g.size(); ++k)
                for (std::size_t t = 0; t < p.n_t(); ++t)
                    H(k, t) = ds.samples[g[k]].H(0, t);
            const double s2 = noise_power_for_snr(H, 1.0, p.snr_db);
            out.rates.push_back(mu_upper_bound(H, cb, default_rzf_alpha(g.size(), s2, 1.0), 1.0, s2).sum_rate);
        }
        return out;
    }

    const auto cb_rx = dft_codebook(p.su_rx, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& H = ds.samples[i].H;
        if (H.rows() != p.su_rx)
            throw DataError("oracle_labels: su-pair needs N_r = " + std::to_string(p.su_rx) + " channels, sample has " +
                            std::to_string(H.rows()));
        const auto sel = su_exhaustive(H, cb, cb_rx, p.su_streams, p.snr_db, su_budget);
        out.indices[i] = sel.tx;
        out.indices[i].insert(out.indices[i].end(), sel.rx.begin(), sel.rx.end());
        out.rates.push_back(sel.objective);
    }
    return out;
}

void write_labels_csv(const std::filesystem::path& path, const LabelSet& labels, std::uint64_t config_hash,
                      std::uint64_t seed)
{
    std::vector<std::string> cols{"sample", "x", "y", "labels"};
    CsvWriter w(path, config_hash, seed, cols);
    for (std::size_t i = 0; i < labels.locations.size(); ++i) {
        std::string lab;
        for (auto v : labels.indices[i])
            lab += (lab.empty() ? "" : " ") + std::to_string(v);
        w.row({std::to_string(i), fmt_double(labels.locations[i][0]), fmt_double(labels.locations[i][1]), lab});
    }
    w.close();
    if (!labels.rates.empty()) {
        auto rpath = path;
        rpath.replace_extension(".rates.csv");
        CsvWriter r(rpath, config_hash, seed, {"index", "oracle_rate"});
        for (std::size_t i = 0; i < labels.rates.size(); ++i)
            r.row({std::to_string(i), fmt_double(labels.rates[i])});
        r.close();
    }
}

} // namespace wfm
