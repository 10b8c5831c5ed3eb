// SPDX-License-Identifier: Apache-2.0
//
// Downstream adaptation: partial-CSI encoding, trainable probe heads, and the
// localization, multi-user and single-user beam selection tasks.
#pragma once

#include "wfm/data.hpp"
#include "wfm/model.hpp"
#include "wfm/precoding.hpp"

#include <vector>

namespace wfm {

// -------------------------------------------------------------- partial CSI

constexpr double kLocalizationVisibleFraction = 0.25;
constexpr double kMimoVisibleFraction = 0.05;

struct PartialCsiSpec {
    double visible_fraction = kLocalizationVisibleFraction;
    std::uint64_t seed = 1;
};

/// max(1, round(fraction * n_patches)); `clamped` reports the lower clamp.
std::size_t visible_patch_count(double fraction, std::size_t n_patches, bool* clamped = nullptr);

/// Sorted visible CSI patch indices drawn from the spec seed.
std::vector<std::size_t> visible_patches(const PartialCsiSpec& spec, std::size_t n_patches);

/// Visibility with every CSI patch outside `visible` masked, scene fully
/// visible and the location token masked.
Visibility partial_visibility(const TokenLayout& l, const std::vector<std::size_t>& visible);

/// PHYSC latent (embed_dim values) under partial visibility.
std::vector<double> encode_partial(const WfmModel<float>& model, const TokenBatch& tb,
                                   const std::vector<std::size_t>& visible);

/// Flattened values of the visible CSI patches.
std::vector<double> raw_partial_features(const TokenBatch& tb, const std::vector<std::size_t>& visible);

// ------------------------------------------------------------------- probes

enum class ProbeKind { Linear, Mlp, Cnn };
ProbeKind probe_kind_from_name(const std::string& name);

struct ProbeConfig {
    ProbeKind kind = ProbeKind::Linear;
    double lr = 1e-3;
    std::size_t epochs = 200;
    std::size_t batch = 64;
    std::uint64_t seed = 1;
    /// > 0 inserts a learned Linear(input -> proj_dim) trained with the head.
    std::size_t proj_dim = 0;
    /// tanh on the regression output (outputs live in [-1, 1]).
    bool tanh_output = false;
    /// CNN input geometry: features are channels x grid_x x grid_y, channel-major.
    std::size_t cnn_channels = 2, grid_x = 0, grid_y = 0;
};

/// Feature matrix, one row per sample.
struct FeatureSet {
    std::size_t dim = 0;
    std::vector<double> values; // rows x dim

    std::size_t rows() const { return dim ? values.size() / dim : 0; }
    void push(const std::vector<double>& row);
    FeatureSet subset(const std::vector<std::size_t>& rows) const;
};

/// Inverse class frequency, normalized by the number of present classes and
/// clipped to [0.1, 10]. Absent classes get weight 1.
std::vector<double> class_weights(const std::vector<std::size_t>& labels, std::size_t n_classes);

/// Trainable head on fixed features. Classification heads have one softmax
/// per output segment.
class Probe {
public:
    /// Regression head with `out` outputs.
    Probe(std::size_t in_dim, std::size_t out, const ProbeConfig& cfg);
    /// Classifier with softmax segments of the given sizes.
    Probe(std::size_t in_dim, std::vector<std::size_t> segments, const ProbeConfig& cfg);

    /// Minimizes the root mean squared error of the outputs.
    void fit_regression(const FeatureSet& x, const std::vector<double>& y);
    /// Minimizes class-weighted cross-entropy summed over segments. labels has
    /// one entry per segment per row.
    void fit_classifier(const FeatureSet& x, const std::vector<std::size_t>& labels);

    /// Raw outputs (logits or regression values), rows x out.
    std::vector<double> predict(const FeatureSet& x) const;

    bool degenerate() const { return degenerate_; }
    ParameterSet<double>& params() { return params_; }
    const std::vector<std::size_t>& segments() const { return segments_; }
    std::size_t out_dim() const { return out_; }

    Tensor<double> forward(const Tensor<double>& x) const;

private:
    void build(std::size_t in_dim);

    ProbeConfig cfg_;
    std::size_t out_ = 0;
    std::vector<std::size_t> segments_;
    bool degenerate_ = false;
    ParameterSet<double> params_;
    Linear<double> proj_;
    std::vector<Linear<double>> layers_;
    std::vector<Linear<double>> convs_; // CNN: 9*C_in -> C_out per block
};

/// Indices of the k largest values, descending, lower index first on ties.
std::vector<std::size_t> top_k(const double* logits, std::size_t n, std::size_t k);

/// Fraction of rows whose label is among the top-k logits of `segment`.
double top_k_accuracy(const std::vector<double>& logits, std::size_t n_out, std::size_t offset, std::size_t n_classes,
                      const std::vector<std::size_t>& labels, std::size_t stride, std::size_t label_offset,
                      std::size_t k);

// -------------------------------------------------------------------- tasks

/// Median Euclidean error in meters over paired predictions and truths.
double median_error_m(const std::vector<std::array<double, 2>>& pred, const std::vector<std::array<double, 2>>& truth);

struct TaskFeatures {
    FeatureSet physc; // PHYSC latents
    FeatureSet raw;   // visible patch values
    FeatureSet full;  // full CSI grid (re plane, im plane), for the CNN baseline
};

/// Features of samples with noise at snr_db (kNoNoise for clean CSI), using
/// receive antenna `rx`.
TaskFeatures task_features(const WfmModel<float>& model, const Dataset& ds, const std::vector<std::size_t>& ids,
                           const Normalization& norm, const std::vector<std::size_t>& visible, double snr_db,
                           std::uint64_t noise_seed, std::size_t rx = 0);

struct LocalizationReport {
    double median_physc_m = 0.0;
    double median_raw_m = 0.0;
    std::size_t n_train = 0, n_test = 0;
};

struct LocalizationConfig {
    ProbeConfig probe;
    double snr_db = 10.0;
    double visible_fraction = kLocalizationVisibleFraction;
    std::uint64_t seed = 1;
};

/// PHYSC probe versus raw partial-CSI probe of comparable width.
LocalizationReport eval_localization(const WfmModel<float>& model, const Dataset& ds,
                                     const std::vector<std::size_t>& train_ids, const std::vector<std::size_t>& test_ids,
                                     const Normalization& norm, const LocalizationConfig& cfg);

struct RateTable {
    std::vector<double> predicted, oracle, ratio; // per problem
    double mean_ratio = 0.0;
    Ecdf ecdf; // predicted rates
};

/// Multi-user: F_RF from predicted beams per group, RZF, sum rate; the
/// reference is the same pipeline run on the oracle beams.
RateTable eval_sum_rate_mu(const Dataset& ds, const std::vector<std::vector<std::size_t>>& groups,
                           const std::vector<std::size_t>& predicted_beam, const std::vector<std::size_t>& oracle_beam);

/// Single-user: predicted tx and rx index sets through su_digital; the
/// reference is su_digital on the oracle sets.
RateTable eval_sum_rate_su(const Dataset& ds, const std::vector<std::size_t>& ids,
                           const std::vector<std::vector<std::size_t>>& predicted,
                           const std::vector<std::vector<std::size_t>>& oracle);

struct MuSweepRow {
    double ratio = 0.0;
    std::size_t n_train = 0;
    double top1 = 0.0, top5 = 0.0;
    double mean_rate_ratio = 0.0;
};

struct MuTaskConfig {
    ProbeConfig probe;
    double visible_fraction = kMimoVisibleFraction;
    std::vector<double> ratios{0.05, 0.1, 0.2, 0.5, 1.0};
    std::uint64_t seed = 1;
};

struct MuTaskReport {
    std::vector<MuSweepRow> rows;
    double random_rate_ratio = 0.0;
    double oracle_rate_ratio = 0.0;
};

/// Beam classifier on PHYSC features over nested training subsets.
MuTaskReport run_mu_task(const WfmModel<float>& model, const Dataset& ds, const std::vector<std::size_t>& train_ids,
                         const std::vector<std::size_t>& test_ids, const Normalization& norm, const MuTaskConfig& cfg);

// ----------------------------------------------------------------- SU-MIMO

/// Unordered pair label <-> (i, j) with i < j, lexicographic.
std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n);
std::pair<std::size_t, std::size_t> pair_from_index(std::size_t idx, std::size_t n);

/// Distinct top-2 from two per-position softmaxes, sorted ascending.
std::vector<std::size_t> decode_pair(const double* pos0, const double* pos1, std::size_t n);

struct SuTaskConfig {
    double visible_fraction = kMimoVisibleFraction;
    double head_lr = 1e-3;
    double trunk_lr_scale = 0.1;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
};

struct SuTaskReport {
    double tx_pair_accuracy = 0.0, rx_pair_accuracy = 0.0, joint_accuracy = 0.0;
    double mean_rate_ratio = 0.0;
    double random_rate_ratio = 0.0;
    std::size_t feature_dim = 0;
};

/// Concatenated per-antenna PHYSC latents (N_r * embed_dim).
std::vector<double> su_features(const WfmModel<float>& model, const Dataset& ds, std::size_t id,
                                const Normalization& norm, const std::vector<std::size_t>& visible);

/// Fine-tunes a copy of the trunk jointly with the tx/rx heads, then evaluates
/// pair accuracies and spectral-efficiency ratios on the test samples.
SuTaskReport finetune_su(const WfmModel<float>& model, const Dataset& ds, const LabelSet& labels,
                         const std::vector<std::size_t>& train_ids, const std::vector<std::size_t>& test_ids,
                         const Normalization& norm, const SuTaskConfig& cfg);

} // namespace wfm
