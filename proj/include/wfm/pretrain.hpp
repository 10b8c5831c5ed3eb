// SPDX-License-Identifier: Apache-2.0
//
// Self-supervised pretraining: masking curriculum, the four reconstruction
// losses, Adam with cosine decay, and a resumable training loop.
#pragma once

#include "wfm/data.hpp"
#include "wfm/model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wfm {

// ------------------------------------------------------------------ masking

/// Three reconstruction objectives: mostly CSI, mostly scene, or moderate
/// masking of every modality.
enum class MaskVariant { CsiLarge = 0, SceneLarge = 1, Moderate = 2 };
const char* mask_variant_name(MaskVariant v);

struct RatioRange {
    double lo = 0.0, hi = 0.0;
};

/// Masking ratios per stage and variant. `csi` is zero for SceneLarge and
/// `scene` is zero for CsiLarge.
struct VariantRatios {
    RatioRange csi, scene;
};
VariantRatios variant_ratios(int stage, MaskVariant v);

constexpr double kLocationMaskProbability = 0.5;

struct MaskContext {
    std::size_t n_csi = 0;
    std::size_t scene_p = 0; // patches per side
    double patch_m = 0.0;
    double tx_x = 0.0, tx_y = 0.0, rx_x = 0.0, rx_y = 0.0; // world meters
};

MaskContext mask_context(const Profile& p, const SceneMap& scene, const ChannelSample& s);

struct MaskPlan {
    int stage = 1;
    MaskVariant variant = MaskVariant::CsiLarge;
    double csi_ratio = 0.0, scene_ratio = 0.0;
    std::vector<std::size_t> csi;   // sorted
    std::vector<std::size_t> scene; // sorted, inside the corridor candidates
    std::vector<std::size_t> scene_candidates;
    bool loc_masked = false;

    Visibility visibility(const TokenLayout& l) const;
};

/// Plan for a fixed stage and variant.
MaskPlan make_mask_plan(int stage, MaskVariant variant, const MaskContext& ctx, Rng& rng);

/// Probability of drawing a stage-2 plan at 0-based `epoch`: zero during the
/// first `stage1_fraction` of training, epoch/total afterwards.
double hard_probability(std::size_t epoch, std::size_t total_epochs, double stage1_fraction);

/// Curriculum plan: stage from hard_probability, variant uniform.
MaskPlan make_mask_plan(std::size_t epoch, std::size_t total_epochs, const MaskContext& ctx, Rng& rng,
                        double stage1_fraction = 0.2);

// ------------------------------------------------------------------- losses

struct LossWeights {
    double csi = 1.0, loc = 1.0, occ = 1.0, spec = 1.0;
    double alpha = 0.5; // linear vs log weight of the spectrum loss
    double eps = 1e-6;

    void validate() const;
};

/// RMSE over masked entries of (|P|-|H|)^2 + dphi^2 with P, H given as re/im
/// interleaved rows. The phase difference is wrapped to (-pi, pi] unless
/// `raw_phase` is set. An empty mask gives a constant 0.
template <typename T>
Tensor<T> loss_csi(const Tensor<T>& pred, const Tensor<T>& truth, bool raw_phase = false);

/// Mean over rows of the Euclidean distance between 2D points.
template <typename T>
Tensor<T> loss_loc(const Tensor<T>& pred, const Tensor<T>& truth);

/// Mean binary cross-entropy from logits: softplus(z) - y z.
template <typename T>
Tensor<T> loss_occ(const Tensor<T>& logits, const Tensor<T>& labels);

/// alpha RMSE(P, S) + (1 - alpha) RMSE(log(P + eps), log(S + eps)).
template <typename T>
Tensor<T> loss_spectrum(const Tensor<T>& pred, const Tensor<T>& truth, double alpha, double eps);

template <typename T>
struct LossComponents {
    std::optional<Tensor<T>> csi, loc, occ, spec;
};

/// Weighted sum of the present components; throws when none is present.
template <typename T>
Tensor<T> total_loss(const LossComponents<T>& c, const LossWeights& w);

// ---------------------------------------------------------------- optimizer

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double clip_norm = 1.0; // <= 0 disables clipping
};

/// lr * 0.5 (1 + cos(pi step / total_steps)).
double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps);

template <typename T>
class Adam {
public:
    Adam(ParameterSet<T>& params, AdamConfig cfg);

    /// Applies one update from the accumulated gradients scaled by `grad_scale`
    /// and returns the pre-clip gradient norm.
    double step(double lr, double grad_scale = 1.0);
    std::size_t steps() const { return t_; }

    std::vector<CheckpointRecord> to_records() const;
    void load_records(const std::vector<CheckpointRecord>& records, std::size_t steps);

private:
    ParameterSet<T>* params_;
    AdamConfig cfg_;
    std::vector<std::vector<T>> m_, v_;
    std::size_t t_ = 0;
};

// ------------------------------------------------------------------ trainer

/// Per-sample training inputs derived from a dataset.
struct PretrainExample {
    std::size_t sample_id = 0;
    TokenBatch tokens;
    std::vector<float> csi_target;   // same layout as tokens.csi
    std::vector<float> occupancy;    // per scene token, 0 or 1
    std::vector<float> spectrum;     // coarse cells
    MaskContext mask;
};

/// Spectrum target: coarse block means of |a_j^H h|^2 / N_t for the clean
/// CSI vector h of receive antenna 0, scaled by 1/csi_rms.
std::vector<float> spectrum_target(const ChannelSample& s, const Profile& p, double csi_rms);

PretrainExample make_example(const Dataset& ds, std::size_t sample_id, const Normalization& norm);

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    AdamConfig adam;
    LossWeights weights;
    double stage1_fraction = 0.2;
    bool raw_phase = false;
    std::uint64_t seed = 1;
    std::size_t checkpoint_every = 1; // epochs; 0 disables
    std::filesystem::path out_dir;    // checkpoint and log location; empty disables files
    /// Stop after this many epochs in this call (resume testing); 0 = run to `epochs`.
    std::size_t stop_after = 0;
};

struct EpochLog {
    std::size_t epoch = 0, step = 0;
    double csi = 0, loc = 0, occ = 0, spec = 0, total = 0, lr = 0;
};

struct TrainState {
    std::size_t epoch = 0; // completed epochs
    std::size_t step = 0;
    std::vector<EpochLog> history;
};

class TrainingDivergedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-sample losses for one example under a plan (float model).
LossComponents<float> example_losses(const WfmModel<float>& model, const PretrainExample& ex, const MaskPlan& plan,
                                     const LossWeights& w, bool raw_phase);

/// Trains in place. When out_dir holds a checkpoint, training resumes from it.
TrainState train(WfmModel<float>& model, const Dataset& ds, const std::vector<std::size_t>& train_ids,
                 const TrainConfig& cfg);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir);
void save_training_checkpoint(const std::filesystem::path& path, const WfmModel<float>& model,
                              const Adam<float>& opt, const TrainState& state, const Normalization& norm);
/// Loads model parameters (and optimizer/state when given).
TrainState load_training_checkpoint(const std::filesystem::path& path, WfmModel<float>& model,
                                    Adam<float>* opt = nullptr, Normalization* norm = nullptr);

void write_train_log(const std::filesystem::path& path, const TrainState& state, std::uint64_t config_hash,
                     std::uint64_t seed);

struct CsiEval {
    double model_rmse = 0.0;
    double baseline_rmse = 0.0; // constant per-entry magnitude and circular-mean phase
    std::size_t samples = 0;
};

/// Masked-CSI reconstruction on held-out samples against a constant predictor
/// fitted on `fit_ids`. Masks are CSI-only at `ratio`.
CsiEval evaluate_masked_csi(const WfmModel<float>& model, const Dataset& fit_ds, const std::vector<std::size_t>& fit_ids,
                            const Dataset& eval_ds, const std::vector<std::size_t>& eval_ids, double ratio,
                            std::uint64_t seed);

} // namespace wfm
