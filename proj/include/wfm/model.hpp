// SPDX-License-Identifier: Apache-2.0
//
// Multi-modal masked autoencoder over CSI, scene heights and user location.
//
// Sequence layout at full visibility:
//   [PHYSC] csi_0 .. csi_{C-1} [SEP] scene_0 .. scene_{S-1} [SEP] [LOC]
// Masked tokens are dropped before the encoder and replaced by per-modality
// mask tokens before the decoder.
#pragma once

#include "wfm/cmatrix.hpp"
#include "wfm/nn.hpp"
#include "wfm/profile.hpp"
#include "wfm/scene.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace wfm {

struct Normalization {
    double csi_rms = 1.0;     // CSI entries are divided by this
    double height_scale = 60; // meters
    double half_extent = 1.0; // meters
    double center_x = 0.0;    // scene center relative to the base station
    double center_y = 0.0;
};

Normalization make_normalization(const Profile& p, double csi_rms);

/// Relative user position (meters, w.r.t. the base station) mapped to [-1, 1].
std::array<double, 2> normalize_location(const Normalization& n, double rx_x, double rx_y);
std::array<double, 2> denormalize_location(const Normalization& n, double u, double v);

enum class TokenKind : std::uint8_t { Physc = 0, Csi = 1, Sep = 2, Scene = 3, Loc = 4 };

struct TokenLayout {
    std::size_t n_csi = 0, n_scene = 0;

    std::size_t length() const { return n_csi + n_scene + 4; }
    std::size_t csi_pos(std::size_t i) const { return 1 + i; }
    std::size_t scene_pos(std::size_t i) const { return n_csi + 2 + i; }
    std::size_t loc_pos() const { return n_csi + n_scene + 3; }
    std::vector<TokenKind> kinds() const;
};

TokenLayout token_layout(const Profile& p);

/// Raw per-token features before projection.
struct TokenBatch {
    TokenLayout layout;
    std::vector<TokenKind> kinds;
    std::vector<std::size_t> pos_ids; // index within the token's modality
    std::size_t csi_feat = 0, scene_feat = 0;
    std::vector<float> csi;   // n_csi x csi_feat; re/im interleaved per antenna
    std::vector<float> scene; // n_scene x scene_feat; height / height_scale
    std::array<float, 2> loc{};
};

/// CSI patch features of a length-N_t channel row (stored as the physical
/// channel row), scaled by 1/csi_rms.
std::vector<float> csi_patch_features(const std::vector<cd>& row, const Profile& p, double csi_rms);
/// Inverse of csi_patch_features for patch `i`: antenna flat indices of its entries.
std::vector<std::size_t> csi_patch_antennas(const Profile& p, std::size_t i);

TokenBatch tokenize(const std::vector<cd>& row, const SceneMap& scene, double rx_x, double rx_y, const Profile& p,
                    const Normalization& norm);

struct Visibility {
    std::vector<std::uint8_t> csi_masked;   // per CSI token
    std::vector<std::uint8_t> scene_masked; // per scene token
    bool loc_masked = false;

    static Visibility all_visible(const TokenLayout& l);
    std::vector<std::size_t> masked_csi() const;
    std::vector<std::size_t> masked_scene() const;
};

template <typename T>
struct Encoded {
    Tensor<T> latents;                 // visible x dim
    std::vector<std::size_t> positions; // sequence position of each latent row
    Tensor<T> physc;                   // 1 x dim
};

template <typename T>
struct Decoded {
    Tensor<T> csi;       // masked_csi x csi_feat (undefined when none masked)
    std::vector<std::size_t> csi_idx;
    Tensor<T> occ;       // masked_scene x 1
    std::vector<std::size_t> scene_idx;
    Tensor<T> loc;       // 1 x 2, defined when location is masked
    Tensor<T> physc_map; // coarse cells, non-negative
};

template <typename T>
class WfmModel {
public:
    WfmModel(const Profile& p, std::uint64_t seed);

    const Profile& profile() const { return profile_; }
    const TokenLayout& layout() const { return layout_; }
    ParameterSet<T>& params() { return params_; }
    const ParameterSet<T>& params() const { return params_; }

    /// Full-sequence token embeddings (length x dim).
    Tensor<T> embed(const TokenBatch& tb) const;
    /// Encoder blocks plus final norm on an already embedded sequence.
    Tensor<T> encoder_stack(const Tensor<T>& x, std::vector<AttentionRecord>* records = nullptr) const;
    Encoded<T> encode(const TokenBatch& tb, const Visibility& vis,
                      std::vector<AttentionRecord>* records = nullptr) const;
    Decoded<T> decode(const Encoded<T>& enc, const Visibility& vis) const;

    /// PHYSC attention over scene tokens per encoder layer, head-averaged and
    /// scaled to [0, 1] by the maximum. Masked scene tokens read as 0.
    std::vector<double> attention_map(const TokenBatch& tb, const Visibility& vis, std::size_t layer) const;

private:
    Profile profile_;
    TokenLayout layout_;
    ParameterSet<T> params_;

    Linear<T> csi_proj_, scene_proj_, loc_proj_;
    Tensor<T> pos_csi_, pos_scene_, mod_csi_, mod_scene_, mod_loc_, physc_tok_, sep_tok_;
    std::vector<TransformerBlock<T>> enc_;
    LayerNorm<T> enc_norm_;

    Tensor<T> mask_csi_, mask_scene_, mask_loc_, dec_pos_, dec_mod_;
    std::vector<TransformerBlock<T>> dec_;
    LayerNorm<T> dec_norm_;

    Linear<T> head_csi_, head_occ_, head_loc_, head_physc_;
    Tensor<T> conv_w_, conv_b_;
    std::vector<std::int64_t> im2col_;
};

} // namespace wfm
