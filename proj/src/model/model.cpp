// SPDX-License-Identifier: Apache-2.0
#include "wfm/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace wfm {

Normalization make_normalization(const Profile& p, double csi_rms)
{
    if (!(csi_rms > 0.0))
        throw std::invalid_argument("normalization: CSI RMS must be positive");
    Normalization n;
    n.csi_rms = csi_rms;
    n.height_scale = 60.0;
    n.half_extent = 0.5 * p.extent_m();
    n.center_x = 0.0;
    n.center_y = 0.5 * p.extent_m() - 0.5 * p.cell_m;
    return n;
}

std::array<double, 2> normalize_location(const Normalization& n, double rx_x, double rx_y)
{
    return {(rx_x - n.center_x) / n.half_extent, (rx_y - n.center_y) / n.half_extent};
}

std::array<double, 2> denormalize_location(const Normalization& n, double u, double v)
{
    return {u * n.half_extent + n.center_x, v * n.half_extent + n.center_y};
}

std::vector<TokenKind> TokenLayout::kinds() const
{
    std::vector<TokenKind> k;
    k.reserve(length());
    k.push_back(TokenKind::Physc);
    k.insert(k.end(), n_csi, TokenKind::Csi);
    k.push_back(TokenKind::Sep);
    k.insert(k.end(), n_scene, TokenKind::Scene);
    k.push_back(TokenKind::Sep);
    k.push_back(TokenKind::Loc);
    return k;
}

TokenLayout token_layout(const Profile& p)
{
    p.validate();
    return {p.csi_tokens(), p.scene_tokens()};
}

std::vector<std::size_t> csi_patch_antennas(const Profile& p, std::size_t i)
{
    const std::size_t ps = p.csi_patch;
    const std::size_t by_count = p.n_y / ps;
    const std::size_t bx = i / by_count, by = i % by_count;
    std::vector<std::size_t> out;
    out.reserve(ps * ps);
    for (std::size_t a = 0; a < ps; ++a)
        for (std::size_t b = 0; b < ps; ++b)
            out.push_back((bx * ps + a) + (by * ps + b) * p.n_x);
    return out;
}

std::vector<float> csi_patch_features(const std::vector<cd>& row, const Profile& p, double csi_rms)
{
    if (row.size() != p.n_t())
        throw std::invalid_argument("tokenize: CSI has " + std::to_string(row.size()) + " entries, profile expects " +
                                    std::to_string(p.n_t()));
    const std::size_t n_tok = p.csi_tokens();
    const std::size_t feat = 2 * p.csi_patch * p.csi_patch;
    std::vector<float> out(n_tok * feat);
    for (std::size_t i = 0; i < n_tok; ++i) {
        const auto ant = csi_patch_antennas(p, i);
        for (std::size_t e = 0; e < ant.size(); ++e) {
            out[i * feat + 2 * e] = static_cast<float>(row[ant[e]].real() / csi_rms);
            out[i * feat + 2 * e + 1] = static_cast<float>(row[ant[e]].imag() / csi_rms);
        }
    }
    return out;
}

TokenBatch tokenize(const std::vector<cd>& row, const SceneMap& scene, double rx_x, double rx_y, const Profile& p,
                    const Normalization& norm)
{
    if (scene.n != p.grid_n)
        throw std::invalid_argument("tokenize: scene grid " + std::to_string(scene.n) + " does not match profile " +
                                    std::to_string(p.grid_n));
    TokenBatch tb;
    tb.layout = token_layout(p);
    tb.kinds = tb.layout.kinds();
    tb.pos_ids.assign(tb.kinds.size(), 0);
    for (std::size_t i = 0; i < tb.layout.n_csi; ++i)
        tb.pos_ids[tb.layout.csi_pos(i)] = i;
    for (std::size_t i = 0; i < tb.layout.n_scene; ++i)
        tb.pos_ids[tb.layout.scene_pos(i)] = i;
    tb.pos_ids[tb.layout.length() - 2] = 1;

    tb.csi_feat = 2 * p.csi_patch * p.csi_patch;
    tb.csi = csi_patch_features(row, p, norm.csi_rms);

    const std::size_t s = p.scene_patch;
    const std::size_t P = p.scene_grid_patches();
    tb.scene_feat = s * s;
    tb.scene.resize(tb.layout.n_scene * tb.scene_feat);
    for (std::size_t py = 0; py < P; ++py)
        for (std::size_t px = 0; px < P; ++px) {
            const std::size_t t = py * P + px;
            for (std::size_t cy = 0; cy < s; ++cy)
                for (std::size_t cx = 0; cx < s; ++cx)
                    tb.scene[t * tb.scene_feat + cy * s + cx] =
                        static_cast<float>(scene.height(px * s + cx, py * s + cy) / norm.height_scale);
        }

    const auto loc = normalize_location(norm, rx_x, rx_y);
    tb.loc = {static_cast<float>(loc[0]), static_cast<float>(loc[1])};
    return tb;
}

Visibility Visibility::all_visible(const TokenLayout& l)
{
    Visibility v;
    v.csi_masked.assign(l.n_csi, 0);
    v.scene_masked.assign(l.n_scene, 0);
    return v;
}

static std::vector<std::size_t> set_bits(const std::vector<std::uint8_t>& v)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i])
            out.push_back(i);
    return out;
}

std::vector<std::size_t> Visibility::masked_csi() const { return set_bits(csi_masked); }
std::vector<std::size_t> Visibility::masked_scene() const { return set_bits(scene_masked); }

template <typename T>
WfmModel<T>::WfmModel(const Profile& p, std::uint64_t seed) : profile_(p), layout_(token_layout(p))
{
    Rng rng(stream_seed(seed, 0x6d6f64656c));
    const std::size_t D = p.embed_dim;
    const std::size_t L = layout_.length();
    const std::size_t csi_feat = 2 * p.csi_patch * p.csi_patch;
    const std::size_t scene_feat = p.scene_patch * p.scene_patch;
    auto& ps = params_;

    csi_proj_ = Linear<T>(ps, "embed.csi", csi_feat, D, rng);
    scene_proj_ = Linear<T>(ps, "embed.scene", scene_feat, D, rng);
    loc_proj_ = Linear<T>(ps, "embed.loc", 2, D, rng);
    pos_csi_ = ps.create("embed.pos_csi", {layout_.n_csi, D}, Init::TruncNormal, rng);
    pos_scene_ = ps.create("embed.pos_scene", {layout_.n_scene, D}, Init::TruncNormal, rng);
    mod_csi_ = ps.create("embed.mod_csi", {D}, Init::TruncNormal, rng);
    mod_scene_ = ps.create("embed.mod_scene", {D}, Init::TruncNormal, rng);
    mod_loc_ = ps.create("embed.mod_loc", {D}, Init::TruncNormal, rng);
    physc_tok_ = ps.create("embed.physc", {1, D}, Init::TruncNormal, rng);
    sep_tok_ = ps.create("embed.sep", {1, D}, Init::TruncNormal, rng);
    for (std::size_t i = 0; i < p.enc_layers; ++i)
        enc_.emplace_back(ps, "enc." + std::to_string(i), D, p.heads, p.mlp_ratio, rng);
    enc_norm_ = LayerNorm<T>(ps, "enc.norm", D, rng);

    mask_csi_ = ps.create("dec.mask_csi", {1, D}, Init::TruncNormal, rng);
    mask_scene_ = ps.create("dec.mask_scene", {1, D}, Init::TruncNormal, rng);
    mask_loc_ = ps.create("dec.mask_loc", {1, D}, Init::TruncNormal, rng);
    dec_pos_ = ps.create("dec.pos", {L, D}, Init::TruncNormal, rng);
    dec_mod_ = ps.create("dec.mod", {5, D}, Init::TruncNormal, rng);
    for (std::size_t i = 0; i < p.dec_layers; ++i)
        dec_.emplace_back(ps, "dec." + std::to_string(i), D, p.heads, p.mlp_ratio, rng);
    dec_norm_ = LayerNorm<T>(ps, "dec.norm", D, rng);

    head_csi_ = Linear<T>(ps, "head.csi", D, csi_feat, rng);
    head_occ_ = Linear<T>(ps, "head.occ", D, 1, rng);
    head_loc_ = Linear<T>(ps, "head.loc", D, 2, rng);
    const std::size_t cx = p.coarse_x, cy = p.coarse_y, cells = cx * cy;
    if (p.physc_conv) {
        const std::size_t C = p.physc_channels;
        head_physc_ = Linear<T>(ps, "head.physc", D, C * cells, rng);
        conv_w_ = ps.create("head.physc_conv.w", {C * 9, 1}, Init::TruncNormal, rng);
        conv_b_ = ps.create("head.physc_conv.b", {1}, Init::Zeros, rng);
        // Row (ox, oy), column c*9 + (dx+1)*3 + (dy+1); -1 marks zero padding.
        im2col_.assign(cells * C * 9, -1);
        for (std::size_t ox = 0; ox < cx; ++ox)
            for (std::size_t oy = 0; oy < cy; ++oy)
                for (std::size_t c = 0; c < C; ++c)
                    for (int dx = -1; dx <= 1; ++dx)
                        for (int dy = -1; dy <= 1; ++dy) {
                            const long ix = static_cast<long>(ox) + dx, iy = static_cast<long>(oy) + dy;
                            if (ix < 0 || iy < 0 || ix >= static_cast<long>(cx) || iy >= static_cast<long>(cy))
                                continue;
                            const std::size_t row = ox * cy + oy;
                            const std::size_t col = c * 9 + static_cast<std::size_t>((dx + 1) * 3 + (dy + 1));
                            im2col_[row * C * 9 + col] =
                                static_cast<std::int64_t>(c * cells + static_cast<std::size_t>(ix) * cy +
                                                          static_cast<std::size_t>(iy));
                        }
    } else {
        head_physc_ = Linear<T>(ps, "head.physc", D, cells, rng);
    }
}

template <typename T>
static Tensor<T> to_tensor(const std::vector<float>& v, std::size_t rows, std::size_t cols)
{
    return Tensor<T>({rows, cols}, std::vector<T>(v.begin(), v.end()));
}

template <typename T>
Tensor<T> WfmModel<T>::embed(const TokenBatch& tb) const
{
    if (tb.layout.n_csi != layout_.n_csi || tb.layout.n_scene != layout_.n_scene ||
        tb.csi.size() != layout_.n_csi * csi_proj_.w.dim(0) || tb.scene.size() != layout_.n_scene * scene_proj_.w.dim(0))
        throw std::invalid_argument("embed: token batch does not match the model configuration");
    const auto csi = add_rowvec(add(csi_proj_(to_tensor<T>(tb.csi, layout_.n_csi, tb.csi_feat)), pos_csi_), mod_csi_);
    const auto scene =
        add_rowvec(add(scene_proj_(to_tensor<T>(tb.scene, layout_.n_scene, tb.scene_feat)), pos_scene_), mod_scene_);
    const auto loc = add_rowvec(loc_proj_(Tensor<T>({1, 2}, {T(tb.loc[0]), T(tb.loc[1])})), mod_loc_);
    return concat_rows<T>({physc_tok_, csi, sep_tok_, scene, sep_tok_, loc});
}

template <typename T>
Tensor<T> WfmModel<T>::encoder_stack(const Tensor<T>& x, std::vector<AttentionRecord>* records) const
{
    if (records)
        records->assign(enc_.size(), {});
    Tensor<T> h = x;
    for (std::size_t i = 0; i < enc_.size(); ++i)
        h = enc_[i](h, records ? &(*records)[i] : nullptr);
    return enc_norm_(h);
}

template <typename T>
Encoded<T> WfmModel<T>::encode(const TokenBatch& tb, const Visibility& vis, std::vector<AttentionRecord>* records) const
{
    if (vis.csi_masked.size() != layout_.n_csi || vis.scene_masked.size() != layout_.n_scene)
        throw std::invalid_argument("encode: mask plan does not match token layout");
    Encoded<T> e;
    for (std::size_t pos = 0; pos < layout_.length(); ++pos) {
        const auto kind = tb.kinds[pos];
        if (kind == TokenKind::Csi && vis.csi_masked[tb.pos_ids[pos]])
            continue;
        if (kind == TokenKind::Scene && vis.scene_masked[tb.pos_ids[pos]])
            continue;
        if (kind == TokenKind::Loc && vis.loc_masked)
            continue;
        e.positions.push_back(pos);
    }
    const auto full = embed(tb);
    const bool all = e.positions.size() == layout_.length();
    e.latents = encoder_stack(all ? full : gather_rows(full, e.positions), records);
    e.physc = gather_rows(e.latents, {0});
    return e;
}

template <typename T>
Decoded<T> WfmModel<T>::decode(const Encoded<T>& enc, const Visibility& vis) const
{
    const std::size_t L = layout_.length();
    const std::size_t nv = enc.positions.size();
    // Source rows: latents, then the three mask tokens.
    std::vector<std::size_t> src(L, 0);
    std::vector<std::uint8_t> filled(L, 0);
    for (std::size_t i = 0; i < nv; ++i) {
        src[enc.positions[i]] = i;
        filled[enc.positions[i]] = 1;
    }
    const auto kinds = layout_.kinds();
    std::vector<std::size_t> kind_rows(L);
    for (std::size_t pos = 0; pos < L; ++pos) {
        kind_rows[pos] = static_cast<std::size_t>(kinds[pos]);
        if (filled[pos])
            continue;
        switch (kinds[pos]) {
        case TokenKind::Csi: src[pos] = nv; break;
        case TokenKind::Scene: src[pos] = nv + 1; break;
        case TokenKind::Loc: src[pos] = nv + 2; break;
        default: throw std::logic_error("decode: structural token missing from encoder output");
        }
    }
    const auto pool = concat_rows<T>({enc.latents, mask_csi_, mask_scene_, mask_loc_});
    auto h = add(add(gather_rows(pool, src), dec_pos_), gather_rows(dec_mod_, kind_rows));
    for (const auto& blk : dec_)
        h = blk(h);
    h = dec_norm_(h);

    Decoded<T> d;
    d.csi_idx = vis.masked_csi();
    d.scene_idx = vis.masked_scene();
    if (!d.csi_idx.empty()) {
        std::vector<std::size_t> rows;
        for (auto i : d.csi_idx)
            rows.push_back(layout_.csi_pos(i));
        d.csi = head_csi_(gather_rows(h, rows));
    }
    if (!d.scene_idx.empty()) {
        std::vector<std::size_t> rows;
        for (auto i : d.scene_idx)
            rows.push_back(layout_.scene_pos(i));
        d.occ = head_occ_(gather_rows(h, rows));
    }
    if (vis.loc_masked)
        d.loc = head_loc_(gather_rows(h, {layout_.loc_pos()}));

    const std::size_t cells = profile_.coarse_x * profile_.coarse_y;
    const auto ph = gather_rows(h, {0});
    if (profile_.physc_conv) {
        const std::size_t C9 = profile_.physc_channels * 9;
        const auto feat = head_physc_(ph);
        const auto cols = gather(feat, im2col_, {cells, C9});
        d.physc_map = reshape(softplus(add_rowvec(matmul(cols, conv_w_), conv_b_)), {cells});
    } else {
        d.physc_map = reshape(softplus(head_physc_(ph)), {cells});
    }
    return d;
}

template <typename T>
std::vector<double> WfmModel<T>::attention_map(const TokenBatch& tb, const Visibility& vis, std::size_t layer) const
{
    if (layer >= enc_.size())
        throw std::out_of_range("attention_map: layer " + std::to_string(layer) + " out of range (encoder has " +
                                std::to_string(enc_.size()) + ")");
    std::vector<AttentionRecord> rec;
    const auto e = encode(tb, vis, &rec);
    const auto& r = rec[layer];
    std::vector<double> out(layout_.n_scene, 0.0);
    for (std::size_t j = 0; j < e.positions.size(); ++j) {
        const auto pos = e.positions[j];
        if (tb.kinds[pos] == TokenKind::Scene)
            out[tb.pos_ids[pos]] = r.probs[j]; // row 0 is PHYSC
    }
    const double mx = *std::max_element(out.begin(), out.end());
    if (mx > 0.0)
        for (auto& v : out)
            v /= mx;
    return out;
}

template class WfmModel<float>;
template class WfmModel<double>;

} // namespace wfm
