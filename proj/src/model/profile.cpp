// SPDX-License-Identifier: Apache-2.0
#include "wfm/profile.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace wfm {

Profile desk_profile()
{
    return Profile{};
}

Profile paper_profile()
{
    Profile p;
    p.name = "paper";
    p.grid_n = 200;
    p.cell_m = 1.0;
    p.scene_patch = 10;
    p.n_x = 32;
    p.n_y = 32;
    p.csi_patch = 4;
    p.embed_dim = 128;
    p.enc_layers = 8;
    p.dec_layers = 2;
    p.heads = 4;
    p.coarse_x = 8;
    p.coarse_y = 8;
    p.users_per_scene = 400;
    p.mu_users = 8;
    return p;
}

Profile profile_by_name(const std::string& name)
{
    if (name == "desk")
        return desk_profile();
    if (name == "paper")
        return paper_profile();
    throw std::invalid_argument("unknown profile '" + name + "' (expected desk or paper)");
}

void Profile::validate() const
{
    auto need = [](bool ok, const std::string& what) {
        if (!ok)
            throw std::invalid_argument("profile: " + what);
    };
    need(grid_n > 0 && cell_m > 0.0, "grid must be non-empty with positive cell size");
    need(scene_patch > 0 && grid_n % scene_patch == 0, "scene_patch must divide grid_n");
    need(n_x > 0 && n_y > 0 && spacing > 0.0, "array dimensions and spacing must be positive");
    need(csi_patch > 0 && n_x % csi_patch == 0 && n_y % csi_patch == 0, "csi_patch must divide n_x and n_y");
    need(heads > 0 && embed_dim % heads == 0, "embed_dim must be divisible by heads");
    need(coarse_x > 0 && coarse_y > 0 && n_x % coarse_x == 0 && n_y % coarse_y == 0,
         "coarse dims must divide the array dims");
    need(building_density >= 0.0 && building_density <= 1.0, "building_density must lie in [0,1]");
    need(su_streams <= su_rf, "su_streams must not exceed su_rf");
    need(carrier_hz > 0.0, "carrier_hz must be positive");
}

namespace {

template <typename F>
void for_each_field(Profile& p, F&& f)
{
    f("name", p.name);
    f("grid_n", p.grid_n);
    f("cell_m", p.cell_m);
    f("scene_patch", p.scene_patch);
    f("bs_height_m", p.bs_height_m);
    f("user_height_m", p.user_height_m);
    f("building_density", p.building_density);
    f("n_x", p.n_x);
    f("n_y", p.n_y);
    f("spacing", p.spacing);
    f("carrier_hz", p.carrier_hz);
    f("csi_patch", p.csi_patch);
    f("embed_dim", p.embed_dim);
    f("enc_layers", p.enc_layers);
    f("dec_layers", p.dec_layers);
    f("heads", p.heads);
    f("mlp_ratio", p.mlp_ratio);
    f("coarse_x", p.coarse_x);
    f("coarse_y", p.coarse_y);
    f("physc_channels", p.physc_channels);
    f("physc_conv", p.physc_conv);
    f("users_per_scene", p.users_per_scene);
    f("mu_users", p.mu_users);
    f("su_rx", p.su_rx);
    f("su_streams", p.su_streams);
    f("su_rf", p.su_rf);
    f("snr_db", p.snr_db);
}

void parse_into(const std::string& key, const std::string& s, std::string& out) { out = s; (void)key; }
void parse_into(const std::string& key, const std::string& s, std::size_t& out)
{
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size())
        throw std::invalid_argument("config: bad integer for " + key + ": '" + s + "'");
    out = static_cast<std::size_t>(v);
}
void parse_into(const std::string& key, const std::string& s, double& out)
{
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    if (pos != s.size())
        throw std::invalid_argument("config: bad number for " + key + ": '" + s + "'");
}
void parse_into(const std::string& key, const std::string& s, bool& out)
{
    if (s == "1" || s == "true")
        out = true;
    else if (s == "0" || s == "false")
        out = false;
    else
        throw std::invalid_argument("config: bad boolean for " + key + ": '" + s + "'");
}

std::string format_value(const std::string& v) { return v; }
std::string format_value(std::size_t v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

void apply_overrides(Profile& p, const std::map<std::string, std::string>& kv)
{
    for (const auto& [key, value] : kv) {
        bool found = false;
        for_each_field(p, [&](const char* name, auto& field) {
            if (key == name) {
                parse_into(key, value, field);
                found = true;
            }
        });
        if (!found)
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    p.validate();
}

std::map<std::string, std::string> profile_fields(const Profile& p)
{
    std::map<std::string, std::string> out;
    Profile copy = p;
    for_each_field(copy, [&](const char* name, auto& field) { out[name] = format_value(field); });
    return out;
}

std::map<std::string, std::string> read_kv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

} // namespace wfm
