#include "dgs/config.hpp"

#include "dgs/error.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dgs {

namespace {

// Shipped defaults. Exploration and lifecycle values follow the published
// setup: α 0.05, β₁ 0.9, β₂ 0.5, k 3, prune 10%, five refinements of 0.05%.
const std::vector<std::pair<std::string, std::string>> &defaults() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"data.dir", ""},
        {"data.init", ""},
        {"synth.primitives", "100"},
        {"synth.extent", "2"},
        {"synth.opacity_min", "0.6"},
        {"synth.opacity_max", "0.95"},
        {"synth.scale_min", "0.06"},
        {"synth.scale_max", "0.16"},
        {"synth.views", "10"},
        {"synth.radius", "4"},
        {"synth.elevation_deg", "20"},
        {"synth.fov_deg", "50"},
        {"synth.width", "64"},
        {"synth.height", "64"},
        {"synth.init_noise", "0.05"},
        {"synth.scale_jitter", "0.2"},
        {"synth.init_outliers", "0.5"},
        {"synth.outlier_opacity_max", "0.3"},
        {"synth.seed", "1"},
        {"train.max_steps", "2000"},
        {"train.seed", "0"},
        {"train.lambda_ssim", "0.2"},
        {"train.background", "0,0,0"},
        {"train.eval_interval", "100"},
        {"train.holdout_every", "8"},
        {"train.relocation_interval", "100"},
        {"train.opacity_floor", "0.005"},
        {"train.prune_fraction", "0.1"},
        {"train.prune_at", "0.8"},
        {"train.densify_fraction", "0.0005"},
        {"train.refinement_rounds", "5"},
        {"train.refine_start", "0.6"},
        {"train.refine_end", "0.9"},
        {"train.knn_k", "3"},
        {"lr.mean_init", "1e-3"},
        {"lr.mean_final", "1e-5"},
        {"lr.scale", "2e-3"},
        {"lr.rotation", "1e-3"},
        {"lr.opacity", "1e-2"},
        {"lr.color", "2e-3"},
        {"adam.beta1", "0.9"},
        {"adam.beta2", "0.999"},
        {"adam.epsilon", "1e-15"},
        {"explore.tau", "auto"},
        {"explore.noise_step", "5e-4"},
        {"explore.alpha", "0.05"},
        {"explore.beta1", "0.9"},
        {"explore.beta2", "0.5"},
        {"explore.gate_k", "100"},
        {"explore.gate_t", "0.005"},
        {"explore.denoise_sign", "-1"},
        {"stages.exploration", "true"},
        {"stages.momentum", "true"},
        {"stages.spatial_denoise", "true"},
        {"stages.relocation", "true"},
        {"stages.prune", "true"},
        {"stages.refine", "true"},
        {"runtime.threads", "1"},
    };
    return table;
}

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Config::Config() : entries_(defaults()) {}

std::vector<std::string> Config::known_keys() {
    std::vector<std::string> keys;
    for (const auto &[k, v] : defaults()) keys.push_back(k);
    return keys;
}

bool Config::has(const std::string &key) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto &e) { return e.first == key; });
}

void Config::set(const std::string &key, const std::string &value) {
    for (auto &e : entries_) {
        if (e.first == key) {
            e.second = value;
            return;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
}

const std::string &Config::get(const std::string &key) const {
    for (const auto &e : entries_) {
        if (e.first == key) return e.second;
    }
    fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
}

double Config::get_double(const std::string &key) const {
    const std::string &v = get(key);
    char *end = nullptr;
    errno = 0;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) {
        fail(ErrorCode::Parse, "config key '" + key + "': '" + v + "' is not a number");
    }
    return d;
}

long long Config::get_int(const std::string &key) const {
    const std::string &v = get(key);
    char *end = nullptr;
    errno = 0;
    const long long i = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) {
        fail(ErrorCode::Parse, "config key '" + key + "': '" + v + "' is not an integer");
    }
    return i;
}

bool Config::get_bool(const std::string &key) const {
    const std::string &v = get(key);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    fail(ErrorCode::Parse, "config key '" + key + "': '" + v + "' is not a boolean");
}

void Config::load_text(const std::string &text, const std::string &origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos) {
            fail(ErrorCode::Parse, where + ": expected 'key = value', got '" + body + "'");
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty()) {
            fail(ErrorCode::Parse, where + ": empty key");
        }
        if (!has(key)) {
            fail(ErrorCode::Parse, where + ": unknown config key '" + key + "'");
        }
        set(key, value);
    }
}

void Config::load_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::Io, "cannot open config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    load_text(ss.str(), path.string());
}

void Config::apply_override(const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        fail(ErrorCode::InvalidArgument, "override '" + assignment + "' is not key=value");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string Config::dump() const {
    std::string out;
    for (const auto &[k, v] : entries_) {
        out += k + " = " + v + "\n";
    }
    return out;
}

} // namespace dgs
