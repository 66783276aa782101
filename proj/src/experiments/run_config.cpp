#include "lain/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lain/fnv.hpp"

namespace lain {

namespace {

struct KeySpec {
    ConfigType type;
    const char* value;
};

const std::map<std::string, KeySpec>& schema() {
    static const std::map<std::string, KeySpec> s{
        // category space and data
        {"objects", {ConfigType::TextList, "cup,ball,book,bottle"}},
        {"verbs", {ConfigType::TextList, "hold,lift,kick,push"}},
        {"human_name", {ConfigType::Text, "person"}},
        {"train_scenes", {ConfigType::Int, "1600"}},
        {"val_scenes", {ConfigType::Int, "100"}},
        {"test_scenes", {ConfigType::Int, "150"}},
        {"data_seed", {ConfigType::Int, "1"}},
        {"image_size", {ConfigType::Int, "64"}},
        {"patch_size", {ConfigType::Int, "8"}},
        {"max_humans", {ConfigType::Int, "2"}},
        {"max_objects", {ConfigType::Int, "3"}},
        {"cue_scale", {ConfigType::Real, "0.45"}},
        {"cue_palette", {ConfigType::Int, "2"}},
        {"interact_prob", {ConfigType::Real, "0.85"}},
        {"box_jitter", {ConfigType::Real, "0.02"}},
        {"class_flip", {ConfigType::Real, "0.05"}},
        {"miss", {ConfigType::Real, "0.05"}},
        {"feature_noise", {ConfigType::Real, "0.1"}},
        {"feature_seed", {ConfigType::Int, "2024"}},
        {"flip_penalty", {ConfigType::Real, "0.3"}},
        // split
        {"split", {ConfigType::Text, "UC"}},
        {"split_k", {ConfigType::Real, "4"}},
        {"split_seed", {ConfigType::Int, "3"}},
        // model
        {"layers", {ConfigType::Int, "1"}},
        {"d_clip", {ConfigType::Int, "64"}},
        {"heads", {ConfigType::Int, "4"}},
        {"mlp_hidden", {ConfigType::Int, "256"}},
        {"d_det", {ConfigType::Int, "32"}},
        {"d_t", {ConfigType::Int, "32"}},
        {"text_hidden", {ConfigType::Int, "64"}},
        {"d_a", {ConfigType::Int, "16"}},
        {"kernels", {ConfigType::IntList, "1,3,5"}},
        {"n_p", {ConfigType::Int, "4"}},
        {"adapter_heads", {ConfigType::Int, "4"}},
        {"roi_size", {ConfigType::Int, "3"}},
        {"roi_samples", {ConfigType::Int, "2"}},
        {"use_la", {ConfigType::Bool, "true"}},
        {"use_ia", {ConfigType::Bool, "true"}},
        {"mask_image_tokens", {ConfigType::Bool, "false"}},
        {"la_init_gain", {ConfigType::Real, "0.1"}},
        {"ia_init_gain", {ConfigType::Real, "1"}},
        {"ln_eps", {ConfigType::Real, "1e-06"}},
        {"backbone_seed", {ConfigType::Int, "7"}},
        {"text_seed", {ConfigType::Int, "11"}},
        {"adapter_seed", {ConfigType::Int, "13"}},
        // training
        {"alpha", {ConfigType::Real, "0.25"}},
        {"gamma_focal", {ConfigType::Real, "2"}},
        {"iou_threshold", {ConfigType::Real, "0.5"}},
        {"lr", {ConfigType::Real, "0.003"}},
        {"weight_decay", {ConfigType::Real, "0.0001"}},
        {"beta1", {ConfigType::Real, "0.9"}},
        {"beta2", {ConfigType::Real, "0.999"}},
        {"adam_eps", {ConfigType::Real, "1e-08"}},
        {"epochs", {ConfigType::Int, "6"}},
        {"train_seed", {ConfigType::Int, "0"}},
        // evaluation
        {"lambda", {ConfigType::Real, "1"}},
        {"band_small", {ConfigType::Real, "0.01"}},
        {"band_medium", {ConfigType::Real, "0.09"}},
        // checks and experiments
        {"gradcheck_eps", {ConfigType::Real, "1e-05"}},
        {"gradcheck_tolerance", {ConfigType::Real, "0.0001"}},
        {"gradcheck_probes", {ConfigType::Int, "6"}},
        {"gradcheck_seed", {ConfigType::Int, "1234"}},
        {"ablate_seeds", {ConfigType::Int, "3"}},
        // paths
        {"out_dir", {ConfigType::Text, "runs"}},
        {"data_dir", {ConfigType::Text, ""}},
        {"checkpoint", {ConfigType::Text, ""}},
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

bool parse_int(const std::string& s, long long& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_real(const std::string& s, double& v) {
    if (s.empty()) return false;
    std::size_t used = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == s.size() && std::isfinite(v);
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* type_name(ConfigType t) {
    switch (t) {
        case ConfigType::Int: return "an integer";
        case ConfigType::Real: return "a number";
        case ConfigType::Bool: return "true or false";
        case ConfigType::Text: return "text";
        case ConfigType::IntList: return "a comma-separated list of non-negative integers";
        case ConfigType::TextList: return "a comma-separated list of names";
    }
    return "a value";
}

// Canonical text for `raw` under `type`, or throws with `where` attached.
std::string canonicalize(const std::string& key, ConfigType type, const std::string& raw, const std::string& where) {
    auto fail = [&] {
        throw ConfigError(where + ": key '" + key + "' expects " + type_name(type) + ", got '" + raw + "'");
    };
    switch (type) {
        case ConfigType::Int: {
            long long v;
            if (!parse_int(raw, v)) fail();
            return std::to_string(v);
        }
        case ConfigType::Real: {
            double v;
            if (!parse_real(raw, v)) fail();
            return format_real(v);
        }
        case ConfigType::Bool:
            if (raw == "true" || raw == "1") return "true";
            if (raw == "false" || raw == "0") return "false";
            fail();
            break;
        case ConfigType::Text: return raw;
        case ConfigType::IntList: {
            std::string out;
            for (const auto& item : split_list(raw)) {
                long long v;
                if (!parse_int(item, v) || v < 0) fail();
                out += (out.empty() ? "" : ",") + std::to_string(v);
            }
            return out;
        }
        case ConfigType::TextList: {
            std::string out;
            for (const auto& item : split_list(raw)) {
                if (item.empty()) fail();
                out += (out.empty() ? "" : ",") + item;
            }
            return out;
        }
    }
    return raw;
}

}  // namespace

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

RunConfig::RunConfig() {
    for (const auto& [k, spec] : schema()) values_[k] = canonicalize(k, spec.type, spec.value, "defaults");
}

void RunConfig::set(const std::string& key, const std::string& raw, const std::string& where) {
    auto it = schema().find(key);
    if (it == schema().end()) throw ConfigError(where + ": unknown config key '" + key + "'");
    values_[key] = canonicalize(key, it->second.type, raw, where);
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
    std::stringstream ss(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(ss, line)) {
        ++number;
        const std::string where = origin + ":" + std::to_string(number);
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    }
}

void RunConfig::apply_override(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set: expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "--set " + assignment);
}

const std::string& RunConfig::raw(const std::string& key, ConfigType type) const {
    auto it = schema().find(key);
    if (it == schema().end() || it->second.type != type)
        throw std::logic_error("config key '" + key + "' read with the wrong type");
    return values_.at(key);
}

long long RunConfig::get_int(const std::string& key) const { return std::stoll(raw(key, ConfigType::Int)); }

std::size_t RunConfig::get_size(const std::string& key) const {
    const auto v = get_int(key);
    if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
}

std::uint64_t RunConfig::get_seed(const std::string& key) const { return static_cast<std::uint64_t>(get_size(key)); }

double RunConfig::get_real(const std::string& key) const { return std::stod(raw(key, ConfigType::Real)); }

bool RunConfig::get_bool(const std::string& key) const { return raw(key, ConfigType::Bool) == "true"; }

const std::string& RunConfig::get_text(const std::string& key) const { return raw(key, ConfigType::Text); }

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(raw(key, ConfigType::IntList))) out.push_back(std::stoull(item));
    return out;
}

std::vector<std::string> RunConfig::get_text_list(const std::string& key) const {
    return split_list(raw(key, ConfigType::TextList));
}

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

std::uint64_t RunConfig::digest() const {
    Fnv1a f;
    f.str(canonical());
    return f.h;
}

std::string RunConfig::digest_hex() const { return hex64(digest()); }

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot read config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        cfg.apply_text(ss.str(), path);
    }
    for (const auto& o : overrides) cfg.apply_override(o);
    return cfg;
}

}  // namespace lain
