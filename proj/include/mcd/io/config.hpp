#pragma once

// Run configuration: a flat `key = value` file with dotted keys grouped in
// sections (scene, style, mcd, ransac, train, eval). `[section]` headers may
// prefix the keys that follow. Every key can be overridden from the command
// line with the same dotted name.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcd/core.hpp"
#include "mcd/diffusion.hpp"
#include "mcd/ransac.hpp"
#include "mcd/sampler.hpp"
#include "mcd/synth.hpp"

namespace mcd::io {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, v);
    if (text.empty() || r.ec != std::errc() || r.ptr != end || !std::isfinite(v)) {
        throw Error(ErrorKind::Config, key + ": expected a finite number, got '" + text + "'");
    }
    return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, v);
    if (text.empty() || r.ec != std::errc() || r.ptr != end) {
        throw Error(ErrorKind::Config, key + ": expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error(ErrorKind::Config, key + ": expected true or false, got '" + text + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& text, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(static_cast<T>(parse(key, trim(item))));
    if (out.empty()) throw Error(ErrorKind::Config, key + ": expected a comma-separated list");
    return out;
}

template <typename T, typename Format>
std::string join(const std::vector<T>& v, Format fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

}  // namespace detail

struct EvalConfig {
    std::vector<double> auc_thresholds{5.0, 10.0, 20.0};
    double plot_max_deg = 20.0;
};

struct RunConfig {
    SceneConfig scene{};
    std::size_t n_scenes = 200;
    MatcherStyle style = style_none();
    std::uint64_t style_seed = 5;
    McdConfig mcd{};
    RansacConfig ransac{};
    TrainConfig train{};
    std::vector<int> layer_dims{4, 64, 64, 1};
    double logit_bound = kDefaultLogitBound;
    std::uint64_t init_seed = 42;
    EvalConfig eval{};

    // Schedule parameters are kept apart so the table is rebuilt once per load.
    double beta_start = 0.0005, beta_end = 0.0025;
    std::uint64_t timesteps = 500;

    void validate() const {
        scene.validate();
        if (n_scenes < 1) throw Error(ErrorKind::Config, "scene.n_scenes must be >= 1");
        style.validate();
        mcd.validate();
        ransac.validate();
        train.validate();
        if (layer_dims.size() < 2 || layer_dims.front() != 4 || layer_dims.back() != 1) {
            throw Error(ErrorKind::Config, "train.layer_dims must start with 4 and end with 1");
        }
        for (const int d : layer_dims) {
            if (d < 1) throw Error(ErrorKind::Config, "train.layer_dims entries must be >= 1");
        }
        if (!(logit_bound >= 0.0)) throw Error(ErrorKind::Config, "train.logit_bound must be >= 0");
        if (eval.auc_thresholds.empty()) throw Error(ErrorKind::Config, "eval.auc_thresholds must not be empty");
        for (const double t : eval.auc_thresholds) {
            if (!(t > 0.0)) throw Error(ErrorKind::Config, "eval.auc_thresholds entries must be > 0");
        }
        if (!(eval.plot_max_deg > 0.0)) throw Error(ErrorKind::Config, "eval.plot_max_deg must be > 0");
    }
};

/// One registered key: how to parse it into a RunConfig and print it back.
struct ConfigField {
    std::string key;
    std::string type;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
    using detail::format_double;
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_uint;
    auto real = [](std::string key, auto accessor) {
        return ConfigField{key, "float",
                           [accessor, key](RunConfig& c, const std::string& v) { accessor(c) = parse_double(key, v); },
                           [accessor](const RunConfig& c) { return format_double(accessor(const_cast<RunConfig&>(c))); }};
    };
    auto uint = [](std::string key, auto accessor) {
        return ConfigField{key, "int",
                           [accessor, key](RunConfig& c, const std::string& v) {
                               using T = std::remove_reference_t<decltype(accessor(c))>;
                               accessor(c) = static_cast<T>(parse_uint(key, v));
                           },
                           [accessor](const RunConfig& c) {
                               return std::to_string(accessor(const_cast<RunConfig&>(c)));
                           }};
    };
    auto flag = [](std::string key, auto accessor) {
        return ConfigField{key, "bool",
                           [accessor, key](RunConfig& c, const std::string& v) { accessor(c) = parse_bool(key, v); },
                           [accessor](const RunConfig& c) {
                               return std::string(accessor(const_cast<RunConfig&>(c)) ? "true" : "false");
                           }};
    };

    static const std::vector<ConfigField> fields = [&] {
        std::vector<ConfigField> f;
        // style.name comes first: applying a preset resets the individual style fields.
        f.push_back({"style.name", "string",
                     [](RunConfig& c, const std::string& v) {
                         if (v == "custom") {
                             c.style.name = v;
                         } else {
                             c.style = style_by_name(v);
                         }
                     },
                     [](const RunConfig& c) { return c.style.name; }});

        f.push_back(uint("scene.n_scenes", [](RunConfig& c) -> std::size_t& { return c.n_scenes; }));
        f.push_back(uint("scene.n_points", [](RunConfig& c) -> std::size_t& { return c.scene.n_points; }));
        f.push_back(real("scene.z_min", [](RunConfig& c) -> double& { return c.scene.z_min; }));
        f.push_back(real("scene.z_max", [](RunConfig& c) -> double& { return c.scene.z_max; }));
        f.push_back(real("scene.rotation_max_deg", [](RunConfig& c) -> double& { return c.scene.rotation_max_deg; }));
        f.push_back(real("scene.baseline_min", [](RunConfig& c) -> double& { return c.scene.baseline_min; }));
        f.push_back(real("scene.baseline_max", [](RunConfig& c) -> double& { return c.scene.baseline_max; }));
        f.push_back(real("scene.fx", [](RunConfig& c) -> double& { return c.scene.camera.fx; }));
        f.push_back(real("scene.fy", [](RunConfig& c) -> double& { return c.scene.camera.fy; }));
        f.push_back(real("scene.cx", [](RunConfig& c) -> double& { return c.scene.camera.cx; }));
        f.push_back(real("scene.cy", [](RunConfig& c) -> double& { return c.scene.camera.cy; }));
        f.push_back(real("scene.width", [](RunConfig& c) -> double& { return c.scene.camera.width; }));
        f.push_back(real("scene.height", [](RunConfig& c) -> double& { return c.scene.camera.height; }));
        f.push_back(uint("scene.seed", [](RunConfig& c) -> std::uint64_t& { return c.scene.seed; }));

        f.push_back(real("style.keypoint_jitter_px", [](RunConfig& c) -> double& { return c.style.keypoint_jitter_px; }));
        f.push_back(real("style.outlier_ratio", [](RunConfig& c) -> double& { return c.style.outlier_ratio; }));
        f.push_back(real("style.grid_snap_px", [](RunConfig& c) -> double& { return c.style.grid_snap_px; }));
        f.push_back(uint("style.density", [](RunConfig& c) -> std::size_t& { return c.style.density; }));
        f.push_back(uint("style.seed", [](RunConfig& c) -> std::uint64_t& { return c.style_seed; }));

        f.push_back(real("mcd.beta_start", [](RunConfig& c) -> double& { return c.beta_start; }));
        f.push_back(real("mcd.beta_end", [](RunConfig& c) -> double& { return c.beta_end; }));
        f.push_back(uint("mcd.T", [](RunConfig& c) -> std::uint64_t& { return c.timesteps; }));
        f.push_back(real("mcd.r_min", [](RunConfig& c) -> double& { return c.mcd.r_min; }));
        f.push_back(real("mcd.r_max", [](RunConfig& c) -> double& { return c.mcd.r_max; }));
        f.push_back(real("mcd.s_min", [](RunConfig& c) -> double& { return c.mcd.s_min; }));
        f.push_back(real("mcd.s_max", [](RunConfig& c) -> double& { return c.mcd.s_max; }));
        f.push_back(uint("mcd.seed", [](RunConfig& c) -> std::uint64_t& { return c.mcd.seed; }));
        f.push_back(flag("mcd.centered", [](RunConfig& c) -> bool& { return c.mcd.centered; }));
        f.push_back(flag("mcd.relabel_by_residual", [](RunConfig& c) -> bool& { return c.mcd.relabel_by_residual; }));
        f.push_back(real("mcd.relabel_threshold", [](RunConfig& c) -> double& { return c.mcd.relabel_threshold; }));

        f.push_back(real("ransac.threshold", [](RunConfig& c) -> double& { return c.ransac.threshold; }));
        f.push_back(uint("ransac.max_iters", [](RunConfig& c) -> std::size_t& { return c.ransac.max_iters; }));
        f.push_back(real("ransac.confidence", [](RunConfig& c) -> double& { return c.ransac.confidence; }));
        f.push_back(uint("ransac.min_set", [](RunConfig& c) -> std::size_t& { return c.ransac.min_set; }));
        f.push_back(flag("ransac.refine", [](RunConfig& c) -> bool& { return c.ransac.refine; }));
        f.push_back(uint("ransac.seed", [](RunConfig& c) -> std::uint64_t& { return c.ransac.seed; }));

        f.push_back(uint("train.epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; }));
        f.push_back(uint("train.scenes_per_epoch", [](RunConfig& c) -> std::size_t& { return c.train.scenes_per_epoch; }));
        f.push_back(uint("train.K", [](RunConfig& c) -> std::size_t& { return c.train.K; }));
        f.push_back(uint("train.H", [](RunConfig& c) -> std::size_t& { return c.train.H; }));
        f.push_back(real("train.learning_rate", [](RunConfig& c) -> double& { return c.train.learning_rate; }));
        f.push_back(real("train.lr_decay", [](RunConfig& c) -> double& { return c.train.lr_decay; }));
        f.push_back({"train.baseline", "string",
                     [](RunConfig& c, const std::string& v) { c.train.baseline = baseline_from_string(v); },
                     [](const RunConfig& c) { return std::string(to_string(c.train.baseline)); }});
        f.push_back(uint("train.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }));
        f.push_back(real("train.loss_cap", [](RunConfig& c) -> double& { return c.train.loss_cap; }));
        f.push_back(real("train.refit_threshold", [](RunConfig& c) -> double& { return c.train.refit_threshold; }));
        f.push_back({"train.layer_dims", "int-list",
                     [](RunConfig& c, const std::string& v) {
                         c.layer_dims = detail::parse_list<int>("train.layer_dims", v, detail::parse_uint);
                     },
                     [](const RunConfig& c) {
                         return detail::join(c.layer_dims, [](int d) { return std::to_string(d); });
                     }});
        f.push_back(real("train.logit_bound", [](RunConfig& c) -> double& { return c.logit_bound; }));
        f.push_back(uint("train.init_seed", [](RunConfig& c) -> std::uint64_t& { return c.init_seed; }));

        f.push_back({"eval.auc_thresholds", "float-list",
                     [](RunConfig& c, const std::string& v) {
                         c.eval.auc_thresholds = detail::parse_list<double>("eval.auc_thresholds", v, detail::parse_double);
                     },
                     [](const RunConfig& c) { return detail::join(c.eval.auc_thresholds, format_double); }});
        f.push_back(real("eval.plot_max_deg", [](RunConfig& c) -> double& { return c.eval.plot_max_deg; }));
        return f;
    }();
    return fields;
}

inline const ConfigField* find_field(const std::string& key) {
    for (const auto& f : config_fields()) {
        if (f.key == key) return &f;
    }
    return nullptr;
}

/// Builds a RunConfig from defaults plus key/value pairs. Later pairs win;
/// style.name is applied before the individual style fields.
inline RunConfig make_config(const KeyValues& pairs) {
    std::map<std::string, std::string> merged;
    for (const auto& [k, v] : pairs) {
        if (!find_field(k)) throw Error(ErrorKind::Config, "unknown configuration key '" + k + "'");
        merged[k] = v;
    }
    RunConfig cfg;
    for (const auto& f : config_fields()) {
        if (auto it = merged.find(f.key); it != merged.end()) f.set(cfg, it->second);
    }
    // A preset name survives only while its fields are untouched.
    if (cfg.style.name != "custom") {
        const MatcherStyle preset = style_by_name(cfg.style.name);
        const MatcherStyle& st = cfg.style;
        if (st.keypoint_jitter_px != preset.keypoint_jitter_px || st.outlier_ratio != preset.outlier_ratio ||
            st.grid_snap_px != preset.grid_snap_px || st.density != preset.density) {
            cfg.style.name = "custom";
        }
    }
    if (cfg.timesteps < 1 || cfg.timesteps > 1000000) throw Error(ErrorKind::Config, "mcd.T must lie in [1, 1e6]");
    cfg.mcd.schedule = DiffusionSchedule(cfg.beta_start, cfg.beta_end, static_cast<int>(cfg.timesteps));
    cfg.validate();
    return cfg;
}

/// Every key with its current value, in registry order.
inline KeyValues config_echo(const RunConfig& cfg) {
    KeyValues out;
    for (const auto& f : config_fields()) out.emplace_back(f.key, f.get(cfg));
    return out;
}

/// Parses `key = value` lines. `#` starts a comment; `[name]` prefixes
/// following keys with `name.`.
inline KeyValues parse_config_text(const std::string& text, const std::string& origin = "<config>") {
    KeyValues out;
    std::stringstream ss(text);
    std::string line, section;
    for (std::size_t lineno = 1; std::getline(ss, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (t.front() == '[') {
            if (t.back() != ']') throw Error(ErrorKind::Config, where + ": malformed section header");
            section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Config, where + ": expected 'key = value'");
        std::string key = detail::trim(std::string_view(t).substr(0, eq));
        const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw Error(ErrorKind::Config, where + ": empty key");
        if (!section.empty()) key = section + "." + key;
        if (!find_field(key)) throw Error(ErrorKind::Config, where + ": unknown configuration key '" + key + "'");
        out.emplace_back(std::move(key), value);
    }
    return out;
}

inline KeyValues read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

inline std::string render_config(const RunConfig& cfg) {
    std::string out;
    std::string section;
    for (const auto& [k, v] : config_echo(cfg)) {
        const std::string s = k.substr(0, k.find('.'));
        if (s != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + s + "]\n";
            section = s;
        }
        out += k.substr(k.find('.') + 1) + " = " + v + "\n";
    }
    return out;
}

}  // namespace mcd::io
