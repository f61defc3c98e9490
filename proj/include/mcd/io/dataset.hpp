#pragma once

// JSONL datasets. Line 1 is a header object, every following line one scene.
// Each line carries an FNV-1a checksum of its own compact dump. Readers are
// strict: unknown fields, wrong types, out-of-bounds coordinates and
// provenance that contradicts the header configuration are all data errors.

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mcd/core.hpp"
#include "mcd/diffusion.hpp"
#include "mcd/io/checksum.hpp"
#include "mcd/io/config.hpp"

namespace mcd::io {

inline constexpr int kDatasetFormatVersion = 1;

enum class DatasetKind { Gt, Styled, Diffused };

inline const char* to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::Gt: return "gt";
        case DatasetKind::Styled: return "styled";
        case DatasetKind::Diffused: return "diffused";
    }
    return "?";
}

inline DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "gt") return DatasetKind::Gt;
    if (s == "styled") return DatasetKind::Styled;
    if (s == "diffused") return DatasetKind::Diffused;
    throw Error(ErrorKind::Data, "unknown dataset kind '" + s + "'");
}

struct SceneRecord {
    std::size_t scene_id = 0;
    RelativePose pose;
    MatchSet matches;  // labels: true = inlier
    // Diffused datasets only.
    std::vector<Provenance> provenance;
    double sampled_r = 0.0;
    double sampled_s = 0.0;
};

struct Dataset {
    DatasetKind kind = DatasetKind::Gt;
    Camera cam1, cam2;
    KeyValues config;         // echo of the run configuration that wrote the file
    KeyValues source_config;  // diffused only: the echo of the ground-truth input
    std::uint64_t master_seed = 0;
    std::vector<SceneRecord> records;

    std::size_t size() const { return records.size(); }
};

namespace detail {

inline Json camera_json(const Camera& c) {
    return Json{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

inline Camera camera_from_json(const Json& j, const std::string& what) {
    static const std::set<std::string> keys{"fx", "fy", "cx", "cy", "width", "height"};
    if (!j.is_object() || j.size() != keys.size()) throw Error(ErrorKind::Data, what + ": malformed camera");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!keys.count(it.key())) throw Error(ErrorKind::Data, what + ": unknown camera field '" + it.key() + "'");
    }
    Camera c{member<double>(j, "fx", what), member<double>(j, "fy", what), member<double>(j, "cx", what),
             member<double>(j, "cy", what), member<double>(j, "width", what), member<double>(j, "height", what)};
    if (!c.valid()) throw Error(ErrorKind::Data, what + ": camera intrinsics are invalid");
    return c;
}

inline Json keyvalues_json(const KeyValues& kv) {
    Json j = Json::object();
    for (const auto& [k, v] : kv) j[k] = v;
    return j;
}

inline KeyValues keyvalues_from_json(const Json& j, const std::string& what) {
    if (!j.is_object()) throw Error(ErrorKind::Data, what + ": config echo must be an object");
    KeyValues kv;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_string()) throw Error(ErrorKind::Data, what + ": config values must be strings");
        kv.emplace_back(it.key(), it.value().get<std::string>());
    }
    return kv;
}

inline RunConfig config_from_echo(const KeyValues& kv, const std::string& what) {
    try {
        return make_config(kv);
    } catch (const Error& e) {
        throw Error(ErrorKind::Data, what + ": config echo rejected (" + e.what() + ")");
    }
}

inline void require_keys(const Json& j, const std::set<std::string>& required, const std::set<std::string>& optional,
                         const std::string& what) {
    if (!j.is_object()) throw Error(ErrorKind::Data, what + ": expected a JSON object");
    for (const auto& k : required) {
        if (!j.contains(k)) throw Error(ErrorKind::Data, what + ": missing field '" + k + "'");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!required.count(it.key()) && !optional.count(it.key())) {
            throw Error(ErrorKind::Data, what + ": unknown field '" + it.key() + "'");
        }
    }
}

inline Json header_json(const Dataset& ds) {
    Json h{{"format_version", kDatasetFormatVersion},
           {"kind", to_string(ds.kind)},
           {"camera1", camera_json(ds.cam1)},
           {"camera2", camera_json(ds.cam2)},
           {"config", keyvalues_json(ds.config)},
           {"master_seed", ds.master_seed},
           {"scenes", ds.records.size()}};
    if (ds.kind == DatasetKind::Diffused) h["source_config"] = keyvalues_json(ds.source_config);
    stamp_checksum(h);
    return h;
}

inline Json record_json(const Dataset& ds, const SceneRecord& r) {
    Json R = Json::array(), t = Json::array();
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) R.push_back(r.pose.R(i, k));
        t.push_back(r.pose.t(i));
    }
    Json matches = Json::array();
    for (const auto& c : r.matches.matches) matches.push_back({c[0], c[1], c[2], c[3]});
    Json labels = Json::array();
    for (const bool b : r.matches.labels) labels.push_back(b ? 1 : 0);
    Json j{{"scene_id", r.scene_id}, {"pose", {{"R", R}, {"t", t}}}, {"matches", matches}, {"labels", labels}};
    if (ds.kind == DatasetKind::Diffused) {
        Json prov = Json::array();
        for (const auto& p : r.provenance) {
            prov.push_back({{"origin", to_string(p.origin)}, {"t", p.origin == Origin::Kept ? Json(nullptr) : Json(p.t)}});
        }
        j["provenance"] = prov;
        j["sampled_r"] = r.sampled_r;
        j["sampled_s"] = r.sampled_s;
    }
    stamp_checksum(j);
    return j;
}

inline Origin origin_from_string(const std::string& s, const std::string& what) {
    if (s == "kept") return Origin::Kept;
    if (s == "diffused") return Origin::Diffused;
    if (s == "resampled") return Origin::Resampled;
    throw Error(ErrorKind::Data, what + ": unknown provenance origin '" + s + "'");
}

inline SceneRecord record_from_json(const Json& j, const Dataset& ds, const RunConfig* mcd_cfg, const std::string& what) {
    const bool diffused = ds.kind == DatasetKind::Diffused;
    if (diffused) {
        require_keys(j, {"scene_id", "pose", "matches", "labels", "provenance", "sampled_r", "sampled_s", "checksum"}, {},
                     what);
    } else {
        require_keys(j, {"scene_id", "pose", "matches", "labels", "checksum"}, {}, what);
    }
    verify_checksum(j, what);

    SceneRecord r;
    r.scene_id = member<std::size_t>(j, "scene_id", what);
    require_keys(j["pose"], {"R", "t"}, {}, what + " pose");
    const auto R = member<std::vector<double>>(j["pose"], "R", what);
    const auto t = member<std::vector<double>>(j["pose"], "t", what);
    if (R.size() != 9 || t.size() != 3) throw Error(ErrorKind::Data, what + ": pose needs 9 rotation and 3 translation entries");
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) r.pose.R(i, k) = R[3 * i + k];
        r.pose.t(i) = t[i];
    }
    if (!r.pose.valid(1e-6)) throw Error(ErrorKind::Data, what + ": pose is not a rotation with unit translation");

    r.matches = MatchSet::for_cameras(ds.cam1, ds.cam2);
    const auto rows = member<std::vector<std::vector<double>>>(j, "matches", what);
    r.matches.matches.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 4) throw Error(ErrorKind::Data, what + ": match " + std::to_string(i) + " needs 4 coordinates");
        const Correspondence c{rows[i][0], rows[i][1], rows[i][2], rows[i][3]};
        for (const double v : c) {
            if (!std::isfinite(v)) throw Error(ErrorKind::Data, what + ": non-finite coordinate");
        }
        if (!r.matches.in_bounds(c)) {
            throw Error(ErrorKind::Data, what + ": match " + std::to_string(i) + " lies outside the image bounds");
        }
        r.matches.matches.push_back(c);
    }
    const Json& labels = j["labels"];
    if (!labels.is_array() || labels.size() != rows.size()) {
        throw Error(ErrorKind::Data, what + ": label count differs from match count");
    }
    for (const auto& l : labels) {
        if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1)) {
            throw Error(ErrorKind::Data, what + ": labels must be 0 or 1");
        }
        r.matches.labels.push_back(l.get<int>() == 1);
    }
    if (ds.kind == DatasetKind::Gt && r.matches.inlier_count() != r.matches.size()) {
        throw Error(ErrorKind::Data, what + ": ground-truth matches must all be labeled inliers");
    }

    if (diffused) {
        const McdConfig& mc = mcd_cfg->mcd;
        r.sampled_r = member<double>(j, "sampled_r", what);
        r.sampled_s = member<double>(j, "sampled_s", what);
        if (!(r.sampled_r >= mc.r_min && r.sampled_r <= mc.r_max)) {
            throw Error(ErrorKind::Data, what + ": sampled_r outside the configured range");
        }
        if (!(r.sampled_s >= mc.s_min && r.sampled_s <= mc.s_max)) {
            throw Error(ErrorKind::Data, what + ": sampled_s outside the configured range");
        }
        const Json& prov = j["provenance"];
        if (!prov.is_array() || prov.size() != rows.size()) {
            throw Error(ErrorKind::Data, what + ": provenance count differs from match count");
        }
        std::size_t noised = 0;
        for (std::size_t i = 0; i < prov.size(); ++i) {
            const std::string pw = what + " provenance " + std::to_string(i);
            require_keys(prov[i], {"origin", "t"}, {}, pw);
            Provenance p;
            p.origin = origin_from_string(member<std::string>(prov[i], "origin", pw), pw);
            if (p.origin == Origin::Kept) {
                if (!prov[i]["t"].is_null()) throw Error(ErrorKind::Data, pw + ": kept matches carry t = null");
            } else {
                p.t = member<int>(prov[i], "t", pw);
                if (p.t < 1 || p.t > mc.schedule.T()) throw Error(ErrorKind::Data, pw + ": timestep outside [1, T]");
                ++noised;
            }
            if (!mc.relabel_by_residual && r.matches.labels[i] != (p.origin == Origin::Kept)) {
                throw Error(ErrorKind::Data, pw + ": label contradicts provenance");
            }
            r.provenance.push_back(p);
        }
        const auto expected = static_cast<std::size_t>(std::llround(r.sampled_r * static_cast<double>(rows.size())));
        if (noised != expected) throw Error(ErrorKind::Data, what + ": diffused count differs from round(r * N)");
    }
    return r;
}

}  // namespace detail

inline void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write dataset '" + path + "'");
    out << detail::header_json(ds).dump() << '\n';
    for (const auto& r : ds.records) out << detail::record_json(ds, r).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline Dataset parse_dataset(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Data, name + ": empty dataset file");
    Json h;
    try {
        h = Json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::Data, name + ":1: header is not valid JSON");
    }
    // Two decimal strings can parse to the same double, so byte-exactness is
    // checked on top of the checksum.
    if (h.dump() != line) throw Error(ErrorKind::Data, name + ":1: header is not in canonical form");
    const std::string hw = name + ":1";
    detail::require_keys(h, {"format_version", "kind", "camera1", "camera2", "config", "master_seed", "scenes", "checksum"},
                         {"source_config"}, hw);
    verify_checksum(h, hw);
    if (member<int>(h, "format_version", hw) != kDatasetFormatVersion) {
        throw Error(ErrorKind::Data, hw + ": unsupported format_version");
    }
    Dataset ds;
    ds.kind = dataset_kind_from_string(member<std::string>(h, "kind", hw));
    if ((ds.kind == DatasetKind::Diffused) != h.contains("source_config")) {
        throw Error(ErrorKind::Data, hw + ": source_config belongs to diffused datasets only");
    }
    ds.cam1 = detail::camera_from_json(h["camera1"], hw);
    ds.cam2 = detail::camera_from_json(h["camera2"], hw);
    ds.config = detail::keyvalues_from_json(h["config"], hw);
    const RunConfig cfg = detail::config_from_echo(ds.config, hw);
    if (ds.kind == DatasetKind::Diffused) {
        ds.source_config = detail::keyvalues_from_json(h["source_config"], hw);
        detail::config_from_echo(ds.source_config, hw);
    }
    ds.master_seed = member<std::uint64_t>(h, "master_seed", hw);
    const auto declared = member<std::size_t>(h, "scenes", hw);

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string what = name + ":" + std::to_string(lineno);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::Data, what + ": record is not valid JSON");
        }
        if (j.dump() != line) throw Error(ErrorKind::Data, what + ": record is not in canonical form");
        SceneRecord r = detail::record_from_json(j, ds, &cfg, what);
        if (!ds.records.empty() && r.scene_id <= ds.records.back().scene_id) {
            throw Error(ErrorKind::Data, what + ": scene ids must be strictly increasing");
        }
        ds.records.push_back(std::move(r));
    }
    if (ds.records.size() != declared) {
        throw Error(ErrorKind::Data, name + ": header declares " + std::to_string(declared) + " scenes, found " +
                                         std::to_string(ds.records.size()));
    }
    return ds;
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read dataset '" + path + "'");
    return parse_dataset(in, path);
}

}  // namespace mcd::io
