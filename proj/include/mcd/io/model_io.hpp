#pragma once

// Sampler model files: one JSON document with the architecture, the
// run configuration echo and the flattened parameters. Doubles are
// written as shortest round-trip decimals, so a reload is bit-exact.

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mcd/io/checksum.hpp"
#include "mcd/io/config.hpp"
#include "mcd/sampler.hpp"

namespace mcd::io {

struct ModelFile {
    SamplerModel model;
    std::uint64_t init_seed = 0;
    KeyValues config;  // echo of the run that produced it
};

inline Json model_json(const ModelFile& mf) {
    mf.model.validate();
    Json cfg = Json::object();
    for (const auto& [k, v] : mf.config) cfg[k] = v;
    Json j{{"format_version", kModelFormatVersion},
           {"layer_dims", mf.model.layer_dims},
           {"activation", mf.model.activation},
           {"logit_bound", mf.model.logit_bound},
           {"seed", mf.init_seed},
           {"encoding", "decimal"},
           {"config", cfg},
           {"parameters", mf.model.flatten()}};
    stamp_checksum(j);
    return j;
}

inline ModelFile model_from_json(const Json& j, const std::string& what) {
    static const std::set<std::string> keys{"format_version", "layer_dims", "activation", "logit_bound", "seed",
                                            "encoding",       "config", "parameters", "checksum"};
    if (!j.is_object()) throw Error(ErrorKind::Data, what + ": model file must be a JSON object");
    for (const auto& k : keys) {
        if (!j.contains(k)) throw Error(ErrorKind::Data, what + ": missing field '" + k + "'");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!keys.count(it.key())) throw Error(ErrorKind::Data, what + ": unknown field '" + it.key() + "'");
    }
    verify_checksum(j, what);
    if (member<int>(j, "format_version", what) != kModelFormatVersion) {
        throw Error(ErrorKind::Data, what + ": unsupported model format_version");
    }
    if (member<std::string>(j, "encoding", what) != "decimal") throw Error(ErrorKind::Data, what + ": unsupported encoding");

    ModelFile mf;
    mf.init_seed = member<std::uint64_t>(j, "seed", what);
    mf.model.layer_dims = member<std::vector<int>>(j, "layer_dims", what);
    mf.model.activation = member<std::string>(j, "activation", what);
    mf.model.logit_bound = member<double>(j, "logit_bound", what);
    if (!j["config"].is_object()) throw Error(ErrorKind::Data, what + ": config must be an object");
    for (auto it = j["config"].begin(); it != j["config"].end(); ++it) {
        if (!it.value().is_string()) throw Error(ErrorKind::Data, what + ": config values must be strings");
        mf.config.emplace_back(it.key(), it.value().get<std::string>());
    }
    const auto params = member<std::vector<double>>(j, "parameters", what);
    if (mf.model.layer_dims.size() < 2) throw Error(ErrorKind::Data, what + ": layer_dims too short");
    for (const int d : mf.model.layer_dims) {
        if (d < 1) throw Error(ErrorKind::Data, what + ": layer_dims entries must be >= 1");
    }
    mf.model.unflatten(params);
    mf.model.validate();
    return mf;
}

inline void write_model(const std::string& path, const ModelFile& mf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write model '" + path + "'");
    out << model_json(mf).dump(1) << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline ModelFile read_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read model '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::Data, path + ": model file is not valid JSON");
    }
    if (j.dump(1) + "\n" != text) throw Error(ErrorKind::Data, path + ": model file is not in canonical form");
    return model_from_json(j, path);
}

}  // namespace mcd::io
