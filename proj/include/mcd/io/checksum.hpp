#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mcd/core.hpp"

namespace mcd::io {

using Json = nlohmann::json;

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Checksum of a JSON object's compact dump, ignoring any "checksum" member.
inline std::string json_checksum(Json j) {
    j.erase("checksum");
    return hex64(fnv1a64(j.dump()));
}

inline void stamp_checksum(Json& j) { j["checksum"] = json_checksum(j); }

inline void verify_checksum(const Json& j, const std::string& what) {
    if (!j.contains("checksum") || !j["checksum"].is_string()) {
        throw Error(ErrorKind::Data, what + ": missing checksum");
    }
    if (j["checksum"].get<std::string>() != json_checksum(j)) {
        throw Error(ErrorKind::Data, what + ": checksum mismatch");
    }
}

/// Typed member access that reports missing or mistyped fields as data errors.
template <typename T>
T member(const Json& j, const char* key, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::Data, what + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::Data, what + ": field '" + key + "' has the wrong type");
    }
}

}  // namespace mcd::io
