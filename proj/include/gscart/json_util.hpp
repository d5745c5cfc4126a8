// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "gscart/errors.hpp"

namespace gsc {

using json = nlohmann::json;

/// Rejects unknown keys so a typo in a config file fails loudly instead of
/// silently falling back to a default.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& context)
{
    if (!j.is_object())
        throw ConfigError(context + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError(context + ": unknown key \"" + it.key() + "\"");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback)
{
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
    }
}

} // namespace gsc
