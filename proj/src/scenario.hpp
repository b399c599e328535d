#pragma once

#include "engine.hpp"
#include "market.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace recdual {

/// A fully specified batch computation: market, preferences, sizes, seed and
/// output destination. Parsed from a single JSON document; unknown keys are
/// rejected and every market/preference invariant is re-validated at load.
struct Scenario {
    std::string case_name = "linear";
    MarketSpec market;
    PreferenceSpec pref;
    double x0 = 1.0;
    int n_paths = 100000;
    int n_steps = 2000;
    uint64_t seed = 12345;
    int threads = 0;  // 0 = hardware count
    std::optional<std::string> out_path;

    TimeGrid grid() const { return TimeGrid{market.horizon, n_steps}; }
    std::string description() const;

    static Scenario from_json(const nlohmann::json& j);
    static Scenario from_text(const std::string& text);
    static Scenario from_file(const std::string& path);

    /// Canonical serialization; from_json(to_json(s)) reproduces s and
    /// re-serializes byte-identically.
    nlohmann::json to_json() const;
};

}  // namespace recdual
