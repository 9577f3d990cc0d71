#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "mcopt/designer.hpp"
#include "mcopt/offline.hpp"

namespace mcopt {

/// Environment variable naming the default configuration file.
inline constexpr const char* kConfigEnvVar = "MCOPT_CONFIG";

/// A labelled thrust ratio offered to users instead of a raw number.
struct UsagePreset {
    double thrust_ratio = 0.0;
    bool authoritative = false;
    std::string note;
};

struct BatteryType {
    double energy_density = 0.0;  ///< W*h/kg
    bool authoritative = false;
    std::string note;
};

struct AppConfig {
    std::map<std::string, UsagePreset, std::less<>> usage_presets;
    std::map<std::string, BatteryType, std::less<>> battery_types;
    DesignDefaults defaults;
    EvaluationConfig evaluation;
    MepWeights mep_weights;
};

AppConfig builtin_config();

AppConfig parse_app_config(const nlohmann::json& doc);
nlohmann::json to_json(const AppConfig& config);
AppConfig load_app_config(const std::filesystem::path& path);

/// `explicit_path` if given, else the file named by MCOPT_CONFIG, else the
/// built-in configuration.
AppConfig resolve_app_config(const std::optional<std::filesystem::path>& explicit_path = {});

void validate(const AppConfig& config);

/// Applies the keys present in `overrides` on top of `defaults`. Unknown
/// keys and out-of-range values raise ValidationError naming the key.
DesignDefaults apply_overrides(DesignDefaults defaults, const nlohmann::json& overrides);

nlohmann::json to_json(const DesignDefaults& defaults);

}  // namespace mcopt
