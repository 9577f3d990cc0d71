#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "mcopt/error.hpp"

namespace mcopt {

// Component catalog entries. SI units throughout: volts, amperes, ohms,
// kilograms, metres. Motor speed constants are RPM/V.

struct MotorSpec {
    std::string id;
    std::string name;
    double kv = 0.0;               ///< RPM/V
    double no_load_voltage = 0.0;  ///< V, voltage at which no_load_current was measured
    double no_load_current = 0.0;  ///< A
    double resistance = 0.0;       ///< ohm
    double max_current = 0.0;      ///< A
    double max_voltage = 0.0;      ///< V
    double mass = 0.0;             ///< kg

    bool operator==(const MotorSpec&) const = default;
};

struct EscSpec {
    std::string id;
    std::string name;
    double max_current = 0.0;
    double max_voltage = 0.0;
    double efficiency = 1.0;  ///< (0, 1]
    double mass = 0.0;

    bool operator==(const EscSpec&) const = default;
};

struct PropSpec {
    std::string id;
    std::string name;
    double diameter = 0.0;  ///< m
    double pitch = 0.0;     ///< m
    double mass = 0.0;
    std::optional<double> thrust_coeff;  ///< C_T, T = C_T rho (N/60)^2 D^4
    std::optional<double> torque_coeff;  ///< C_M, M = C_M rho (N/60)^2 D^5

    bool operator==(const PropSpec&) const = default;
};

enum class CatalogKind { motor, esc, prop };

struct LoadOptions {
    /// Treat mass values above 10 as grams and convert them to kilograms.
    /// Off by default; never applied implicitly.
    bool legacy_units = false;
};

std::vector<MotorSpec> parse_motors(const nlohmann::json& doc, const LoadOptions& options = {});
std::vector<EscSpec> parse_escs(const nlohmann::json& doc, const LoadOptions& options = {});
std::vector<PropSpec> parse_props(const nlohmann::json& doc, const LoadOptions& options = {});

std::vector<MotorSpec> load_motors(const std::filesystem::path& path, const LoadOptions& options = {});
std::vector<EscSpec> load_escs(const std::filesystem::path& path, const LoadOptions& options = {});
std::vector<PropSpec> load_props(const std::filesystem::path& path, const LoadOptions& options = {});

void validate(const MotorSpec& motor);
void validate(const EscSpec& esc);
void validate(const PropSpec& prop);

/// Reads and parses a JSON file, mapping I/O and syntax failures onto Error.
nlohmann::json read_json_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Compatibility
// ---------------------------------------------------------------------------

enum class CompatPolicy { deny_unlisted, allow_same_manufacturer };

/// Manufacturer prefix of a component id: everything before the first '-'.
/// Ids without a hyphen have no manufacturer and never match under
/// allow_same_manufacturer.
std::string_view manufacturer_of(std::string_view id) noexcept;

class CompatibilityTable {
public:
    static constexpr std::string_view wildcard = "*";

    CompatibilityTable() = default;
    explicit CompatibilityTable(CompatPolicy policy) : policy_(policy) {}

    void add(std::string motor_id, std::string esc_id = "*", std::string prop_id = "*");

    CompatPolicy policy() const noexcept { return policy_; }
    void set_policy(CompatPolicy policy) noexcept { policy_ = policy; }

    bool listed(std::string_view motor_id, std::string_view esc_id,
                std::string_view prop_id) const;
    bool allows(std::string_view motor_id, std::string_view esc_id,
                std::string_view prop_id) const;

    /// Throws ValidationError when an entry references an id missing from
    /// the catalogs.
    void validate_against(std::span<const MotorSpec> motors, std::span<const EscSpec> escs,
                          std::span<const PropSpec> props) const;

    using Entry = std::tuple<std::string, std::string, std::string>;
    const std::set<Entry, std::less<>>& entries() const noexcept { return entries_; }

private:
    CompatPolicy policy_ = CompatPolicy::deny_unlisted;
    std::set<Entry, std::less<>> entries_;
};

bool check_compatibility(const CompatibilityTable& table, const MotorSpec& motor,
                         const EscSpec& esc, const PropSpec& prop);

CompatibilityTable parse_compatibility(const nlohmann::json& doc);
CompatibilityTable load_compatibility(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Propulsion combination database
// ---------------------------------------------------------------------------

/// Coefficients of I_e = k_t2 T^2 + k_t1 T + k_t0 (A, A/N, A/N^2).
struct FitCoefficients {
    double k_t0 = 0.0;
    double k_t1 = 0.0;
    double k_t2 = 0.0;

    bool operator==(const FitCoefficients&) const = default;
};

enum class Provenance { experimental, estimated };

std::string_view to_string(Provenance source) noexcept;

/// One optimal motor + ESC + propeller record with its full-throttle test
/// data, measured at ref_air_density.
struct PropulsionCombo {
    std::string motor_id;
    std::string esc_id;
    std::string prop_id;
    double battery_voltage = 0.0;        ///< V
    double prop_diameter = 0.0;          ///< m
    double kv = 0.0;                     ///< RPM/V
    double mass = 0.0;                   ///< kg, motor + ESC + propeller
    double full_throttle_thrust = 0.0;   ///< N
    double full_throttle_speed = 0.0;    ///< RPM
    double full_throttle_current = 0.0;  ///< A, ESC input
    double motor_max_current = 0.0;      ///< A
    double ref_air_density = 0.0;        ///< kg/m^3
    FitCoefficients fit;
    Provenance source = Provenance::experimental;
    double mep_score = 0.0;  ///< objective value the combo won with

    /// "motor:esc:prop", the identifier used by the CLI and service.
    std::string key() const;

    bool operator==(const PropulsionCombo&) const = default;
};

void validate(const PropulsionCombo& combo);

inline constexpr std::string_view kDatabaseSchemaVersion = "1";

struct ComboDatabase {
    std::string schema_version{kDatabaseSchemaVersion};
    std::vector<PropulsionCombo> combos;

    /// Sorts by motor id, then by descending mep_score, then by key.
    void sort_canonical();

    const PropulsionCombo* find(std::string_view key) const;

    bool operator==(const ComboDatabase&) const = default;
};

/// Checks every combo and rejects duplicate (motor, esc, prop) triples.
void validate(const ComboDatabase& db);

ComboDatabase parse_database(const nlohmann::json& doc, const LoadOptions& options = {});
nlohmann::json database_to_json(const ComboDatabase& db);

void save_database(const ComboDatabase& db, const std::filesystem::path& path);
ComboDatabase load_database(const std::filesystem::path& path, const LoadOptions& options = {});

/// SHA-256 (hex) of the canonical JSON serialization.
std::string database_fingerprint(const ComboDatabase& db);

void to_json(nlohmann::json& j, const MotorSpec& motor);
void to_json(nlohmann::json& j, const EscSpec& esc);
void to_json(nlohmann::json& j, const PropSpec& prop);
void to_json(nlohmann::json& j, const PropulsionCombo& combo);

}  // namespace mcopt
