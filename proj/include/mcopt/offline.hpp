#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mcopt/catalog.hpp"
#include "mcopt/physics.hpp"

namespace mcopt {

/// Thrust per electrical watt at the ESC input, N/W.
double thrust_efficiency(double thrust, double battery_voltage, double esc_current);

struct MepWeights {
    double thrust = 1.0;
    double efficiency = 1.0;
    double mass = 1.0;
};

struct MepNormalizers {
    double thrust = 0.0;      ///< N
    double efficiency = 0.0;  ///< N/W
    double mass = 0.0;        ///< kg
};

struct MepObjectiveConfig {
    MepWeights weights;
    /// Explicit normalizers; empty means "maximum over the feasible candidates".
    std::optional<MepNormalizers> normalizers;
};

void validate(const MepObjectiveConfig& config);

/// Full-throttle test data of one motor/ESC/propeller triple.
struct CandidateMeasurement {
    double battery_voltage = 0.0;        ///< V
    double full_throttle_current = 0.0;  ///< A
    double full_throttle_thrust = 0.0;   ///< N
    double full_throttle_speed = 0.0;    ///< RPM
    double mass = 0.0;                   ///< kg
    double air_density = 0.0;            ///< kg/m^3
    std::vector<ThrustCurrentSample> samples;
    Provenance source = Provenance::experimental;

    double efficiency() const {
        return thrust_efficiency(full_throttle_thrust, battery_voltage, full_throttle_current);
    }
};

void validate(const CandidateMeasurement& measurement, const std::string& label);

/// J_mep = k1 T/T_bar + k2 eta/eta_bar - k3 m/m_bar. Larger is better.
double mep_objective(double thrust, double efficiency, double mass, const MepWeights& weights,
                     const MepNormalizers& normalizers);

/// Scores with cfg.normalizers; throws unresolved_normalizer when they are
/// not set (resolve them with auto_normalizers first).
double score_combination(const CandidateMeasurement& measurement, const MepObjectiveConfig& cfg);

/// Component-wise maxima of thrust, efficiency and mass.
MepNormalizers auto_normalizers(std::span<const CandidateMeasurement> candidates);

enum class SafetyBound { motor_current, esc_current, motor_voltage, esc_voltage };

std::string_view to_string(SafetyBound bound) noexcept;

struct SafetyViolation {
    SafetyBound bound;
    double value = 0.0;
    double limit = 0.0;
};

struct SafetyCheck {
    std::vector<SafetyViolation> violations;

    bool ok() const noexcept { return violations.empty(); }
    explicit operator bool() const noexcept { return ok(); }
    std::string describe() const;
};

/// Closed bounds: I_e* <= I_mMax, I_e* <= I_eMax, U_b <= U_mMax, U_b <= U_eMax.
SafetyCheck check_safety(const MotorSpec& motor, const EscSpec& esc, double battery_voltage,
                         double full_throttle_current);

/// Supplies full-throttle data for a triple, or nothing when no data exists.
using MeasureFn = std::function<std::optional<CandidateMeasurement>(
    const MotorSpec&, const EscSpec&, const PropSpec&)>;

/// Measurement provider backed by recorded test data (measurements.json).
class MeasurementTable {
public:
    void add(std::string motor_id, std::string esc_id, std::string prop_id,
             CandidateMeasurement measurement);

    std::optional<CandidateMeasurement> operator()(const MotorSpec& motor, const EscSpec& esc,
                                                   const PropSpec& prop) const;

    std::size_t size() const noexcept { return rows_.size(); }

private:
    std::map<std::tuple<std::string, std::string, std::string>, CandidateMeasurement, std::less<>>
        rows_;
};

MeasurementTable parse_measurements(const nlohmann::json& doc, const LoadOptions& options = {});
MeasurementTable load_measurements(const std::filesystem::path& path,
                                   const LoadOptions& options = {});

/// Measurement provider that estimates full-throttle data from the
/// motor/ESC/propeller steady-state model. The battery voltage is the
/// highest one both the motor and ESC accept; samples sweep the throttle.
class PhysicsEstimator {
public:
    explicit PhysicsEstimator(double air_density = 1.2, std::size_t sample_count = 10);

    std::optional<CandidateMeasurement> operator()(const MotorSpec& motor, const EscSpec& esc,
                                                   const PropSpec& prop) const;

private:
    double air_density_;
    std::size_t sample_count_;
};

enum class PairRejection { incompatible, unmeasured, unsafe, invalid_measurement, fit_failed };

std::string_view to_string(PairRejection reason) noexcept;

struct RejectedPair {
    std::string esc_id;
    std::string prop_id;
    PairRejection reason;
    std::string detail;
};

struct MotorOptimization {
    std::optional<PropulsionCombo> best;
    std::size_t feasible_count = 0;
    std::vector<RejectedPair> rejections;
};

/// Exhaustive search over ESC x propeller pairs for one motor: screens by
/// compatibility and safety, scores the feasible pairs and keeps the
/// maximum. Ties fall to higher efficiency, then lower mass, then the
/// lexicographically smaller (esc, prop) ids.
MotorOptimization optimize_motor(const MotorSpec& motor, std::span<const EscSpec> escs,
                                 std::span<const PropSpec> props, const CompatibilityTable& table,
                                 const MeasureFn& measure, const MepObjectiveConfig& cfg);

struct MotorFailure {
    std::string motor_id;
    std::vector<RejectedPair> rejections;
};

struct BuildReport {
    ComboDatabase database;
    std::vector<MotorFailure> failures;  ///< motors without any feasible pairing
};

/// Runs optimize_motor for every motor. Motors are independent; with
/// threads > 1 they are optimized concurrently and merged in motor-id order.
BuildReport build_database(std::span<const MotorSpec> motors, std::span<const EscSpec> escs,
                           std::span<const PropSpec> props, const CompatibilityTable& table,
                           const MeasureFn& measure, const MepObjectiveConfig& cfg,
                           unsigned threads = 1);

}  // namespace mcopt
