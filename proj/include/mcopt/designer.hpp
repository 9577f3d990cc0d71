#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mcopt/catalog.hpp"
#include "mcopt/error.hpp"
#include "mcopt/physics.hpp"

namespace mcopt {

enum class Layout { common, coaxial };

/// What the vehicle must achieve.
struct DesignRequirements {
    double hover_time = 0.0;      ///< min
    double payload = 0.0;         ///< kg
    double thrust_ratio = 0.0;    ///< hover thrust / full-throttle thrust, (0, 1)
    int rotor_count = 4;          ///< propellers; equals arm count in the common layout
    std::optional<double> air_density;  ///< kg/m^3; exclusive with altitude
    std::optional<double> altitude;     ///< m
    double battery_density = 0.0;       ///< W*h/kg
    Layout layout = Layout::common;

    /// Operating air density, from air_density or through the atmosphere model.
    double density(const AtmosphereModel& atmosphere = {}) const;
};

void validate(const DesignRequirements& req);

enum class ScreeningMode { hover_time, payload, thrust_ratio };

std::string_view to_string(ScreeningMode mode) noexcept;
std::optional<ScreeningMode> parse_screening_mode(std::string_view text) noexcept;

/// Statistical constants of the sizing model.
struct DesignDefaults {
    double airframe_ratio = 0.19;      ///< airframe mass / total mass
    double discharge_ratio = 0.9;      ///< usable fraction of battery capacity
    double other_current = 0.5;        ///< A, avionics draw
    double battery_margin = 1.5;       ///< max discharge / full-throttle draw
    double prop_gap = 1.1;             ///< airframe radius / minimum radius
    double gravity = kStandardGravity;
    double screening_tolerance = 0.10;
    ScreeningMode screening_mode = ScreeningMode::hover_time;
    AtmosphereModel atmosphere;
};

void validate(const DesignDefaults& defaults);

inline constexpr std::size_t kIndexCount = 7;
using IndexVector = std::array<double, kIndexCount>;

/// Normalizer row for one copter-mass band (lower, upper].
struct NormalizerClass {
    std::string name;
    double min_mass = 0.0;
    double max_mass = 0.0;
    IndexVector normalizers{};
};

/// Mass bands covering (0.1, 50] kg. The 0.8-3 kg row is the Phantom-class
/// set {0.45, 1.5, 1, 11.5, 12, 5000, 0.65}; the other rows are editable
/// starting points.
std::vector<NormalizerClass> default_normalizer_classes();

struct EvaluationConfig {
    IndexVector weights{1, 1, 1, 1, 1, 1, 1};
    std::vector<NormalizerClass> classes = default_normalizer_classes();
    /// When set, used for every candidate instead of a class lookup.
    std::optional<IndexVector> normalizers;

    const NormalizerClass& select(double copter_mass) const;
};

void validate(const EvaluationConfig& cfg);

/// (1/thrust_ratio - 1) g.
double max_vertical_accel(double thrust_ratio, double gravity = kStandardGravity);

struct VehicleSizing {
    double full_throttle_thrust = 0.0;  ///< N, at the design density
    double full_throttle_speed = 0.0;   ///< RPM, at the design density
    double hover_thrust = 0.0;          ///< N per propeller
    double copter_mass = 0.0;
    double airframe_mass = 0.0;
    double battery_mass = 0.0;  ///< may be <= 0: the combo cannot carry the payload
    bool density_converted = false;

    bool feasible() const noexcept { return battery_mass > 0.0; }
};

/// Mass budget at the requested thrust ratio. Thrust is converted to the
/// design density first when it differs from the combo's reference density.
VehicleSizing size_vehicle(const PropulsionCombo& combo, const DesignRequirements& req,
                           const DesignDefaults& defaults);

/// Same, with the design density supplied and the thrust ratio overridden.
VehicleSizing size_vehicle(const PropulsionCombo& combo, const DesignRequirements& req,
                           const DesignDefaults& defaults, double density, double thrust_ratio);

struct HoverCurrent {
    double esc_reference = 0.0;  ///< A per ESC from the fit, at the reference density
    double esc = 0.0;            ///< A per ESC at the design density
    double battery = 0.0;        ///< A, n_p * esc + other_current
};

HoverCurrent hover_current(const PropulsionCombo& combo, double hover_thrust,
                           const DesignRequirements& req, const DesignDefaults& defaults);

HoverCurrent hover_current(const PropulsionCombo& combo, double hover_thrust,
                           const DesignRequirements& req, const DesignDefaults& defaults,
                           double density);

/// Usable discharge time in minutes: alpha_b * 60 rho_b m_battery / (U_b I_bHover).
double discharge_time(double battery_mass, double battery_voltage, double battery_hover_current,
                      const DesignRequirements& req, const DesignDefaults& defaults);

struct BatteryDesign {
    double voltage = 0.0;        ///< V
    double capacity = 0.0;       ///< mAh
    double max_discharge = 0.0;  ///< A
};

BatteryDesign design_battery(const PropulsionCombo& combo, double battery_hover_current,
                             double achieved_time, const DesignRequirements& req,
                             const DesignDefaults& defaults);

struct AirframeDesign {
    double min_radius = 0.0;  ///< m
    double diameter = 0.0;    ///< m, motor-circle diameter
};

AirframeDesign design_airframe(const PropulsionCombo& combo, const DesignRequirements& req,
                               const DesignDefaults& defaults);

struct DesignCandidate {
    std::string motor_id;
    std::string esc_id;
    std::string prop_id;
    double achieved_time = 0.0;
    double achieved_payload = 0.0;
    double achieved_ratio = 0.0;
    double copter_mass = 0.0;
    BatteryDesign battery;
    double battery_mass = 0.0;
    AirframeDesign airframe;
    double airframe_mass = 0.0;
    double combo_mass = 0.0;              ///< m_mep
    double full_throttle_thrust = 0.0;    ///< at the design density
    double full_throttle_current = 0.0;   ///< I_e*
    double motor_max_current = 0.0;
    double hover_thrust = 0.0;
    double esc_hover_current = 0.0;  ///< per ESC, at the design density
    double hover_current = 0.0;      ///< battery, I_bHover
    IndexVector indexes{};
    double objective = 0.0;
    bool density_converted = false;

    std::string key() const { return motor_id + ":" + esc_id + ":" + prop_id; }
};

enum class ScreenReason { accepted, time_mismatch, payload_mismatch, ratio_mismatch,
                          battery_mass, domain, safety };

std::string_view to_string(ScreenReason reason) noexcept;

struct ScreenResult {
    std::optional<DesignCandidate> candidate;
    ScreenReason reason = ScreenReason::accepted;
    std::string detail;
    std::optional<double> relative_error;  ///< mismatch of the screened quantity, when computed

    bool accepted() const noexcept { return candidate.has_value(); }
};

/// Sizes one combination against the requirements and accepts it when the
/// screened quantity is within the tolerance.
ScreenResult screen(const PropulsionCombo& combo, const DesignRequirements& req,
                    const DesignDefaults& defaults);

struct Evaluation {
    IndexVector indexes{};
    double objective = 0.0;
};

/// Indexes X1..X7 (diameter, mass, requirement mismatch, hover power per
/// thrust, voltage, capacity, current ratio) and J = sum k_i X_i / Xbar_i.
/// Lower is better.
Evaluation evaluate(const DesignCandidate& candidate, const EvaluationConfig& cfg,
                    const DesignRequirements& req);

struct ComboRejection {
    std::string combo;
    ScreenReason reason;
    std::string detail;
    std::optional<double> relative_error;
};

struct DesignResult {
    std::vector<DesignCandidate> candidates;  ///< ascending objective
    std::size_t accepted_count = 0;
    std::vector<ComboRejection> rejections;
    std::string normalizer_class;
    IndexVector normalizers{};
};

class NoFeasibleDesign : public Error {
public:
    NoFeasibleDesign(const std::string& message, std::vector<ComboRejection> rejections)
        : Error(ErrorCode::no_feasible_design, message), rejections_(std::move(rejections)) {}

    const std::vector<ComboRejection>& rejections() const noexcept { return rejections_; }

private:
    std::vector<ComboRejection> rejections_;
};

/// Screens, sizes and ranks every combination. Without explicit
/// normalizers one class row is chosen for the whole request, keyed by the
/// median copter mass of the accepted designs.
DesignResult design(const ComboDatabase& db, const DesignRequirements& req,
                    const DesignDefaults& defaults, const EvaluationConfig& cfg,
                    std::size_t top_n = 8);

void to_json(nlohmann::json& j, const DesignCandidate& candidate);

}  // namespace mcopt
