#include "mcopt/designer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mcopt {

using nlohmann::json;

namespace {

void check(bool condition, const char* record, const char* field, const std::string& message) {
    if (!condition) throw ValidationError(record, field, message);
}

std::string format_number(double value) {
    std::ostringstream out;
    out.precision(4);
    out << value;
    return out.str();
}

}  // namespace

double DesignRequirements::density(const AtmosphereModel& atmosphere) const {
    if (air_density) return *air_density;
    if (altitude) return mcopt::air_density(*altitude, atmosphere);
    throw ValidationError("requirements", "air_density", "either air_density or altitude is required");
}

void validate(const DesignRequirements& req) {
    check(req.hover_time > 0.0, "requirements", "hover_time", "must be positive");
    check(req.payload > 0.0, "requirements", "payload", "must be positive");
    check(req.thrust_ratio > 0.0 && req.thrust_ratio < 1.0, "requirements", "thrust_ratio",
          "must lie in (0, 1)");
    check(req.rotor_count == 3 || (req.rotor_count >= 4 && req.rotor_count % 2 == 0),
          "requirements", "rotor_count", "must be 3 or an even number >= 4");
    check(req.battery_density > 0.0, "requirements", "battery_density", "must be positive");
    check(req.air_density.has_value() != req.altitude.has_value(), "requirements",
          "air_density", "exactly one of air_density and altitude must be given");
    if (req.air_density) {
        check(*req.air_density > 0.0 && *req.air_density < 1.5, "requirements", "air_density",
              "must lie in (0, 1.5)");
    }
    if (req.altitude) {
        check(*req.altitude >= 0.0 && *req.altitude < 20000.0, "requirements", "altitude",
              "must lie in [0, 20000)");
    }
    if (req.layout != Layout::common) {
        throw Error(ErrorCode::unsupported_layout,
                    "only the common layout (one propeller per arm) is supported");
    }
}

std::string_view to_string(ScreeningMode mode) noexcept {
    switch (mode) {
        case ScreeningMode::hover_time: return "hover_time";
        case ScreeningMode::payload: return "payload";
        case ScreeningMode::thrust_ratio: return "thrust_ratio";
    }
    return "unknown";
}

std::optional<ScreeningMode> parse_screening_mode(std::string_view text) noexcept {
    if (text == "hover_time") return ScreeningMode::hover_time;
    if (text == "payload") return ScreeningMode::payload;
    if (text == "thrust_ratio") return ScreeningMode::thrust_ratio;
    return std::nullopt;
}

void validate(const DesignDefaults& d) {
    check(d.airframe_ratio > 0.0 && d.airframe_ratio < 0.5, "defaults", "airframe_ratio",
          "must lie in (0, 0.5)");
    check(d.discharge_ratio > 0.0 && d.discharge_ratio < 1.0, "defaults", "discharge_ratio",
          "must lie in (0, 1)");
    check(d.other_current >= 0.0, "defaults", "other_current", "must be non-negative");
    check(d.battery_margin >= 1.5, "defaults", "battery_margin", "must be at least 1.5");
    check(d.prop_gap >= 1.0 && d.prop_gap <= 1.5, "defaults", "prop_gap", "must lie in [1, 1.5]");
    check(d.gravity > 0.0, "defaults", "gravity", "must be positive");
    check(d.screening_tolerance > 0.0, "defaults", "screening_tolerance", "must be positive");
    validate(d.atmosphere);
}

std::vector<NormalizerClass> default_normalizer_classes() {
    return {
        {"micro", 0.1, 0.8, {0.25, 0.5, 1.0, 10.0, 11.1, 1500.0, 0.65}},
        {"phantom", 0.8, 3.0, {0.45, 1.5, 1.0, 11.5, 12.0, 5000.0, 0.65}},
        {"medium", 3.0, 10.0, {0.9, 6.0, 1.0, 12.0, 22.2, 16000.0, 0.65}},
        {"heavy", 10.0, 50.0, {1.6, 25.0, 1.0, 13.0, 44.4, 30000.0, 0.65}},
    };
}

const NormalizerClass& EvaluationConfig::select(double copter_mass) const {
    for (const auto& row : classes) {
        if (copter_mass > row.min_mass && copter_mass <= row.max_mass) return row;
    }
    throw Error(ErrorCode::unresolved_normalizer,
                "no normalizer class covers a copter mass of " + format_number(copter_mass) +
                    " kg");
}

void validate(const EvaluationConfig& cfg) {
    for (double w : cfg.weights) {
        check(w > 0.0 && std::isfinite(w), "evaluation", "weights", "must be positive");
    }
    auto positive = [](const IndexVector& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0 && std::isfinite(x); });
    };
    if (cfg.normalizers) {
        check(positive(*cfg.normalizers), "evaluation", "normalizers", "must be positive");
        return;
    }
    check(!cfg.classes.empty(), "evaluation", "classes", "normalizer class table is empty");
    auto rows = cfg.classes;
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.min_mass < b.min_mass; });
    check(rows.front().min_mass <= 0.1 && rows.back().max_mass >= 50.0, "evaluation", "classes",
          "must cover (0.1, 50] kg");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        check(rows[i].max_mass > rows[i].min_mass, "evaluation", "classes",
              "class '" + rows[i].name + "' has an empty mass band");
        check(positive(rows[i].normalizers), "evaluation", "classes",
              "class '" + rows[i].name + "' has a non-positive normalizer");
        if (i + 1 < rows.size()) {
            check(rows[i].max_mass == rows[i + 1].min_mass, "evaluation", "classes",
                  "mass bands must be contiguous");
        }
    }
}

double max_vertical_accel(double thrust_ratio, double gravity) {
    require_domain(thrust_ratio > 0.0 && thrust_ratio <= 1.0, "thrust ratio must lie in (0, 1]");
    return (1.0 / thrust_ratio - 1.0) * gravity;
}

// ---------------------------------------------------------------------------

VehicleSizing size_vehicle(const PropulsionCombo& combo, const DesignRequirements& req,
                           const DesignDefaults& defaults, double density, double thrust_ratio) {
    VehicleSizing s;
    if (density == combo.ref_air_density) {
        s.full_throttle_thrust = combo.full_throttle_thrust;
        s.full_throttle_speed = combo.full_throttle_speed;
    } else {
        const auto converted = convert_full_throttle(combo, density);
        s.full_throttle_thrust = converted.thrust;
        s.full_throttle_speed = converted.speed;
        s.density_converted = true;
    }
    const double rotors = static_cast<double>(req.rotor_count);
    s.hover_thrust = thrust_ratio * s.full_throttle_thrust;
    s.copter_mass = rotors * s.hover_thrust / defaults.gravity;
    s.airframe_mass = defaults.airframe_ratio * s.copter_mass;
    s.battery_mass =
        (1.0 - defaults.airframe_ratio) * s.copter_mass - req.payload - rotors * combo.mass;
    return s;
}

VehicleSizing size_vehicle(const PropulsionCombo& combo, const DesignRequirements& req,
                           const DesignDefaults& defaults) {
    return size_vehicle(combo, req, defaults, req.density(defaults.atmosphere), req.thrust_ratio);
}

HoverCurrent hover_current(const PropulsionCombo& combo, double hover_thrust,
                           const DesignRequirements& req, const DesignDefaults& defaults,
                           double density) {
    HoverCurrent h;
    h.esc_reference = eval_thrust_current(combo.fit, hover_thrust);
    h.esc = density == combo.ref_air_density
                ? h.esc_reference
                : convert_hover_current(combo, hover_thrust, h.esc_reference, density);
    h.battery = static_cast<double>(req.rotor_count) * h.esc + defaults.other_current;
    return h;
}

HoverCurrent hover_current(const PropulsionCombo& combo, double hover_thrust,
                           const DesignRequirements& req, const DesignDefaults& defaults) {
    return hover_current(combo, hover_thrust, req, defaults, req.density(defaults.atmosphere));
}

double discharge_time(double battery_mass, double battery_voltage, double battery_hover_current,
                      const DesignRequirements& req, const DesignDefaults& defaults) {
    require_domain(battery_voltage > 0.0 && battery_hover_current > 0.0,
                   "discharge time needs positive voltage and hover current");
    return defaults.discharge_ratio * 60.0 * req.battery_density * battery_mass /
           (battery_voltage * battery_hover_current);
}

BatteryDesign design_battery(const PropulsionCombo& combo, double battery_hover_current,
                             double achieved_time, const DesignRequirements& req,
                             const DesignDefaults& defaults) {
    BatteryDesign b;
    b.voltage = combo.battery_voltage;
    b.max_discharge = defaults.battery_margin *
                      (static_cast<double>(req.rotor_count) * combo.full_throttle_current +
                       defaults.other_current);
    b.capacity =
        1000.0 * battery_hover_current * (achieved_time / defaults.discharge_ratio) / 60.0;
    return b;
}

AirframeDesign design_airframe(const PropulsionCombo& combo, const DesignRequirements& req,
                               const DesignDefaults& defaults) {
    if (req.layout != Layout::common) {
        throw Error(ErrorCode::unsupported_layout,
                    "only the common layout (one propeller per arm) is supported");
    }
    require_domain(req.rotor_count >= 3, "an airframe needs at least 3 arms");
    const double half_angle_sine = std::sin(std::numbers::pi / req.rotor_count);
    AirframeDesign a;
    a.min_radius = combo.prop_diameter / (2.0 * half_angle_sine);
    a.diameter = defaults.prop_gap * combo.prop_diameter / half_angle_sine;
    return a;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ScreenReason reason) noexcept {
    switch (reason) {
        case ScreenReason::accepted: return "accepted";
        case ScreenReason::time_mismatch: return "time_mismatch";
        case ScreenReason::payload_mismatch: return "payload_mismatch";
        case ScreenReason::ratio_mismatch: return "ratio_mismatch";
        case ScreenReason::battery_mass: return "battery_mass";
        case ScreenReason::domain: return "domain";
        case ScreenReason::safety: return "safety";
    }
    return "unknown";
}

namespace {

struct Operating {
    VehicleSizing sizing;
    HoverCurrent current;
    double ratio = 0.0;
};

Operating operate(const PropulsionCombo& combo, const DesignRequirements& req,
                  const DesignDefaults& defaults, double density, double thrust_ratio) {
    Operating op;
    op.ratio = thrust_ratio;
    op.sizing = size_vehicle(combo, req, defaults, density, thrust_ratio);
    op.current = hover_current(combo, op.sizing.hover_thrust, req, defaults, density);
    return op;
}

double required_battery_mass(double time, const PropulsionCombo& combo, double battery_current,
                             const DesignRequirements& req, const DesignDefaults& defaults) {
    return time * combo.battery_voltage * battery_current /
           (defaults.discharge_ratio * 60.0 * req.battery_density);
}

ScreenResult reject(ScreenReason reason, std::string detail,
                    std::optional<double> relative_error = std::nullopt) {
    ScreenResult r;
    r.reason = reason;
    r.detail = std::move(detail);
    r.relative_error = relative_error;
    return r;
}

// Thrust ratio in [lo, hi] at which the discharge time equals the target,
// closest to `preferred`. Scans for sign changes, then bisects.
std::optional<double> solve_thrust_ratio(const PropulsionCombo& combo,
                                         const DesignRequirements& req,
                                         const DesignDefaults& defaults, double density,
                                         double lo, double hi, double preferred) {
    auto mismatch = [&](double ratio) -> std::optional<double> {
        try {
            const auto op = operate(combo, req, defaults, density, ratio);
            if (!op.sizing.feasible()) return std::nullopt;
            return discharge_time(op.sizing.battery_mass, combo.battery_voltage,
                                  op.current.battery, req, defaults) -
                   req.hover_time;
        } catch (const Error&) {
            return std::nullopt;
        }
    };

    constexpr int kGrid = 64;
    std::optional<double> best;
    double prev_x = lo;
    auto prev = mismatch(lo);
    for (int i = 1; i <= kGrid; ++i) {
        const double x = lo + (hi - lo) * i / kGrid;
        auto value = mismatch(x);
        if (prev && value && (*prev == 0.0 || (*prev < 0.0) != (*value < 0.0))) {
            double a = prev_x;
            double b = x;
            double fa = *prev;
            for (int iter = 0; iter < 200 && b - a > 1e-14; ++iter) {
                const double mid = 0.5 * (a + b);
                auto fm = mismatch(mid);
                if (!fm) break;
                if ((fa < 0.0) == (*fm < 0.0) && *fm != 0.0) {
                    a = mid;
                    fa = *fm;
                } else {
                    b = mid;
                }
            }
            const double root = fa == 0.0 ? a : 0.5 * (a + b);
            if (!best || std::abs(root - preferred) < std::abs(*best - preferred)) best = root;
        }
        prev = value;
        prev_x = x;
    }
    return best;
}

}  // namespace

ScreenResult screen(const PropulsionCombo& combo, const DesignRequirements& req,
                    const DesignDefaults& defaults) {
    const double tolerance = defaults.screening_tolerance;
    double density = 0.0;
    Operating op;
    double achieved_time = 0.0;
    double achieved_payload = req.payload;
    double battery_mass = 0.0;

    try {
        density = req.density(defaults.atmosphere);
        switch (defaults.screening_mode) {
            case ScreeningMode::hover_time: {
                op = operate(combo, req, defaults, density, req.thrust_ratio);
                if (!op.sizing.feasible()) {
                    return reject(ScreenReason::battery_mass,
                                  "battery mass " + format_number(op.sizing.battery_mass) +
                                      " kg is not positive");
                }
                battery_mass = op.sizing.battery_mass;
                achieved_time = discharge_time(battery_mass, combo.battery_voltage,
                                               op.current.battery, req, defaults);
                const double error = std::abs(achieved_time - req.hover_time) / req.hover_time;
                if (error > tolerance) {
                    return reject(ScreenReason::time_mismatch,
                                  "hover time " + format_number(achieved_time) + " min vs " +
                                      format_number(req.hover_time) + " min",
                                  error);
                }
                break;
            }
            case ScreeningMode::payload: {
                op = operate(combo, req, defaults, density, req.thrust_ratio);
                battery_mass =
                    required_battery_mass(req.hover_time, combo, op.current.battery, req, defaults);
                achieved_payload = (1.0 - defaults.airframe_ratio) * op.sizing.copter_mass -
                                   req.rotor_count * combo.mass - battery_mass;
                if (!(achieved_payload > 0.0)) {
                    return reject(ScreenReason::battery_mass,
                                  "no payload capacity left after a " +
                                      format_number(battery_mass) + " kg battery");
                }
                const double error = std::abs(achieved_payload - req.payload) / req.payload;
                if (error > tolerance) {
                    return reject(ScreenReason::payload_mismatch,
                                  "payload " + format_number(achieved_payload) + " kg vs " +
                                      format_number(req.payload) + " kg",
                                  error);
                }
                op.sizing.battery_mass = battery_mass;
                achieved_time = req.hover_time;
                break;
            }
            case ScreeningMode::thrust_ratio: {
                const double lo = std::max(req.thrust_ratio * (1.0 - tolerance), 1e-6);
                const double hi = std::min(req.thrust_ratio * (1.0 + tolerance), 1.0 - 1e-9);
                auto ratio = solve_thrust_ratio(combo, req, defaults, density, lo, hi,
                                                req.thrust_ratio);
                if (!ratio) {
                    return reject(ScreenReason::ratio_mismatch,
                                  "no thrust ratio within tolerance meets the hover time");
                }
                op = operate(combo, req, defaults, density, *ratio);
                if (!op.sizing.feasible()) {
                    return reject(ScreenReason::battery_mass, "battery mass is not positive");
                }
                battery_mass = op.sizing.battery_mass;
                achieved_time = discharge_time(battery_mass, combo.battery_voltage,
                                               op.current.battery, req, defaults);
                break;
            }
        }
    } catch (const Error& e) {
        return reject(ScreenReason::domain, e.what());
    }

    DesignCandidate c;
    c.motor_id = combo.motor_id;
    c.esc_id = combo.esc_id;
    c.prop_id = combo.prop_id;
    c.achieved_time = achieved_time;
    c.achieved_payload = achieved_payload;
    c.achieved_ratio = op.ratio;
    c.copter_mass = op.sizing.copter_mass;
    c.battery_mass = battery_mass;
    c.airframe_mass = op.sizing.airframe_mass;
    c.combo_mass = combo.mass;
    c.full_throttle_thrust = op.sizing.full_throttle_thrust;
    c.full_throttle_current = combo.full_throttle_current;
    c.motor_max_current = combo.motor_max_current;
    c.hover_thrust = op.sizing.hover_thrust;
    c.esc_hover_current = op.current.esc;
    c.hover_current = op.current.battery;
    c.density_converted = op.sizing.density_converted;
    try {
        c.battery = design_battery(combo, c.hover_current, c.achieved_time, req, defaults);
        c.airframe = design_airframe(combo, req, defaults);
    } catch (const Error& e) {
        return reject(ScreenReason::domain, e.what());
    }
    if (c.hover_current > c.battery.max_discharge / defaults.battery_margin) {
        return reject(ScreenReason::safety, "hover current exceeds the full-throttle draw");
    }

    ScreenResult accepted;
    accepted.candidate = std::move(c);
    return accepted;
}

Evaluation evaluate(const DesignCandidate& c, const EvaluationConfig& cfg,
                    const DesignRequirements& req) {
    const IndexVector& normalizers =
        cfg.normalizers ? *cfg.normalizers : cfg.select(c.copter_mass).normalizers;

    auto relative = [](double actual, double desired) { return (actual - desired) / desired; };
    const double time_error = relative(c.achieved_time, req.hover_time);
    const double payload_error = relative(c.achieved_payload, req.payload);
    const double ratio_error = relative(c.achieved_ratio, req.thrust_ratio);

    Evaluation e;
    e.indexes = {
        c.airframe.diameter,
        c.copter_mass,
        std::sqrt(time_error * time_error + payload_error * payload_error +
                  ratio_error * ratio_error),
        c.battery.voltage * c.esc_hover_current / c.hover_thrust,
        c.battery.voltage,
        c.battery.capacity,
        c.full_throttle_current / c.motor_max_current,
    };
    for (std::size_t i = 0; i < kIndexCount; ++i) {
        e.objective += cfg.weights[i] * e.indexes[i] / normalizers[i];
    }
    return e;
}

DesignResult design(const ComboDatabase& db, const DesignRequirements& req,
                    const DesignDefaults& defaults, const EvaluationConfig& cfg,
                    std::size_t top_n) {
    validate(req);
    validate(defaults);
    validate(cfg);
    if (top_n < 1) throw ValidationError("request", "top_n", "must be at least 1");
    if (db.combos.empty()) {
        throw NoFeasibleDesign("the combination database is empty", {});
    }

    DesignResult result;
    std::vector<DesignCandidate> accepted;
    for (const auto& combo : db.combos) {
        auto screened = screen(combo, req, defaults);
        if (screened.accepted()) {
            accepted.push_back(std::move(*screened.candidate));
        } else {
            result.rejections.push_back(
                {combo.key(), screened.reason, std::move(screened.detail), screened.relative_error});
        }
    }
    if (accepted.empty()) {
        throw NoFeasibleDesign("no combination satisfies the requirements within tolerance",
                               std::move(result.rejections));
    }
    result.accepted_count = accepted.size();

    EvaluationConfig resolved = cfg;
    if (cfg.normalizers) {
        result.normalizer_class = "explicit";
        result.normalizers = *cfg.normalizers;
    } else {
        std::vector<double> masses;
        masses.reserve(accepted.size());
        for (const auto& c : accepted) masses.push_back(c.copter_mass);
        std::sort(masses.begin(), masses.end());
        const std::size_t mid = masses.size() / 2;
        const double median =
            masses.size() % 2 ? masses[mid] : 0.5 * (masses[mid - 1] + masses[mid]);
        const auto& row = cfg.select(median);
        result.normalizer_class = row.name;
        result.normalizers = row.normalizers;
        resolved.normalizers = row.normalizers;
    }

    for (auto& c : accepted) {
        const auto e = evaluate(c, resolved, req);
        c.indexes = e.indexes;
        c.objective = e.objective;
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const DesignCandidate& a, const DesignCandidate& b) {
                  if (a.objective != b.objective) return a.objective < b.objective;
                  if (a.copter_mass != b.copter_mass) return a.copter_mass < b.copter_mass;
                  return a.key() < b.key();
              });
    if (accepted.size() > top_n) accepted.resize(top_n);
    result.candidates = std::move(accepted);
    return result;
}

void to_json(json& j, const DesignCandidate& c) {
    j = json{
        {"combo_ref",
         {{"motor_id", c.motor_id}, {"esc_id", c.esc_id}, {"prop_id", c.prop_id}, {"key", c.key()}}},
        {"achieved_time", c.achieved_time},
        {"achieved_payload", c.achieved_payload},
        {"achieved_ratio", c.achieved_ratio},
        {"copter_mass", c.copter_mass},
        {"battery",
         {{"voltage", c.battery.voltage},
          {"capacity", c.battery.capacity},
          {"max_discharge", c.battery.max_discharge},
          {"mass", c.battery_mass}}},
        {"airframe",
         {{"diameter", c.airframe.diameter},
          {"min_radius", c.airframe.min_radius},
          {"mass", c.airframe_mass}}},
        {"combo_mass", c.combo_mass},
        {"full_throttle_thrust", c.full_throttle_thrust},
        {"hover_thrust", c.hover_thrust},
        {"esc_hover_current", c.esc_hover_current},
        {"hover_current", c.hover_current},
        {"indexes", c.indexes},
        {"objective", c.objective},
        {"density_converted", c.density_converted},
    };
}

}  // namespace mcopt
