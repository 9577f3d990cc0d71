#include "mcopt/offline.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>

#include "mcopt/error.hpp"

namespace mcopt {

using nlohmann::json;

double thrust_efficiency(double thrust, double battery_voltage, double esc_current) {
    require_domain(battery_voltage > 0.0 && esc_current > 0.0,
                   "thrust efficiency needs positive voltage and current");
    return thrust / (battery_voltage * esc_current);
}

void validate(const MepObjectiveConfig& config) {
    const auto& w = config.weights;
    if (!(w.thrust > 0.0 && w.efficiency > 0.0 && w.mass > 0.0)) {
        throw ValidationError("mep_objective", "weights", "must be positive");
    }
    if (config.normalizers) {
        const auto& n = *config.normalizers;
        if (!(n.thrust > 0.0 && n.efficiency > 0.0 && n.mass > 0.0)) {
            throw ValidationError("mep_objective", "normalizers", "must be positive");
        }
    }
}

void validate(const CandidateMeasurement& m, const std::string& label) {
    auto check = [&](bool ok, const char* field, const char* message) {
        if (!ok) throw ValidationError(label, field, message);
    };
    check(m.battery_voltage > 0.0, "battery_voltage", "must be positive");
    check(m.full_throttle_current > 0.0, "full_throttle_current", "must be positive");
    check(m.full_throttle_thrust > 0.0, "full_throttle_thrust", "must be positive");
    check(m.full_throttle_speed > 0.0, "full_throttle_speed", "must be positive");
    check(m.mass > 0.0, "mass", "must be positive");
    check(m.air_density > 0.3 && m.air_density < 1.5, "air_density", "must lie in (0.3, 1.5)");
    const double upper = m.full_throttle_thrust * (1.0 + 1e-9);
    for (const auto& s : m.samples) {
        check(s.thrust >= 0.0 && s.thrust <= upper, "samples",
              "thrust outside [0, full_throttle_thrust]");
        check(s.current >= 0.0, "samples", "current must be non-negative");
    }
}

double mep_objective(double thrust, double efficiency, double mass, const MepWeights& weights,
                     const MepNormalizers& normalizers) {
    return weights.thrust * thrust / normalizers.thrust +
           weights.efficiency * efficiency / normalizers.efficiency -
           weights.mass * mass / normalizers.mass;
}

double score_combination(const CandidateMeasurement& measurement, const MepObjectiveConfig& cfg) {
    if (!cfg.normalizers) {
        throw Error(ErrorCode::unresolved_normalizer,
                    "combination score needs resolved normalizers");
    }
    return mep_objective(measurement.full_throttle_thrust, measurement.efficiency(),
                         measurement.mass, cfg.weights, *cfg.normalizers);
}

MepNormalizers auto_normalizers(std::span<const CandidateMeasurement> candidates) {
    if (candidates.empty()) {
        throw Error(ErrorCode::unresolved_normalizer,
                    "automatic normalizers need at least one candidate");
    }
    MepNormalizers n;
    for (const auto& c : candidates) {
        n.thrust = std::max(n.thrust, c.full_throttle_thrust);
        n.efficiency = std::max(n.efficiency, c.efficiency());
        n.mass = std::max(n.mass, c.mass);
    }
    return n;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SafetyBound bound) noexcept {
    switch (bound) {
        case SafetyBound::motor_current: return "motor_max_current";
        case SafetyBound::esc_current: return "esc_max_current";
        case SafetyBound::motor_voltage: return "motor_max_voltage";
        case SafetyBound::esc_voltage: return "esc_max_voltage";
    }
    return "unknown";
}

std::string SafetyCheck::describe() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        const auto& v = violations[i];
        if (i) out << "; ";
        out << to_string(v.bound) << ' ' << v.value << " > " << v.limit;
    }
    return out.str();
}

SafetyCheck check_safety(const MotorSpec& motor, const EscSpec& esc, double battery_voltage,
                         double full_throttle_current) {
    SafetyCheck result;
    auto bound = [&](SafetyBound which, double value, double limit) {
        if (value > limit) result.violations.push_back({which, value, limit});
    };
    bound(SafetyBound::motor_current, full_throttle_current, motor.max_current);
    bound(SafetyBound::esc_current, full_throttle_current, esc.max_current);
    bound(SafetyBound::motor_voltage, battery_voltage, motor.max_voltage);
    bound(SafetyBound::esc_voltage, battery_voltage, esc.max_voltage);
    return result;
}

// ---------------------------------------------------------------------------

void MeasurementTable::add(std::string motor_id, std::string esc_id, std::string prop_id,
                           CandidateMeasurement measurement) {
    auto key = std::make_tuple(std::move(motor_id), std::move(esc_id), std::move(prop_id));
    auto [it, inserted] = rows_.emplace(std::move(key), std::move(measurement));
    if (!inserted) {
        const auto& [m, e, p] = it->first;
        throw Error(ErrorCode::duplicate_id,
                    "duplicate measurement for '" + m + ":" + e + ":" + p + "'");
    }
}

std::optional<CandidateMeasurement> MeasurementTable::operator()(const MotorSpec& motor,
                                                                 const EscSpec& esc,
                                                                 const PropSpec& prop) const {
    auto it = rows_.find(std::make_tuple(std::string_view(motor.id), std::string_view(esc.id),
                                         std::string_view(prop.id)));
    if (it == rows_.end()) return std::nullopt;
    return it->second;
}

MeasurementTable parse_measurements(const json& doc, const LoadOptions& options) {
    if (!doc.is_array()) {
        throw Error(ErrorCode::parse_error, "measurements must be a top-level JSON array");
    }
    MeasurementTable table;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& r = doc[i];
        std::string label = "measurements[" + std::to_string(i) + "]";
        auto text = [&](const char* field) {
            if (!r.is_object() || !r.contains(field) || !r[field].is_string()) {
                throw ValidationError(label, field, "expected a string");
            }
            return r[field].get<std::string>();
        };
        auto number = [&](const char* field) {
            if (!r.contains(field) || !r[field].is_number()) {
                throw ValidationError(label, field, "expected a number");
            }
            return r[field].get<double>();
        };
        std::string motor = text("motor");
        std::string esc = text("esc");
        std::string prop = text("prop");
        label = motor + ":" + esc + ":" + prop;

        CandidateMeasurement m;
        m.battery_voltage = number("battery_voltage");
        m.full_throttle_current = number("full_throttle_current");
        m.full_throttle_thrust = number("full_throttle_thrust");
        m.full_throttle_speed = number("full_throttle_speed");
        m.mass = number("mass");
        if (options.legacy_units && m.mass > 10.0) m.mass /= 1000.0;
        m.air_density = number("air_density");
        std::string source = r.value("source", "experimental");
        if (source == "experimental") {
            m.source = Provenance::experimental;
        } else if (source == "estimated") {
            m.source = Provenance::estimated;
        } else {
            throw ValidationError(label, "source", "unknown provenance '" + source + "'");
        }
        if (!r.contains("samples") || !r["samples"].is_array()) {
            throw ValidationError(label, "samples", "expected an array");
        }
        for (const auto& s : r["samples"]) {
            if (!s.is_object() || !s.contains("thrust") || !s.contains("current") ||
                !s["thrust"].is_number() || !s["current"].is_number()) {
                throw ValidationError(label, "samples", "expected {thrust, current} objects");
            }
            m.samples.push_back({s["thrust"].get<double>(), s["current"].get<double>()});
        }
        validate(m, label);
        table.add(std::move(motor), std::move(esc), std::move(prop), std::move(m));
    }
    return table;
}

MeasurementTable load_measurements(const std::filesystem::path& path, const LoadOptions& options) {
    return parse_measurements(read_json_file(path), options);
}

PhysicsEstimator::PhysicsEstimator(double air_density, std::size_t sample_count)
    : air_density_(air_density), sample_count_(sample_count) {
    if (!(air_density > 0.0)) {
        throw ValidationError("estimator", "air_density", "must be positive");
    }
    if (sample_count < 3) {
        throw ValidationError("estimator", "sample_count", "must be at least 3");
    }
}

std::optional<CandidateMeasurement> PhysicsEstimator::operator()(const MotorSpec& motor,
                                                                 const EscSpec& esc,
                                                                 const PropSpec& prop) const {
    const double voltage = std::min(motor.max_voltage, esc.max_voltage);
    try {
        const auto full = steady_state(motor, esc, prop, voltage, 1.0, air_density_);
        if (!(full.thrust > 0.0)) return std::nullopt;

        CandidateMeasurement m;
        m.battery_voltage = voltage;
        m.full_throttle_current = full.esc_current;
        m.full_throttle_thrust = full.thrust;
        m.full_throttle_speed = full.speed;
        m.mass = motor.mass + esc.mass + prop.mass;
        m.air_density = air_density_;
        m.source = Provenance::estimated;
        // Low throttle settings stall the rotor; sweep from 30% upwards.
        constexpr double kMinThrottle = 0.3;
        for (std::size_t i = 0; i < sample_count_; ++i) {
            const double throttle =
                kMinThrottle + (1.0 - kMinThrottle) * static_cast<double>(i) /
                                   static_cast<double>(sample_count_ - 1);
            const auto op = steady_state(motor, esc, prop, voltage, throttle, air_density_);
            if (op.thrust > 0.0) m.samples.push_back({op.thrust, op.esc_current});
        }
        return m;
    } catch (const Error&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------

std::string_view to_string(PairRejection reason) noexcept {
    switch (reason) {
        case PairRejection::incompatible: return "incompatible";
        case PairRejection::unmeasured: return "unmeasured";
        case PairRejection::unsafe: return "unsafe";
        case PairRejection::invalid_measurement: return "invalid_measurement";
        case PairRejection::fit_failed: return "fit_failed";
    }
    return "unknown";
}

namespace {

struct FeasiblePair {
    const EscSpec* esc;
    const PropSpec* prop;
    CandidateMeasurement measurement;
    FitCoefficients fit;
};

PropulsionCombo make_combo(const MotorSpec& motor, const FeasiblePair& pair) {
    PropulsionCombo c;
    c.motor_id = motor.id;
    c.esc_id = pair.esc->id;
    c.prop_id = pair.prop->id;
    c.battery_voltage = pair.measurement.battery_voltage;
    c.prop_diameter = pair.prop->diameter;
    c.kv = motor.kv;
    c.mass = pair.measurement.mass;
    c.full_throttle_thrust = pair.measurement.full_throttle_thrust;
    c.full_throttle_speed = pair.measurement.full_throttle_speed;
    c.full_throttle_current = pair.measurement.full_throttle_current;
    c.motor_max_current = motor.max_current;
    c.ref_air_density = pair.measurement.air_density;
    c.fit = pair.fit;
    c.source = pair.measurement.source;
    return c;
}

}  // namespace

MotorOptimization optimize_motor(const MotorSpec& motor, std::span<const EscSpec> escs,
                                 std::span<const PropSpec> props, const CompatibilityTable& table,
                                 const MeasureFn& measure, const MepObjectiveConfig& cfg) {
    validate(cfg);
    MotorOptimization result;
    std::vector<FeasiblePair> feasible;

    for (const auto& esc : escs) {
        for (const auto& prop : props) {
            auto reject = [&](PairRejection reason, std::string detail) {
                result.rejections.push_back({esc.id, prop.id, reason, std::move(detail)});
            };
            if (!check_compatibility(table, motor, esc, prop)) {
                reject(PairRejection::incompatible, "not listed in compatibility table");
                continue;
            }
            auto measurement = measure(motor, esc, prop);
            if (!measurement) {
                reject(PairRejection::unmeasured, "no test data");
                continue;
            }
            const std::string label = motor.id + ":" + esc.id + ":" + prop.id;
            try {
                validate(*measurement, label);
            } catch (const ValidationError& e) {
                reject(PairRejection::invalid_measurement, e.what());
                continue;
            }
            auto safety = check_safety(motor, esc, measurement->battery_voltage,
                                       measurement->full_throttle_current);
            if (!safety) {
                reject(PairRejection::unsafe, safety.describe());
                continue;
            }
            FeasiblePair pair{&esc, &prop, std::move(*measurement), {}};
            try {
                pair.fit = fit_thrust_current(pair.measurement.samples).coeffs;
                validate(make_combo(motor, pair));
            } catch (const Error& e) {
                reject(PairRejection::fit_failed, e.what());
                continue;
            }
            feasible.push_back(std::move(pair));
        }
    }

    result.feasible_count = feasible.size();
    if (feasible.empty()) return result;

    MepNormalizers normalizers;
    if (cfg.normalizers) {
        normalizers = *cfg.normalizers;
    } else {
        std::vector<CandidateMeasurement> measured;
        measured.reserve(feasible.size());
        for (const auto& f : feasible) measured.push_back(f.measurement);
        normalizers = auto_normalizers(measured);
    }

    const FeasiblePair* best = nullptr;
    double best_score = 0.0;
    for (const auto& candidate : feasible) {
        const auto& m = candidate.measurement;
        const double score = mep_objective(m.full_throttle_thrust, m.efficiency(), m.mass,
                                           cfg.weights, normalizers);
        bool better = false;
        if (best == nullptr || score > best_score) {
            better = true;
        } else if (score == best_score) {
            const auto& b = best->measurement;
            if (m.efficiency() != b.efficiency()) {
                better = m.efficiency() > b.efficiency();
            } else if (m.mass != b.mass) {
                better = m.mass < b.mass;
            } else {
                better = std::tie(candidate.esc->id, candidate.prop->id) <
                         std::tie(best->esc->id, best->prop->id);
            }
        }
        if (better) {
            best = &candidate;
            best_score = score;
        }
    }

    result.best = make_combo(motor, *best);
    result.best->mep_score = best_score;
    return result;
}

BuildReport build_database(std::span<const MotorSpec> motors, std::span<const EscSpec> escs,
                           std::span<const PropSpec> props, const CompatibilityTable& table,
                           const MeasureFn& measure, const MepObjectiveConfig& cfg,
                           unsigned threads) {
    validate(cfg);
    std::vector<MotorOptimization> outcomes(motors.size());
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            outcomes[i] = optimize_motor(motors[i], escs, props, table, measure, cfg);
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(motors.size(), 1));
    if (workers == 1) {
        run_range(0, motors.size());
    } else {
        std::vector<std::future<void>> jobs;
        const std::size_t chunk = (motors.size() + workers - 1) / workers;
        for (std::size_t begin = 0; begin < motors.size(); begin += chunk) {
            jobs.push_back(std::async(std::launch::async, run_range, begin,
                                      std::min(begin + chunk, motors.size())));
        }
        for (auto& job : jobs) job.get();
    }

    BuildReport report;
    for (std::size_t i = 0; i < motors.size(); ++i) {
        auto& outcome = outcomes[i];
        if (!outcome.best) {
            report.failures.push_back({motors[i].id, std::move(outcome.rejections)});
            continue;
        }
        report.database.combos.push_back(std::move(*outcome.best));
    }
    report.database.sort_canonical();
    std::sort(report.failures.begin(), report.failures.end(),
              [](const MotorFailure& a, const MotorFailure& b) { return a.motor_id < b.motor_id; });

    // Post-hoc verification of every emitted combination.
    for (const auto& combo : report.database.combos) {
        auto find = [](auto specs, const std::string& id) {
            return std::find_if(specs.begin(), specs.end(),
                                [&](const auto& s) { return s.id == id; });
        };
        auto motor = find(motors, combo.motor_id);
        auto esc = find(escs, combo.esc_id);
        auto prop = find(props, combo.prop_id);
        if (motor == motors.end() || esc == escs.end() || prop == props.end() ||
            !check_compatibility(table, *motor, *esc, *prop) ||
            !check_safety(*motor, *esc, combo.battery_voltage, combo.full_throttle_current)) {
            throw std::logic_error("emitted combination '" + combo.key() +
                                   "' fails its safety/compatibility re-check");
        }
    }
    validate(report.database);
    return report;
}

}  // namespace mcopt
