#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mcopt/catalog.hpp"
#include "mcopt/offline.hpp"

namespace mcopt::testing {

inline std::filesystem::path source_dir() { return MCOPT_SOURCE_DIR; }
inline std::filesystem::path seed_dir() { return source_dir() / "data" / "seed"; }
inline std::filesystem::path seed_database() { return source_dir() / "data" / "mepdb.json"; }
inline std::filesystem::path test_data_dir() { return source_dir() / "tests" / "data"; }

/// MN3508 KV380 + 15x5 at 22.2 V, bench data at 1.2 kg/m^3.
inline PropulsionCombo mn3508_combo() {
    PropulsionCombo c;
    c.motor_id = "TMOTOR-MN3508-380";
    c.esc_id = "TMOTOR-AIR-40A";
    c.prop_id = "TMOTOR-P15x5";
    c.battery_voltage = 22.2;
    c.prop_diameter = 0.381;
    c.kv = 380.0;
    c.mass = 0.1345;
    c.full_throttle_thrust = 18.4;
    c.full_throttle_speed = 5900.0;
    c.full_throttle_current = 13.3;
    c.motor_max_current = 14.0;
    c.ref_air_density = 1.2;
    c.fit = {-0.2349, 0.2559, 0.0262};
    return c;
}

inline MotorSpec jfrc_u3508() {
    return {"JFRC-U3508-550", "JFRC U3508 550KV", 550, 10, 0.5, 0.104, 20, 25.2, 0.101};
}

inline EscSpec jfrc_esc() { return {"JFRC-40A", "JFRC 40A", 40, 25.2, 0.95, 0.032}; }

inline PropSpec apc(const std::string& size, double diameter_in, double pitch_in) {
    PropSpec p;
    p.id = "APC-" + size;
    p.name = "APC " + size;
    p.diameter = diameter_in * 0.0254;
    p.pitch = pitch_in * 0.0254;
    p.mass = 0.02;
    return p;
}

/// Shaped thrust-current samples ending at (T*, I*).
inline std::vector<ThrustCurrentSample> shaped_samples(double thrust, double current) {
    std::vector<ThrustCurrentSample> out;
    for (int i = 1; i <= 10; ++i) {
        const double x = thrust * i / 10.0;
        const double u = x / thrust;
        out.push_back({x, current * (0.7 * u * u + 0.25 * u + 0.05)});
    }
    return out;
}

inline CandidateMeasurement measurement(double voltage, double current, double thrust,
                                        double speed, double mass) {
    CandidateMeasurement m;
    m.battery_voltage = voltage;
    m.full_throttle_current = current;
    m.full_throttle_thrust = thrust;
    m.full_throttle_speed = speed;
    m.mass = mass;
    m.air_density = 1.2;
    m.samples = shaped_samples(thrust, current);
    return m;
}

/// The JFRC U3508 propeller sweep at 22.2 V. The two bracketing rows stand
/// for "11x4.5 and smaller" (low thrust, J_mep < 0.7) and "12x5.5 and
/// larger" (over the 20 A motor limit).
inline std::map<std::string, CandidateMeasurement> jfrc_sweep() {
    return {
        {"APC-11x4.5", measurement(22.2, 12.8, 14.0, 8200, 0.139)},
        {"APC-11x5.5", measurement(22.2, 15.5, 17.84, 7800, 0.141)},
        {"APC-12x4.5", measurement(22.2, 19.0, 20.87, 7600, 0.145)},
        {"APC-12x5.5", measurement(22.2, 21.5, 22.5, 7300, 0.148)},
    };
}

inline std::vector<PropSpec> jfrc_props() {
    return {apc("11x4.5", 11, 4.5), apc("11x5.5", 11, 5.5), apc("12x4.5", 12, 4.5),
            apc("12x5.5", 12, 5.5)};
}

inline MeasureFn jfrc_measure() {
    auto rows = jfrc_sweep();
    return [rows](const MotorSpec&, const EscSpec&, const PropSpec& p)
               -> std::optional<CandidateMeasurement> {
        auto it = rows.find(p.id);
        if (it == rows.end()) return std::nullopt;
        return it->second;
    };
}

}  // namespace mcopt::testing
