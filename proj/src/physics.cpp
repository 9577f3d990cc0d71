#include "mcopt/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "mcopt/error.hpp"

namespace mcopt {

namespace {

constexpr double kCelsiusOffset = 273.0;
constexpr double kLapseFactor = 0.0065;
constexpr double kDensityExponent = 5.2561;

}  // namespace

void validate(const AtmosphereModel& atmosphere) {
    if (!(atmosphere.std_density > 0.0)) {
        throw ValidationError("atmosphere", "std_density", "must be positive");
    }
    if (!(atmosphere.ground_temp > -60.0 && atmosphere.ground_temp < 60.0)) {
        throw ValidationError("atmosphere", "ground_temp", "must lie in (-60, 60) degC");
    }
}

double air_density(double altitude, const AtmosphereModel& atmosphere) {
    validate(atmosphere);
    require_domain(altitude >= 0.0 && altitude < 20000.0,
                   "altitude must lie in [0, 20000) m, got " + std::to_string(altitude));
    const double temperature = atmosphere.ground_temp - 6.0 * altitude / 1000.0;
    const double absolute = kCelsiusOffset + temperature;
    require_domain(absolute > 0.0, "lapse temperature is below absolute zero");
    const double base = 1.0 - kLapseFactor * altitude / absolute;
    require_domain(base > 0.0, "lapse expression is non-positive at this altitude");
    return kCelsiusOffset / absolute * std::pow(base, kDensityExponent) * atmosphere.std_density;
}

MotorConstants motor_constants(const MotorSpec& motor) {
    require_domain(motor.kv > 0.0, "motor '" + motor.id + "': kv must be positive");
    const double emf_voltage = motor.no_load_voltage - motor.no_load_current * motor.resistance;
    require_domain(emf_voltage > 0.0,
                   "motor '" + motor.id + "': no-load voltage must exceed I_m0 * R_m");
    MotorConstants k;
    k.back_emf = emf_voltage / (motor.kv * motor.no_load_voltage);
    k.torque = 30.0 / std::numbers::pi * k.back_emf;
    return k;
}

double propeller_thrust(double thrust_coeff, double density, double speed, double diameter) {
    const double rev_per_sec = speed / 60.0;
    return thrust_coeff * density * rev_per_sec * rev_per_sec * std::pow(diameter, 4);
}

double propeller_torque(double torque_coeff, double density, double speed, double diameter) {
    const double rev_per_sec = speed / 60.0;
    return torque_coeff * density * rev_per_sec * rev_per_sec * std::pow(diameter, 5);
}

OperatingPoint esc_motor_balance(const MotorSpec& motor, const EscSpec& esc,
                                 double battery_voltage, double throttle, double speed) {
    require_domain(throttle >= 0.0 && throttle <= 1.0, "throttle must lie in [0, 1]");
    require_domain(battery_voltage > 0.0, "battery voltage must be positive");
    require_domain(speed >= 0.0, "speed must be non-negative");

    OperatingPoint op;
    op.throttle = throttle;
    op.speed = speed;
    op.motor_voltage = throttle * battery_voltage;
    if (op.motor_voltage == 0.0 && speed == 0.0) {
        return op;  // at rest
    }

    const auto k = motor_constants(motor);
    const double back_emf = k.back_emf * speed;
    require_domain(op.motor_voltage >= back_emf,
                   "motor voltage " + std::to_string(op.motor_voltage) +
                       " V is below the back-EMF " + std::to_string(back_emf) + " V");
    require_domain(motor.resistance > 0.0,
                   "motor '" + motor.id + "': zero resistance leaves the current undetermined");

    op.motor_current = (op.motor_voltage - back_emf) / motor.resistance;
    const double excess = op.motor_current - motor.no_load_current;
    require_domain(excess >= -1e-9 * (1.0 + motor.no_load_current),
                   "motor current is below the no-load current at this speed");
    op.torque = k.torque * std::max(excess, 0.0);
    op.esc_current = op.motor_current * op.motor_voltage / (battery_voltage * esc.efficiency);
    return op;
}

OperatingPoint steady_state(const MotorSpec& motor, const EscSpec& esc, const PropSpec& prop,
                            double battery_voltage, double throttle, double density) {
    if (!prop.thrust_coeff || !prop.torque_coeff) {
        throw Error(ErrorCode::missing_coefficient,
                    "propeller '" + prop.id + "' lacks thrust_coeff/torque_coeff");
    }
    require_domain(motor.resistance > 0.0,
                   "motor '" + motor.id + "': steady state needs a positive resistance");
    require_domain(density > 0.0, "air density must be positive");
    require_domain(throttle >= 0.0 && throttle <= 1.0, "throttle must lie in [0, 1]");

    const auto k = motor_constants(motor);
    const double motor_voltage = throttle * battery_voltage;

    // K_T((U_m - K_E N)/R_m - I_m0) = C_M rho D^5 N^2 / 3600
    const double a = *prop.torque_coeff * density * std::pow(prop.diameter, 5) / 3600.0;
    const double b = k.torque * k.back_emf / motor.resistance;
    const double c = k.torque * (motor_voltage / motor.resistance - motor.no_load_current);

    if (c <= 0.0) {
        // Not enough voltage to overcome the no-load loss: the rotor stays still.
        OperatingPoint op;
        op.throttle = throttle;
        op.motor_voltage = motor_voltage;
        op.motor_current = motor_voltage / motor.resistance;
        op.esc_current = op.motor_current * motor_voltage / (battery_voltage * esc.efficiency);
        return op;
    }

    const double speed = 2.0 * c / (b + std::sqrt(b * b + 4.0 * a * c));
    OperatingPoint op = esc_motor_balance(motor, esc, battery_voltage, throttle, speed);
    op.thrust = propeller_thrust(*prop.thrust_coeff, density, speed, prop.diameter);
    return op;
}

// ---------------------------------------------------------------------------

ThrustCurrentFit fit_thrust_current(std::span<const ThrustCurrentSample> samples) {
    if (samples.size() < 3) {
        throw Error(ErrorCode::too_few_samples,
                    "quadratic fit needs at least 3 samples, got " +
                        std::to_string(samples.size()));
    }
    std::set<double> abscissae;
    double scale = 0.0;
    for (const auto& s : samples) {
        if (!std::isfinite(s.thrust) || !std::isfinite(s.current)) {
            throw Error(ErrorCode::domain_error, "fit samples must be finite");
        }
        abscissae.insert(s.thrust);
        scale = std::max(scale, std::abs(s.thrust));
    }
    if (abscissae.size() < 3) {
        throw Error(ErrorCode::rank_deficient,
                    "quadratic fit needs at least 3 distinct thrust values");
    }

    // Normal equations on x = T/scale, which keeps the moment matrix well scaled.
    double moments[5] = {};
    double rhs[3] = {};
    for (const auto& s : samples) {
        const double x = s.thrust / scale;
        double power = 1.0;
        for (int k = 0; k < 5; ++k) {
            moments[k] += power;
            if (k < 3) rhs[k] += s.current * power;
            power *= x;
        }
    }
    double m[3][3];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = moments[r + c];
    }

    // LDL^T of the symmetric moment matrix. The pivot ratio is a cheap
    // condition estimate; poorly conditioned systems go through QR instead.
    double l[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    double d[3];
    for (int j = 0; j < 3; ++j) {
        d[j] = m[j][j];
        for (int k = 0; k < j; ++k) d[j] -= l[j][k] * l[j][k] * d[k];
        for (int i = j + 1; i < 3; ++i) {
            double v = m[i][j];
            for (int k = 0; k < j; ++k) v -= l[i][k] * l[j][k] * d[k];
            l[i][j] = d[j] != 0.0 ? v / d[j] : 0.0;
        }
    }
    const double d_max = std::max({d[0], d[1], d[2]});
    const double d_min = std::min({d[0], d[1], d[2]});

    double scaled[3];
    if (d_min > 1e-10 * d_max) {
        double y[3];
        for (int i = 0; i < 3; ++i) {
            y[i] = rhs[i];
            for (int k = 0; k < i; ++k) y[i] -= l[i][k] * y[k];
        }
        for (int i = 2; i >= 0; --i) {
            scaled[i] = y[i] / d[i];
            for (int k = i + 1; k < 3; ++k) scaled[i] -= l[k][i] * scaled[k];
        }
    } else {
        Eigen::MatrixXd design(static_cast<Eigen::Index>(samples.size()), 3);
        Eigen::VectorXd target(static_cast<Eigen::Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const double x = samples[i].thrust / scale;
            const auto row = static_cast<Eigen::Index>(i);
            design(row, 0) = 1.0;
            design(row, 1) = x;
            design(row, 2) = x * x;
            target(row) = samples[i].current;
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        if (qr.rank() < 3) {
            throw Error(ErrorCode::rank_deficient, "thrust samples do not determine a quadratic");
        }
        Eigen::Vector3d solution = qr.solve(target);
        for (int i = 0; i < 3; ++i) scaled[i] = solution(i);
    }

    ThrustCurrentFit fit;
    fit.coeffs = {scaled[0], scaled[1] / scale, scaled[2] / (scale * scale)};
    fit.n_samples = samples.size();

    double mean = 0.0;
    for (const auto& s : samples) mean += s.current;
    mean /= static_cast<double>(samples.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (const auto& s : samples) {
        const double t = s.thrust;
        const double predicted = fit.coeffs.k_t2 * t * t + fit.coeffs.k_t1 * t + fit.coeffs.k_t0;
        ss_res += (s.current - predicted) * (s.current - predicted);
        ss_tot += (s.current - mean) * (s.current - mean);
    }
    if (ss_tot > 0.0) {
        fit.r_squared = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
    } else {
        fit.r_squared = ss_res == 0.0 ? 1.0 : 0.0;
    }
    return fit;
}

double eval_thrust_current(const FitCoefficients& fit, double thrust) {
    require_domain(thrust >= 0.0, "thrust must be non-negative");
    return std::max(0.0, fit.k_t2 * thrust * thrust + fit.k_t1 * thrust + fit.k_t0);
}

bool is_monotone_over_samples(const FitCoefficients& fit,
                              std::span<const ThrustCurrentSample> samples) {
    std::vector<double> abscissae;
    abscissae.reserve(samples.size());
    for (const auto& s : samples) abscissae.push_back(s.thrust);
    std::sort(abscissae.begin(), abscissae.end());
    auto raw = [&](double t) { return fit.k_t2 * t * t + fit.k_t1 * t + fit.k_t0; };
    for (std::size_t i = 1; i < abscissae.size(); ++i) {
        if (raw(abscissae[i]) < raw(abscissae[i - 1])) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

double solve_kn(const PropulsionCombo& combo) {
    const double no_load_speed = combo.kv * combo.battery_voltage;
    const double speed = combo.full_throttle_speed;
    require_domain(speed > 0.0 && combo.ref_air_density > 0.0,
                   "combo '" + combo.key() + "': full-throttle speed and density must be positive");
    require_domain(no_load_speed > speed, "combo '" + combo.key() +
                                              "': K_V * U_b must exceed the full-throttle speed");
    return (no_load_speed - speed) / (combo.ref_air_density * speed * speed * combo.kv);
}

FullThrottleAtDensity convert_full_throttle(const PropulsionCombo& combo, double target_density) {
    require_domain(target_density > 0.0, "target air density must be positive");
    const double kn = solve_kn(combo);
    if (target_density == combo.ref_air_density) {
        return {combo.full_throttle_speed, combo.full_throttle_thrust};
    }
    // Positive root of K_N rho_hat N^2 + N/K_V - U_b = 0, written in the
    // cancellation-free form 2c / (b + sqrt(b^2 + 4ac)).
    const double a = kn * target_density;
    const double b = 1.0 / combo.kv;
    const double c = combo.battery_voltage;
    const double speed = 2.0 * c / (b + std::sqrt(b * b + 4.0 * a * c));
    const double ratio = (target_density * speed * speed) /
                         (combo.ref_air_density * combo.full_throttle_speed *
                          combo.full_throttle_speed);
    return {speed, ratio * combo.full_throttle_thrust};
}

double hover_speed(const PropulsionCombo& combo, double hover_thrust) {
    require_domain(hover_thrust > 0.0, "hover thrust must be positive");
    require_domain(hover_thrust <= combo.full_throttle_thrust,
                   "hover thrust exceeds the full-throttle thrust of '" + combo.key() + "'");
    return combo.full_throttle_speed * std::sqrt(hover_thrust / combo.full_throttle_thrust);
}

double hover_speed_at_density(const PropulsionCombo& combo, double hover_thrust,
                              double target_density) {
    require_domain(target_density > 0.0, "target air density must be positive");
    require_domain(hover_thrust > 0.0, "hover thrust must be positive");
    require_domain(hover_thrust <= combo.full_throttle_thrust,
                   "hover thrust exceeds the full-throttle thrust of '" + combo.key() + "'");
    return combo.full_throttle_speed *
           std::sqrt(combo.ref_air_density * hover_thrust /
                     (target_density * combo.full_throttle_thrust));
}

double convert_hover_current(const PropulsionCombo& combo, double hover_thrust,
                             double hover_current, double target_density) {
    const double kn = solve_kn(combo);
    const double speed = hover_speed(combo, hover_thrust);
    const double converted_speed = hover_speed_at_density(combo, hover_thrust, target_density);
    if (target_density == combo.ref_air_density) {
        return hover_current;
    }
    const double numerator =
        kn * target_density * converted_speed * converted_speed + converted_speed / combo.kv;
    const double denominator = kn * combo.ref_air_density * speed * speed + speed / combo.kv;
    return hover_current * numerator / denominator;
}

double hover_current_physics(const MotorSpec& motor, const EscSpec& esc, const PropSpec& prop,
                             const PropulsionCombo& combo, double hover_thrust) {
    if (!prop.thrust_coeff || !prop.torque_coeff) {
        throw Error(ErrorCode::missing_coefficient,
                    "propeller '" + prop.id + "' lacks thrust_coeff/torque_coeff");
    }
    const auto k = motor_constants(motor);
    const double motor_current =
        *prop.torque_coeff * prop.diameter * hover_thrust / (*prop.thrust_coeff * k.torque) +
        motor.no_load_current;
    const double speed = hover_speed(combo, hover_thrust);
    const double motor_voltage =
        solve_kn(combo) * combo.ref_air_density * speed * speed + speed / combo.kv;
    return motor_current * motor_voltage / (combo.battery_voltage * esc.efficiency);
}

}  // namespace mcopt
