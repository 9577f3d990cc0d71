#pragma once

#include <cstddef>
#include <span>

#include "mcopt/catalog.hpp"

namespace mcopt {

inline constexpr double kStandardGravity = 9.8;  // m/s^2

/// Statistical standard-atmosphere model parameters.
struct AtmosphereModel {
    double ground_temp = 25.0;    ///< degC, mean ground-level temperature
    double std_density = 1.293;   ///< kg/m^3 at 0 degC
};

void validate(const AtmosphereModel& atmosphere);

/// Air density at `altitude` metres above ground:
///   rho = 273/(273+T) * (1 - 0.0065 h/(273+T))^5.2561 * rho0,  T = T0 - 6h/1000.
/// Valid for 0 <= altitude < 20000.
double air_density(double altitude, const AtmosphereModel& atmosphere = {});

struct MotorConstants {
    double torque = 0.0;    ///< K_T, N*m/A
    double back_emf = 0.0;  ///< K_E, V/RPM
};

/// K_E = (U_m0 - I_m0 R_m)/(K_V U_m0), K_T = (30/pi) K_E.
MotorConstants motor_constants(const MotorSpec& motor);

/// T = C_T rho (N/60)^2 D^4.
double propeller_thrust(double thrust_coeff, double density, double speed, double diameter);
/// M = C_M rho (N/60)^2 D^5.
double propeller_torque(double torque_coeff, double density, double speed, double diameter);

struct OperatingPoint {
    double throttle = 0.0;
    double speed = 0.0;          ///< RPM
    double thrust = 0.0;         ///< N
    double torque = 0.0;         ///< N*m
    double motor_voltage = 0.0;  ///< V
    double motor_current = 0.0;  ///< A
    double esc_current = 0.0;    ///< A, drawn from the battery
};

/// Steady-state ESC and motor electrical balance at a given throttle and
/// shaft speed. Thrust is left at zero; the propeller is not involved.
OperatingPoint esc_motor_balance(const MotorSpec& motor, const EscSpec& esc,
                                 double battery_voltage, double throttle, double speed);

/// Solves the motor/propeller torque balance for the shaft speed at
/// `throttle`, then evaluates the full operating point. Requires the
/// propeller's thrust and torque coefficients and a positive winding
/// resistance.
OperatingPoint steady_state(const MotorSpec& motor, const EscSpec& esc, const PropSpec& prop,
                            double battery_voltage, double throttle, double density);

// ---------------------------------------------------------------------------
// Thrust-current curve

struct ThrustCurrentSample {
    double thrust = 0.0;   ///< N
    double current = 0.0;  ///< A

    bool operator==(const ThrustCurrentSample&) const = default;
};

struct ThrustCurrentFit {
    FitCoefficients coeffs;
    double r_squared = 0.0;
    std::size_t n_samples = 0;
};

/// Least-squares quadratic I_e = k_t2 T^2 + k_t1 T + k_t0 through the samples.
/// Needs at least three distinct thrust values.
ThrustCurrentFit fit_thrust_current(std::span<const ThrustCurrentSample> samples);

/// Fitted ESC current at thrust T, clamped below at zero.
double eval_thrust_current(const FitCoefficients& fit, double thrust);

/// True when the fitted curve does not decrease between consecutive sample
/// abscissae.
bool is_monotone_over_samples(const FitCoefficients& fit,
                              std::span<const ThrustCurrentSample> samples);

// ---------------------------------------------------------------------------
// Air-density conversion of full-throttle and hover data

/// K_N = (K_V U_b - N*)/(rho N*^2 K_V), from K_N rho N^2 + N/K_V = U_b.
double solve_kn(const PropulsionCombo& combo);

struct FullThrottleAtDensity {
    double speed = 0.0;   ///< RPM
    double thrust = 0.0;  ///< N
};

/// Full-throttle speed and thrust of `combo` when operated at target_density.
FullThrottleAtDensity convert_full_throttle(const PropulsionCombo& combo, double target_density);

/// N_hover = N* sqrt(T_hover/T*), requires 0 < T_hover <= T*.
double hover_speed(const PropulsionCombo& combo, double hover_thrust);

/// N_hover = N* sqrt(rho T_hover/(rho_hat T*)), requires the hover thrust to
/// be reachable at target_density.
double hover_speed_at_density(const PropulsionCombo& combo, double hover_thrust,
                              double target_density);

/// Maps a hover ESC current measured at the combo's reference density onto
/// target_density at the same thrust.
double convert_hover_current(const PropulsionCombo& combo, double hover_thrust,
                             double hover_current, double target_density);

/// Hover ESC current from the motor/ESC/propeller model at the combo's
/// reference density (requires C_T and C_M on the propeller).
double hover_current_physics(const MotorSpec& motor, const EscSpec& esc, const PropSpec& prop,
                             const PropulsionCombo& combo, double hover_thrust);

}  // namespace mcopt
