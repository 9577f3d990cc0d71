#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "mcopt/physics.hpp"

namespace mcopt {
namespace {

using testing::mn3508_combo;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Independent reference implementations, written from the model equations
// without reusing library code.
namespace oracle {

double kn(double kv, double ub, double n, double rho) { return (kv * ub - n) / (rho * n * n * kv); }

// Bisection on K_N rho N^2 + N/K_V - U_b = 0 over [0, K_V U_b].
double speed_at(double kn, double kv, double ub, double rho) {
    double lo = 0.0;
    double hi = kv * ub;
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f = kn * rho * mid * mid + mid / kv - ub;
        (f > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

double motor_voltage(double kn, double kv, double rho, double n) { return kn * rho * n * n + n / kv; }

}  // namespace oracle

MotorSpec test_motor() { return {"T-m", "t", 380, 10, 0.5, 0.1, 14, 25.2, 0.0865}; }
EscSpec test_esc() { return {"T-e", "t", 40, 25.2, 0.95, 0.03}; }
PropSpec test_prop() {
    PropSpec p;
    p.id = "T-p";
    p.diameter = 0.381;
    p.pitch = 0.127;
    p.mass = 0.02;
    p.thrust_coeff = 0.1;
    p.torque_coeff = 0.006;
    return p;
}

// ---------------------------------------------------------------------------
// Atmosphere

TEST(AirDensity, SeaLevelAndOneKilometre) {
    EXPECT_NEAR(air_density(0.0), 1.184526845637584, 1e-12);
    EXPECT_NEAR(air_density(1000.0), 1.073966669624476, 1e-12);
    EXPECT_NEAR(air_density(50.0), 1.178932528384023, 1e-12);
}

TEST(AirDensity, ZeroCelsiusGroundIsReferenceDensity) {
    EXPECT_DOUBLE_EQ(air_density(0.0, {0.0, 1.293}), 1.293);
}

TEST(AirDensity, StrictlyDecreasingOnGrid) {
    double prev = air_density(0.0);
    for (double h = 100.0; h <= 10000.0; h += 100.0) {
        const double rho = air_density(h);
        EXPECT_LT(rho, prev) << "h=" << h;
        prev = rho;
    }
}

TEST(AirDensity, DomainErrors) {
    EXPECT_THROW(air_density(-1.0), Error);
    EXPECT_THROW(air_density(20000.0), Error);
    EXPECT_THROW(air_density(100.0, {25.0, -1.0}), Error);
}

// ---------------------------------------------------------------------------
// Motor, propeller, ESC

TEST(MotorConstants, Example) {
    MotorSpec m = test_motor();
    m.resistance = 0.1;
    const auto k = motor_constants(m);
    EXPECT_NEAR(k.back_emf, 0.002618421052631579, 1e-15);
    EXPECT_NEAR(k.torque, 0.02500407921733198, 1e-14);
}

TEST(MotorConstants, LosslessAndRatio) {
    MotorSpec m = test_motor();
    m.no_load_current = 0.0;
    m.resistance = 0.0;
    for (double u : {1.0, 10.0, 40.0}) {
        m.no_load_voltage = u;
        EXPECT_DOUBLE_EQ(motor_constants(m).back_emf, 1.0 / 380.0);
    }
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int i = 0; i < 50; ++i) {
        MotorSpec r = test_motor();
        r.no_load_current = u(rng);
        r.resistance = u(rng);
        r.kv = 100 + 1000 * u(rng);
        const auto k = motor_constants(r);
        EXPECT_NEAR(k.torque / k.back_emf, 30.0 / std::numbers::pi, 1e-12);
    }
}

TEST(MotorConstants, DomainError) {
    MotorSpec m = test_motor();
    m.no_load_current = 100.0;  // I_m0 R_m = 10 = U_m0
    EXPECT_THROW(motor_constants(m), Error);
}

TEST(Propeller, ThrustTorqueExamples) {
    EXPECT_NEAR(propeller_thrust(0.1, 1.2, 6000, 0.381), 25.2860591052, 1e-8);
    EXPECT_EQ(propeller_thrust(0.1, 1.2, 0, 0.381), 0.0);
    EXPECT_EQ(propeller_torque(0.01, 1.2, 0, 0.381), 0.0);
    EXPECT_NEAR(propeller_torque(0.01, 1.2, 6000, 0.381), 0.01 * 1.2 * 100 * 100 * std::pow(0.381, 5),
                1e-12);
    for (double n : {1000.0, 3500.0, 8000.0}) {
        EXPECT_NEAR(propeller_thrust(0.1, 1.2, 2 * n, 0.381) / propeller_thrust(0.1, 1.2, n, 0.381),
                    4.0, 1e-12);
    }
}

TEST(EscMotorBalance, FlagsInfeasiblePairing) {
    MotorSpec m = test_motor();
    m.resistance = 0.1;
    const auto op = esc_motor_balance(m, test_esc(), 22.2, 1.0, 5900);
    EXPECT_NEAR(op.motor_voltage, 22.2, 1e-12);
    EXPECT_NEAR(op.motor_current, 67.51315789473684, 1e-9);
    EXPECT_NEAR(op.motor_current * 0.1, 22.2 - 15.44868421052632, 1e-9);
    EXPECT_GT(op.motor_current, m.max_current);
}

TEST(EscMotorBalance, NoLoadFullThrottle) {
    MotorSpec m = test_motor();
    m.no_load_current = 0.0;
    m.resistance = 1e-6;
    const auto op = esc_motor_balance(m, test_esc(), 20.0, 1.0, 380.0 * 20.0);
    EXPECT_NEAR(op.motor_current, 0.0, 1e-6);
    EXPECT_NEAR(op.torque, 0.0, 1e-6);
}

TEST(EscMotorBalance, ZeroThrottle) {
    EXPECT_THROW(esc_motor_balance(test_motor(), test_esc(), 22.2, 0.0, 1000), Error);
    const auto rest = esc_motor_balance(test_motor(), test_esc(), 22.2, 0.0, 0.0);
    EXPECT_EQ(rest.esc_current, 0.0);
    EXPECT_EQ(rest.speed, 0.0);
}

TEST(EscMotorBalance, ZeroResistanceGuard) {
    MotorSpec m = test_motor();
    m.resistance = 0.0;
    EXPECT_THROW(esc_motor_balance(m, test_esc(), 22.2, 0.5, 1000), Error);
}

TEST(SteadyState, TorqueBalanceHolds) {
    const auto m = test_motor();
    const auto p = test_prop();
    const auto k = motor_constants(m);
    for (double sigma : {0.4, 0.7, 1.0}) {
        const auto op = steady_state(m, test_esc(), p, 22.2, sigma, 1.2);
        const double load = propeller_torque(*p.torque_coeff, 1.2, op.speed, p.diameter);
        EXPECT_NEAR(k.torque * (op.motor_current - m.no_load_current), load, 1e-9);
        EXPECT_NEAR(op.torque, load, 1e-9);
        EXPECT_GE(op.esc_current, 0.0);
    }
}

TEST(SteadyState, MissingCoefficient) {
    PropSpec p = test_prop();
    p.torque_coeff.reset();
    try {
        steady_state(test_motor(), test_esc(), p, 22.2, 1.0, 1.2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::missing_coefficient);
    }
}

// ---------------------------------------------------------------------------
// Thrust-current fit

std::vector<ThrustCurrentSample> exact_samples(const FitCoefficients& k, std::vector<double> xs) {
    std::vector<ThrustCurrentSample> out;
    for (double x : xs) out.push_back({x, k.k_t2 * x * x + k.k_t1 * x + k.k_t0});
    return out;
}

TEST(FitThrustCurrent, ExactRecovery) {
    const FitCoefficients k{-0.2349, 0.2559, 0.0262};
    const auto fit = fit_thrust_current(exact_samples(k, {2, 5, 9, 14, 18.4}));
    EXPECT_NEAR(fit.coeffs.k_t0, k.k_t0, 1e-9);
    EXPECT_NEAR(fit.coeffs.k_t1, k.k_t1, 1e-9);
    EXPECT_NEAR(fit.coeffs.k_t2, k.k_t2, 1e-9);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
    EXPECT_EQ(fit.n_samples, 5u);
}

TEST(FitThrustCurrent, ThreePointsInterpolate) {
    std::vector<ThrustCurrentSample> s{{1, 2}, {2, 5}, {4, 3}};
    const auto fit = fit_thrust_current(s);
    for (const auto& p : s) {
        const auto& c = fit.coeffs;
        EXPECT_NEAR(c.k_t2 * p.thrust * p.thrust + c.k_t1 * p.thrust + c.k_t0, p.current, 1e-10);
    }
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
}

// Digitized manufacturer-style table for a 380 KV motor on a 15x5 propeller at
// 22.2 V: thrust in grams, ESC current in amperes, 50%..100% throttle.
TEST(FitThrustCurrent, DigitizedTableRSquared) {
    const double grams[] = {640, 780, 900, 1040, 1180, 1330, 1480, 1620, 1760, 1880};
    const double amps[] = {2.8, 3.6, 4.5, 5.5, 6.6, 7.8, 9.1, 10.4, 11.7, 13.3};
    std::vector<ThrustCurrentSample> s;
    for (int i = 0; i < 10; ++i) s.push_back({grams[i] * 9.80665 / 1000.0, amps[i]});
    const auto fit = fit_thrust_current(s);
    EXPECT_GT(fit.r_squared, 0.99);
    EXPECT_TRUE(is_monotone_over_samples(fit.coeffs, s));
}

TEST(FitThrustCurrent, OnePercentNoiseKeepsRSquared) {
    const FitCoefficients k{-0.2349, 0.2559, 0.0262};
    std::mt19937 rng(11);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 8 + trial % 8;
        std::vector<ThrustCurrentSample> s;
        for (int i = 1; i <= n; ++i) {
            const double x = 18.4 * i / n;
            const double y = k.k_t2 * x * x + k.k_t1 * x + k.k_t0;
            s.push_back({x, y * (1.0 + noise(rng))});
        }
        EXPECT_GT(fit_thrust_current(s).r_squared, 0.99) << "trial " << trial;
    }
}

TEST(FitThrustCurrent, Errors) {
    std::vector<ThrustCurrentSample> two{{1, 1}, {2, 2}};
    try {
        fit_thrust_current(two);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::too_few_samples);
    }
    std::vector<ThrustCurrentSample> repeated{{1, 1}, {1, 2}, {2, 3}, {2, 3.5}};
    try {
        fit_thrust_current(repeated);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::rank_deficient);
    }
}

TEST(FitThrustCurrent, IllConditionedAbscissaeStillSolve) {
    // Nearly coincident abscissae with a large offset stress the normal equations.
    const FitCoefficients k{1.0, 0.5, 0.25};
    const auto fit = fit_thrust_current(exact_samples(k, {1000.0, 1000.001, 1000.002, 1000.003}));
    const double x = 1000.0015;
    EXPECT_NEAR(fit.coeffs.k_t2 * x * x + fit.coeffs.k_t1 * x + fit.coeffs.k_t0,
                k.k_t2 * x * x + k.k_t1 * x + k.k_t0, 1e-3);
}

TEST(EvalThrustCurrent, Examples) {
    const FitCoefficients k{-0.2349, 0.2559, 0.0262};
    EXPECT_NEAR(eval_thrust_current(k, 18.4), 13.343932, 1e-6);
    EXPECT_LT(rel(eval_thrust_current(k, 18.4), 13.3), 0.005);
    EXPECT_EQ(eval_thrust_current(k, 0.0), 0.0);
    EXPECT_NEAR(eval_thrust_current(k, 9.2), 4.336948, 1e-6);
    EXPECT_EQ(eval_thrust_current({0.7, 0, 0}, 0.0), 0.7);
    EXPECT_THROW(eval_thrust_current(k, -1.0), Error);
}

// ---------------------------------------------------------------------------
// Density conversion

TEST(SolveKn, Examples) {
    const auto c = mn3508_combo();
    const double k = solve_kn(c);
    EXPECT_NEAR(k, 1.597645363048529e-7, 1e-19);
    EXPECT_NEAR(oracle::motor_voltage(k, c.kv, c.ref_air_density, c.full_throttle_speed),
                c.battery_voltage, 1e-9);
    auto boundary = c;
    boundary.full_throttle_speed = c.kv * c.battery_voltage;
    EXPECT_THROW(solve_kn(boundary), Error);
}

TEST(ConvertFullThrottle, IdentityAtReferenceDensity) {
    const auto c = mn3508_combo();
    const auto r = convert_full_throttle(c, c.ref_air_density);
    EXPECT_EQ(r.speed, c.full_throttle_speed);
    EXPECT_EQ(r.thrust, c.full_throttle_thrust);
}

TEST(ConvertFullThrottle, Mn3508ToThinnerAir) {
    const auto c = mn3508_combo();
    const auto r = convert_full_throttle(c, 1.0);

    const double k = oracle::kn(c.kv, c.battery_voltage, c.full_throttle_speed, c.ref_air_density);
    const double n = oracle::speed_at(k, c.kv, c.battery_voltage, 1.0);
    const double t = 1.0 * n * n / (c.ref_air_density * c.full_throttle_speed * c.full_throttle_speed) *
                     c.full_throttle_thrust;
    EXPECT_LT(rel(r.speed, n), 1e-6);
    EXPECT_LT(rel(r.thrust, t), 1e-6);
    EXPECT_NEAR(r.speed, 6144.145739936144, 1e-6);
    EXPECT_NEAR(r.thrust, 16.62859557775037, 1e-9);
}

TEST(ConvertFullThrottle, IncreasingInDensity) {
    const auto c = mn3508_combo();
    EXPECT_LT(convert_full_throttle(c, 0.9).thrust, convert_full_throttle(c, 1.1).thrust);
    double prev = 0.0;
    for (double rho = 0.5; rho <= 1.4; rho += 0.01) {
        const double t = convert_full_throttle(c, rho).thrust;
        EXPECT_GT(t, prev);
        prev = t;
    }
}

TEST(HoverSpeed, Examples) {
    const auto c = mn3508_combo();
    EXPECT_DOUBLE_EQ(hover_speed(c, c.full_throttle_thrust), c.full_throttle_speed);
    EXPECT_NEAR(hover_speed(c, 9.2), 4171.930009000630, 1e-8);
    EXPECT_NEAR(hover_speed_at_density(c, 9.2, 1.0), 4570.120348524752, 1e-8);
    EXPECT_THROW(hover_speed(c, 18.5), Error);
    EXPECT_THROW(hover_speed(c, 0.0), Error);
}

TEST(ConvertHoverCurrent, IdentityAtReferenceDensity) {
    const auto c = mn3508_combo();
    EXPECT_EQ(convert_hover_current(c, 9.2, 4.336948, c.ref_air_density), 4.336948);
}

TEST(ConvertHoverCurrent, Mn3508ToThinnerAir) {
    const auto c = mn3508_combo();
    const double current = eval_thrust_current(c.fit, 9.2);
    const double converted = convert_hover_current(c, 9.2, current, 1.0);

    const double k = oracle::kn(c.kv, c.battery_voltage, c.full_throttle_speed, c.ref_air_density);
    const double nh = c.full_throttle_speed * std::sqrt(9.2 / c.full_throttle_thrust);
    const double nbh =
        c.full_throttle_speed * std::sqrt(c.ref_air_density * 9.2 / (1.0 * c.full_throttle_thrust));
    const double ratio = oracle::motor_voltage(k, c.kv, 1.0, nbh) /
                         oracle::motor_voltage(k, c.kv, c.ref_air_density, nh);
    EXPECT_LT(rel(converted, current * ratio), 1e-6);
    EXPECT_NEAR(converted / current, 1.073197695349995, 1e-9);
    EXPECT_NEAR(converted, 4.654402598452768, 1e-8);
    EXPECT_NEAR(1.0 * nbh * nbh, c.ref_air_density * nh * nh, 1e-12 * c.ref_air_density * nh * nh);
}

TEST(ConvertHoverCurrent, ThinnerAirCostsMoreCurrent) {
    const auto c = mn3508_combo();
    for (double rho = 0.8; rho < 1.2; rho += 0.02) {
        EXPECT_GT(convert_hover_current(c, 9.2, 4.0, rho), 4.0) << rho;
    }
}

TEST(Conversion, RoundTrip) {
    const auto c = mn3508_combo();
    for (double target : {0.9, 1.0, 1.1, 1.3}) {
        const auto there = convert_full_throttle(c, target);
        auto moved = c;
        moved.full_throttle_speed = there.speed;
        moved.full_throttle_thrust = there.thrust;
        moved.ref_air_density = target;
        const auto back = convert_full_throttle(moved, c.ref_air_density);
        EXPECT_LT(rel(back.speed, c.full_throttle_speed), 1e-6);
        EXPECT_LT(rel(back.thrust, c.full_throttle_thrust), 1e-6);

        const double i = eval_thrust_current(c.fit, 9.2);
        const double i_there = convert_hover_current(c, 9.2, i, target);
        const double i_back = convert_hover_current(moved, 9.2, i_there, c.ref_air_density);
        EXPECT_LT(rel(i_back, i), 1e-6);
    }
}

TEST(HoverCurrentPhysics, ZeroTorqueAndLinearity) {
    const auto combo = mn3508_combo();
    MotorSpec m = test_motor();
    m.no_load_current = 0.0;
    PropSpec p = test_prop();
    p.torque_coeff = 1e-12;
    EXPECT_NEAR(hover_current_physics(m, test_esc(), p, combo, 9.2), 0.0, 1e-8);

    // Doubling C_M doubles the torque-producing part of the motor current,
    // observed through the ESC current at a fixed motor voltage.
    MotorSpec lossy = test_motor();
    PropSpec p1 = test_prop();
    PropSpec p2 = test_prop();
    p2.torque_coeff = 2.0 * *p1.torque_coeff;
    const double i0 = hover_current_physics(lossy, test_esc(), [&] {
        PropSpec z = test_prop();
        z.torque_coeff = 1e-300;
        return z;
    }(), combo, 9.2);
    const double i1 = hover_current_physics(lossy, test_esc(), p1, combo, 9.2);
    const double i2 = hover_current_physics(lossy, test_esc(), p2, combo, 9.2);
    EXPECT_NEAR(i2 - i0, 2.0 * (i1 - i0), 1e-9);
}

TEST(HoverCurrentPhysics, MissingCoefficient) {
    PropSpec p = test_prop();
    p.thrust_coeff.reset();
    EXPECT_THROW(hover_current_physics(test_motor(), test_esc(), p, mn3508_combo(), 9.2), Error);
}

TEST(HoverCurrentPhysics, AgreesWithFitOfPhysicsSamples) {
    const auto m = test_motor();
    const auto e = test_esc();
    const auto p = test_prop();
    const double ub = 22.2;
    std::vector<ThrustCurrentSample> samples;
    for (int i = 3; i <= 10; ++i) {
        const auto op = steady_state(m, e, p, ub, i / 10.0, 1.2);
        samples.push_back({op.thrust, op.esc_current});
    }
    const auto full = steady_state(m, e, p, ub, 1.0, 1.2);
    const auto fit = fit_thrust_current(samples);

    PropulsionCombo combo = mn3508_combo();
    combo.full_throttle_thrust = full.thrust;
    combo.full_throttle_speed = full.speed;
    combo.full_throttle_current = full.esc_current;
    combo.motor_max_current = 100.0;
    combo.fit = fit.coeffs;

    double max_residual = 0.0;
    for (const auto& s : samples) {
        max_residual = std::max(max_residual, std::abs(eval_thrust_current(fit.coeffs, s.thrust) - s.current));
    }
    for (double share : {0.4, 0.55, 0.7}) {
        const double t = share * full.thrust;
        const double physics = hover_current_physics(m, e, p, combo, t);
        const double fitted = eval_thrust_current(fit.coeffs, t);
        // The physics path drops I_m0 R_m in the motor voltage; allow that
        // model gap on top of the fit residual.
        EXPECT_NEAR(physics, fitted, max_residual + 0.03 * fitted) << "share " << share;
    }
}

}  // namespace
}  // namespace mcopt
