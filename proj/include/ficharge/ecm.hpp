#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ficharge/errors.hpp"

namespace ficharge {

/// Identifiable parameter vector of the one-RC equivalent circuit model:
///   theta1 = R0 [ohm], theta2 = 1/C1 [1/F], theta3 = 1/Q [1/C],
///   theta4 = 1/(R1*C1) [1/s].
struct ThetaVector {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double theta3 = 0.0;
    double theta4 = 0.0;

    /// All components strictly positive and finite; theta4 <= theta4_max.
    void validate(double theta4_max = 1.0) const;

    static ThetaVector from_physical(double r0_ohm, double c1_farad, double q_coulomb,
                                     double r1_ohm);

    double operator[](int j) const;
    double& operator[](int j);
};

/// Battery internal state at one instant.
struct EcmState {
    double z = 0.0;   // state of charge [-]
    double qc = 0.0;  // RC-branch stored charge [C]
    double t = 0.0;   // simulation time [s]
};

/// 7th-order open-circuit-voltage polynomial OCV(z) = sum a_k z^k.
struct OcvPolynomial {
    std::array<double, 8> coeffs{};  // a0..a7 [V]
    double z_lo = 0.0;               // fitted range
    double z_hi = 1.0;

    void validate() const;
};

/// Count of OCV evaluations outside the fitted range since the last reset.
/// Extrapolation is permitted (the optimizers keep z in range); the counter
/// is a guardrail for diagnostics.
std::uint64_t ocv_extrapolation_count();
void reset_ocv_extrapolation_count();

double ocv_eval(const OcvPolynomial& ocv, double z);
double ocv_slope(const OcvPolynomial& ocv, double z);

/// Zero-order-hold piecewise-constant current sequence. Charging is positive.
struct CurrentProfile {
    double dt_seg = 0.0;         // segment duration [s]
    std::vector<double> values;  // per-segment currents [A]

    double duration() const { return dt_seg * static_cast<double>(values.size()); }

    /// Current at time t; t past the last segment clamps to the last value.
    double current_at(double t) const;

    void validate(double i_min, double i_max) const;
};

/// Scenario-level configuration shared by the offline and online phases.
struct ScenarioConfig {
    ThetaVector nominal_theta;
    ThetaVector true_theta;
    OcvPolynomial ocv;
    double q_nominal_c = 7200.0;  // nominal capacity [C]
    double t_f = 1800.0;          // final time [s]
    double dt_sim = 1.0;          // integration step [s]
    double i_min = -6.0;          // current bounds [A]
    double i_max = 6.0;
    double v_max = 4.3;           // voltage ceiling [V]
    double sigma_v = 0.01;        // measurement-noise std [V]
    double z0 = 0.0;              // initial SOC
    std::uint64_t rng_seed = 1;

    void validate() const;
};

/// Terminal voltage V = OCV(z) + theta2*qc + theta1*i.
double terminal_voltage(const ThetaVector& theta, const EcmState& state, double i,
                        const OcvPolynomial& ocv);

/// One exact-ZOH integration step of the parameterized dynamics
///   dz/dt = theta3*i,  dqc/dt = -theta4*qc + i.
EcmState step(const ThetaVector& theta, const EcmState& state, double i, double dt);

/// Sampled rollout on the dt_sim grid, 0..t_f inclusive. Each sample's
/// voltage uses the pre-step state and the current of the segment that
/// starts there (last sample: current at t_f, clamped).
struct Trajectory {
    std::vector<double> t;
    std::vector<double> i;
    std::vector<double> z;
    std::vector<double> qc;
    std::vector<double> v;

    std::size_t size() const { return t.size(); }
};

Trajectory simulate(const ThetaVector& theta, const CurrentProfile& profile,
                    const ScenarioConfig& cfg);

namespace detail {

/// Number of dt_sim steps per profile segment; throws if the grids are
/// incommensurate.
std::size_t substeps_per_segment(double dt_seg, double dt_sim);

/// 1 - (1+x)e^{-x}, series-stabilized for small x (used by the exact ZOH
/// discretization of the double-pole sensitivity filter).
double one_minus_exp_poly(double x);

}  // namespace detail

}  // namespace ficharge
