#pragma once

#include <Eigen/Dense>

#include "ficharge/ecm.hpp"

namespace ficharge {

/// Memory needed to propagate the output sensitivities alongside the ECM
/// state: the accumulated charge integral (for S3) and the two states of the
/// controllable-canonical realization of the double-pole filter
///   G(s) = -1/(s + theta4)^2
/// whose output -x1 equals dQc/dtheta4 (for S4).
struct SensitivityState {
    double charge_integral = 0.0;  // int_0^t I dtau [C]
    double x1 = 0.0;               // [C*s]
    double x2 = 0.0;               // [C]
    double t = 0.0;                // [s]
};

/// dV/dtheta_j at one instant.
struct SensitivityVector {
    double s1 = 0.0;  // dV/dtheta1 = I            [A]
    double s2 = 0.0;  // dV/dtheta2 = Qc           [C]
    double s3 = 0.0;  // dV/dtheta3 = alpha(z)*int I [V*C]
    double s4 = 0.0;  // dV/dtheta4 = theta2*(-x1) [V*s]

    double operator[](int j) const;
};

/// 4x4 information matrix accumulated over a horizon, scaled by 1/sigma^2.
struct FimMatrix {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    double sigma = 1.0;  // noise std used for the scaling [V]

    double max_relative_asymmetry() const;
    double min_eigenvalue() const;
    double trace() const { return m.trace(); }
};

/// Advances the sensitivity memory one exact-ZOH step:
///   charge_integral += i*dt,
///   (x1,x2) <- exp(A dt)(x1,x2) + Gamma i  with A = [[0,1],[-t4^2,-2 t4]].
/// Preconditions: dt > 0 and sstate.t == ecm.t.
SensitivityState sensitivity_step(const ThetaVector& theta, const SensitivityState& sstate,
                                  const EcmState& ecm, double i, double dt);

/// S1..S4 from the current states; s1 is exactly the instantaneous current.
SensitivityVector sensitivities(const ThetaVector& theta, const SensitivityState& sstate,
                                const EcmState& ecm, double i, const OcvPolynomial& ocv);

/// FIM = (1/sigma^2) * sum_k S(t_k) S(t_k)^T * dt_sim, a left-endpoint
/// quadrature on the dt_sim grid over [0, t_f).
FimMatrix assemble_fim(const ThetaVector& theta, const CurrentProfile& profile,
                       const ScenarioConfig& cfg);

/// Single-pass variant that also returns the sampled trajectory (0..t_f
/// inclusive); used by the design loop, which needs both.
struct FimScan {
    FimMatrix fim;
    Trajectory traj;
};
FimScan assemble_fim_scan(const ThetaVector& theta, const CurrentProfile& profile,
                          const ScenarioConfig& cfg);

struct DOptimality {
    double det = 0.0;
    double log_det = 0.0;  // natural log; -inf for a singular matrix
};

/// Determinant and log-determinant via a pivoted LDL^T factorization.
DOptimality d_optimality(const FimMatrix& fim);

}  // namespace ficharge
