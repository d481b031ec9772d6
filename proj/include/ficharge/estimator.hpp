#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ficharge/sensitivity.hpp"

namespace ficharge {

/// Bounded real-time parameter identification settings.
struct EstimatorConfig {
    ThetaVector bounds_lo;  // componentwise box
    ThetaVector bounds_hi;
    int update_period = 1;  // control steps between refits
    int window = 0;         // residuals restricted to the most recent N records; 0 = all
    std::array<bool, 4> fixed_mask{false, false, false, true};  // theta4 held at nominal
    double tol = 1e-10;     // convergence tolerance on cost decrease
    int max_iterations = 50;
    std::uint64_t seed = 1;  // reserved for stochastic fit methods; unused by the LM fit

    void validate(const ThetaVector& nominal) const;

    /// Bounds at +/-50% around nominal, default mask and tolerances.
    static EstimatorConfig defaults_for(const ThetaVector& nominal);
};

struct MeasurementRecord {
    double t = 0.0;       // measurement instant [s]
    double i = 0.0;       // current flowing just before t (ZOH over the gap) [A]
    double v_meas = 0.0;  // measured terminal voltage [V]
};

/// Measurement history plus the known initial state the model replay starts
/// from. Record k's current is applied over (t_{k-1}, t_k].
struct MeasurementWindow {
    double z0 = 0.0;
    double qc0 = 0.0;
    std::vector<MeasurementRecord> records;

    void validate(const ScenarioConfig& cfg) const;
};

/// Replays the theta-hat model through the recorded currents and returns
/// sum_i (V_meas(t_i) - V_hat(t_i))^2 over all records.
double voltage_residual_cost(const ThetaVector& theta_hat, const MeasurementWindow& win,
                             const ScenarioConfig& cfg);

/// Bounded fit: returns theta-hat within bounds with non-worsened cost;
/// masked components are returned bit-identical to prev. Projected
/// Levenberg-Marquardt with the exact sensitivity Jacobian; accept-only
/// steps make the cost monotone by construction, and the method is
/// deterministic.
ThetaVector update_parameters(const ThetaVector& prev_theta_hat, const MeasurementWindow& win,
                              const EstimatorConfig& est, const ScenarioConfig& cfg);

}  // namespace ficharge
