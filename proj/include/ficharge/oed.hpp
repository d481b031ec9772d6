#pragma once

#include <cstdint>
#include <vector>

#include "ficharge/sensitivity.hpp"

namespace ficharge {

/// Genetic-algorithm settings for the offline D-optimal design.
struct GaConfig {
    int population = 50;
    int generations = 200;
    double crossover_rate = 0.9;    // probability a selected pair is recombined
    double mutation_rate = 0.1;     // per-gene mutation probability
    double mutation_sigma = 0.1;    // Gaussian sigma as a fraction of the current range
    int elitism = 2;
    int tournament_size = 3;
    double dt_seg = 30.0;           // decision-variable segment length [s]
    std::uint64_t seed = 1;

    void validate() const;
};

/// Quadratic penalty weights for the soft constraints of the design problem
/// (terminal full charge, voltage ceiling). Fitness is in log-det units.
struct PenaltySpec {
    double w_terminal = 1e6;  // on (z(t_f)-1)^2
    double w_voltage = 1e4;   // on integral of max(0, V-V_max)^2 dt

    void validate() const;
};

/// Output of the offline phase: the SOC reference for the online controller.
struct ReferenceTrajectory {
    std::vector<double> t_grid;  // dt_sim grid, 0..t_f inclusive [s]
    std::vector<double> z_ref;   // designed SOC samples
    std::vector<double> i_off;   // offline current sampled on t_grid [A]
    CurrentProfile profile;      // the underlying ZOH segments
    double fim_det = 0.0;        // det(FIM) at nominal theta
    double fim_log_det = 0.0;
    ThetaVector nominal_theta;
    bool converged = false;      // |z_ref(t_f) - 1| <= 1e-2 after the full budget
    std::uint64_t seed = 0;

    /// Type invariants: monotone grid, terminal SOC within 1e-3, currents in bounds.
    void validate(const ScenarioConfig& cfg) const;

    /// Reference SOC at time t (linear interpolation, clamped at the ends).
    double z_ref_at(double t) const;
};

/// Constant-current profile that exactly fills the nominal capacity over t_f.
/// Throws ConfigError when the required current exceeds i_max.
CurrentProfile baseline_profile(const ScenarioConfig& cfg);

struct FitnessBreakdown {
    double value = 0.0;            // log_det - penalties (higher is better)
    double log_det = 0.0;
    double det = 0.0;
    double terminal_error = 0.0;   // z(t_f) - 1
    double voltage_penalty = 0.0;  // integral of max(0, V-V_max)^2 dt
    double v_peak = 0.0;
};

FitnessBreakdown fitness_detail(const CurrentProfile& individual, const ScenarioConfig& cfg,
                                const PenaltySpec& pen);
double fitness(const CurrentProfile& individual, const ScenarioConfig& cfg,
               const PenaltySpec& pen);

struct OedResult {
    ReferenceTrajectory ref;
    std::vector<double> best_fitness;  // best-of-population per generation
    FitnessBreakdown final_fitness;    // of the polished result
    double baseline_det = 0.0;         // det(FIM) of baseline_profile, when feasible
};

/// Runs the seeded GA (tournament selection, uniform crossover, Gaussian
/// per-gene mutation with clipping, elitism, full-charge repair), polishes
/// the champion onto the voltage/charge constraint surface, and re-simulates
/// it into a ReferenceTrajectory. Deterministic for a fixed seed.
OedResult run_oed(const ScenarioConfig& cfg, const GaConfig& ga, const PenaltySpec& pen);

}  // namespace ficharge
