#include "ficharge/oed.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <thread>

#include "ficharge/rng.hpp"

namespace ficharge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Additive water-filling: shift the genes toward the exact full-charge sum
/// (c2 on the design model), respecting the box bounds. Saturated genes drop
/// out of the redistribution.
void charge_repair(std::vector<double>& genes, double target_sum, double i_min, double i_max) {
    for (int pass = 0; pass < 6; ++pass) {
        const double sum = std::accumulate(genes.begin(), genes.end(), 0.0);
        const double deficit = target_sum - sum;
        if (std::abs(deficit) < 1e-12) return;
        std::size_t free_count = 0;
        for (double g : genes) {
            if (deficit > 0 ? g < i_max - 1e-12 : g > i_min + 1e-12) ++free_count;
        }
        if (free_count == 0) return;
        const double shift = deficit / static_cast<double>(free_count);
        for (double& g : genes) {
            if (deficit > 0 ? g < i_max - 1e-12 : g > i_min + 1e-12)
                g = std::clamp(g + shift, i_min, i_max);
        }
    }
}

/// Max over the segment of V evaluated with this segment's current, i.e. the
/// within-segment supremum including the left switch instant. Uses the stored
/// trajectory: V_k(i_s) = v_k + theta1 (i_s - i_k).
double segment_max_v(const Trajectory& traj, const ThetaVector& theta, std::size_t seg,
                     std::size_t nsub, double i_seg) {
    double vmax = -kInf;
    const std::size_t lo = seg * nsub;
    const std::size_t hi = std::min((seg + 1) * nsub, traj.size() - 1);
    for (std::size_t k = lo; k <= hi; ++k) {
        const double v = traj.v[k] + theta.theta1 * (i_seg - traj.i[k]);
        vmax = std::max(vmax, v);
    }
    return vmax;
}

std::vector<double> all_segment_max_v(const std::vector<double>& genes, const ThetaVector& theta,
                                      const ScenarioConfig& cfg, double dt_seg) {
    CurrentProfile p{dt_seg, genes};
    const Trajectory traj = simulate(theta, p, cfg);
    const std::size_t nsub = detail::substeps_per_segment(dt_seg, cfg.dt_sim);
    std::vector<double> out(genes.size());
    for (std::size_t s = 0; s < genes.size(); ++s)
        out[s] = segment_max_v(traj, theta, s, nsub, genes[s]);
    return out;
}

/// Deterministic post-GA polish: bisection-shave every voltage-violating
/// segment onto the V_max surface, then refill the lost charge into segments
/// with voltage headroom until the full-charge sum is restored.
void voltage_polish(std::vector<double>& genes, const ScenarioConfig& cfg, double dt_seg,
                    double target_sum) {
    const ThetaVector& th = cfg.nominal_theta;
    for (int outer = 0; outer < 80; ++outer) {
        std::vector<double> segv = all_segment_max_v(genes, th, cfg, dt_seg);
        std::size_t viol = genes.size();
        for (std::size_t s = 0; s < genes.size(); ++s) {
            if (segv[s] > cfg.v_max + 1e-12) { viol = s; break; }
        }
        if (viol != genes.size()) {
            double lo = cfg.i_min, hi = genes[viol];
            for (int it = 0; it < 60; ++it) {
                genes[viol] = 0.5 * (lo + hi);
                segv = all_segment_max_v(genes, th, cfg, dt_seg);
                if (segv[viol] > cfg.v_max - 1e-10) hi = genes[viol];
                else lo = genes[viol];
            }
            genes[viol] = lo;
            continue;
        }
        const double sum = std::accumulate(genes.begin(), genes.end(), 0.0);
        const double deficit = target_sum - sum;
        if (std::abs(deficit) < 1e-9) return;
        std::size_t free_count = 0;
        for (std::size_t s = 0; s < genes.size(); ++s) {
            const bool ok = deficit > 0
                                ? (cfg.v_max - segv[s] > 1e-4 && genes[s] < cfg.i_max - 1e-9)
                                : genes[s] > cfg.i_min + 1e-9;
            if (ok) ++free_count;
        }
        if (free_count == 0) return;
        const double shift = std::clamp(deficit / static_cast<double>(free_count), -0.5, 0.5);
        for (std::size_t s = 0; s < genes.size(); ++s) {
            const bool ok = deficit > 0
                                ? (cfg.v_max - segv[s] > 1e-4 && genes[s] < cfg.i_max - 1e-9)
                                : genes[s] > cfg.i_min + 1e-9;
            if (ok) genes[s] = std::clamp(genes[s] + shift, cfg.i_min, cfg.i_max);
        }
    }
}

std::vector<double> evaluate_population(const std::vector<std::vector<double>>& pop,
                                        const ScenarioConfig& cfg, const PenaltySpec& pen,
                                        double dt_seg) {
    std::vector<double> fit(pop.size());
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(pop.size()));
    if (workers <= 1) {
        for (std::size_t j = 0; j < pop.size(); ++j)
            fit[j] = fitness(CurrentProfile{dt_seg, pop[j]}, cfg, pen);
        return fit;
    }
    // Individuals are independent; any schedule yields the same values.
    std::vector<std::future<void>> futs;
    futs.reserve(workers);
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < workers; ++w) {
        futs.push_back(std::async(std::launch::async, [&]() {
            for (std::size_t j = next.fetch_add(1); j < pop.size(); j = next.fetch_add(1))
                fit[j] = fitness(CurrentProfile{dt_seg, pop[j]}, cfg, pen);
        }));
    }
    for (auto& f : futs) f.get();
    return fit;
}

std::vector<std::size_t> order_desc(const std::vector<double>& fit) {
    std::vector<std::size_t> idx(fit.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return fit[a] > fit[b];
    });
    return idx;
}

}  // namespace

void GaConfig::validate() const {
    if (population < 2) throw ConfigError("ga.population must be >= 2");
    if (generations < 0) throw ConfigError("ga.generations must be >= 0");
    for (double r : {crossover_rate, mutation_rate}) {
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("ga rates must lie in [0,1]");
    }
    if (!(mutation_sigma >= 0.0)) throw ConfigError("ga.mutation_sigma must be >= 0");
    if (elitism < 0 || elitism >= population) throw ConfigError("ga.elitism must be < population");
    if (tournament_size < 1) throw ConfigError("ga.tournament_size must be >= 1");
    if (!(dt_seg > 0.0)) throw ConfigError("ga.dt_seg must be > 0");
}

void PenaltySpec::validate() const {
    if (!(w_terminal >= 0.0) || !(w_voltage >= 0.0))
        throw ConfigError("penalty weights must be >= 0");
}

void ReferenceTrajectory::validate(const ScenarioConfig& cfg) const {
    if (t_grid.size() < 2 || t_grid.size() != z_ref.size() || t_grid.size() != i_off.size())
        throw ValidationError("reference trajectory arrays are empty or mismatched");
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > t_grid[k - 1]))
            throw ValidationError("reference t_grid is not strictly increasing");
    }
    if (std::abs(z_ref.back() - 1.0) > 1e-3)
        throw ValidationError("reference terminal SOC deviates from 1 by more than 1e-3");
    for (double i : i_off) {
        if (i < cfg.i_min - 1e-9 || i > cfg.i_max + 1e-9)
            throw ValidationError("reference current outside scenario bounds");
    }
    profile.validate(cfg.i_min, cfg.i_max);
}

double ReferenceTrajectory::z_ref_at(double t) const {
    if (t <= t_grid.front()) return z_ref.front();
    if (t >= t_grid.back()) return z_ref.back();
    const auto it = std::upper_bound(t_grid.begin(), t_grid.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - t_grid.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - t_grid[lo]) / (t_grid[hi] - t_grid[lo]);
    return z_ref[lo] + w * (z_ref[hi] - z_ref[lo]);
}

CurrentProfile baseline_profile(const ScenarioConfig& cfg) {
    cfg.validate();
    const double required = cfg.q_nominal_c * (1.0 - cfg.z0) / cfg.t_f;
    if (required > cfg.i_max + 1e-12)
        throw ConfigError("baseline current " + std::to_string(required) +
                          " A exceeds i_max; full charge infeasible in t_f");
    const double i = std::clamp(required, cfg.i_min, cfg.i_max);
    return CurrentProfile{cfg.t_f, {i}};
}

FitnessBreakdown fitness_detail(const CurrentProfile& individual, const ScenarioConfig& cfg,
                                const PenaltySpec& pen) {
    FitnessBreakdown out;
    FimScan scan = assemble_fim_scan(cfg.nominal_theta, individual, cfg);
    const DOptimality dopt = d_optimality(scan.fim);
    out.det = dopt.det;
    out.log_det = dopt.log_det;
    out.terminal_error = scan.traj.z.back() - 1.0;
    double vpen = 0.0;
    double vpeak = -kInf;
    for (double v : scan.traj.v) {
        vpeak = std::max(vpeak, v);
        const double over = v - cfg.v_max;
        if (over > 0.0) vpen += over * over * cfg.dt_sim;
    }
    out.voltage_penalty = vpen;
    out.v_peak = vpeak;
    if (!std::isfinite(out.terminal_error)) {
        out.value = -kInf;
        return out;
    }
    out.value = dopt.log_det - pen.w_terminal * out.terminal_error * out.terminal_error -
                pen.w_voltage * vpen;
    return out;
}

double fitness(const CurrentProfile& individual, const ScenarioConfig& cfg,
               const PenaltySpec& pen) {
    return fitness_detail(individual, cfg, pen).value;
}

OedResult run_oed(const ScenarioConfig& cfg, const GaConfig& ga, const PenaltySpec& pen) {
    cfg.validate();
    ga.validate();
    pen.validate();
    detail::substeps_per_segment(ga.dt_seg, cfg.dt_sim);
    const auto n_seg = static_cast<std::size_t>(std::round(cfg.t_f / ga.dt_seg));
    if (n_seg < 1 || std::abs(n_seg * ga.dt_seg - cfg.t_f) > 1e-6)
        throw ConfigError("ga.dt_seg must divide t_f");

    const double target_sum = (1.0 - cfg.z0) / (cfg.nominal_theta.theta3 * ga.dt_seg);
    const auto pop_size = static_cast<std::size_t>(ga.population);

    std::vector<std::vector<double>> pop(pop_size);
    for (std::size_t j = 0; j < pop_size; ++j) {
        auto rng = detail::make_stream(ga.seed, 0, j);
        std::uniform_real_distribution<double> uni(cfg.i_min, cfg.i_max);
        pop[j].resize(n_seg);
        for (double& g : pop[j]) g = uni(rng);
        charge_repair(pop[j], target_sum, cfg.i_min, cfg.i_max);
    }
    // One feasible-charge seed: the constant-current baseline, when it exists.
    try {
        const CurrentProfile base = baseline_profile(cfg);
        pop[0].assign(n_seg, base.values.front());
    } catch (const ConfigError&) {
        // keep the random individual
    }

    OedResult result;
    std::vector<double> fit = evaluate_population(pop, cfg, pen, ga.dt_seg);

    const double mut_sigma = ga.mutation_sigma * (cfg.i_max - cfg.i_min);
    for (int gen = 1; gen <= ga.generations; ++gen) {
        const std::vector<std::size_t> order = order_desc(fit);
        std::vector<std::vector<double>> next;
        next.reserve(pop_size);
        for (int e = 0; e < ga.elitism; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);

        std::uint64_t slot = 0;
        while (next.size() < pop_size) {
            auto rng = detail::make_stream(ga.seed, static_cast<std::uint64_t>(gen), ++slot);
            std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
            std::uniform_real_distribution<double> coin(0.0, 1.0);
            std::normal_distribution<double> gauss(0.0, mut_sigma);

            auto tournament = [&]() -> const std::vector<double>& {
                std::size_t best = pick(rng);
                for (int c = 1; c < ga.tournament_size; ++c) {
                    const std::size_t cand = pick(rng);
                    if (fit[cand] > fit[best]) best = cand;
                }
                return pop[best];
            };
            std::vector<double> a = tournament();
            std::vector<double> b = tournament();
            if (coin(rng) < ga.crossover_rate) {
                for (std::size_t g = 0; g < n_seg; ++g) {
                    if (coin(rng) < 0.5) std::swap(a[g], b[g]);
                }
            }
            for (std::vector<double>* child : {&a, &b}) {
                for (double& g : *child) {
                    if (coin(rng) < ga.mutation_rate)
                        g = std::clamp(g + gauss(rng), cfg.i_min, cfg.i_max);
                }
                charge_repair(*child, target_sum, cfg.i_min, cfg.i_max);
                if (next.size() < pop_size) next.push_back(std::move(*child));
            }
        }
        pop = std::move(next);
        fit = evaluate_population(pop, cfg, pen, ga.dt_seg);
        result.best_fitness.push_back(*std::max_element(fit.begin(), fit.end()));
    }

    const std::vector<std::size_t> order = order_desc(fit);
    std::vector<double> champion = pop[order[0]];
    voltage_polish(champion, cfg, ga.dt_seg, target_sum);

    CurrentProfile best{ga.dt_seg, champion};
    FimScan scan = assemble_fim_scan(cfg.nominal_theta, best, cfg);
    const DOptimality dopt = d_optimality(scan.fim);

    ReferenceTrajectory ref;
    ref.t_grid = scan.traj.t;
    ref.z_ref = scan.traj.z;
    ref.i_off = scan.traj.i;
    ref.profile = best;
    ref.fim_det = dopt.det;
    ref.fim_log_det = dopt.log_det;
    ref.nominal_theta = cfg.nominal_theta;
    ref.converged = std::abs(scan.traj.z.back() - 1.0) <= 1e-2;
    ref.seed = ga.seed;

    result.ref = std::move(ref);
    result.final_fitness = fitness_detail(best, cfg, pen);
    try {
        result.baseline_det = d_optimality(assemble_fim(cfg.nominal_theta, baseline_profile(cfg), cfg)).det;
    } catch (const ConfigError&) {
        result.baseline_det = 0.0;
    }
    return result;
}

}  // namespace ficharge
