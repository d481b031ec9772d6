#include "ficharge/estimator.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ficharge {

namespace {

struct Replay {
    Eigen::VectorXd residuals;   // v_meas - v_hat, windowed
    Eigen::MatrixXd jacobian;    // dV_hat/dtheta_j per windowed record (n x 4)
    double cost = 0.0;
};

/// One exact ZOH step per record gap; rows are emitted only for the records
/// inside the residual window (replay always runs from t=0 for state
/// consistency).
Replay replay_model(const ThetaVector& th, const MeasurementWindow& win,
                    const ScenarioConfig& cfg, std::size_t first_active) {
    const std::size_t n = win.records.size();
    const std::size_t n_active = n - first_active;
    Replay out;
    out.residuals.resize(static_cast<Eigen::Index>(n_active));
    out.jacobian.resize(static_cast<Eigen::Index>(n_active), 4);

    EcmState ecm{win.z0, win.qc0, 0.0};
    SensitivityState sen;
    double t_prev = 0.0;
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const MeasurementRecord& rec = win.records[k];
        const double dt = rec.t - t_prev;
        if (dt > 0.0) {
            sen = sensitivity_step(th, sen, ecm, rec.i, dt);
            ecm = step(th, ecm, rec.i, dt);
        }
        if (k >= first_active) {
            const double v_hat = terminal_voltage(th, ecm, rec.i, cfg.ocv);
            const SensitivityVector s = sensitivities(th, sen, ecm, rec.i, cfg.ocv);
            out.residuals(row) = rec.v_meas - v_hat;
            out.jacobian(row, 0) = s.s1;
            out.jacobian(row, 1) = s.s2;
            out.jacobian(row, 2) = s.s3;
            out.jacobian(row, 3) = s.s4;
            ++row;
        }
        t_prev = rec.t;
    }
    out.cost = out.residuals.squaredNorm();
    return out;
}

std::size_t window_start(const MeasurementWindow& win, int window) {
    if (window <= 0 || static_cast<std::size_t>(window) >= win.records.size()) return 0;
    return win.records.size() - static_cast<std::size_t>(window);
}

}  // namespace

void EstimatorConfig::validate(const ThetaVector& nominal) const {
    for (int j = 0; j < 4; ++j) {
        if (!(bounds_lo[j] < bounds_hi[j]))
            throw ConfigError("estimator bounds must satisfy lo < hi componentwise");
        if (nominal[j] < bounds_lo[j] || nominal[j] > bounds_hi[j])
            throw ConfigError("nominal theta must lie within the estimator bounds");
    }
    if (update_period < 1) throw ConfigError("estimator.update_period must be >= 1");
    if (window < 0) throw ConfigError("estimator.window must be >= 0");
    if (!(tol >= 0.0)) throw ConfigError("estimator.tol must be >= 0");
    if (max_iterations < 1) throw ConfigError("estimator.max_iterations must be >= 1");
}

EstimatorConfig EstimatorConfig::defaults_for(const ThetaVector& nominal) {
    EstimatorConfig est;
    for (int j = 0; j < 4; ++j) {
        est.bounds_lo[j] = 0.5 * nominal[j];
        est.bounds_hi[j] = 1.5 * nominal[j];
    }
    return est;
}

void MeasurementWindow::validate(const ScenarioConfig& cfg) const {
    double t_prev = -1.0;
    for (const MeasurementRecord& r : records) {
        if (!(r.t > t_prev)) throw ConfigError("measurement times must be strictly increasing");
        if (r.i < cfg.i_min - 1e-9 || r.i > cfg.i_max + 1e-9)
            throw ConfigError("measurement current outside scenario bounds");
        t_prev = r.t;
    }
}

double voltage_residual_cost(const ThetaVector& theta_hat, const MeasurementWindow& win,
                             const ScenarioConfig& cfg) {
    if (win.records.empty()) throw std::domain_error("voltage_residual_cost: empty window");
    return replay_model(theta_hat, win, cfg, 0).cost;
}

ThetaVector update_parameters(const ThetaVector& prev_theta_hat, const MeasurementWindow& win,
                              const EstimatorConfig& est, const ScenarioConfig& cfg) {
    if (win.records.empty()) return prev_theta_hat;
    est.validate(cfg.nominal_theta);

    std::vector<int> free;
    for (int j = 0; j < 4; ++j) {
        if (!est.fixed_mask[static_cast<std::size_t>(j)]) free.push_back(j);
    }
    if (free.empty()) return prev_theta_hat;

    const std::size_t first_active = window_start(win, est.window);
    ThetaVector th = prev_theta_hat;
    Replay rep = replay_model(th, win, cfg, first_active);
    if (rep.cost <= est.tol) return prev_theta_hat;

    const auto nf = static_cast<Eigen::Index>(free.size());
    double lambda = 1e-3;
    for (int it = 0; it < est.max_iterations; ++it) {
        Eigen::MatrixXd jf(rep.jacobian.rows(), nf);
        for (Eigen::Index c = 0; c < nf; ++c)
            jf.col(c) = rep.jacobian.col(free[static_cast<std::size_t>(c)]);
        const Eigen::MatrixXd h = jf.transpose() * jf;
        const Eigen::VectorXd g = jf.transpose() * rep.residuals;

        bool stepped = false;
        while (lambda <= 1e10) {
            Eigen::MatrixXd damped = h;
            for (Eigen::Index c = 0; c < nf; ++c)
                damped(c, c) += lambda * std::max(h(c, c), 1e-30);
            const Eigen::VectorXd delta = damped.ldlt().solve(g);
            ThetaVector cand = th;
            for (Eigen::Index c = 0; c < nf; ++c) {
                const int j = free[static_cast<std::size_t>(c)];
                cand[j] = std::clamp(th[j] + delta(c), est.bounds_lo[j], est.bounds_hi[j]);
            }
            Replay rcand = replay_model(cand, win, cfg, first_active);
            if (rcand.cost < rep.cost) {
                const bool converged = rep.cost - rcand.cost < est.tol;
                th = cand;
                rep = std::move(rcand);
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (converged) return th;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) break;
    }
    return th;
}

}  // namespace ficharge
