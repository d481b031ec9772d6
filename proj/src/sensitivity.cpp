#include "ficharge/sensitivity.hpp"

#include <cmath>
#include <limits>

namespace ficharge {

namespace {

struct FilterKernels {
    double phi11, phi12, phi21, phi22;  // exp(A dt)
    double gamma1, gamma2;              // int_0^dt exp(A s) B ds
    double decay;                       // e^{-theta4 dt}, reused for qc
    double qc_gain;                     // (1 - e^{-theta4 dt})/theta4
};

// A = [[0,1],[-t4^2,-2 t4]] has a double eigenvalue -t4 with (A+t4 I)
// nilpotent, so exp(A dt) = e^{-t4 dt} (I + (A + t4 I) dt) in closed form.
FilterKernels make_kernels(double theta4, double dt) {
    const double x = theta4 * dt;
    const double e = std::exp(-x);
    FilterKernels k;
    k.phi11 = e * (1.0 + x);
    k.phi12 = e * dt;
    k.phi21 = -e * theta4 * theta4 * dt;
    k.phi22 = e * (1.0 - x);
    k.gamma1 = detail::one_minus_exp_poly(x) / (theta4 * theta4);
    k.gamma2 = dt * e;
    k.decay = e;
    k.qc_gain = -std::expm1(-x) / theta4;
    return k;
}

void check_timestamps(const SensitivityState& s, const EcmState& e) {
    if (std::abs(s.t - e.t) > 1e-9 * std::max(1.0, std::abs(e.t)))
        throw std::domain_error("sensitivity/ECM state timestamps disagree");
}

}  // namespace

double SensitivityVector::operator[](int j) const {
    switch (j) {
        case 0: return s1;
        case 1: return s2;
        case 2: return s3;
        default: return s4;
    }
}

double FimMatrix::max_relative_asymmetry() const {
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

double FimMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(0.5 * (m + m.transpose()));
    return es.eigenvalues().minCoeff();
}

SensitivityState sensitivity_step(const ThetaVector& theta, const SensitivityState& sstate,
                                  const EcmState& ecm, double i, double dt) {
    if (!(dt > 0.0)) throw std::domain_error("sensitivity_step: dt must be > 0");
    check_timestamps(sstate, ecm);
    const FilterKernels k = make_kernels(theta.theta4, dt);
    SensitivityState next;
    next.charge_integral = sstate.charge_integral + i * dt;
    next.x1 = k.phi11 * sstate.x1 + k.phi12 * sstate.x2 + k.gamma1 * i;
    next.x2 = k.phi21 * sstate.x1 + k.phi22 * sstate.x2 + k.gamma2 * i;
    next.t = sstate.t + dt;
    return next;
}

SensitivityVector sensitivities(const ThetaVector& theta, const SensitivityState& sstate,
                                const EcmState& ecm, double i, const OcvPolynomial& ocv) {
    check_timestamps(sstate, ecm);
    SensitivityVector s;
    s.s1 = i;
    s.s2 = ecm.qc;
    // alpha(z) * int_0^t I dtau; identical to alpha(z) theta3^{-1}(z - z0)
    // but free of the division by theta3.
    s.s3 = ocv_slope(ocv, ecm.z) * sstate.charge_integral;
    s.s4 = theta.theta2 * (-sstate.x1);
    return s;
}

namespace {

template <typename SampleFn>
void scan_profile(const ThetaVector& theta, const CurrentProfile& profile,
                  const ScenarioConfig& cfg, SampleFn&& on_sample) {
    const std::size_t nsub = detail::substeps_per_segment(profile.dt_seg, cfg.dt_sim);
    const auto nsteps = static_cast<std::size_t>(std::round(cfg.t_f / cfg.dt_sim));
    EcmState ecm{cfg.z0, 0.0, 0.0};
    SensitivityState sen;

    // Per-segment kernels are constant; recompute only on segment change.
    FilterKernels k = make_kernels(theta.theta4, cfg.dt_sim);
    for (std::size_t step_idx = 0; step_idx <= nsteps; ++step_idx) {
        const std::size_t seg_raw = step_idx / nsub;
        const std::size_t seg =
            seg_raw >= profile.values.size() ? profile.values.size() - 1 : seg_raw;
        const double ik = profile.values[seg];
        on_sample(step_idx == nsteps, ecm, sen, ik);
        if (step_idx == nsteps) break;
        EcmState en;
        en.z = ecm.z + theta.theta3 * ik * cfg.dt_sim;
        en.qc = ecm.qc * k.decay + ik * k.qc_gain;
        en.t = ecm.t + cfg.dt_sim;
        SensitivityState sn;
        sn.charge_integral = sen.charge_integral + ik * cfg.dt_sim;
        sn.x1 = k.phi11 * sen.x1 + k.phi12 * sen.x2 + k.gamma1 * ik;
        sn.x2 = k.phi21 * sen.x1 + k.phi22 * sen.x2 + k.gamma2 * ik;
        sn.t = sen.t + cfg.dt_sim;
        ecm = en;
        sen = sn;
    }
}

}  // namespace

FimScan assemble_fim_scan(const ThetaVector& theta, const CurrentProfile& profile,
                          const ScenarioConfig& cfg) {
    cfg.validate();
    theta.validate();
    profile.validate(cfg.i_min, cfg.i_max);
    if (profile.duration() < cfg.t_f - 1e-9)
        throw ConfigError("profile shorter than t_f");
    if (!(cfg.sigma_v > 0.0)) throw ConfigError("assemble_fim requires sigma_v > 0");

    FimScan out;
    out.fim.sigma = cfg.sigma_v;
    const double w = cfg.dt_sim / (cfg.sigma_v * cfg.sigma_v);
    Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
    scan_profile(theta, profile, cfg,
                 [&](bool final_sample, const EcmState& ecm, const SensitivityState& sen, double ik) {
                     out.traj.t.push_back(ecm.t);
                     out.traj.i.push_back(ik);
                     out.traj.z.push_back(ecm.z);
                     out.traj.qc.push_back(ecm.qc);
                     out.traj.v.push_back(terminal_voltage(theta, ecm, ik, cfg.ocv));
                     if (final_sample) return;  // left-endpoint quadrature
                     const SensitivityVector s = sensitivities(theta, sen, ecm, ik, cfg.ocv);
                     const Eigen::Vector4d sv(s.s1, s.s2, s.s3, s.s4);
                     acc.noalias() += w * (sv * sv.transpose());
                 });
    out.fim.m = acc;
    return out;
}

FimMatrix assemble_fim(const ThetaVector& theta, const CurrentProfile& profile,
                       const ScenarioConfig& cfg) {
    return assemble_fim_scan(theta, profile, cfg).fim;
}

DOptimality d_optimality(const FimMatrix& fim) {
    const Eigen::Matrix4d sym = 0.5 * (fim.m + fim.m.transpose());
    Eigen::LDLT<Eigen::Matrix4d> ldlt(sym);
    const Eigen::Vector4d d = ldlt.vectorD();
    DOptimality out;
    if (!d.allFinite() || d.minCoeff() <= 0.0) {
        // The FIM is PSD by construction, so a nonpositive pivot means singular.
        out.det = 0.0;
        out.log_det = -std::numeric_limits<double>::infinity();
        return out;
    }
    out.det = d.prod();
    out.log_det = d.array().log().sum();
    return out;
}

}  // namespace ficharge
