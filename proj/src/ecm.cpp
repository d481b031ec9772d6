#include "ficharge/ecm.hpp"

#include <atomic>
#include <cmath>
#include <string>

namespace ficharge {

namespace {
std::atomic<std::uint64_t> g_ocv_extrapolations{0};

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw std::domain_error(std::string("non-finite ") + what);
}
}  // namespace

void ThetaVector::validate(double theta4_max) const {
    const double c[4] = {theta1, theta2, theta3, theta4};
    for (int j = 0; j < 4; ++j) {
        if (!std::isfinite(c[j]) || c[j] <= 0.0)
            throw ConfigError("theta" + std::to_string(j + 1) + " must be finite and > 0");
    }
    if (theta4 > theta4_max)
        throw ConfigError("theta4 exceeds configured maximum " + std::to_string(theta4_max));
}

ThetaVector ThetaVector::from_physical(double r0_ohm, double c1_farad, double q_coulomb,
                                       double r1_ohm) {
    if (r0_ohm <= 0 || c1_farad <= 0 || q_coulomb <= 0 || r1_ohm <= 0)
        throw ConfigError("physical ECM parameters must be > 0");
    return ThetaVector{r0_ohm, 1.0 / c1_farad, 1.0 / q_coulomb, 1.0 / (r1_ohm * c1_farad)};
}

double ThetaVector::operator[](int j) const {
    switch (j) {
        case 0: return theta1;
        case 1: return theta2;
        case 2: return theta3;
        default: return theta4;
    }
}

double& ThetaVector::operator[](int j) {
    switch (j) {
        case 0: return theta1;
        case 1: return theta2;
        case 2: return theta3;
        default: return theta4;
    }
}

void OcvPolynomial::validate() const {
    for (double a : coeffs) require_finite(a, "OCV coefficient");
    if (!(z_lo < z_hi)) throw ConfigError("OCV valid_range must satisfy z_lo < z_hi");
    // Sanity band for a Li-ion cell fit.
    for (double z : {z_lo, z_hi}) {
        const double v = ocv_eval(*this, z);
        if (v < 2.0 || v > 5.0)
            throw ConfigError("OCV at the edge of valid_range is outside [2,5] V: " +
                              std::to_string(v));
    }
}

std::uint64_t ocv_extrapolation_count() { return g_ocv_extrapolations.load(); }
void reset_ocv_extrapolation_count() { g_ocv_extrapolations.store(0); }

double ocv_eval(const OcvPolynomial& ocv, double z) {
    if (!std::isfinite(z)) throw std::domain_error("ocv_eval: non-finite z");
    if (z < ocv.z_lo || z > ocv.z_hi) g_ocv_extrapolations.fetch_add(1, std::memory_order_relaxed);
    double acc = 0.0;  // Horner
    for (int k = 7; k >= 0; --k) acc = acc * z + ocv.coeffs[static_cast<std::size_t>(k)];
    return acc;
}

double ocv_slope(const OcvPolynomial& ocv, double z) {
    if (!std::isfinite(z)) throw std::domain_error("ocv_slope: non-finite z");
    double acc = 0.0;
    for (int k = 7; k >= 1; --k) acc = acc * z + static_cast<double>(k) * ocv.coeffs[static_cast<std::size_t>(k)];
    return acc;
}

double CurrentProfile::current_at(double t) const {
    if (values.empty()) throw ConfigError("empty current profile");
    const double raw = std::floor(t / dt_seg + 1e-9);
    const auto idx = raw < 0.0 ? std::size_t{0}
                               : static_cast<std::size_t>(raw);
    return values[idx >= values.size() ? values.size() - 1 : idx];
}

void CurrentProfile::validate(double i_min, double i_max) const {
    if (!(dt_seg > 0.0)) throw ConfigError("profile dt_seg must be > 0");
    if (values.empty()) throw ConfigError("profile has no segments");
    for (double v : values) {
        require_finite(v, "profile current");
        if (v < i_min - 1e-12 || v > i_max + 1e-12)
            throw ConfigError("profile current " + std::to_string(v) + " outside bounds");
    }
}

void ScenarioConfig::validate() const {
    nominal_theta.validate();
    true_theta.validate();
    ocv.validate();
    if (!(q_nominal_c > 0)) throw ConfigError("q_nominal_c must be > 0");
    if (!(t_f > 0)) throw ConfigError("t_f must be > 0");
    if (!(dt_sim > 0)) throw ConfigError("dt_sim must be > 0");
    if (!(i_min < 0.0 && 0.0 < i_max)) throw ConfigError("current bounds must satisfy i_min < 0 < i_max");
    if (!(v_max > ocv_eval(ocv, 1.0)))
        throw ConfigError("v_max must exceed OCV(z=1) = " + std::to_string(ocv_eval(ocv, 1.0)));
    if (!(z0 >= 0.0 && z0 < 1.0)) throw ConfigError("z0 must lie in [0,1)");
    if (!(sigma_v >= 0.0)) throw ConfigError("sigma_v must be >= 0");
    const double n = t_f / dt_sim;
    if (std::abs(n - std::round(n)) > 1e-6) throw ConfigError("dt_sim must divide t_f");
}

double terminal_voltage(const ThetaVector& theta, const EcmState& state, double i,
                        const OcvPolynomial& ocv) {
    require_finite(i, "current");
    require_finite(state.z, "state z");
    require_finite(state.qc, "state qc");
    return ocv_eval(ocv, state.z) + theta.theta2 * state.qc + theta.theta1 * i;
}

EcmState step(const ThetaVector& theta, const EcmState& state, double i, double dt) {
    if (!(dt > 0.0)) throw std::domain_error("step: dt must be > 0");
    require_finite(i, "current");
    const double e = std::exp(-theta.theta4 * dt);
    EcmState next;
    next.z = state.z + theta.theta3 * i * dt;
    // Exact ZOH solution of dqc/dt = -theta4*qc + i over [0, dt]:
    //   qc' = qc*e^{-theta4 dt} + (i/theta4)(1 - e^{-theta4 dt}).
    next.qc = state.qc * e + i * (-std::expm1(-theta.theta4 * dt)) / theta.theta4;
    next.t = state.t + dt;
    return next;
}

Trajectory simulate(const ThetaVector& theta, const CurrentProfile& profile,
                    const ScenarioConfig& cfg) {
    cfg.validate();
    theta.validate();
    profile.validate(cfg.i_min, cfg.i_max);
    if (profile.duration() < cfg.t_f - 1e-9)
        throw ConfigError("profile duration " + std::to_string(profile.duration()) +
                          " s is shorter than t_f");
    const std::size_t nsub = detail::substeps_per_segment(profile.dt_seg, cfg.dt_sim);
    const auto nsteps = static_cast<std::size_t>(std::round(cfg.t_f / cfg.dt_sim));

    Trajectory traj;
    traj.t.reserve(nsteps + 1);
    traj.i.reserve(nsteps + 1);
    traj.z.reserve(nsteps + 1);
    traj.qc.reserve(nsteps + 1);
    traj.v.reserve(nsteps + 1);

    EcmState s{cfg.z0, 0.0, 0.0};
    for (std::size_t k = 0; k <= nsteps; ++k) {
        const std::size_t seg_raw = k / nsub;
        const std::size_t seg = seg_raw >= profile.values.size() ? profile.values.size() - 1 : seg_raw;
        const double ik = profile.values[seg];
        traj.t.push_back(s.t);
        traj.i.push_back(ik);
        traj.z.push_back(s.z);
        traj.qc.push_back(s.qc);
        traj.v.push_back(terminal_voltage(theta, s, ik, cfg.ocv));
        if (k < nsteps) s = step(theta, s, ik, cfg.dt_sim);
    }
    return traj;
}

namespace detail {

std::size_t substeps_per_segment(double dt_seg, double dt_sim) {
    const double r = dt_seg / dt_sim;
    const double rr = std::round(r);
    if (rr < 1.0 || std::abs(r - rr) > 1e-6 * rr)
        throw ConfigError("dt_sim must divide the profile segment duration");
    return static_cast<std::size_t>(rr);
}

double one_minus_exp_poly(double x) {
    if (x < 1e-3) {
        // 1-(1+x)e^{-x} = x^2/2 - x^3/3 + x^4/8 - x^5/30 + O(x^6)
        return x * x * (0.5 + x * (-1.0 / 3.0 + x * (0.125 - x / 30.0)));
    }
    return 1.0 - (1.0 + x) * std::exp(-x);
}

}  // namespace detail

}  // namespace ficharge
