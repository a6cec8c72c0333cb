#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "quadstab/common.hpp"
#include "quadstab/controllers.hpp"
#include "quadstab/dynamics.hpp"
#include "quadstab/normal_form.hpp"

namespace quadstab {

/// One closed-loop run description.
struct Scenario {
    QuadParams params;
    QuadState initial;
    Target target;
    std::variant<ControllerAConfig, ControllerBConfig> controller;
    double dt = 1e-3;
    double horizon = 20.0;
    bool friction_enabled = false;
    bool nonneg_thrust = false;  ///< fault on any negative allocated rotor thrust
    std::uint64_t seed = 0;      ///< reserved for randomized perturbation studies
    bool log_xi = false;
    bool log_zeta = false;

    void validate() const
    {
        params.validate();
        target.validate();
        if (!(dt > 0.0)) throw invalid_input("scenario: dt must be > 0");
        if (!(horizon >= dt)) throw invalid_input("scenario: horizon must be >= dt");
        if (!initial.finite()) throw invalid_input("scenario: non-finite initial state");
        if (!initial.within_tilt_domain())
            throw invalid_input("scenario: initial tilt outside domain");
        std::visit([](const auto& c) { c.validate(); }, controller);
    }

    bool is_controller_a() const { return std::holds_alternative<ControllerAConfig>(controller); }
};

struct TrajectoryRow {
    double t = 0.0;
    QuadState state;
    RotorForces forces;
    VirtualControl u;
    double beta = 1.0;
    double det_b = 0.0;  ///< det b22 (controller A) or det b4 (controller B)
    bool fault = false;
    std::array<double, 12> xi{};    ///< filled when log_xi
    std::array<double, 16> zeta{};  ///< filled when log_zeta
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    bool has_xi = false;
    bool has_zeta = false;
    bool faulted = false;
    std::string fault_reason;
};

struct ChannelMetric {
    double initial_error = 0.0;
    double final_error = 0.0;
    double settle_time = 0.0;  ///< NaN when the channel never settles
    double overshoot = 0.0;    ///< fraction of the initial error
};

struct Metrics {
    ChannelMetric z, yaw, x, y;
    double max_tilt = 0.0;
    double beta_min_obs = 1.0, beta_max_obs = 1.0;
    double min_abs_det_b = std::numeric_limits<double>::infinity();
    bool faulted = false;
    std::string fault_reason;
    double dt = 0.0, horizon = 0.0;
};

/**
 * Classical fixed-step RK4 update. deriv(t, y) must be side-effect free; the
 * four stage evaluations reuse it directly, so a controller embedded in deriv
 * runs at every stage (continuous-time idealization, no hold).
 * Throws integration_fault if a stage produces a non-finite derivative.
 */
template <typename DerivFn>
std::vector<double> rk4_step(DerivFn&& deriv, const std::vector<double>& y, double t, double dt)
{
    const std::size_t n = y.size();
    auto check = [n](const std::vector<double>& d) {
        if (d.size() != n || !all_finite(d.data(), n))
            throw integration_fault("rk4_step: non-finite derivative");
    };
    auto axpy = [n](const std::vector<double>& base, double a, const std::vector<double>& dir) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + a * dir[i];
        return out;
    };
    const std::vector<double> k1 = deriv(t, y);
    check(k1);
    const std::vector<double> k2 = deriv(t + 0.5 * dt, axpy(y, 0.5 * dt, k1));
    check(k2);
    const std::vector<double> k3 = deriv(t + 0.5 * dt, axpy(y, 0.5 * dt, k2));
    check(k3);
    const std::vector<double> k4 = deriv(t + dt, axpy(y, dt, k3));
    check(k4);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

namespace detail {

inline void fill_xi(TrajectoryRow& row, const XiState& xi)
{
    row.xi = {xi.xi1(0), xi.xi1(1), xi.xi2(0), xi.xi2(1), xi.xi3(0), xi.xi3(1),
              xi.xi4(0), xi.xi4(1), xi.xi5(0), xi.xi5(1), xi.xi6(0), xi.xi6(1)};
}

inline ChannelMetric channel_metric(const std::vector<TrajectoryRow>& rows,
                                    const std::function<double(const TrajectoryRow&)>& err)
{
    ChannelMetric m;
    if (rows.empty()) return m;
    m.initial_error = err(rows.front());
    m.final_error = std::abs(err(rows.back()));
    const double e0 = std::abs(m.initial_error);
    if (e0 == 0.0) {
        m.settle_time = 0.0;
        m.overshoot = 0.0;
        return m;
    }
    const double band = 0.02 * e0;
    const double sign = m.initial_error > 0.0 ? 1.0 : -1.0;
    double settle = std::numeric_limits<double>::quiet_NaN();
    double overshoot = 0.0;
    // walk backwards: the settle time is the first instant after which the
    // channel never leaves the band again
    std::size_t idx = rows.size();
    for (std::size_t i = rows.size(); i-- > 0;) {
        if (std::abs(err(rows[i])) > band) break;
        idx = i;
    }
    if (idx < rows.size()) settle = rows[idx].t;
    for (const auto& r : rows) overshoot = std::max(overshoot, -sign * err(r) / e0);
    m.settle_time = settle;
    m.overshoot = overshoot;
    return m;
}

}  // namespace detail

/// Convergence metrics over a produced log.
inline Metrics compute_metrics(const Trajectory& traj, const Scenario& sc)
{
    Metrics m;
    m.dt = sc.dt;
    m.horizon = sc.horizon;
    m.faulted = traj.faulted;
    m.fault_reason = traj.fault_reason;
    const Target& t = sc.target;
    m.z = detail::channel_metric(traj.rows, [&](const TrajectoryRow& r) { return r.state.z - t.z_star; });
    m.yaw = detail::channel_metric(traj.rows, [&](const TrajectoryRow& r) { return r.state.phi - t.phi_star; });
    m.x = detail::channel_metric(traj.rows, [&](const TrajectoryRow& r) { return r.state.x - t.x_star; });
    m.y = detail::channel_metric(traj.rows, [&](const TrajectoryRow& r) { return r.state.y - t.y_star; });
    for (const auto& r : traj.rows) {
        m.max_tilt = std::max({m.max_tilt, std::abs(r.state.psi), std::abs(r.state.theta)});
        m.beta_min_obs = std::min(m.beta_min_obs, r.beta);
        m.beta_max_obs = std::max(m.beta_max_obs, r.beta);
        m.min_abs_det_b = std::min(m.min_abs_det_b, std::abs(r.det_b));
    }
    return m;
}

/**
 * Deterministic closed-loop run. The integrator state stacks the 12 plant
 * components plus, for the dynamic controller, the 4 compensator components.
 * Control faults and integration faults truncate the log and raise the fault
 * flag on the last row; they are recorded, never rethrown.
 */
inline std::pair<Trajectory, Metrics> run_scenario(const Scenario& sc)
{
    sc.validate();
    Trajectory traj;
    traj.has_xi = sc.log_xi;
    traj.has_zeta = sc.log_zeta;

    const bool is_a = sc.is_controller_a();
    const auto* cfg_a = std::get_if<ControllerAConfig>(&sc.controller);
    const auto* cfg_b = std::get_if<ControllerBConfig>(&sc.controller);

    const std::size_t n_steps = static_cast<std::size_t>(std::llround(sc.horizon / sc.dt));
    const std::size_t dim = is_a ? 12 : 16;

    std::vector<double> y(dim);
    {
        const auto a = sc.initial.to_array();
        for (std::size_t i = 0; i < 12; ++i) y[i] = a[i];
        if (!is_a) {
            y[12] = cfg_b->u12_init(0);
            y[13] = cfg_b->u12_init(1);
            y[14] = cfg_b->rho12_init(0);
            y[15] = cfg_b->rho12_init(1);
        }
    }

    auto unpack_comp = [](const std::vector<double>& v) {
        CompensatorState c;
        c.u12 = {v[12], v[13]};
        c.rho12 = {v[14], v[15]};
        return c;
    };

    auto check_thrust = [&](const RotorForces& f) {
        if (!sc.nonneg_thrust) return;
        for (double v : f.f) {
            if (v < 0.0)
                throw control_fault("negative rotor thrust " + std::to_string(v) +
                                    " with nonneg_thrust set");
        }
    };

    auto deriv = [&](double, const std::vector<double>& v) {
        const QuadState s = QuadState::from_array(v.data());
        std::vector<double> d(dim);
        if (is_a) {
            const AStepResult out = controller_a_step(s, sc.target, *cfg_a, sc.params);
            check_thrust(out.forces);
            const QuadState ds = state_derivative(s, out.u, sc.params, sc.friction_enabled);
            const auto da = ds.to_array();
            for (std::size_t i = 0; i < 12; ++i) d[i] = da[i];
        } else {
            const CompensatorState comp = unpack_comp(v);
            const BStepResult out = controller_b_output(s, sc.target, comp, *cfg_b, sc.params);
            check_thrust(out.forces);
            const QuadState ds = state_derivative(s, out.u, sc.params, sc.friction_enabled);
            const auto da = ds.to_array();
            for (std::size_t i = 0; i < 12; ++i) d[i] = da[i];
            d[12] = comp.rho12(0);
            d[13] = comp.rho12(1);
            d[14] = out.U(0);
            d[15] = out.U(1);
        }
        return d;
    };

    auto log_row = [&](double t, const std::vector<double>& v) {
        TrajectoryRow row;
        row.t = t;
        row.state = QuadState::from_array(v.data());
        if (is_a) {
            const AStepResult out = controller_a_step(row.state, sc.target, *cfg_a, sc.params);
            row.forces = out.forces;
            row.u = out.u;
            row.beta = out.beta;
            row.det_b = out.det_b22;
            if (sc.log_xi) detail::fill_xi(row, out.xi);
        } else {
            const CompensatorState comp = unpack_comp(v);
            const BStepResult out = controller_b_output(row.state, sc.target, comp, *cfg_b, sc.params);
            row.forces = out.forces;
            row.u = out.u;
            row.beta = out.beta;
            row.det_b = out.det_b4;
            if (sc.log_xi) {
                const XiState xi = to_xi(row.state, sc.target, comp.u12(0), sc.params.g);
                detail::fill_xi(row, xi);
            }
            if (sc.log_zeta) {
                const auto z = out.zeta.stacked();
                for (int i = 0; i < 16; ++i) row.zeta[static_cast<std::size_t>(i)] = z(i);
            }
        }
        traj.rows.push_back(row);
    };

    try {
        for (std::size_t n = 0; n <= n_steps; ++n) {
            const double t = static_cast<double>(n) * sc.dt;
            log_row(t, y);
            if (n == n_steps) break;
            y = rk4_step(deriv, y, t, sc.dt);
            if (!all_finite(y.data(), dim))
                throw integration_fault("run_scenario: non-finite state");
        }
    } catch (const error& e) {
        traj.faulted = true;
        traj.fault_reason = e.what();
        if (traj.rows.empty()) {
            // controller already faults at the initial state; log it bare
            TrajectoryRow row;
            row.t = 0.0;
            row.state = QuadState::from_array(y.data());
            traj.rows.push_back(row);
        }
        traj.rows.back().fault = true;
    }
    return {traj, compute_metrics(traj, sc)};
}

/**
 * Max relative deviation of a logged stack from its LTI reference: propagates
 * the stack at row `begin` through expm(A dt) and compares with the log over
 * [begin, end). Deviations are normalized by the peak reference norm.
 */
inline double compare_linear_reference(const Trajectory& traj, const MatX& a,
                                       const std::function<VecX(const TrajectoryRow&)>& stack_of,
                                       std::size_t begin = 0,
                                       std::size_t end = std::numeric_limits<std::size_t>::max())
{
    if (traj.rows.size() < 2) throw invalid_input("compare_linear_reference: trajectory too short");
    end = std::min(end, traj.rows.size());
    if (begin + 1 >= end) throw invalid_input("compare_linear_reference: empty row range");
    const double dt = traj.rows[begin + 1].t - traj.rows[begin].t;
    const MatX phi = (a * dt).exp();
    VecX v = stack_of(traj.rows[begin]);
    if (v.size() != a.rows()) throw invalid_input("compare_linear_reference: stack/matrix size mismatch");
    double worst = 0.0;
    double scale = v.lpNorm<Eigen::Infinity>();
    for (std::size_t i = begin; i < end; ++i) {
        const VecX logged = stack_of(traj.rows[i]);
        worst = std::max(worst, (logged - v).lpNorm<Eigen::Infinity>());
        scale = std::max(scale, v.lpNorm<Eigen::Infinity>());
        v = phi * v;
    }
    return worst / std::max(scale, 1e-300);
}

/// Extractor for the 16-dim zeta stack (requires log_zeta).
inline std::function<VecX(const TrajectoryRow&)> zeta_stack_of(const Trajectory& traj)
{
    if (!traj.has_zeta) throw invalid_input("zeta stack not logged");
    return [](const TrajectoryRow& r) {
        VecX v(16);
        for (int i = 0; i < 16; ++i) v(i) = r.zeta[static_cast<std::size_t>(i)];
        return v;
    };
}

/// Extractor for the (altitude error, vertical rate) pair.
inline std::function<VecX(const TrajectoryRow&)> altitude_stack_of(const Target& t)
{
    return [t](const TrajectoryRow& r) {
        VecX v(2);
        v(0) = r.state.z - t.z_star;
        v(1) = r.state.vz;
        return v;
    };
}

// ---------------------------------------------------------------------------
// serialization

inline void write_csv(const Trajectory& traj, std::ostream& os)
{
    os << "t,x,y,z,vx,vy,vz,phi,psi,theta,phid,psid,thetad,F1,F2,F3,F4,u1,u2,u3,u4,beta,fault";
    if (traj.has_xi) {
        os << ",xi11,xi12,xi21,xi22,xi31,xi32,xi41,xi42,xi51,xi52,xi61,xi62";
    }
    if (traj.has_zeta) {
        for (int i = 1; i <= 16; ++i) os << ",zeta" << i;
    }
    os << "\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << ',' << buf;
    };
    for (const auto& r : traj.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.t);
        os << buf;
        const auto s = r.state.to_array();
        for (double v : s) put(v);
        for (double v : r.forces.f) put(v);
        put(r.u.u1);
        put(r.u.u2);
        put(r.u.u3);
        put(r.u.u4);
        put(r.beta);
        os << ',' << (r.fault ? 1 : 0);
        if (traj.has_xi)
            for (double v : r.xi) put(v);
        if (traj.has_zeta)
            for (double v : r.zeta) put(v);
        os << "\n";
    }
}

inline nlohmann::json metrics_to_json(const Metrics& m)
{
    auto channel = [](const ChannelMetric& c) {
        nlohmann::json j;
        j["initial_error"] = c.initial_error;
        j["final_error"] = c.final_error;
        if (std::isnan(c.settle_time))
            j["settle_time"] = nullptr;
        else
            j["settle_time"] = c.settle_time;
        j["overshoot"] = c.overshoot;
        return j;
    };
    nlohmann::json j;
    j["channels"]["z"] = channel(m.z);
    j["channels"]["yaw"] = channel(m.yaw);
    j["channels"]["x"] = channel(m.x);
    j["channels"]["y"] = channel(m.y);
    j["max_tilt"] = m.max_tilt;
    j["beta_range"] = {m.beta_min_obs, m.beta_max_obs};
    j["min_abs_det_b"] = m.min_abs_det_b;
    j["faulted"] = m.faulted;
    j["fault_reason"] = m.fault_reason;
    j["dt"] = m.dt;
    j["horizon"] = m.horizon;
    return j;
}

}  // namespace quadstab
