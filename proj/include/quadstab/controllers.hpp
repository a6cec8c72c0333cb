#pragma once

#include <cmath>

#include "quadstab/common.hpp"
#include "quadstab/dynamics.hpp"
#include "quadstab/gain_synthesis.hpp"
#include "quadstab/linalg.hpp"
#include "quadstab/normal_form.hpp"

namespace quadstab {

/**
 * Static state-feedback controller: saturated PD on altitude, PD on yaw,
 * feedback-linearizing law on the horizontal loop with per-axis chi-feedback.
 * The altitude saturation level alpha_sat * g keeps beta(t) inside
 * [1 - alpha_sat, 1 + alpha_sat] by construction.
 */
struct ControllerAConfig {
    PDGains pd;
    KVector k_x;  ///< chi-law for the x axis (entries negative)
    KVector k_y;  ///< chi-law for the y axis
    double alpha_sat = 0.5;

    void validate() const
    {
        pd.validate();
        if (!(alpha_sat > 0.0 && alpha_sat < 1.0))
            throw invalid_input("controller A: alpha_sat must lie in (0,1)");
        for (const KVector* k : {&k_x, &k_y}) {
            if (!(k->k1 < 0.0 && k->k2 < 0.0 && k->k3 < 0.0 && k->k4 < 0.0))
                throw invalid_input("controller A: horizontal k entries must be negative");
        }
    }
};

/// Double-integrator memory of the dynamic controller: u12' = rho12, rho12' = v12.
struct CompensatorState {
    Vec2 u12{0.0, 0.0};
    Vec2 rho12{0.0, 0.0};
};

/// Dynamic-extension controller configuration.
struct ControllerBConfig {
    GammaSet gamma;
    Vec2 u12_init{0.0, 0.0};
    Vec2 rho12_init{0.0, 0.0};

    void validate() const { gamma.validate(); }
};

/// 16-dimensional stack of the dynamic extension, ordered
/// zeta1 = (z~, phi~, x~, y~), zeta2 = d/dt zeta1, zeta3 = d/dt zeta2, zeta4 = d/dt zeta3.
struct ZetaState {
    Vec4 zeta1, zeta2, zeta3, zeta4;

    Eigen::Matrix<double, 16, 1> stacked() const
    {
        Eigen::Matrix<double, 16, 1> v;
        v.segment<4>(0) = zeta1;
        v.segment<4>(4) = zeta2;
        v.segment<4>(8) = zeta3;
        v.segment<4>(12) = zeta4;
        return v;
    }
};

/// (u1, u2) from the saturated altitude PD and the yaw PD.
inline std::pair<double, double> controller_a_vertical_yaw(const XiState& xi, double psi,
                                                           double theta,
                                                           const ControllerAConfig& cfg,
                                                           double g = 9.81)
{
    const double c = tilt_factor(psi, theta);
    if (!(c > 1e-6)) throw singularity_error("controller A: tilt factor below 1e-6");
    const double u2 = -cfg.pd.k1(1) * xi.xi1(1) - cfg.pd.k2(1) * xi.xi2(1);
    const double raw = (g - cfg.pd.k1(0) * xi.xi1(0) - cfg.pd.k2(0) * xi.xi2(0)) / c - g;
    const double u1 = saturate(raw, cfg.alpha_sat * g);
    return {u1, u2};
}

/**
 * (u3, u4) from the feedback-linearizing horizontal law
 *
 *   (u3, u4) = b22^-1 (-q2 - b21 u2 + lin),
 *   lin_j    = k1j xi3_j + k2j xi4_j + k3j xi5_j + k4j xi6_j,
 *
 * which cancels the nonlinear terms so that xi6' equals the commanded linear
 * feedback exactly. Throws singularity_error outside the validity domain.
 */
inline std::pair<double, double> controller_a_horizontal(const XiState& xi, double phi,
                                                         double psi, double theta,
                                                         double phi_dot, double psi_dot,
                                                         double theta_dot, double u2,
                                                         const ControllerAConfig& cfg,
                                                         double g = 9.81, double* det_out = nullptr)
{
    const Q2B2 qb = q2_b21_b22(phi, psi, theta, phi_dot, psi_dot, theta_dot, g);
    Vec2 lin;
    lin(0) = cfg.k_x.k1 * xi.xi3(0) + cfg.k_x.k2 * xi.xi4(0) + cfg.k_x.k3 * xi.xi5(0) +
             cfg.k_x.k4 * xi.xi6(0);
    lin(1) = cfg.k_y.k1 * xi.xi3(1) + cfg.k_y.k2 * xi.xi4(1) + cfg.k_y.k3 * xi.xi5(1) +
             cfg.k_y.k4 * xi.xi6(1);
    const Vec2 rhs = lin - qb.q2 - qb.b21 * u2;
    const double det = qb.b22(0, 0) * qb.b22(1, 1) - qb.b22(0, 1) * qb.b22(1, 0);
    if (det_out) *det_out = det;
    const double u3 = (qb.b22(1, 1) * rhs(0) - qb.b22(0, 1) * rhs(1)) / det;
    const double u4 = (-qb.b22(1, 0) * rhs(0) + qb.b22(0, 0) * rhs(1)) / det;
    return {u3, u4};
}

struct AStepResult {
    RotorForces forces;
    VirtualControl u;
    XiState xi;
    double beta = 1.0;
    double det_b22 = 0.0;
};

/// Full controller A step: state -> rotor forces. Stateless and deterministic.
inline AStepResult controller_a_step(const QuadState& s, const Target& t,
                                     const ControllerAConfig& cfg, const QuadParams& p)
{
    AStepResult r;
    r.xi = to_xi(s, t, 0.0, p.g);
    const auto [u1, u2] = controller_a_vertical_yaw(r.xi, s.psi, s.theta, cfg, p.g);
    const auto [u3, u4] = controller_a_horizontal(r.xi, s.phi, s.psi, s.theta, s.phi_dot,
                                                  s.psi_dot, s.theta_dot, u2, cfg, p.g,
                                                  &r.det_b22);
    r.u = {u1, u2, u3, u4};
    r.beta = beta_of(u1, p.g);
    r.xi.beta = r.beta;
    r.forces = virtual_to_forces(r.u, p);
    return r;
}

/// Zeta stack from plant state, target and compensator memory.
inline ZetaState zeta_from(const QuadState& s, const Target& t, const CompensatorState& comp,
                           double g = 9.81)
{
    const double c = tilt_factor(s.psi, s.theta);
    const double cdot = -std::cos(s.theta) * std::sin(s.psi) * s.psi_dot -
                        std::sin(s.theta) * std::cos(s.psi) * s.theta_dot;
    const Vec2 h = h_vector(s.phi, s.psi, s.theta);
    const Vec2 hdot =
        h_jacobian(s.phi, s.psi, s.theta) * Vec3(s.phi_dot, s.psi_dot, s.theta_dot);
    const double thrust = comp.u12(0) + g;

    ZetaState z;
    z.zeta1 = {s.z - t.z_star, s.phi - t.phi_star, s.x - t.x_star, s.y - t.y_star};
    z.zeta2 = {s.vz, s.phi_dot, s.vx, s.vy};
    z.zeta3 = {c * thrust - g, comp.u12(1), h(0) * thrust, h(1) * thrust};
    z.zeta4 = {cdot * thrust + c * comp.rho12(0), comp.rho12(1),
               hdot(0) * thrust + h(0) * comp.rho12(0),
               hdot(1) * thrust + h(1) * comp.rho12(0)};
    return z;
}

struct Q4B4 {
    Vec4 q4;
    Mat4 b4;
};

/**
 * Closed-form drift and input matrix of zeta4' = q4 + b4 U with
 * U = (v1, v2, u3, u4). Obtained by differentiating zeta4 once more with
 * (yaw'', roll'', pitch'') = (u2, u3, u4), u12' = rho12, rho12' = v12;
 * the derivation is written out in docs/dynamic_controller_derivation.md.
 * At zero error q4 vanishes and det b4 = (u1 + g)^2 cos(roll).
 */
inline Q4B4 q4_b4(const QuadState& s, const CompensatorState& comp, double g = 9.81)
{
    if (!s.within_tilt_domain()) throw tilt_domain_error("q4_b4: |roll| or |pitch| >= pi/2");
    const double cpsi = std::cos(s.psi), spsi = std::sin(s.psi);
    const double cth = std::cos(s.theta), sth = std::sin(s.theta);
    const double c = cth * cpsi;
    const double dc_dpsi = -cth * spsi;
    const double dc_dtheta = -sth * cpsi;
    const double cdot = dc_dpsi * s.psi_dot + dc_dtheta * s.theta_dot;
    // rate-quadratic part of c''
    const double c_curv = -c * (s.psi_dot * s.psi_dot + s.theta_dot * s.theta_dot) +
                          2.0 * sth * spsi * s.psi_dot * s.theta_dot;

    const Vec2 h = h_vector(s.phi, s.psi, s.theta);
    const auto jh = h_jacobian(s.phi, s.psi, s.theta);
    const Vec2 hdot = jh * Vec3(s.phi_dot, s.psi_dot, s.theta_dot);
    const Vec2 h_curv =
        h_rate_curvature(s.phi, s.psi, s.theta, s.phi_dot, s.psi_dot, s.theta_dot);

    const double thrust = comp.u12(0) + g;
    const double u2 = comp.u12(1);
    const double rho1 = comp.rho12(0);

    Q4B4 out;
    out.q4(0) = c_curv * thrust + 2.0 * cdot * rho1;
    out.q4(1) = 0.0;
    out.q4(2) = (h_curv(0) + jh(0, 0) * u2) * thrust + 2.0 * hdot(0) * rho1;
    out.q4(3) = (h_curv(1) + jh(1, 0) * u2) * thrust + 2.0 * hdot(1) * rho1;

    out.b4 << c, 0.0, thrust * dc_dpsi, thrust * dc_dtheta,
        0.0, 1.0, 0.0, 0.0,
        h(0), 0.0, thrust * jh(0, 1), thrust * jh(0, 2),
        h(1), 0.0, thrust * jh(1, 1), thrust * jh(1, 2);
    return out;
}

struct BStepResult {
    Vec4 U;  ///< (v1, v2, u3, u4)
    RotorForces forces;
    VirtualControl u;  ///< physical channels actually applied
    ZetaState zeta;
    double beta = 1.0;
    double det_b4 = 0.0;
};

/**
 * Dynamic controller output at one state. Solves
 *
 *   U = b4^-1 (-q4 - gamma1 zeta1 - gamma2 zeta2 - gamma3 zeta3 - gamma4 zeta4)
 *
 * and allocates physical forces from the current compensator (u1, u2) plus the
 * computed (u3, u4). The caller advances the compensator by u12' = rho12,
 * rho12' = (U(0), U(1)) inside the integrator.
 */
inline BStepResult controller_b_output(const QuadState& s, const Target& t,
                                       const CompensatorState& comp,
                                       const ControllerBConfig& cfg, const QuadParams& p)
{
    BStepResult r;
    r.zeta = zeta_from(s, t, comp, p.g);
    const Q4B4 qb = q4_b4(s, comp, p.g);
    Eigen::PartialPivLU<Mat4> lu(qb.b4);
    r.det_b4 = lu.determinant();
    if (std::abs(r.det_b4) < 1e-9) throw singularity_error("controller B: b4 near-singular");
    const Vec4 rhs = -qb.q4 - cfg.gamma.gamma1 * r.zeta.zeta1 - cfg.gamma.gamma2 * r.zeta.zeta2 -
                     cfg.gamma.gamma3 * r.zeta.zeta3 - cfg.gamma.gamma4 * r.zeta.zeta4;
    r.U = lu.solve(rhs);
    r.u = {comp.u12(0), comp.u12(1), r.U(2), r.U(3)};
    r.beta = beta_of(comp.u12(0), p.g);
    r.forces = virtual_to_forces(r.u, p);
    return r;
}

/**
 * 16x16 closed-loop matrix of the dynamic extension: block companion with I4
 * super-diagonal blocks and -gamma_i I4 in the last block row. Its spectrum is
 * the four roots of s^4 + gamma4 s^3 + gamma3 s^2 + gamma2 s + gamma1, each
 * with multiplicity 4.
 */
inline MatX closed_loop_b_matrix(const GammaSet& gamma)
{
    MatX a = MatX::Zero(16, 16);
    a.block<4, 4>(0, 4) = Mat4::Identity();
    a.block<4, 4>(4, 8) = Mat4::Identity();
    a.block<4, 4>(8, 12) = Mat4::Identity();
    a.block<4, 4>(12, 0) = -gamma.gamma1 * Mat4::Identity();
    a.block<4, 4>(12, 4) = -gamma.gamma2 * Mat4::Identity();
    a.block<4, 4>(12, 8) = -gamma.gamma3 * Mat4::Identity();
    a.block<4, 4>(12, 12) = -gamma.gamma4 * Mat4::Identity();
    return a;
}

}  // namespace quadstab
