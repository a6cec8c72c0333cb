#pragma once

#include <cmath>

#include "quadstab/common.hpp"
#include "quadstab/dynamics.hpp"
#include "quadstab/linalg.hpp"

namespace quadstab {

/// Setpoint: altitude, yaw and horizontal position (roll* = pitch* = 0 implicit).
struct Target {
    double z_star = 0.0;
    double phi_star = 0.0;
    double x_star = 0.0;
    double y_star = 0.0;

    void validate() const
    {
        const double v[] = {z_star, phi_star, x_star, y_star};
        if (!all_finite(v, 4)) throw invalid_input("target: non-finite value");
    }
};

/**
 * Error coordinates of the cascade representation.
 *
 *   xi1 = (z - z*, phi - phi*)    xi2 = (vz, phi_dot)
 *   xi3 = (x - x*, y - y*)        xi4 = (vx, vy)
 *   xi5 = g * h(angles)           xi6 = g * d/dt h(angles)
 *
 * h is the horizontal part of the thrust direction. Along frictionless motion
 * the blocks obey xi1' = xi2, xi3' = xi4, xi4' = beta(t) xi5, xi5' = xi6 with
 * beta = (u1 + g)/g.
 */
struct XiState {
    Vec2 xi1, xi2, xi3, xi4, xi5, xi6;
    double beta = 1.0;  ///< diagnostic only, from the u1 passed to to_xi
};

/// Admissible range of the thrust factor beta(t) = (u1 + g)/g.
struct BetaBound {
    double beta_min = 1.0;
    double beta_max = 1.0;

    static BetaBound from_alpha(double alpha_sat)
    {
        if (!(alpha_sat > 0.0) || !(alpha_sat < 1.0))
            throw invalid_input("beta bound: saturation alpha must lie in (0,1)");
        return {1.0 - alpha_sat, 1.0 + alpha_sat};
    }

    double alpha_sat() const { return (beta_max - beta_min) / 2.0; }

    void validate() const
    {
        if (!std::isfinite(beta_min) || !std::isfinite(beta_max))
            throw invalid_input("beta bound: non-finite");
        if (!(beta_min > 0.0)) throw invalid_input("beta bound: beta_min must be > 0");
        if (!(beta_min <= 1.0 && 1.0 <= beta_max))
            throw invalid_input("beta bound: must satisfy beta_min <= 1 <= beta_max");
    }
};

/// Horizontal components of the thrust direction.
inline Vec2 h_vector(double phi, double psi, double theta)
{
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    const double cpsi = std::cos(psi), spsi = std::sin(psi);
    const double sth = std::sin(theta);
    return {cphi * sth * cpsi + sphi * spsi,
            sphi * sth * cpsi - cphi * spsi};
}

/// 2x3 Jacobian of h, columns ordered (d/dphi, d/dpsi, d/dtheta).
inline Eigen::Matrix<double, 2, 3> h_jacobian(double phi, double psi, double theta)
{
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    const double cpsi = std::cos(psi), spsi = std::sin(psi);
    const double cth = std::cos(theta), sth = std::sin(theta);
    const double h1 = cphi * sth * cpsi + sphi * spsi;
    const double h2 = sphi * sth * cpsi - cphi * spsi;
    Eigen::Matrix<double, 2, 3> j;
    j(0, 0) = -h2;
    j(1, 0) = h1;
    j(0, 1) = -cphi * sth * spsi + sphi * cpsi;
    j(1, 1) = -sphi * sth * spsi - cphi * cpsi;
    j(0, 2) = cphi * cth * cpsi;
    j(1, 2) = sphi * cth * cpsi;
    return j;
}

/**
 * Quadratic-in-rates part of d^2 h / dt^2: returns w^T Hess(h_i) w for both
 * components, with w = (phi_dot, psi_dot, theta_dot). Together with the
 * Jacobian this gives  h'' = curvature + J_h * (angular accelerations).
 */
inline Vec2 h_rate_curvature(double phi, double psi, double theta,
                             double phi_dot, double psi_dot, double theta_dot)
{
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    const double cpsi = std::cos(psi), spsi = std::sin(psi);
    const double cth = std::cos(theta), sth = std::sin(theta);
    const double h1 = cphi * sth * cpsi + sphi * spsi;
    const double h2 = sphi * sth * cpsi - cphi * spsi;

    // second partials of h1
    const double h1_ff = -h1;
    const double h1_fp = sphi * sth * spsi + cphi * cpsi;
    const double h1_ft = -sphi * cth * cpsi;
    const double h1_pp = -h1;
    const double h1_pt = -cphi * cth * spsi;
    const double h1_tt = -cphi * sth * cpsi;
    // second partials of h2
    const double h2_ff = -h2;
    const double h2_fp = -cphi * sth * spsi + sphi * cpsi;
    const double h2_ft = cphi * cth * cpsi;
    const double h2_pp = -h2;
    const double h2_pt = -sphi * cth * spsi;
    const double h2_tt = -sphi * sth * cpsi;

    const double f2 = phi_dot * phi_dot, p2 = psi_dot * psi_dot, t2 = theta_dot * theta_dot;
    const double fp = 2.0 * phi_dot * psi_dot, ft = 2.0 * phi_dot * theta_dot, pt = 2.0 * psi_dot * theta_dot;
    return {h1_ff * f2 + h1_pp * p2 + h1_tt * t2 + h1_fp * fp + h1_ft * ft + h1_pt * pt,
            h2_ff * f2 + h2_pp * p2 + h2_tt * t2 + h2_fp * fp + h2_ft * ft + h2_pt * pt};
}

/// cos(pitch) * cos(roll): the vertical share of the thrust direction.
inline double tilt_factor(double psi, double theta)
{
    return std::cos(theta) * std::cos(psi);
}

/// Error coordinates from plant state; u1 only feeds the beta diagnostic.
inline XiState to_xi(const QuadState& s, const Target& t, double u1 = 0.0, double g = 9.81)
{
    XiState xi;
    xi.xi1 = {s.z - t.z_star, s.phi - t.phi_star};
    xi.xi2 = {s.vz, s.phi_dot};
    xi.xi3 = {s.x - t.x_star, s.y - t.y_star};
    xi.xi4 = {s.vx, s.vy};
    xi.xi5 = g * h_vector(s.phi, s.psi, s.theta);
    xi.xi6 = g * (h_jacobian(s.phi, s.psi, s.theta) *
                  Vec3(s.phi_dot, s.psi_dot, s.theta_dot));
    xi.beta = (u1 + g) / g;
    return xi;
}

struct Q1B1 {
    Vec2 q1;       ///< drift of the (altitude, yaw) acceleration block
    Vec2 b1_diag;  ///< diag entries of b1 = diag(cos th cos ps, 1)
};

/// Drift and input matrix of the (altitude, yaw) block.
inline Q1B1 q1_b1(double psi, double theta, double g = 9.81)
{
    constexpr double half_pi = 1.57079632679489661923;
    if (std::abs(psi) >= half_pi || std::abs(theta) >= half_pi)
        throw singularity_error("q1_b1: tilt at or beyond pi/2");
    const double c = tilt_factor(psi, theta);
    return {{g * (c - 1.0), 0.0}, {c, 1.0}};
}

struct Q2B2 {
    Vec2 q2;   ///< drift of the xi6 equation (quadratic in rates)
    Vec2 b21;  ///< yaw-acceleration column, g * dh/dphi
    Mat2 b22;  ///< roll/pitch-acceleration block, g * [dh/dpsi | dh/dtheta]
};

/**
 * Decomposition of xi6' = q2 + b21 u2 + b22 (u3, u4), valid when the angular
 * accelerations are (u2, u3, u4). Throws singularity_error when b22 loses
 * rank (|det| < 1e-9) or the tilt factor is within 1e-6 of zero.
 */
inline Q2B2 q2_b21_b22(double phi, double psi, double theta,
                       double phi_dot, double psi_dot, double theta_dot, double g = 9.81)
{
    if (std::cos(psi) < 1e-6 || std::cos(theta) < 1e-6)
        throw singularity_error("q2_b21_b22: cos(roll) or cos(pitch) below 1e-6");
    const auto j = h_jacobian(phi, psi, theta);
    Q2B2 out;
    out.q2 = g * h_rate_curvature(phi, psi, theta, phi_dot, psi_dot, theta_dot);
    out.b21 = g * j.col(0);
    out.b22.col(0) = g * j.col(1);
    out.b22.col(1) = g * j.col(2);
    const double det = out.b22(0, 0) * out.b22(1, 1) - out.b22(0, 1) * out.b22(1, 0);
    if (std::abs(det) < 1e-9) throw singularity_error("q2_b21_b22: b22 near-singular");
    return out;
}

/// Thrust factor beta = (u1 + g)/g.
inline double beta_of(double u1, double g)
{
    return (u1 + g) / g;
}

}  // namespace quadstab
