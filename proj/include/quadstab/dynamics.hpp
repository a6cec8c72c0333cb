#pragma once

#include <array>
#include <cmath>

#include "quadstab/common.hpp"
#include "quadstab/linalg.hpp"

namespace quadstab {

/**
 * Physical parameters of the vehicle.
 *
 * Angle convention used throughout: phi = yaw, psi = roll, theta = pitch.
 * The a_* coefficients are linear viscous friction terms; the controller
 * design model ignores them, the plant can enable them for robustness runs.
 */
struct QuadParams {
    double m = 1.0;        ///< mass [kg]
    double g = 9.81;       ///< gravitational acceleration [m/s^2]
    double ell = 0.2;      ///< arm length, rotor to center of gravity [m]
    double J_psi = 0.01;   ///< roll inertia [kg m^2]
    double J_theta = 0.01; ///< pitch inertia [kg m^2]
    double J_phi = 0.02;   ///< yaw inertia [kg m^2]
    double C = 0.05;       ///< rotor reaction-torque per unit thrust [m]
    double a_x = 0.0, a_y = 0.0, a_z = 0.0;          ///< translational friction [1/s]
    double a_psi = 0.0, a_theta = 0.0, a_phi = 0.0;  ///< angular friction [1/s]

    void validate() const
    {
        if (!(m > 0.0)) throw invalid_input("params: m must be > 0");
        if (!(g > 0.0)) throw invalid_input("params: g must be > 0");
        if (!(ell > 0.0)) throw invalid_input("params: ell must be > 0");
        if (!(J_psi > 0.0) || !(J_theta > 0.0) || !(J_phi > 0.0))
            throw invalid_input("params: inertias must be > 0");
        if (!(C > 0.0)) throw invalid_input("params: C must be > 0");
        for (double a : {a_x, a_y, a_z, a_psi, a_theta, a_phi}) {
            if (!(a >= 0.0)) throw invalid_input("params: friction coefficients must be >= 0");
        }
        const double vals[] = {m, g, ell, J_psi, J_theta, J_phi, C};
        if (!all_finite(vals, 7)) throw invalid_input("params: non-finite value");
    }
};

/**
 * Rigid-body state. 12 components; also used as the state derivative
 * (pos slot holds velocity, vel slot holds acceleration, and so on).
 */
struct QuadState {
    double x = 0.0, y = 0.0, z = 0.0;
    double vx = 0.0, vy = 0.0, vz = 0.0;
    double phi = 0.0;    ///< yaw [rad]
    double psi = 0.0;    ///< roll [rad]
    double theta = 0.0;  ///< pitch [rad]
    double phi_dot = 0.0, psi_dot = 0.0, theta_dot = 0.0;

    static constexpr std::size_t kDim = 12;

    std::array<double, kDim> to_array() const
    {
        return {x, y, z, vx, vy, vz, phi, psi, theta, phi_dot, psi_dot, theta_dot};
    }

    static QuadState from_array(const double* a)
    {
        QuadState s;
        s.x = a[0]; s.y = a[1]; s.z = a[2];
        s.vx = a[3]; s.vy = a[4]; s.vz = a[5];
        s.phi = a[6]; s.psi = a[7]; s.theta = a[8];
        s.phi_dot = a[9]; s.psi_dot = a[10]; s.theta_dot = a[11];
        return s;
    }

    bool finite() const
    {
        const auto a = to_array();
        return all_finite(a.data(), kDim);
    }

    /// True while |roll| and |pitch| stay below pi/2.
    bool within_tilt_domain() const
    {
        constexpr double half_pi = 1.57079632679489661923;
        return std::abs(psi) < half_pi && std::abs(theta) < half_pi;
    }
};

/// The four rotor thrusts [N].
struct RotorForces {
    std::array<double, 4> f{0.0, 0.0, 0.0, 0.0};
};

/**
 * Channel-level commands: u1 is the hover-offset specific thrust [m/s^2]
 * (u1 = 0 at hover), u2/u3/u4 are yaw/roll/pitch angular accelerations.
 */
struct VirtualControl {
    double u1 = 0.0, u2 = 0.0, u3 = 0.0, u4 = 0.0;
};

/**
 * The control allocation map between rotor thrusts and virtual controls:
 *
 *   (u1 + g, u2, u3, u4) = D * M * f,     f = M^T/4 * D^-1 * (u1 + g, u2, u3, u4)
 *
 * M is a signed +-1 pattern with mutually orthogonal rows (M M^T = 4 I), so
 * its inverse M^T/4 is exact. D = diag(1/m, C/J_phi, ell/J_psi, ell/J_theta).
 */
struct MixerMatrices {
    Mat4 M;
    Mat4 D;
    Mat4 M_inv;

    static constexpr int pattern[4][4] = {
        {1, 1, 1, 1},
        {1, -1, 1, -1},
        {-1, 1, 1, -1},
        {-1, -1, 1, 1},
    };

    static MixerMatrices from_params(const QuadParams& p)
    {
        MixerMatrices mm;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) mm.M(i, j) = static_cast<double>(pattern[i][j]);
        mm.D = Mat4::Zero();
        mm.D(0, 0) = 1.0 / p.m;
        mm.D(1, 1) = p.C / p.J_phi;
        mm.D(2, 2) = p.ell / p.J_psi;
        mm.D(3, 3) = p.ell / p.J_theta;
        mm.M_inv = mm.M.transpose() / 4.0;
        return mm;
    }
};

/// Thrusts -> virtual controls.
inline VirtualControl forces_to_virtual(const RotorForces& f, const QuadParams& p)
{
    if (!all_finite(f.f.data(), 4)) throw invalid_input("forces_to_virtual: non-finite input");
    const auto& m = MixerMatrices::pattern;
    Vec4 w;
    for (int i = 0; i < 4; ++i) {
        w(i) = m[i][0] * f.f[0] + m[i][1] * f.f[1] + m[i][2] * f.f[2] + m[i][3] * f.f[3];
    }
    VirtualControl u;
    u.u1 = w(0) / p.m - p.g;
    u.u2 = w(1) * p.C / p.J_phi;
    u.u3 = w(2) * p.ell / p.J_psi;
    u.u4 = w(3) * p.ell / p.J_theta;
    return u;
}

/// Virtual controls -> thrusts (exact inverse of forces_to_virtual).
inline RotorForces virtual_to_forces(const VirtualControl& u, const QuadParams& p)
{
    const double uv[] = {u.u1, u.u2, u.u3, u.u4};
    if (!all_finite(uv, 4)) throw invalid_input("virtual_to_forces: non-finite input");
    Vec4 w;
    w(0) = (u.u1 + p.g) * p.m;
    w(1) = u.u2 * p.J_phi / p.C;
    w(2) = u.u3 * p.J_psi / p.ell;
    w(3) = u.u4 * p.J_theta / p.ell;
    const auto& m = MixerMatrices::pattern;
    RotorForces f;
    for (int j = 0; j < 4; ++j) {
        // M^T/4: column j of the pattern
        f.f[j] = (m[0][j] * w(0) + m[1][j] * w(1) + m[2][j] * w(2) + m[3][j] * w(3)) / 4.0;
    }
    return f;
}

/// Thrust direction in world frame (unit vector, body z-axis).
inline Vec3 thrust_direction(double phi, double psi, double theta)
{
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    const double cpsi = std::cos(psi), spsi = std::sin(psi);
    const double cth = std::cos(theta), sth = std::sin(theta);
    return {cphi * sth * cpsi + sphi * spsi,
            sphi * sth * cpsi - cphi * spsi,
            cth * cpsi};
}

/**
 * Right-hand side of the motion model.
 *
 *   pos'   = vel
 *   vel'   = thrust_direction * (u1 + g) - (0,0,g)  [- diag(a) vel if friction]
 *   angle' = rates
 *   rate'  = (u2, u3, u4) for (yaw, roll, pitch)    [- diag(a) rates if friction]
 *
 * Throws tilt_domain_error once |roll| or |pitch| reaches pi/2.
 */
inline QuadState state_derivative(const QuadState& s, const VirtualControl& u,
                                  const QuadParams& p, bool friction_enabled = false)
{
    if (!s.within_tilt_domain()) throw tilt_domain_error("state_derivative: |roll| or |pitch| >= pi/2");
    const Vec3 dir = thrust_direction(s.phi, s.psi, s.theta);
    const double thrust = u.u1 + p.g;

    QuadState d;
    d.x = s.vx;
    d.y = s.vy;
    d.z = s.vz;
    d.vx = dir(0) * thrust;
    d.vy = dir(1) * thrust;
    d.vz = dir(2) * thrust - p.g;
    d.phi = s.phi_dot;
    d.psi = s.psi_dot;
    d.theta = s.theta_dot;
    d.phi_dot = u.u2;
    d.psi_dot = u.u3;
    d.theta_dot = u.u4;
    if (friction_enabled) {
        d.vx -= p.a_x * s.vx;
        d.vy -= p.a_y * s.vy;
        d.vz -= p.a_z * s.vz;
        d.phi_dot -= p.a_phi * s.phi_dot;
        d.psi_dot -= p.a_psi * s.psi_dot;
        d.theta_dot -= p.a_theta * s.theta_dot;
    }
    return d;
}

}  // namespace quadstab
