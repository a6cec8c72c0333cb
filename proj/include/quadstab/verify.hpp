#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "quadstab/common.hpp"
#include "quadstab/controllers.hpp"
#include "quadstab/dynamics.hpp"
#include "quadstab/gain_synthesis.hpp"
#include "quadstab/normal_form.hpp"

namespace quadstab {

// Built-in invariant suite backing the `verify` CLI subcommand. Seeded and
// deterministic. The mutation hook deliberately corrupts one closed form so
// the suite's ability to catch such defects is itself testable.

struct VerifyOptions {
    std::uint64_t seed = 1;
    int trials = 100;
    enum class Mutation { none, perturb_b4 } mutation = Mutation::none;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;
    double tolerance = 0.0;
};

namespace verify_detail {

// integrate the plant+compensator stack under constant U for a short time
inline void micro_step(QuadState& s, CompensatorState& comp, const Vec4& u_const,
                       const QuadParams& p, double dt, int substeps)
{
    for (int n = 0; n < substeps; ++n) {
        std::array<double, 16> y{};
        auto sa = s.to_array();
        std::copy(sa.begin(), sa.end(), y.begin());
        y[12] = comp.u12(0);
        y[13] = comp.u12(1);
        y[14] = comp.rho12(0);
        y[15] = comp.rho12(1);

        auto f = [&](const std::array<double, 16>& v) {
            QuadState st = QuadState::from_array(v.data());
            VirtualControl u{v[12], v[13], u_const(2), u_const(3)};
            const QuadState ds = state_derivative(st, u, p, false);
            std::array<double, 16> d{};
            auto da = ds.to_array();
            std::copy(da.begin(), da.end(), d.begin());
            d[12] = v[14];
            d[13] = v[15];
            d[14] = u_const(0);
            d[15] = u_const(1);
            return d;
        };
        auto add = [](const std::array<double, 16>& a, double c, const std::array<double, 16>& b) {
            std::array<double, 16> o{};
            for (std::size_t i = 0; i < 16; ++i) o[i] = a[i] + c * b[i];
            return o;
        };
        const auto k1 = f(y);
        const auto k2 = f(add(y, dt / 2, k1));
        const auto k3 = f(add(y, dt / 2, k2));
        const auto k4 = f(add(y, dt, k3));
        for (std::size_t i = 0; i < 16; ++i)
            y[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        s = QuadState::from_array(y.data());
        comp.u12 = {y[12], y[13]};
        comp.rho12 = {y[14], y[15]};
    }
}

}  // namespace verify_detail

inline std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt)
{
    std::vector<CheckResult> results;
    SplitMix64 rng(opt.seed);
    const QuadParams p;

    // 1. mixer round-trip and pattern orthogonality
    {
        CheckResult r{"mixer_roundtrip", false, 0.0, 1e-12};
        const auto mm = MixerMatrices::from_params(p);
        const Mat4 gram = mm.M * mm.M.transpose();
        double worst = (gram - 4.0 * Mat4::Identity()).cwiseAbs().maxCoeff();
        for (int i = 0; i < opt.trials * 10; ++i) {
            VirtualControl u{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20),
                             rng.uniform(-20, 20)};
            const VirtualControl u2 = forces_to_virtual(virtual_to_forces(u, p), p);
            const double scale = std::max({1.0, std::abs(u.u1), std::abs(u.u2), std::abs(u.u3),
                                           std::abs(u.u4)});
            worst = std::max(worst, std::abs(u2.u1 - u.u1) / scale);
            worst = std::max(worst, std::abs(u2.u2 - u.u2) / scale);
            worst = std::max(worst, std::abs(u2.u3 - u.u3) / scale);
            worst = std::max(worst, std::abs(u2.u4 - u.u4) / scale);
        }
        r.worst = worst;
        r.pass = worst < r.tolerance;
        results.push_back(r);
    }

    // 2. direction-function identities
    {
        CheckResult r{"h_identities", false, 0.0, 1e-6};
        double worst = 0.0;
        for (int i = 0; i < opt.trials; ++i) {
            const double phi = rng.uniform(-3.0, 3.0);
            const double psi = rng.uniform(-1.4, 1.4);
            const double theta = rng.uniform(-1.4, 1.4);
            worst = std::max(worst, h_vector(phi, 0.0, 0.0).norm());
            worst = std::max(worst, std::max(0.0, h_vector(phi, psi, theta).norm() - 1.0));
            // Jacobian against central differences
            const auto j = h_jacobian(phi, psi, theta);
            const double d = 1e-6;
            const Vec2 dphi = (h_vector(phi + d, psi, theta) - h_vector(phi - d, psi, theta)) / (2 * d);
            const Vec2 dpsi = (h_vector(phi, psi + d, theta) - h_vector(phi, psi - d, theta)) / (2 * d);
            const Vec2 dth = (h_vector(phi, psi, theta + d) - h_vector(phi, psi, theta - d)) / (2 * d);
            worst = std::max(worst, (j.col(0) - dphi).norm());
            worst = std::max(worst, (j.col(1) - dpsi).norm());
            worst = std::max(worst, (j.col(2) - dth).norm());
            // zero-tilt b22 is a scaled rotation
            const auto qb = q2_b21_b22(phi, 0.0, 0.0, 0, 0, 0, p.g);
            const Mat2 gram = qb.b22.transpose() * qb.b22 - p.g * p.g * Mat2::Identity();
            worst = std::max(worst, gram.cwiseAbs().maxCoeff());
        }
        r.worst = worst;
        r.pass = worst < r.tolerance;
        results.push_back(r);
    }

    // 3. q2/b21/b22 against finite differences of g*h along polynomial angle paths
    {
        CheckResult r{"q2_finite_difference", false, 0.0, 1e-5};
        double worst = 0.0;
        for (int i = 0; i < opt.trials; ++i) {
            const double phi = rng.uniform(-2.0, 2.0);
            const double psi = rng.uniform(-0.8, 0.8);
            const double theta = rng.uniform(-0.8, 0.8);
            const double fd = rng.uniform(-1, 1), pd_ = rng.uniform(-1, 1), td = rng.uniform(-1, 1);
            const double u2 = rng.uniform(-2, 2), u3 = rng.uniform(-2, 2), u4 = rng.uniform(-2, 2);
            const auto qb = q2_b21_b22(phi, psi, theta, fd, pd_, td, p.g);
            const Vec2 rhs = qb.q2 + qb.b21 * u2 + qb.b22 * Vec2(u3, u4);
            // angles follow exact quadratics in time under constant accelerations
            auto gh = [&](double t) {
                return Vec2(p.g * h_vector(phi + fd * t + 0.5 * u2 * t * t,
                                           psi + pd_ * t + 0.5 * u3 * t * t,
                                           theta + td * t + 0.5 * u4 * t * t));
            };
            const double d = 1e-4;
            const Vec2 fd2 = (gh(d) - 2.0 * gh(0.0) + gh(-d)) / (d * d);
            worst = std::max(worst, (fd2 - rhs).lpNorm<Eigen::Infinity>());
        }
        r.worst = worst;
        r.pass = worst < r.tolerance;
        results.push_back(r);
    }

    // 4. q4/b4 against finite differences of zeta4 along micro-simulations
    {
        CheckResult r{"q4_b4_finite_difference", false, 0.0, 1e-4};
        double worst = 0.0;
        for (int i = 0; i < opt.trials; ++i) {
            QuadState s;
            s.phi = rng.uniform(-2.0, 2.0);
            s.psi = rng.uniform(-0.6, 0.6);
            s.theta = rng.uniform(-0.6, 0.6);
            s.phi_dot = rng.uniform(-1, 1);
            s.psi_dot = rng.uniform(-1, 1);
            s.theta_dot = rng.uniform(-1, 1);
            CompensatorState comp;
            comp.u12 = {rng.uniform(-3, 3), rng.uniform(-2, 2)};
            comp.rho12 = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const Vec4 U{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                         rng.uniform(-2, 2)};
            Q4B4 qb = q4_b4(s, comp, p.g);
            if (opt.mutation == VerifyOptions::Mutation::perturb_b4) qb.b4(2, 2) += 1e-3;
            const Vec4 rhs = qb.q4 + qb.b4 * U;

            const Target tgt;  // zeta4 does not depend on the setpoint
            const double d = 1e-4;
            QuadState sp = s;
            CompensatorState cp = comp;
            verify_detail::micro_step(sp, cp, U, p, d / 4, 4);
            QuadState sm = s;
            CompensatorState cm = comp;
            verify_detail::micro_step(sm, cm, U, p, -d / 4, 4);
            const Vec4 z4p = zeta_from(sp, tgt, cp, p.g).zeta4;
            const Vec4 z4m = zeta_from(sm, tgt, cm, p.g).zeta4;
            const Vec4 fd4 = (z4p - z4m) / (2 * d);
            worst = std::max(worst, (fd4 - rhs).lpNorm<Eigen::Infinity>());
        }
        r.worst = worst;
        r.pass = worst < r.tolerance;
        results.push_back(r);
    }

    // 5. vertex certificates imply interior negative definiteness (draws too
    //    extreme to certify in double precision are skipped)
    {
        CheckResult r{"vertex_sufficiency", false, 0.0, 1e-12};
        double worst = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < opt.trials; ++i) {
            const double alpha_sat = rng.uniform(0.05, 0.95);
            const BetaBound beta = BetaBound::from_alpha(alpha_sat);
            const double alpha1 = rng.uniform(0.3, 2.0);
            AlphaChain chain;
            try {
                chain = synthesize_alpha_chain(beta, alpha1);
            } catch (const synthesis_error&) {
                continue;
            }
            for (int k = 0; k < 50; ++k) {
                const double b = rng.uniform(beta.beta_min, beta.beta_max);
                const Mat4 phi = y_closed_loop_matrix(chain.alpha1, chain.alpha2, chain.alpha3,
                                                      chain.alpha4, b);
                worst = std::max(worst, max_eig_sym(MatX(phi + phi.transpose())));
            }
        }
        r.worst = worst;
        r.pass = worst < r.tolerance;
        results.push_back(r);
    }

    return results;
}

}  // namespace quadstab
