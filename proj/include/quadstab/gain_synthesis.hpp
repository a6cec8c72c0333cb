#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "quadstab/common.hpp"
#include "quadstab/linalg.hpp"
#include "quadstab/normal_form.hpp"

namespace quadstab {

/**
 * Backstepping parameters alpha1..alpha4 for the chain
 *
 *   chi1' = chi2, chi2' = beta(t) chi3, chi3' = chi4, chi4' = u,
 *
 * each step certified by the most-positive eigenvalue of its Lyapunov
 * certificate matrix at the beta-interval vertices (all margins < 0).
 */
struct AlphaChain {
    double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0, alpha4 = 0.0;
    BetaBound beta;
    double margin2 = 0.0, margin3 = 0.0, margin4 = 0.0;
};

/// Feedback u = k1 chi1 + k2 chi2 + k3 chi3 + k4 chi4 (all entries negative).
struct KVector {
    double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0;
};

/// Coefficients of s^4 + gamma4 s^3 + gamma3 s^2 + gamma2 s + gamma1.
struct GammaSet {
    enum class Family { butterworth, newton, explicit_values };
    double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0, gamma4 = 0.0;
    Family family = Family::explicit_values;
    double omega = 1.0;

    std::vector<double> monic_low_coeffs() const { return {gamma1, gamma2, gamma3, gamma4}; }

    void validate() const
    {
        if (!(gamma1 > 0.0 && gamma2 > 0.0 && gamma3 > 0.0 && gamma4 > 0.0))
            throw invalid_input("gamma set: coefficients must be positive");
        if (!polynomial_is_hurwitz(monic_low_coeffs()))
            throw invalid_input("gamma set: polynomial is not Hurwitz");
    }
};

/// PD gains for the altitude/yaw loops: K1 = diag(k1), K2 = diag(k2), all > 0.
struct PDGains {
    Vec2 k1{1.0, 1.0};  ///< (k11 altitude, k12 yaw)
    Vec2 k2{2.0, 2.0};  ///< (k21 altitude, k22 yaw)

    void validate() const
    {
        if (!(k1(0) > 0.0 && k1(1) > 0.0 && k2(0) > 0.0 && k2(1) > 0.0))
            throw invalid_input("pd gains: entries must be positive");
    }
};

/**
 * Threshold for the second backstepping parameter:
 *
 *   alpha2* = (3 a1^2 + (a1^2 - 1)^2) / (2 a1 beta_min).
 *
 * The worst case of the underlying inequality 2 a1 a2 beta > 3 a1^2 + (a1^2-1)^2
 * over a beta interval is its lower end, hence beta_min here.
 */
inline double alpha2_star(double alpha1, double beta_min)
{
    if (!(alpha1 > 0.0)) throw invalid_input("alpha2_star: alpha1 must be > 0");
    if (!(beta_min > 0.0)) throw invalid_input("alpha2_star: beta_min must be > 0");
    const double a2 = alpha1 * alpha1;
    return (3.0 * a2 + (a2 - 1.0) * (a2 - 1.0)) / (2.0 * alpha1 * beta_min);
}

/// Certificate matrix of the (y1, y2) pair at a fixed beta.
inline Mat2 pair_certificate_matrix(double alpha1, double alpha2, double beta)
{
    Mat2 m;
    m(0, 0) = -alpha1;
    m(0, 1) = m(1, 0) = 1.0 - alpha1 * alpha1;
    m(1, 1) = 3.0 * alpha1 - 2.0 * alpha2 * beta;
    return m;
}

/// Computed eigenvalues carry an absolute error of order eps * ||S||; a margin
/// is only trusted when it clears this floor.
inline double certificate_noise_floor(double matrix_scale)
{
    return 64.0 * std::numeric_limits<double>::epsilon() * matrix_scale;
}

/// (margin, matrix scale) of the pair certificate over the beta vertices.
inline std::pair<double, double> pair_margin_scaled(double alpha1, double alpha2,
                                                    const BetaBound& beta)
{
    double margin = -std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (double b : {beta.beta_min, beta.beta_max}) {
        const Mat2 m = pair_certificate_matrix(alpha1, alpha2, b);
        margin = std::max(margin, max_eig_sym(m));
        scale = std::max(scale, m.norm());
    }
    return {margin, scale};
}

/**
 * Most-positive eigenvalue of the pair certificate over the beta vertices.
 * Negative margin certifies V2' <= -alpha1 V2 plus a negative quadratic form.
 * Vertex evaluation suffices: the matrix is affine in beta.
 */
inline double certify_pair(double alpha1, double alpha2, const BetaBound& beta)
{
    if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw invalid_input("certify_pair: alphas must be > 0");
    beta.validate();
    return pair_margin_scaled(alpha1, alpha2, beta).first;
}

/// Closed-loop matrix of the y-coordinates (u = -alpha4 y4) at a fixed beta.
inline Mat4 y_closed_loop_matrix(double a1, double a2, double a3, double a4, double beta)
{
    Mat4 m;
    m << -a1, 1.0, 0.0, 0.0,
        -a1 * a1, a1 - a2 * beta, beta, 0.0,
        -a1 * a1 * a2, a2 * (a1 - a2 * beta), a2 * beta - a3, 1.0,
        -a1 * a1 * a2 * a3, a2 * a3 * (a1 - a2 * beta), a3 * (a2 * beta - a3), a3 - a4;
    return m;
}

/// (margin, matrix scale) of the j x j symmetric-part certificate (j = 3, 4).
inline std::pair<double, double> y_margin_scaled(double a1, double a2, double a3, double a4,
                                                 const BetaBound& beta, int j)
{
    double margin = -std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (double b : {beta.beta_min, beta.beta_max}) {
        const Mat4 phi = y_closed_loop_matrix(a1, a2, a3, a4, b);
        const MatX sub = phi.topLeftCorner(j, j);
        const MatX s = sub + sub.transpose();
        margin = std::max(margin, max_eig_sym(s));
        scale = std::max(scale, s.norm());
    }
    return {margin, scale};
}

/// Margin of the j x j symmetric-part certificate (j = 3 or 4) over vertices.
inline double certify_y_subsystem(double a1, double a2, double a3, double a4,
                                  const BetaBound& beta, int j)
{
    return y_margin_scaled(a1, a2, a3, a4, beta, j).first;
}

/**
 * Exact threshold for the j-th parameter from the Schur complement of the
 * symmetric-part certificate: the parameter enters S_j only through the
 * (j,j) entry, so negative definiteness holds exactly above
 *
 *   x* = (S_j(j,j)|_{x=0} - v^T S_{j-1}^{-1} v) / 2
 *
 * maximized over the beta vertices (the certificates of steps 2..j-1 make
 * S_{j-1} negative definite there).
 */
inline double y_subsystem_threshold(double a1, double a2, double a3, const BetaBound& beta, int j)
{
    double threshold = 0.0;
    for (double b : {beta.beta_min, beta.beta_max}) {
        // a3 slot is only read for j = 4; the x = 0 convention zeroes the
        // parameter being solved for
        const Mat4 phi = y_closed_loop_matrix(a1, a2, j == 3 ? 0.0 : a3, 0.0, b);
        const MatX s_full = phi.topLeftCorner(j, j) + phi.topLeftCorner(j, j).transpose();
        const MatX s_prev = s_full.topLeftCorner(j - 1, j - 1);
        const VecX v = s_full.block(0, j - 1, j - 1, 1);
        const double d0 = s_full(j - 1, j - 1);
        const double correction = v.dot(s_prev.ldlt().solve(v));
        threshold = std::max(threshold, (d0 - correction) / 2.0);
    }
    return threshold;
}

/**
 * Backstepping gain synthesis. Every parameter starts at growth times its
 * exact certificate threshold (alpha2* for the pair, the Schur-complement
 * threshold for steps 3 and 4) and is doubled until the vertex margin clears
 * the eigensolver noise floor, which normally happens at the seed itself.
 * Throws synthesis_error when a parameter exhausts max_doublings — in double
 * precision this happens for extreme beta intervals whose certificate
 * matrices are too large for their margins to be resolved.
 */
inline AlphaChain synthesize_alpha_chain(const BetaBound& beta, double alpha1,
                                         double growth = 1.1, int max_doublings = 60)
{
    beta.validate();
    if (!(alpha1 > 0.0)) throw invalid_input("synthesize_alpha_chain: alpha1 must be > 0");
    if (!(growth > 1.0)) throw invalid_input("synthesize_alpha_chain: growth must be > 1");
    if (max_doublings < 0) throw invalid_input("synthesize_alpha_chain: max_doublings must be >= 0");

    AlphaChain chain;
    chain.alpha1 = alpha1;
    chain.beta = beta;

    auto grow_until = [&](double seed, auto margin_of, double& margin_out, const char* what) {
        double value = seed;
        for (int i = 0;; ++i) {
            const auto [margin, scale] = margin_of(value);
            margin_out = margin;
            if (margin < -certificate_noise_floor(scale)) return value;
            if (i >= max_doublings) {
                throw synthesis_error(std::string("synthesize_alpha_chain: ") + what +
                                      " failed to certify; last margin " + std::to_string(margin_out));
            }
            value *= 2.0;
        }
    };

    chain.alpha2 = grow_until(
        alpha2_star(alpha1, beta.beta_min) * growth,
        [&](double a2) { return pair_margin_scaled(alpha1, a2, beta); }, chain.margin2, "alpha2");
    chain.alpha3 = grow_until(
        y_subsystem_threshold(alpha1, chain.alpha2, 0.0, beta, 3) * growth,
        [&](double a3) { return y_margin_scaled(alpha1, chain.alpha2, a3, 1.0, beta, 3); },
        chain.margin3, "alpha3");
    chain.alpha4 = grow_until(
        y_subsystem_threshold(alpha1, chain.alpha2, chain.alpha3, beta, 4) * growth,
        [&](double a4) { return y_margin_scaled(alpha1, chain.alpha2, chain.alpha3, a4, beta, 4); },
        chain.margin4, "alpha4");
    return chain;
}

/// k1 = -a1 a2 a3 a4, k2 = -a2 a3 a4, k3 = -a3 a4, k4 = -a4.
inline KVector k_from_alpha(const AlphaChain& c)
{
    KVector k;
    k.k4 = -c.alpha4;
    k.k3 = -c.alpha3 * c.alpha4;
    k.k2 = -c.alpha2 * c.alpha3 * c.alpha4;
    k.k1 = -c.alpha1 * c.alpha2 * c.alpha3 * c.alpha4;
    return k;
}

/// chi-coordinate closed-loop matrix A(beta).
inline Mat4 chi_closed_loop_matrix(const KVector& k, double beta)
{
    Mat4 a;
    a << 0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, beta, 0.0,
        0.0, 0.0, 0.0, 1.0,
        k.k1, k.k2, k.k3, k.k4;
    return a;
}

/// Lower-triangular change of variables y = T chi of the backstepping construction.
inline Mat4 backstepping_transform(double a1, double a2, double a3)
{
    Mat4 t;
    t << 1.0, 0.0, 0.0, 0.0,
        a1, 1.0, 0.0, 0.0,
        a1 * a2, a2, 1.0, 0.0,
        a1 * a2 * a3, a2 * a3, a3, 1.0;
    return t;
}

/// Recover the alpha parameters from a k-vector (inverse of k_from_alpha).
/// Returns false when the k signs do not admit a positive chain.
inline bool alphas_from_k(const KVector& k, double out[4])
{
    if (!(k.k4 < 0.0)) return false;
    const double a4 = -k.k4;
    const double a3 = -k.k3 / a4;
    if (!(a3 > 0.0)) return false;
    const double a2 = -k.k2 / (a3 * a4);
    if (!(a2 > 0.0)) return false;
    const double a1 = -k.k1 / (a2 * a3 * a4);
    if (!(a1 > 0.0)) return false;
    out[0] = a1; out[1] = a2; out[2] = a3; out[3] = a4;
    return true;
}

/// One admissible beta(t) trial signal: grid-aligned piecewise-constant hold
/// levels or a sinusoid inside the bounds.
struct BetaSignal {
    bool piecewise = true;
    // piecewise: level index = step / hold_steps into levels
    std::vector<double> levels;
    int hold_steps = 1;
    // sinusoid parameters
    double mid = 1.0, amp = 0.0, freq = 1.0, phase = 0.0;
    std::string describe() const
    {
        if (piecewise)
            return "piecewise-constant, hold " + std::to_string(hold_steps) + " steps";
        return "sinusoid, amp " + std::to_string(amp) + ", freq " + std::to_string(freq);
    }

    double value_at(double t, double dt, std::size_t step) const
    {
        if (piecewise) {
            const std::size_t idx = std::min(step / static_cast<std::size_t>(hold_steps),
                                             levels.size() - 1);
            return levels[idx];
        }
        (void)dt;
        return mid + amp * std::sin(freq * t + phase);
    }
};

/// Certification report for a k-vector against a beta interval.
struct ChiCertificate {
    bool vertex_ok = false;
    std::array<std::vector<Complex>, 2> vertex_eigs;  ///< at beta_min, beta_max
    bool margins_valid = false;  ///< alphas derivable from k
    double margin2 = 0.0, margin3 = 0.0, margin4 = 0.0;
    double horizon = 0.0;
    int trials_requested = 0;
    int trials_decayed = 0;
    double worst_final_ratio = 0.0;
    bool descent_checked = false;
    double worst_descent_violation = 0.0;  ///< relative per-step V increase
    std::string first_failure;

    bool passed() const
    {
        return vertex_ok && trials_decayed == trials_requested &&
               (!descent_checked || worst_descent_violation <= 1e-8);
    }
};

/**
 * Two-part stability certificate for chi' = A(beta(t)) chi, u = k^T chi:
 *
 *  (a) algebraic: eigenvalues of A(beta) in the open left half-plane at both
 *      interval vertices;
 *  (b) empirical: `trials` random admissible beta(t) signals (half grid-aligned
 *      piecewise-constant, half sinusoidal) from random unit initial
 *      conditions must decay to ||chi|| < 1e-3 within the certificate-derived
 *      horizon. When k comes from a certified chain, the descent of
 *      V = ||y||^2 is also checked (per-step increase <= 1e-8 relative).
 *
 * Piecewise-constant signals switch only on grid boundaries and each step uses
 * the mid-step level, so RK4 integrates every constant segment exactly.
 */
inline ChiCertificate certify_chi_closed_loop(const KVector& k, const BetaBound& beta,
                                              int trials = 100, std::uint64_t seed = 1,
                                              double dt = 1e-3)
{
    beta.validate();
    ChiCertificate rep;
    rep.trials_requested = trials;

    // (a) vertex eigenvalues
    rep.vertex_ok = true;
    int vi = 0;
    for (double b : {beta.beta_min, beta.beta_max}) {
        rep.vertex_eigs[vi] = eigenvalues(chi_closed_loop_matrix(k, b));
        for (const Complex& ev : rep.vertex_eigs[vi]) {
            if (!(ev.real() < 0.0)) rep.vertex_ok = false;
        }
        ++vi;
    }
    if (!rep.vertex_ok) {
        rep.first_failure = "vertex eigenvalue with nonnegative real part";
        return rep;
    }

    // derived alphas give the Lyapunov margins and the transform for V = ||y||^2
    double alphas[4];
    rep.margins_valid = alphas_from_k(k, alphas);
    Mat4 transform = Mat4::Identity();
    double cond = 10.0;
    if (rep.margins_valid) {
        rep.margin2 = certify_pair(alphas[0], alphas[1], beta);
        rep.margin3 = certify_y_subsystem(alphas[0], alphas[1], alphas[2], alphas[3], beta, 3);
        rep.margin4 = certify_y_subsystem(alphas[0], alphas[1], alphas[2], alphas[3], beta, 4);
        transform = backstepping_transform(alphas[0], alphas[1], alphas[2]);
        cond = transform.norm() * transform.inverse().norm();
    }
    rep.descent_checked = rep.margins_valid && rep.margin4 < 0.0;

    // horizon from the slowest certified decay rate, with slack
    if (rep.descent_checked) {
        rep.horizon = 1.25 * 2.0 * std::log(1e3 * cond + 10.0) / (-rep.margin4);
    } else {
        double slowest = std::numeric_limits<double>::infinity();
        for (const auto& evs : rep.vertex_eigs)
            for (const Complex& ev : evs) slowest = std::min(slowest, -ev.real());
        rep.horizon = 10.0 * std::log(1e3) / slowest;
    }
    rep.horizon = std::clamp(rep.horizon, 2.0, 2000.0);

    // (b) randomized trials, deterministic by seed. Certified chains can be
    // very stiff (alpha4 grows fast), so the step is capped well inside the
    // RK4 stability region of the fastest vertex eigenvalue. A total step
    // budget keeps pathologically stiff chains from running unbounded; hitting
    // it fails the certificate with an explicit message.
    double rho = 1.0;
    for (const auto& evs : rep.vertex_eigs)
        for (const Complex& ev : evs) rho = std::max(rho, std::abs(ev));
    dt = std::min(dt, 0.5 / rho);

    SplitMix64 rng(seed);
    const auto steps = static_cast<std::size_t>(std::ceil(rep.horizon / dt));
    std::size_t step_budget = 400'000'000;
    for (int trial = 0; trial < trials; ++trial) {
        BetaSignal sig;
        sig.piecewise = (trial % 2 == 0);
        if (sig.piecewise) {
            sig.hold_steps = 50 + static_cast<int>(rng.next_u64() % 1450);
            const std::size_t n_levels = steps / static_cast<std::size_t>(sig.hold_steps) + 2;
            sig.levels.resize(n_levels);
            for (auto& v : sig.levels) v = rng.uniform(beta.beta_min, beta.beta_max);
        } else {
            sig.mid = 0.5 * (beta.beta_min + beta.beta_max);
            sig.amp = rng.next_double() * 0.5 * (beta.beta_max - beta.beta_min);
            sig.freq = rng.uniform(0.2, 5.0);
            sig.phase = rng.uniform(0.0, 6.283185307179586);
        }

        Vec4 chi;
        for (int i = 0; i < 4; ++i) chi(i) = rng.gaussian();
        if (chi.norm() < 1e-12) chi(0) = 1.0;
        chi.normalize();

        if (steps > step_budget) {
            if (rep.first_failure.empty()) {
                rep.first_failure = "trial step budget exhausted: the chain is too stiff for "
                                    "explicit trial integration at dt " +
                                    std::to_string(dt);
            }
            break;
        }

        double v_prev = (transform * chi).squaredNorm();
        bool decayed = false;
        double trial_violation = 0.0;
        std::size_t n = 0;
        for (; n < steps; ++n) {
            const double t = static_cast<double>(n) * dt;
            // piecewise signals hold the mid-step level for the whole step
            auto beta_at = [&](double tau) {
                return sig.piecewise ? sig.value_at(t + 0.5 * dt, dt, n) : sig.value_at(tau, dt, n);
            };
            auto f = [&](double tau, const Vec4& c) -> Vec4 {
                return chi_closed_loop_matrix(k, beta_at(tau)) * c;
            };
            const Vec4 k1 = f(t, chi);
            const Vec4 k2 = f(t + 0.5 * dt, chi + 0.5 * dt * k1);
            const Vec4 k3 = f(t + 0.5 * dt, chi + 0.5 * dt * k2);
            const Vec4 k4 = f(t + dt, chi + dt * k3);
            chi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

            if (rep.descent_checked) {
                const double v_now = (transform * chi).squaredNorm();
                trial_violation = std::max(trial_violation,
                                           (v_now - v_prev) / std::max(1.0, v_prev));
                v_prev = v_now;
            }
            if (chi.norm() < 1e-4) {
                decayed = true;
                break;
            }
            if (!chi.allFinite() || chi.norm() > 1e12) break;  // diverged
        }
        step_budget -= std::min(step_budget, n);
        const double ratio = chi.norm();
        rep.worst_final_ratio = std::max(rep.worst_final_ratio, decayed ? 1e-4 : ratio);
        rep.worst_descent_violation = std::max(rep.worst_descent_violation, trial_violation);
        if (decayed || ratio < 1e-3) {
            ++rep.trials_decayed;
        } else if (rep.first_failure.empty()) {
            rep.first_failure = "trial " + std::to_string(trial) + " (" + sig.describe() +
                                ") final ratio " + std::to_string(ratio);
        }
    }
    return rep;
}

/**
 * Coefficients of the standard degree-4 polynomial families at bandwidth omega.
 * Newton: (s + omega)^4. Butterworth: expanded from the pole locations
 * omega * exp(i pi (2k + 3)/8), k = 1..4.
 */
inline GammaSet gamma_from_family(GammaSet::Family family, double omega)
{
    if (!(omega > 0.0)) throw invalid_input("gamma_from_family: omega must be > 0");
    GammaSet g;
    g.family = family;
    g.omega = omega;
    switch (family) {
    case GammaSet::Family::newton:
        g.gamma1 = omega * omega * omega * omega;
        g.gamma2 = 4.0 * omega * omega * omega;
        g.gamma3 = 6.0 * omega * omega;
        g.gamma4 = 4.0 * omega;
        break;
    case GammaSet::Family::butterworth: {
        std::vector<Complex> poles;
        for (int kk = 1; kk <= 4; ++kk) {
            const double ang = M_PI * (2.0 * kk + 3.0) / 8.0;
            poles.emplace_back(omega * std::cos(ang), omega * std::sin(ang));
        }
        const auto c = poly_from_roots(poles);
        g.gamma1 = c[0];
        g.gamma2 = c[1];
        g.gamma3 = c[2];
        g.gamma4 = c[3];
        break;
    }
    case GammaSet::Family::explicit_values:
        throw invalid_input("gamma_from_family: explicit family has no formula");
    }
    return g;
}

/**
 * PD gains from desired pole pairs, one pair per channel (altitude, yaw).
 * Each pair must be Hurwitz and closed under conjugation, giving the real
 * monic quadratic s^2 + k2 s + k1 with those roots.
 */
inline PDGains pd_gains_from_poles(const std::array<Complex, 2>& altitude,
                                   const std::array<Complex, 2>& yaw)
{
    auto channel = [](const std::array<Complex, 2>& p) -> std::pair<double, double> {
        if (!(p[0].real() < 0.0 && p[1].real() < 0.0))
            throw invalid_input("pd_gains_from_poles: poles must have negative real part");
        const Complex sum = p[0] + p[1];
        const Complex prod = p[0] * p[1];
        if (std::abs(sum.imag()) > 1e-9 || std::abs(prod.imag()) > 1e-9)
            throw invalid_input("pd_gains_from_poles: complex poles must form a conjugate pair");
        return {prod.real(), -sum.real()};
    };
    const auto [k11, k21] = channel(altitude);
    const auto [k12, k22] = channel(yaw);
    PDGains pd;
    pd.k1 = {k11, k12};
    pd.k2 = {k21, k22};
    pd.validate();
    return pd;
}

}  // namespace quadstab
