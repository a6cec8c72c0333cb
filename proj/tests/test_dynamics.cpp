#include <catch2/catch.hpp>

#include "quadstab/dynamics.hpp"
#include "quadstab/sim.hpp"

using namespace quadstab;

namespace {

// independent allocation oracle: plain 4x4 multiply with its own copy of the
// pattern and scaling, kept separate from the implementation path
std::array<double, 4> oracle_scaled_mix(const std::array<double, 4>& f, const QuadParams& p)
{
    const double pattern[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {-1, 1, 1, -1}, {-1, -1, 1, 1}};
    const double scale[4] = {1.0 / p.m, p.C / p.J_phi, p.ell / p.J_psi, p.ell / p.J_theta};
    std::array<double, 4> w{};
    for (int i = 0; i < 4; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) acc += pattern[i][j] * f[j];
        w[i] = scale[i] * acc;
    }
    return w;
}

QuadParams unit_params()
{
    QuadParams p;
    p.m = 1.0;
    p.C = 1.0;
    p.ell = 1.0;
    p.J_phi = 1.0;
    p.J_psi = 1.0;
    p.J_theta = 1.0;
    return p;
}

}  // namespace

TEST_CASE("mixer pattern is exactly orthogonal")
{
    const auto mm = MixerMatrices::from_params(QuadParams{});
    const Mat4 gram = mm.M * mm.M.transpose();
    CHECK((gram - 4.0 * Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);
    const Mat4 prod = mm.M * mm.M_inv;
    CHECK((prod - Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forces_to_virtual")
{
    QuadParams p;

    SECTION("hover forces give zero virtual controls")
    {
        RotorForces f;
        f.f.fill(p.m * p.g / 4.0);
        const VirtualControl u = forces_to_virtual(f, p);
        CHECK(u.u1 == Approx(0.0).margin(1e-15));
        CHECK(u.u2 == 0.0);
        CHECK(u.u3 == 0.0);
        CHECK(u.u4 == 0.0);
    }

    SECTION("zero thrust exposes gravity on the first channel")
    {
        const VirtualControl u = forces_to_virtual(RotorForces{}, p);
        CHECK(u.u1 == -9.81);
        CHECK(u.u2 == 0.0);
        CHECK(u.u3 == 0.0);
        CHECK(u.u4 == 0.0);
    }

    SECTION("matches the direct multiply oracle on (1,2,3,4) with unit params")
    {
        const QuadParams up = unit_params();
        RotorForces f;
        f.f = {1.0, 2.0, 3.0, 4.0};
        const auto w = oracle_scaled_mix(f.f, up);
        CHECK(w[0] == 10.0);
        CHECK(w[1] == -2.0);
        CHECK(w[2] == 0.0);
        CHECK(w[3] == 4.0);
        const VirtualControl u = forces_to_virtual(f, up);
        CHECK(u.u1 == Approx(10.0 - 9.81));
        CHECK(u.u2 == Approx(w[1]));
        CHECK(u.u3 == Approx(w[2]));
        CHECK(u.u4 == Approx(w[3]));
    }

    SECTION("non-finite input is rejected")
    {
        RotorForces f;
        f.f = {1.0, std::nan(""), 0.0, 0.0};
        CHECK_THROWS_AS(forces_to_virtual(f, p), invalid_input);
    }
}

TEST_CASE("virtual_to_forces")
{
    QuadParams p;

    SECTION("hover allocation")
    {
        const RotorForces f = virtual_to_forces(VirtualControl{}, p);
        for (double v : f.f) CHECK(v == Approx(p.m * p.g / 4.0));
    }

    SECTION("free-fall command allocates zero thrust")
    {
        const RotorForces f = virtual_to_forces({-p.g, 0, 0, 0}, p);
        for (double v : f.f) CHECK(v == Approx(0.0).margin(1e-15));
    }

    SECTION("round trip recovers forces (1,2,3,4) from the oracle's u")
    {
        const QuadParams up = unit_params();
        const VirtualControl u{10.0 - 9.81, -2.0, 0.0, 4.0};
        const RotorForces f = virtual_to_forces(u, up);
        CHECK(f.f[0] == Approx(1.0));
        CHECK(f.f[1] == Approx(2.0));
        CHECK(f.f[2] == Approx(3.0));
        CHECK(f.f[3] == Approx(4.0));
    }

    SECTION("1000 random round trips stay within 1e-12 relative")
    {
        SplitMix64 rng(42);
        QuadParams rp;
        for (int i = 0; i < 1000; ++i) {
            rp.m = rng.uniform(0.2, 5.0);
            rp.C = rng.uniform(0.01, 0.5);
            rp.ell = rng.uniform(0.05, 0.6);
            rp.J_phi = rng.uniform(0.001, 0.1);
            rp.J_psi = rng.uniform(0.001, 0.1);
            rp.J_theta = rng.uniform(0.001, 0.1);
            const VirtualControl u{rng.uniform(-30, 30), rng.uniform(-30, 30),
                                   rng.uniform(-30, 30), rng.uniform(-30, 30)};
            const VirtualControl b = forces_to_virtual(virtual_to_forces(u, rp), rp);
            const double scale = std::max({1.0, std::abs(u.u1), std::abs(u.u2), std::abs(u.u3),
                                           std::abs(u.u4)});
            CHECK(std::abs(b.u1 - u.u1) / scale < 1e-12);
            CHECK(std::abs(b.u2 - u.u2) / scale < 1e-12);
            CHECK(std::abs(b.u3 - u.u3) / scale < 1e-12);
            CHECK(std::abs(b.u4 - u.u4) / scale < 1e-12);
        }
    }
}

TEST_CASE("state_derivative")
{
    QuadParams p;

    SECTION("hover equilibrium has an all-zero derivative")
    {
        QuadState s;
        s.x = 3.0;
        s.y = -1.0;
        s.z = 2.0;
        const QuadState d = state_derivative(s, VirtualControl{}, p);
        for (double v : d.to_array()) CHECK(v == Approx(0.0).margin(1e-15));
    }

    SECTION("pitch tilt redirects thrust")
    {
        QuadState s;
        s.theta = M_PI / 6.0;
        const QuadState d = state_derivative(s, VirtualControl{}, p);
        CHECK(d.vz == Approx(p.g * (std::cos(M_PI / 6.0) - 1.0)).margin(1e-12));
        CHECK(d.vz == Approx(-1.3142897888946547).margin(1e-12));
        CHECK(d.vx == Approx(p.g * std::sin(M_PI / 6.0)).margin(1e-12));
        CHECK(d.vx == Approx(4.905).margin(1e-12));
        CHECK(d.vy == Approx(0.0).margin(1e-15));
    }

    SECTION("linear drag acts on velocity when friction is enabled")
    {
        QuadParams fp = p;
        fp.a_x = 0.5;
        QuadState s;
        s.vx = 1.0;
        const QuadState d = state_derivative(s, VirtualControl{}, fp, true);
        CHECK(d.vx == Approx(-0.5));
        const QuadState d_off = state_derivative(s, VirtualControl{}, fp, false);
        CHECK(d_off.vx == Approx(0.0).margin(1e-15));
    }

    SECTION("domain error at pi/2 tilt")
    {
        QuadState s;
        s.psi = M_PI / 2.0;
        CHECK_THROWS_AS(state_derivative(s, VirtualControl{}, p), tilt_domain_error);
    }

    SECTION("derivative is affine in the controls")
    {
        SplitMix64 rng(7);
        for (int i = 0; i < 50; ++i) {
            QuadState s;
            s.phi = rng.uniform(-2, 2);
            s.psi = rng.uniform(-1.0, 1.0);
            s.theta = rng.uniform(-1.0, 1.0);
            s.vx = rng.uniform(-2, 2);
            s.phi_dot = rng.uniform(-2, 2);
            const VirtualControl ua{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5),
                                    rng.uniform(-5, 5)};
            const VirtualControl ub{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5),
                                    rng.uniform(-5, 5)};
            const double lam = rng.next_double();
            const VirtualControl mix{lam * ua.u1 + (1 - lam) * ub.u1, lam * ua.u2 + (1 - lam) * ub.u2,
                                     lam * ua.u3 + (1 - lam) * ub.u3, lam * ua.u4 + (1 - lam) * ub.u4};
            const auto da = state_derivative(s, ua, p).to_array();
            const auto db = state_derivative(s, ub, p).to_array();
            const auto dm = state_derivative(s, mix, p).to_array();
            for (std::size_t j = 0; j < QuadState::kDim; ++j) {
                CHECK(dm[j] == Approx(lam * da[j] + (1 - lam) * db[j]).margin(1e-12));
            }
        }
    }

    SECTION("equilibrium only at zero motion and balanced thrust")
    {
        // nonzero velocity
        QuadState s;
        s.vz = 0.1;
        auto d = state_derivative(s, VirtualControl{}, p);
        CHECK(std::abs(d.z) > 0.0);
        // zero angles with unbalanced thrust
        QuadState s2;
        d = state_derivative(s2, VirtualControl{0.5, 0, 0, 0}, p);
        CHECK(std::abs(d.vz) > 0.0);
        // any angular command
        d = state_derivative(s2, VirtualControl{0, 0.2, 0, 0}, p);
        CHECK(std::abs(d.phi_dot) > 0.0);
    }
}

TEST_CASE("free motion with drag never exceeds the frictionless speed bound")
{
    QuadParams p;
    p.a_x = 0.3;
    p.a_y = 0.3;
    p.a_z = 0.3;
    QuadState s;
    s.vx = 2.0;
    s.vy = -1.0;
    s.vz = 0.5;
    const double v0 = std::sqrt(s.vx * s.vx + s.vy * s.vy + s.vz * s.vz);
    const VirtualControl zero_thrust{-p.g, 0, 0, 0};

    const auto arr = s.to_array();
    std::vector<double> y(arr.begin(), arr.end());
    auto deriv = [&](double, const std::vector<double>& v) {
        const QuadState st = QuadState::from_array(v.data());
        const auto d = state_derivative(st, zero_thrust, p, true).to_array();
        return std::vector<double>(d.begin(), d.end());
    };
    const double dt = 1e-3;
    for (int n = 0; n < 3000; ++n) {
        y = rk4_step(deriv, y, n * dt, dt);
        const double t = (n + 1) * dt;
        const double speed = std::sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5]);
        REQUIRE(speed <= v0 + p.g * t + 1e-9);
    }
}
