#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "twohop/fixed_point.hpp"
#include "twohop/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace twohop;

namespace {

CorrelationSet diag_corr(const VectorD& r1, const VectorD& t1, const VectorD& r2,
                         const VectorD& t2) {
    return {HermitianPSD::diagonal(r1), HermitianPSD::diagonal(t1), HermitianPSD::diagonal(r2),
            HermitianPSD::diagonal(t2)};
}

// Brute-force Picard oracle on dense matrices, plain alternating updates with
// explicit inverses. Kept independent of the solver's eigenvalue path.
struct PicardOracle {
    MatrixC r1, t1, r2t1, t2;
    int n, l, m;
    double s, z;

    std::array<double, 4> run(long iters) const {
        double d = 1.0 / z, wb = 1.0, wu = 1.0, g = 1.0;
        for (long it = 0; it < iters; ++it) {
            const MatrixC fw = (MatrixC::Identity(l, l) + s * d * t1 + d * g * r2t1).inverse();
            const double wu_new = (r2t1 * fw).trace().real() / l;
            const MatrixC fg =
                (MatrixC::Identity(m, m) + (double(l) / m) * d * wu * t2).inverse();
            const double g_new = (t2 * fg).trace().real() / m;
            wu = wu_new;
            g = g_new;
            const MatrixC fw2 = (MatrixC::Identity(l, l) + s * d * t1 + d * g * r2t1).inverse();
            wb = (t1 * fw2).trace().real() / l;
            const MatrixC fd =
                (z * MatrixC::Identity(n, n) + (s * wb + g * wu) * r1).inverse();
            d = (r1 * fd).trace().real() / l;
        }
        return {d, wb, wu, g};
    }
};

}  // namespace

TEST_CASE("identity solution matches the quartic root") {
    const auto corr = CorrelationSet::identity(16, 16, 16);
    SystemParams p{16, 16, 16, 1.0, 1.0, 1.0};
    const SolutionS1 sol = solve_system1(corr, p);
    const double mf = iid_mF({1.0, 1.0}, 1.0, 1.0);
    CHECK(std::abs(sol.delta - mf) <= 1e-8);  // c1 = 1
    CHECK(sol.residual <= 1e-12);
}

TEST_CASE("containment box holds at large z for identities") {
    const auto corr = CorrelationSet::identity(8, 12, 10);
    SystemParams p{8, 12, 10, 1.0, 1.0, 100.0};
    const SolverWorkspace ws(corr);
    const SolutionS1 sol = solve_system1(ws, p);
    const auto box = positive_solution_bounds(ws, p);
    CHECK(box.contains(sol));
    // with l = r = 1 the delta bracket is (N/(L(z+s+1)), N/(L z))
    CHECK(sol.delta > (8.0 / 12.0) / (100.0 + 1.0 + 1.0));
    CHECK(sol.delta < (8.0 / 12.0) / 100.0);
}

TEST_CASE("solution matches a brute-force Picard oracle") {
    VectorD r1(2);
    r1 << 1.0, 2.0;
    const VectorD ones = VectorD::Ones(2);
    const auto corr = diag_corr(r1, ones, ones, ones);
    SystemParams p{2, 2, 2, 1.0, 1.0, 1.0};
    SolverOptions opt;
    opt.tol = 1e-14;
    const SolutionS1 sol = solve_system1(corr, p, opt);

    PicardOracle oracle{corr.R1.matrix(),
                        corr.T1.matrix(),
                        corr.R2.matrix() * corr.T1.matrix(),
                        corr.T2.matrix(),
                        2,
                        2,
                        2,
                        1.0,
                        1.0};
    const auto ref = oracle.run(100000);
    CHECK(std::abs(sol.delta - ref[0]) < 1e-13);
    CHECK(std::abs(sol.omega_bar - ref[1]) < 1e-13);
    CHECK(std::abs(sol.omega_under - ref[2]) < 1e-13);
    CHECK(std::abs(sol.gamma - ref[3]) < 1e-13);
}

TEST_CASE("sixteen random starts inside the box land on the same tuple") {
    VectorD r1(3), t1(3), r2(3), t2(4);
    r1 << 0.5, 1.0, 2.1;
    t1 << 0.8, 1.3, 0.4;
    r2 << 1.9, 0.7, 1.1;
    t2 << 0.6, 1.2, 1.0, 0.9;
    const auto corr = diag_corr(r1, t1, r2, t2);
    SystemParams p{3, 3, 4, 0.7, 0.7, 0.9};
    const SolverWorkspace ws(corr);
    const auto box = positive_solution_bounds(ws, p);

    std::mt19937 gen(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const SolutionS1 ref = solve_system1(ws, p);
    for (int trial = 0; trial < 16; ++trial) {
        SolverOptions opt;
        opt.init_s1 = {{box.delta_lo + u(gen) * (box.delta_hi - box.delta_lo),
                        box.omega_bar_lo + u(gen) * (box.omega_bar_hi - box.omega_bar_lo),
                        box.omega_under_lo + u(gen) * (box.omega_under_hi - box.omega_under_lo),
                        box.gamma_lo + u(gen) * (box.gamma_hi - box.gamma_lo)}};
        const SolutionS1 sol = solve_system1(ws, p, opt);
        CHECK(std::abs(sol.delta - ref.delta) < 1e-8);
        CHECK(std::abs(sol.omega_bar - ref.omega_bar) < 1e-8);
        CHECK(std::abs(sol.omega_under - ref.omega_under) < 1e-8);
        CHECK(std::abs(sol.gamma - ref.gamma) < 1e-8);
    }
}

TEST_CASE("delta decreases with the noise argument") {
    VectorD r1(4), t1(4), r2(4), t2(4);
    r1 << 1.5, 0.5, 1.0, 1.0;
    t1 << 1.1, 0.9, 1.0, 1.0;
    r2 << 0.7, 1.3, 1.0, 1.0;
    t2 << 1.0, 1.0, 0.8, 1.2;
    const auto corr = diag_corr(r1, t1, r2, t2);
    double prev = 1e300;
    for (double z : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        SystemParams p{4, 4, 4, 1.0, 1.0, z};
        const SolutionS1 sol = solve_system1(corr, p);
        CHECK(sol.delta < prev);
        prev = sol.delta;
    }
}

TEST_CASE("degenerate drops and positivity guard") {
    const auto corr = CorrelationSet::identity(4, 4, 4);
    SystemParams bad{4, 4, 4, 1.0, 1.0, -1.0};
    CHECK_THROWS_AS(solve_system1(corr, bad), ParameterError);

    CorrelationSet zero = corr;
    zero.R2 = HermitianPSD::zero(4);
    SystemParams p{4, 4, 4, 1.0, 1.0, 1.0};
    CHECK_THROWS_AS(solve_system1(zero, p), ParameterError);  // trace positivity
}

TEST_CASE("second system decouples at zero noise argument") {
    VectorD r1(3);
    r1 << 2.0, 1.0, 0.5;
    const VectorD ones = VectorD::Ones(3);
    const auto corr = diag_corr(r1, ones, ones, ones);
    SystemParams p{3, 3, 3, 1.0, 0.0, 2.0};
    const SolutionS2 sol = solve_system2(corr, p);
    CHECK(sol.tau == doctest::Approx(3.5 / (3.0 * 2.0)).epsilon(1e-14));
    CHECK(sol.tau_bar == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sol.iterations == 0);
}

TEST_CASE("second system at unit parameters hits the quadratic root") {
    const auto corr = CorrelationSet::identity(4, 4, 4);
    SystemParams p{4, 4, 4, 1.0, 1.0, 1.0};
    const SolutionS2 sol = solve_system2(corr, p);
    CHECK(sol.tau == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("second system matches a scalar bisection oracle") {
    VectorD r1(2), t1(2);
    r1 << 1.0, 2.0;
    t1 << 1.0, 1.0;
    const VectorD ones = VectorD::Ones(2);
    const auto corr = diag_corr(r1, t1, ones, ones);
    SystemParams p{2, 2, 2, 1.0, 1.0, 1.0};
    const SolutionS2 sol = solve_system2(corr, p);

    // eliminate tau_bar = 1/(1+tau); bisect g(tau) = rhs(tau) - tau
    auto g = [](double tau) {
        const double tb = 1.0 / (1.0 + tau);
        return 0.5 * (1.0 / (1.0 + tb) + 2.0 / (1.0 + 2.0 * tb)) - tau;
    };
    double lo = 0.0, hi = 2.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    CHECK(sol.tau == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
}

TEST_CASE("complex solver matches the large-argument expansion") {
    const auto corr = CorrelationSet::identity(6, 8, 10);
    const SolverWorkspace ws(corr);
    const cxd zeta(0.0, 1e6);
    const auto sol = solve_system1_complex(ws, 0.0, zeta);
    const cxd expect = -(6.0 / 8.0) / zeta;
    CHECK(std::abs(sol.delta - expect) <= 1e-6 * std::abs(sol.delta));
}

TEST_CASE("complex solver keeps the upper half plane") {
    const auto corr = CorrelationSet::identity(5, 5, 5);
    const SolverWorkspace ws(corr);
    const auto sol = solve_system1_complex(ws, 0.0, cxd(1.0, 0.1));
    CHECK(sol.delta.imag() > 0.0);
    CHECK_THROWS_AS(solve_system1_complex(ws, 0.0, cxd(1.0, -0.1)), ParameterError);
}

TEST_CASE("complex solver agrees with an exact quartic-root oracle") {
    // For N = L = M identities the system collapses to a scalar quartic in
    // delta: s z^2 d^4 + z^2 d^3 + s z d^2 + z d - 1 = 0 with z = -zeta.
    // Companion-matrix roots give an iteration-free reference; inside the
    // spectral support an undamped iteration orbits, so a root oracle is the
    // reliable one there.
    const auto corr = CorrelationSet::identity(32, 32, 32);
    const SolverWorkspace ws(corr);
    const double s = 2.0;
    const cxd zeta(2.0, 0.01);
    const auto sol = solve_system1_complex(ws, s, zeta);

    const cxd z = -zeta;
    const cxd c4 = s * z * z, c3 = z * z, c2 = s * z, c1 = z, c0 = -1.0;
    Eigen::Matrix4cd companion = Eigen::Matrix4cd::Zero();
    companion(0, 3) = -c0 / c4;
    companion(1, 3) = -c1 / c4;
    companion(2, 3) = -c2 / c4;
    companion(3, 3) = -c3 / c4;
    companion(1, 0) = companion(2, 1) = companion(3, 2) = 1.0;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(companion);
    // the admissible root is the one with Im(d) > 0 and Im(zeta d) > 0
    int admissible = 0;
    cxd root{0.0, 0.0};
    for (int i = 0; i < 4; ++i) {
        const cxd d = es.eigenvalues()[i];
        if (d.imag() > 0.0 && (zeta * d).imag() > 0.0) {
            ++admissible;
            root = d;
        }
    }
    REQUIRE(admissible == 1);
    const cxd poly = ((c4 * root + c3) * root + c2) * root * root + c1 * root + c0;
    CHECK(std::abs(poly) < 1e-10);
    CHECK(std::abs(sol.delta - root) < 1e-8);
}

TEST_CASE("complex solver approaches the real solution off the axis") {
    const auto corr = CorrelationSet::identity(8, 8, 8);
    const SolverWorkspace ws(corr);
    SystemParams p{8, 8, 8, 1.0, 1.0, 2.0};
    const SolutionS1 real_sol = solve_system1(ws, p);
    const double y = 1e-4;
    const auto sol = solve_system1_complex(ws, 1.0, cxd(-2.0, y));  // z = -zeta = 2 - iy
    CHECK(std::abs(sol.delta - real_sol.delta) < 10.0 * y);
    CHECK(std::abs(sol.gamma - real_sol.gamma) < 10.0 * y);
}

TEST_CASE("quartic bracket signs and root") {
    const IidParams iid{2.0, 0.5};
    const double z = 1.0, s = 1.0;
    auto lf = [&](double m) {
        const double a = iid.c1 * z * m + 1.0 - iid.c1;
        return iid.c1 * iid.c2 * m * a * (z * m - 1.0 + s * m * a) + (s + 1.0) * m * a + z * m -
               1.0;
    };
    CHECK(lf(std::max(0.0, (1.0 - 1.0 / iid.c1) / z)) < 0.0);
    CHECK(lf(1.0 / z) > 0.0);
    const double root = iid_mF(iid, s, z);
    CHECK(std::abs(lf(root)) < 1e-12);
    CHECK(root > 0.5);  // (1 - 1/c1)/z = 0.5
    CHECK(root < 1.0);
}

TEST_CASE("quartic root cross-checks the general solver at zero noise") {
    const auto corr = CorrelationSet::identity(8, 8, 8);
    SystemParams p{8, 8, 8, 0.0, 0.0, 1.0};
    const SolutionS1 sol = solve_system1(corr, p);
    const double mf = iid_mF({1.0, 1.0}, 0.0, 1.0);
    CHECK(std::abs(sol.delta - mf) <= 1e-10);
}

TEST_CASE("quartic root matches a grid-scan oracle") {
    const IidParams iid{1.0, 1.0};
    const double s = 2.0, z = 0.5;
    auto lf = [&](double m) {
        const double a = iid.c1 * z * m + 1.0 - iid.c1;
        return iid.c1 * iid.c2 * m * a * (z * m - 1.0 + s * m * a) + (s + 1.0) * m * a + z * m -
               1.0;
    };
    // coarse scan for the sign change, then a fine scan of the bracketing cell
    double lo = 0.0, hi = 1.0 / z;
    const int coarse = 2000;
    for (int i = 0; i < coarse; ++i) {
        const double x0 = lo + (hi - lo) * i / coarse;
        const double x1 = lo + (hi - lo) * (i + 1) / coarse;
        if (lf(x0) < 0.0 && lf(x1) >= 0.0) {
            lo = x0;
            hi = x1;
            break;
        }
    }
    const long fine = 1000000;  // 1e-9 resolution over the remaining cell
    double root_scan = lo;
    for (long i = 0; i <= fine; ++i) {
        const double x = lo + (hi - lo) * double(i) / fine;
        if (lf(x) >= 0.0) {
            root_scan = x;
            break;
        }
    }
    CHECK(std::abs(iid_mF(iid, s, z) - root_scan) < 1e-8);
}

TEST_CASE("quadratic root closed forms") {
    CHECK(iid_mG(1.0, 0.0, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(iid_mG(1.0, 1.0, 1.0) == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("quadratic root cross-checks the general second system") {
    const auto corr = CorrelationSet::identity(32, 16, 16);
    SystemParams p{32, 16, 16, 1.0, 1.0, 1.0};
    const SolutionS2 sol = solve_system2(corr, p);
    const double mg = iid_mG(2.0, 1.0, 1.0);
    CHECK(std::abs(sol.tau - 2.0 * mg) <= 1e-10);
}

TEST_CASE("iid consistency across a parameter grid") {
    const auto corr = CorrelationSet::identity(16, 32, 24);
    const SolverWorkspace ws(corr);
    const IidParams iid{16.0 / 32.0, 32.0 / 24.0};
    for (double s : {0.0, 0.5, 1.0, 2.5}) {
        for (double z : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            SystemParams p{16, 32, 24, s, s, z};
            const SolutionS1 s1 = solve_system1(ws, p);
            const SolutionS2 s2 = solve_system2(ws, p);
            CHECK(std::abs(s1.delta - iid.c1 * iid_mF(iid, s, z)) <= 1e-8);
            CHECK(std::abs(s2.tau - iid.c1 * iid_mG(iid.c1, s, z)) <= 1e-10);
        }
    }
}

TEST_CASE("residual evaluation") {
    VectorD r1(3), t1(3), r2(3), t2(3);
    r1 << 1.0, 0.6, 1.7;
    t1 << 0.9, 1.2, 1.1;
    r2 << 1.4, 0.8, 1.0;
    t2 << 1.0, 0.5, 1.5;
    const auto corr = diag_corr(r1, t1, r2, t2);
    SystemParams p{3, 3, 3, 0.8, 0.8, 1.3};
    const SolverWorkspace ws(corr);
    const SolutionS1 sol = solve_system1(ws, p);

    auto res = residuals_system1(ws, p, sol);
    for (double r : res) CHECK(r <= 1e-12);

    SolutionS1 bumped = sol;
    bumped.delta += 0.1;
    res = residuals_system1(ws, p, bumped);
    CHECK(res[0] > 1e-3);

    // random tuple against a dense matrix-inverse evaluation
    const SolutionS1 probe{0.4, 0.9, 1.1, 0.7, 0.0, 0};
    res = residuals_system1(ws, p, probe);
    const MatrixC fd =
        (p.z * MatrixC::Identity(3, 3) +
         (p.s_bar * probe.omega_bar + probe.gamma * probe.omega_under) * corr.R1.matrix())
            .inverse();
    const double d_rhs = (corr.R1.matrix() * fd).trace().real() / 3.0;
    CHECK(res[0] == doctest::Approx(std::abs(probe.delta - d_rhs)).epsilon(1e-10));
    const MatrixC fw = (MatrixC::Identity(3, 3) + p.s_bar * probe.delta * corr.T1.matrix() +
                        probe.delta * probe.gamma * corr.R2.matrix() * corr.T1.matrix())
                           .inverse();
    const double wb_rhs = (corr.T1.matrix() * fw).trace().real() / 3.0;
    const double wu_rhs = (corr.R2.matrix() * corr.T1.matrix() * fw).trace().real() / 3.0;
    CHECK(res[1] == doctest::Approx(std::abs(probe.omega_bar - wb_rhs)).epsilon(1e-10));
    CHECK(res[2] == doctest::Approx(std::abs(probe.omega_under - wu_rhs)).epsilon(1e-10));
}

TEST_CASE("workspace spots the commuting pencil") {
    CHECK(SolverWorkspace(CorrelationSet::identity(4, 4, 4)).commuting_pencil());
    VectorD a(3), b(3);
    a << 1.0, 2.0, 3.0;
    b << 0.5, 1.5, 1.0;
    const auto diag = diag_corr(a, a, b, a);
    CHECK(SolverWorkspace(diag).commuting_pencil());
    // generic rotated R2 does not commute with a non-scalar T1
    const HermitianPSD c = build_correlation(30.0, 10.0, 0.4, 3);
    CorrelationSet mixed = diag_corr(a, a, b, a);
    mixed.R2 = c;
    CHECK_FALSE(SolverWorkspace(mixed).commuting_pencil());
}

TEST_CASE("non-convergence carries diagnostics") {
    const auto corr = CorrelationSet::identity(4, 4, 4);
    SystemParams p{4, 4, 4, 1.0, 1.0, 1.0};
    SolverOptions opt;
    opt.max_outer = 1;
    opt.tol = 1e-15;
    try {
        solve_system1(corr, p, opt);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.residual > 1e-15);
        CHECK(e.last_iterate.size() == 4);
    }
}
