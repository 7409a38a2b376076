#pragma once

#include "twohop/types.hpp"

#include <array>
#include <optional>

namespace twohop {

struct SolverOptions {
    double tol = 1e-12;
    int max_outer = 10000;
    int max_inner = 200;
    double damping = 1.0;  // in (0, 1]; 1 = plain alternating updates
    // Optional starting tuple (delta, omega_bar, omega_under, gamma) for the
    // real first system; defaults to (1/z, 1, 1, 1).
    std::optional<std::array<double, 4>> init_s1;
};

/// Positive solution of the four-equation system attached to I1.
struct SolutionS1 {
    double delta = 0.0;
    double omega_bar = 0.0;
    double omega_under = 0.0;
    double gamma = 0.0;
    double residual = 0.0;  // max |lhs - rhs| over the four equations
    long iterations = 0;    // outer iterations used
};

/// Positive solution of the two-equation system attached to I2.
struct SolutionS2 {
    double tau = 0.0;
    double tau_bar = 0.0;
    double residual = 0.0;
    long iterations = 0;
};

/// Solution of the first system continued to a complex spectral argument
/// z = -zeta with Im(zeta) > 0. Im(delta) > 0 there.
struct ComplexSolutionS1 {
    cxd delta{0.0, 0.0};
    cxd omega_bar{0.0, 0.0};
    cxd omega_under{0.0, 0.0};
    cxd gamma{0.0, 0.0};
    cxd zeta{0.0, 0.0};
    double residual = 0.0;
    long iterations = 0;
};

/// Antenna-count ratios c1 = N/L, c2 = L/M of the i.i.d. reduction.
struct IidParams {
    double c1 = 1.0;
    double c2 = 1.0;
};

/// Spectral data precomputed from one correlation set and shared by all solves
/// against it. The solvers only need traces of resolvent-type functions, so
/// R1 and T2 are reduced to eigenvalues once. The (T1, T1^{1/2} R2 T1^{1/2})
/// pencil is jointly diagonalized when the two matrices commute (identity and
/// other commuting families), which reduces every update to O(L) work;
/// otherwise each update performs one dense Hermitian (or LU) solve.
class SolverWorkspace {
  public:
    explicit SolverWorkspace(const CorrelationSet& corr);

    int N() const { return n_; }
    int L() const { return l_; }
    int M() const { return m_; }

    double tr_r1() const { return r1_eigs_.sum(); }
    double tr_t1() const { return t1_trace_; }
    double tr_r2t1() const { return k_trace_; }
    double tr_t2() const { return t2_eigs_.sum(); }
    double tr_r2() const { return r2_trace_; }
    double norm_r1() const { return r1_eigs_.maxCoeff(); }
    double norm_t1() const { return t1_norm_; }
    double norm_r2() const { return r2_norm_; }
    double norm_t2() const { return t2_eigs_.maxCoeff(); }
    bool commuting_pencil() const { return commuting_; }

    // (1/L) Tr[R1 (z I + x R1)^{-1}]
    double delta_rhs(double z, double x) const;
    cxd delta_rhs(cxd z, cxd x) const;
    // (1/M) Tr[T2 (I + x T2)^{-1}]
    double gamma_rhs(double x) const;
    cxd gamma_rhs(cxd x) const;
    // ((1/L) Tr[T1 S], (1/L) Tr[K S]) with S = (I + a T1 + b K)^{-1} and
    // K = T1^{1/2} R2 T1^{1/2}; equals the omega_bar / omega_under updates
    // at a = s_bar*delta, b = delta*gamma.
    std::pair<double, double> omega_rhs(double a, double b) const;
    std::pair<cxd, cxd> omega_rhs(cxd a, cxd b) const;
    // (1/L) Tr[T1 (I + x T1)^{-1}], the tau_bar update.
    double tau_bar_rhs(double x) const;
    cxd tau_bar_rhs(cxd x) const;
    // (1/N) Tr[(z I + x R1)^{-1}], the normalized resolvent-equivalent trace.
    cxd resolvent_trace(cxd z, cxd x) const;

  private:
    int n_ = 0, l_ = 0, m_ = 0;
    VectorD r1_eigs_, t2_eigs_, t1_eigs_;
    double t1_trace_ = 0.0, k_trace_ = 0.0, r2_trace_ = 0.0;
    double t1_norm_ = 0.0, r2_norm_ = 0.0;
    bool commuting_ = false;
    VectorD pencil_t1_, pencil_k_;  // joint eigenvalues when commuting
    MatrixC t1_, k_;                // dense path otherwise
};

/// A-priori containment box for the positive solutions, evaluated with the
/// actual spectral norms and normalized traces of the correlation set.
struct SolutionBounds {
    double delta_lo, delta_hi;
    double omega_bar_lo, omega_bar_hi;
    double omega_under_lo, omega_under_hi;
    double gamma_lo, gamma_hi;

    bool contains(const SolutionS1& s) const {
        return s.delta >= delta_lo && s.delta <= delta_hi && s.omega_bar >= omega_bar_lo &&
               s.omega_bar <= omega_bar_hi && s.omega_under >= omega_under_lo &&
               s.omega_under <= omega_under_hi && s.gamma >= gamma_lo && s.gamma <= gamma_hi;
    }
};

SolutionBounds positive_solution_bounds(const SolverWorkspace& ws, const SystemParams& p);

SolutionS1 solve_system1(const SolverWorkspace& ws, const SystemParams& p,
                         const SolverOptions& opt = {});
SolutionS1 solve_system1(const CorrelationSet& corr, const SystemParams& p,
                         const SolverOptions& opt = {});

SolutionS2 solve_system2(const SolverWorkspace& ws, const SystemParams& p,
                         const SolverOptions& opt = {});
SolutionS2 solve_system2(const CorrelationSet& corr, const SystemParams& p,
                         const SolverOptions& opt = {});

/// Damped Picard iteration for the first system at z = -zeta, Im(zeta) > 0.
/// warm, when non-null, seeds the iteration (continuation along a grid).
/// The residual is max_i |T(x)_i - x_i| / (1 + |x_i|).
ComplexSolutionS1 solve_system1_complex(const SolverWorkspace& ws, double s_bar, cxd zeta,
                                        const ComplexSolutionS1* warm = nullptr,
                                        double tol = 1e-11, long max_iter = 100000,
                                        double damping = 0.5);

/// Unique root of the i.i.d. quartic in (max(0, (1-1/c1)/z), 1/z), by
/// bracketed bisection plus one secant polish.
double iid_mF(const IidParams& iid, double s_bar, double z, double tol = 1e-13);

/// Positive root of the i.i.d. quadratic; closed form. Equals 1/z at s_under = 0.
double iid_mG(double c1, double s_under, double z);

/// Per-equation |lhs - rhs| of the first system at the supplied tuple.
std::array<double, 4> residuals_system1(const SolverWorkspace& ws, const SystemParams& p,
                                        const SolutionS1& sol);
std::array<double, 4> residuals_system1(const CorrelationSet& corr, const SystemParams& p,
                                        const SolutionS1& sol);
std::array<double, 2> residuals_system2(const SolverWorkspace& ws, const SystemParams& p,
                                        const SolutionS2& sol);

}  // namespace twohop
