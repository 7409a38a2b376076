#pragma once

#include "twohop/fixed_point.hpp"
#include "twohop/types.hpp"

#include <vector>

namespace twohop {

/// Continuous part of the limiting spectral density recovered by boundary
/// inversion of the deterministic resolvent trace.
struct SpectralDensity {
    std::vector<double> grid;     // ascending eigenvalue axis
    std::vector<double> density;  // nonnegative after clamping
    double im_offset = 0.0;       // imaginary offset used in the inversion
    double mass = 0.0;            // trapezoid integral of density over grid
    std::vector<int> interpolated;  // grid indices filled in after isolated failures
};

/// Deterministic resolvent trace (1/N) Tr F_delta(s_bar, -zeta), Im(zeta) > 0.
/// When `out` is non-null the converged tuple is stored for warm-starting.
cxd stieltjes_m(const SolverWorkspace& ws, double s_bar, cxd zeta,
                const ComplexSolutionS1* warm = nullptr, ComplexSolutionS1* out = nullptr,
                double tol = 1e-11, long max_iter = 100000, double damping = 0.5);

/// Two-equation analogue (1/N) Tr G_tau(s_under, -zeta) for the second MI term.
struct ComplexSolutionS2 {
    cxd tau{0.0, 0.0};
    cxd tau_bar{0.0, 0.0};
    cxd zeta{0.0, 0.0};
    double residual = 0.0;
    long iterations = 0;
};

cxd stieltjes_m2(const SolverWorkspace& ws, double s_under, cxd zeta,
                 const ComplexSolutionS2* warm = nullptr, ComplexSolutionS2* out = nullptr,
                 double tol = 1e-12, long max_iter = 100000, double damping = 0.5);

/// Rough upper estimate of the spectral support edge, used to size grids and
/// imaginary offsets.
double support_scale(const CorrelationSet& corr, double s_bar);
double default_im_offset(const CorrelationSet& corr, double s_bar);
std::vector<double> default_grid(const CorrelationSet& corr, double s_bar, int n_points = 400);

/// Density along `grid` via (1/pi) Im m(x + iy), swept left to right with warm
/// starts. Isolated non-converged points are interpolated and recorded; more
/// than 5% failures is an error.
SpectralDensity lsd_density(const CorrelationSet& corr, double s_bar,
                            const std::vector<double>& grid, double y, double tol = 1e-10,
                            long max_iter = 200000, double damping = 0.5);

}  // namespace twohop
