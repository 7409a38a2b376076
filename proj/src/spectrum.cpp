#include "twohop/spectrum.hpp"

#include <algorithm>
#include <cmath>

namespace twohop {

cxd stieltjes_m(const SolverWorkspace& ws, double s_bar, cxd zeta, const ComplexSolutionS1* warm,
                ComplexSolutionS1* out, double tol, long max_iter, double damping) {
    const ComplexSolutionS1 sol =
        solve_system1_complex(ws, s_bar, zeta, warm, tol, max_iter, damping);
    if (out) *out = sol;
    const cxd x = s_bar * sol.omega_bar + sol.gamma * sol.omega_under;
    return ws.resolvent_trace(-zeta, x);
}

cxd stieltjes_m2(const SolverWorkspace& ws, double s_under, cxd zeta,
                 const ComplexSolutionS2* warm, ComplexSolutionS2* out, double tol, long max_iter,
                 double damping) {
    if (zeta.imag() <= 0.0) throw ParameterError("spectral argument must have Im > 0");
    if (s_under < 0.0) throw ParameterError("s_under must be >= 0");
    const cxd z = -zeta;
    cxd tau, tau_bar;
    if (warm) {
        tau = warm->tau;
        tau_bar = warm->tau_bar;
    } else {
        tau = -(ws.tr_r1() / ws.L()) / zeta;
        tau_bar = ws.tr_t1() / ws.L();
    }
    double res = 0.0;
    long it = 0;
    for (; it < max_iter; ++it) {
        const cxd t_new = ws.delta_rhs(z, s_under * tau_bar);
        const cxd tb_new = ws.tau_bar_rhs(s_under * tau);
        res = std::max(std::abs(t_new - tau) / (1.0 + std::abs(tau)),
                       std::abs(tb_new - tau_bar) / (1.0 + std::abs(tau_bar)));
        tau += damping * (t_new - tau);
        tau_bar += damping * (tb_new - tau_bar);
        if (res <= tol) break;
    }
    if (res > tol)
        throw ConvergenceError("complex two-equation system did not converge", res, it,
                               {tau, tau_bar});
    if (out) *out = {tau, tau_bar, zeta, res, it};
    return ws.resolvent_trace(z, s_under * tau_bar);
}

double support_scale(const CorrelationSet& corr, double s_bar) {
    const SolverWorkspace ws(corr);
    const double edge1 = 1.0 + std::sqrt(static_cast<double>(ws.N()) / ws.L());
    const double edge2 = 1.0 + std::sqrt(static_cast<double>(ws.L()) / ws.M());
    return ws.norm_r1() * ws.norm_t1() * edge1 * edge1 *
           (s_bar + ws.norm_r2() * ws.norm_t2() * edge2 * edge2);
}

double default_im_offset(const CorrelationSet& corr, double s_bar) {
    return 1e-3 * support_scale(corr, s_bar);
}

std::vector<double> default_grid(const CorrelationSet& corr, double s_bar, int n_points) {
    if (n_points < 2) throw ParameterError("default_grid: need at least two points");
    const double hi = 1.2 * support_scale(corr, s_bar);
    std::vector<double> g(n_points);
    for (int i = 0; i < n_points; ++i) g[i] = hi * i / (n_points - 1);
    return g;
}

SpectralDensity lsd_density(const CorrelationSet& corr, double s_bar,
                            const std::vector<double>& grid, double y, double tol, long max_iter,
                            double damping) {
    if (grid.size() < 2) throw ParameterError("lsd_density: grid needs at least two points");
    if (!(y > 0.0)) throw ParameterError("lsd_density: imaginary offset must be > 0");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw ParameterError("lsd_density: grid must be ascending");

    const SolverWorkspace ws(corr);
    SpectralDensity sd;
    sd.grid = grid;
    sd.im_offset = y;
    sd.density.assign(grid.size(), 0.0);

    std::vector<bool> failed(grid.size(), false);
    ComplexSolutionS1 state;
    bool have_state = false;
    std::size_t n_failed = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const cxd zeta(grid[i], y);
        try {
            ComplexSolutionS1 next;
            const cxd m = stieltjes_m(ws, s_bar, zeta, have_state ? &state : nullptr, &next, tol,
                                      max_iter, damping);
            state = next;
            have_state = true;
            double f = m.imag() / M_PI;
            if (f < -1e-10) throw NumericalError("negative density beyond clamping tolerance");
            sd.density[i] = std::max(f, 0.0);
        } catch (const NumericalError&) {
            failed[i] = true;
            ++n_failed;
        }
    }
    if (n_failed > 0) {
        if (static_cast<double>(n_failed) > 0.05 * static_cast<double>(grid.size()))
            throw NumericalError("lsd_density: more than 5% of grid points failed to converge");
        // isolated failures: linear interpolation from the nearest successes
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!failed[i]) continue;
            std::size_t left = i;
            while (left > 0 && failed[left - 1]) --left;
            std::size_t right = i;
            while (right + 1 < grid.size() && failed[right + 1]) ++right;
            const bool has_l = left > 0, has_r = right + 1 < grid.size();
            double val = 0.0;
            if (has_l && has_r) {
                const double x0 = grid[left - 1], x1 = grid[right + 1];
                const double f0 = sd.density[left - 1], f1 = sd.density[right + 1];
                val = f0 + (f1 - f0) * (grid[i] - x0) / (x1 - x0);
            } else if (has_l) {
                val = sd.density[left - 1];
            } else if (has_r) {
                val = sd.density[right + 1];
            }
            sd.density[i] = val;
            sd.interpolated.push_back(static_cast<int>(i));
        }
    }

    double mass = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        mass += 0.5 * (sd.density[i] + sd.density[i - 1]) * (grid[i] - grid[i - 1]);
    sd.mass = mass;
    return sd;
}

}  // namespace twohop
