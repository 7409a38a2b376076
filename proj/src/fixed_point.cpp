#include "twohop/fixed_point.hpp"

#include "twohop/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace twohop {

namespace {

void check_a3_positivity(const SolverWorkspace& ws) {
    const int n = ws.N(), l = ws.L(), m = ws.M();
    if (ws.tr_r1() / n <= 0.0 || ws.tr_t1() / l <= 0.0 || ws.tr_r2() / l <= 0.0 ||
        ws.tr_t2() / m <= 0.0 || ws.tr_r2t1() / l <= 0.0)
        throw ParameterError("correlation set violates trace positivity (degenerate rank)");
}

}  // namespace

SolverWorkspace::SolverWorkspace(const CorrelationSet& corr) {
    n_ = corr.R1.dim();
    l_ = corr.T1.dim();
    m_ = corr.T2.dim();
    if (corr.R2.dim() != l_) throw ParameterError("R2/T1 dimension mismatch");

    Eigen::SelfAdjointEigenSolver<MatrixC> es_r1(corr.R1.matrix());
    r1_eigs_ = es_r1.eigenvalues().cwiseMax(0.0);
    Eigen::SelfAdjointEigenSolver<MatrixC> es_t2(corr.T2.matrix());
    t2_eigs_ = es_t2.eigenvalues().cwiseMax(0.0);

    const MatrixC t1_sqrt = psd_sqrt(corr.T1);
    MatrixC k = t1_sqrt * corr.R2.matrix() * t1_sqrt;
    k = 0.5 * (k + k.adjoint()).eval();

    t1_ = corr.T1.matrix();
    k_ = k;
    t1_trace_ = t1_.real().trace();
    k_trace_ = k.real().trace();
    r2_trace_ = corr.R2.matrix().real().trace();

    Eigen::SelfAdjointEigenSolver<MatrixC> es_t1(t1_);
    t1_eigs_ = es_t1.eigenvalues().cwiseMax(0.0);
    t1_norm_ = t1_eigs_.maxCoeff();
    Eigen::SelfAdjointEigenSolver<MatrixC> es_r2(corr.R2.matrix(), Eigen::EigenvaluesOnly);
    r2_norm_ = es_r2.eigenvalues().cwiseAbs().maxCoeff();

    // Joint diagonalization of (T1, K) when they commute. Cluster the T1
    // eigenvalues, diagonalize K restricted to each eigenspace, and verify
    // that K has no coupling between clusters.
    const double scale = std::max({t1_norm_, k.cwiseAbs().maxCoeff(), 1.0});
    const double comm_err = (t1_ * k - k * t1_).cwiseAbs().maxCoeff();
    if (comm_err <= 1e-11 * scale * scale) {
        const MatrixC& u = es_t1.eigenvectors();
        const VectorD t_ev = es_t1.eigenvalues();
        MatrixC k_rot = u.adjoint() * k * u;
        pencil_t1_ = t_ev.cwiseMax(0.0);
        pencil_k_ = VectorD::Zero(l_);
        const double cluster_tol = 1e-9 * std::max(t1_norm_, 1.0);
        bool ok = true;
        int start = 0;
        while (start < l_ && ok) {
            int stop = start + 1;
            while (stop < l_ && t_ev[stop] - t_ev[stop - 1] <= cluster_tol) ++stop;
            const int len = stop - start;
            Eigen::SelfAdjointEigenSolver<MatrixC> es_blk(k_rot.block(start, start, len, len));
            pencil_k_.segment(start, len) = es_blk.eigenvalues().cwiseMax(0.0);
            // coupling to the remaining clusters must vanish
            if (stop < l_ &&
                k_rot.block(start, stop, len, l_ - stop).cwiseAbs().maxCoeff() > 1e-9 * scale)
                ok = false;
            start = stop;
        }
        commuting_ = ok;
    }
}

double SolverWorkspace::delta_rhs(double z, double x) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < r1_eigs_.size(); ++i) s += r1_eigs_[i] / (z + x * r1_eigs_[i]);
    return s / l_;
}

cxd SolverWorkspace::delta_rhs(cxd z, cxd x) const {
    cxd s{0.0, 0.0};
    for (Eigen::Index i = 0; i < r1_eigs_.size(); ++i) s += r1_eigs_[i] / (z + x * r1_eigs_[i]);
    return s / static_cast<double>(l_);
}

double SolverWorkspace::gamma_rhs(double x) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < t2_eigs_.size(); ++i) s += t2_eigs_[i] / (1.0 + x * t2_eigs_[i]);
    return s / m_;
}

cxd SolverWorkspace::gamma_rhs(cxd x) const {
    cxd s{0.0, 0.0};
    for (Eigen::Index i = 0; i < t2_eigs_.size(); ++i) s += t2_eigs_[i] / (1.0 + x * t2_eigs_[i]);
    return s / static_cast<double>(m_);
}

double SolverWorkspace::tau_bar_rhs(double x) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < t1_eigs_.size(); ++i) s += t1_eigs_[i] / (1.0 + x * t1_eigs_[i]);
    return s / l_;
}

cxd SolverWorkspace::tau_bar_rhs(cxd x) const {
    cxd s{0.0, 0.0};
    for (Eigen::Index i = 0; i < t1_eigs_.size(); ++i) s += t1_eigs_[i] / (1.0 + x * t1_eigs_[i]);
    return s / static_cast<double>(l_);
}

cxd SolverWorkspace::resolvent_trace(cxd z, cxd x) const {
    cxd s{0.0, 0.0};
    for (Eigen::Index i = 0; i < r1_eigs_.size(); ++i) s += 1.0 / (z + x * r1_eigs_[i]);
    return s / static_cast<double>(n_);
}

std::pair<double, double> SolverWorkspace::omega_rhs(double a, double b) const {
    if (commuting_) {
        double sb = 0.0, su = 0.0;
        for (Eigen::Index i = 0; i < pencil_t1_.size(); ++i) {
            const double den = 1.0 + a * pencil_t1_[i] + b * pencil_k_[i];
            sb += pencil_t1_[i] / den;
            su += pencil_k_[i] / den;
        }
        return {sb / l_, su / l_};
    }
    // S = (I + a T1 + b K)^{-1} is Hermitian PD for a, b >= 0
    MatrixC mat = MatrixC::Identity(l_, l_) + a * t1_ + b * k_;
    Eigen::LLT<MatrixC> llt(mat);
    MatrixC s;
    if (llt.info() == Eigen::Success) {
        s = llt.solve(MatrixC::Identity(l_, l_));
    } else {
        s = mat.partialPivLu().solve(MatrixC::Identity(l_, l_));
    }
    const double tb = t1_.cwiseProduct(s.transpose()).sum().real() / l_;
    const double tu = k_.cwiseProduct(s.transpose()).sum().real() / l_;
    return {tb, tu};
}

std::pair<cxd, cxd> SolverWorkspace::omega_rhs(cxd a, cxd b) const {
    if (commuting_) {
        cxd sb{0.0, 0.0}, su{0.0, 0.0};
        for (Eigen::Index i = 0; i < pencil_t1_.size(); ++i) {
            const cxd den = 1.0 + a * pencil_t1_[i] + b * pencil_k_[i];
            sb += pencil_t1_[i] / den;
            su += pencil_k_[i] / den;
        }
        return {sb / static_cast<double>(l_), su / static_cast<double>(l_)};
    }
    MatrixC mat = MatrixC::Identity(l_, l_) + a * t1_ + b * k_;
    MatrixC s = mat.partialPivLu().solve(MatrixC::Identity(l_, l_));
    const cxd tb = t1_.cwiseProduct(s.transpose()).sum() / static_cast<double>(l_);
    const cxd tu = k_.cwiseProduct(s.transpose()).sum() / static_cast<double>(l_);
    return {tb, tu};
}

SolutionBounds positive_solution_bounds(const SolverWorkspace& ws, const SystemParams& p) {
    const double r = std::max({ws.norm_r1(), ws.norm_t1(), ws.norm_r2(), ws.norm_t2()});
    const double l_const = std::min({ws.tr_r1() / ws.N(), ws.tr_t1() / ws.L(),
                                     ws.tr_r2() / ws.L(), ws.tr_t2() / ws.M(),
                                     ws.tr_r2t1() / ws.L()});
    const double nl = static_cast<double>(ws.N()) / ws.L();
    const double nm = static_cast<double>(ws.N()) / ws.M();
    const double z = p.z, s = p.s_bar;
    SolutionBounds b;
    b.delta_lo = nl * l_const / (z + s * r * r + r * r * r);
    b.delta_hi = nl * ws.norm_r1() / z;
    b.omega_bar_lo = l_const / (1.0 + nl * (s * r * r + r * r * r * r) / z);
    b.omega_bar_hi = ws.norm_t1();
    b.omega_under_lo = b.omega_bar_lo;
    b.omega_under_hi = ws.norm_r2() * ws.norm_t1();
    b.gamma_lo = l_const / (1.0 + nm * r * r * r * r / z);
    b.gamma_hi = ws.norm_t2();
    return b;
}

SolutionS1 solve_system1(const SolverWorkspace& ws, const SystemParams& p,
                         const SolverOptions& opt) {
    p.validate();
    if (opt.damping <= 0.0 || opt.damping > 1.0) throw ParameterError("damping must be in (0, 1]");
    check_a3_positivity(ws);

    const double z = p.z, s = p.s_bar;
    const double a = opt.damping;
    double delta = 1.0 / z, omega_bar = 1.0, omega_under = 1.0, gamma = 1.0;
    if (opt.init_s1) {
        delta = (*opt.init_s1)[0];
        omega_bar = (*opt.init_s1)[1];
        omega_under = (*opt.init_s1)[2];
        gamma = (*opt.init_s1)[3];
    }

    auto residual = [&](double d, double wb, double wu, double g) {
        const auto [wb_rhs, wu_rhs] = ws.omega_rhs(s * d, d * g);
        const double rd = std::abs(d - ws.delta_rhs(z, s * wb + g * wu));
        const double rb = std::abs(wb - wb_rhs);
        const double ru = std::abs(wu - wu_rhs);
        const double rg = std::abs(g - ws.gamma_rhs((static_cast<double>(ws.L()) / ws.M()) * d * wu));
        return std::max({rd, rb, ru, rg});
    };

    double res = residual(delta, omega_bar, omega_under, gamma);
    long outer = 0;
    for (; outer < opt.max_outer && res > opt.tol; ++outer) {
        // inner loop: omega_under / gamma at fixed delta
        for (int inner = 0; inner < opt.max_inner; ++inner) {
            const auto [wb_new, wu_new] = ws.omega_rhs(s * delta, delta * gamma);
            (void)wb_new;
            const double g_new =
                ws.gamma_rhs((static_cast<double>(ws.L()) / ws.M()) * delta * omega_under);
            const double change = std::max(std::abs(wu_new - omega_under), std::abs(g_new - gamma));
            omega_under = (1.0 - a) * omega_under + a * wu_new;
            gamma = (1.0 - a) * gamma + a * g_new;
            if (change <= opt.tol) break;
        }
        const auto [wb_new, wu_ignored] = ws.omega_rhs(s * delta, delta * gamma);
        (void)wu_ignored;
        omega_bar = (1.0 - a) * omega_bar + a * wb_new;
        const double d_new = ws.delta_rhs(z, s * omega_bar + gamma * omega_under);
        delta = (1.0 - a) * delta + a * d_new;
        res = residual(delta, omega_bar, omega_under, gamma);
    }
    if (res > opt.tol)
        throw ConvergenceError("first fixed-point system did not converge", res, outer,
                               {cxd(delta), cxd(omega_bar), cxd(omega_under), cxd(gamma)});
    return {delta, omega_bar, omega_under, gamma, res, outer};
}

SolutionS1 solve_system1(const CorrelationSet& corr, const SystemParams& p,
                         const SolverOptions& opt) {
    corr.validate_dims(p);
    return solve_system1(SolverWorkspace(corr), p, opt);
}

SolutionS2 solve_system2(const SolverWorkspace& ws, const SystemParams& p,
                         const SolverOptions& opt) {
    p.validate();
    const double z = p.z, s = p.s_under;
    double tau = ws.tr_r1() / (ws.L() * z);
    double tau_bar = ws.tr_t1() / ws.L();
    auto residual = [&](double t, double tb) {
        return std::max(std::abs(t - ws.delta_rhs(z, s * tb)),
                        std::abs(tb - ws.tau_bar_rhs(s * t)));
    };
    double res = residual(tau, tau_bar);
    long it = 0;
    for (; it < opt.max_outer && res > opt.tol; ++it) {
        tau = ws.delta_rhs(z, s * tau_bar);
        tau_bar = ws.tau_bar_rhs(s * tau);
        res = residual(tau, tau_bar);
    }
    if (res > opt.tol)
        throw ConvergenceError("second fixed-point system did not converge", res, it,
                               {cxd(tau), cxd(tau_bar)});
    return {tau, tau_bar, res, it};
}

SolutionS2 solve_system2(const CorrelationSet& corr, const SystemParams& p,
                         const SolverOptions& opt) {
    return solve_system2(SolverWorkspace(corr), p, opt);
}

ComplexSolutionS1 solve_system1_complex(const SolverWorkspace& ws, double s_bar, cxd zeta,
                                        const ComplexSolutionS1* warm, double tol, long max_iter,
                                        double damping) {
    if (zeta.imag() <= 0.0) throw ParameterError("spectral argument must have Im > 0");
    if (s_bar < 0.0) throw ParameterError("s_bar must be >= 0");
    const cxd z = -zeta;
    const double lm = static_cast<double>(ws.L()) / ws.M();

    cxd delta, omega_bar, omega_under, gamma;
    if (warm) {
        delta = warm->delta;
        omega_bar = warm->omega_bar;
        omega_under = warm->omega_under;
        gamma = warm->gamma;
    } else {
        // large-|zeta| leading order of the four transforms
        delta = -(ws.tr_r1() / ws.L()) / zeta;
        omega_bar = ws.tr_t1() / ws.L();
        omega_under = ws.tr_r2t1() / ws.L();
        gamma = ws.tr_t2() / ws.M();
    }

    double res = 0.0;
    long it = 0;
    for (; it < max_iter; ++it) {
        const cxd d_new = ws.delta_rhs(z, s_bar * omega_bar + gamma * omega_under);
        const auto [wb_new, wu_new] = ws.omega_rhs(s_bar * delta, delta * gamma);
        const cxd g_new = ws.gamma_rhs(lm * delta * omega_under);
        res = std::max({std::abs(d_new - delta) / (1.0 + std::abs(delta)),
                        std::abs(wb_new - omega_bar) / (1.0 + std::abs(omega_bar)),
                        std::abs(wu_new - omega_under) / (1.0 + std::abs(omega_under)),
                        std::abs(g_new - gamma) / (1.0 + std::abs(gamma))});
        delta += damping * (d_new - delta);
        omega_bar += damping * (wb_new - omega_bar);
        omega_under += damping * (wu_new - omega_under);
        gamma += damping * (g_new - gamma);
        if (res <= tol) break;
    }
    if (res > tol)
        throw ConvergenceError("complex fixed-point system did not converge", res, it,
                               {delta, omega_bar, omega_under, gamma});
    return {delta, omega_bar, omega_under, gamma, zeta, res, it};
}

namespace {

double quartic_lf(const IidParams& iid, double s, double z, double m) {
    const double a = iid.c1 * z * m + 1.0 - iid.c1;
    return iid.c1 * iid.c2 * m * a * (z * m - 1.0 + s * m * a) + (s + 1.0) * m * a + z * m - 1.0;
}

}  // namespace

double iid_mF(const IidParams& iid, double s_bar, double z, double tol) {
    if (z <= 0.0 || s_bar < 0.0 || iid.c1 <= 0.0 || iid.c2 <= 0.0)
        throw ParameterError("iid_mF: invalid parameters");
    double lo = std::max(0.0, (1.0 - 1.0 / iid.c1) / z);
    double hi = 1.0 / z;
    const double f_lo = quartic_lf(iid, s_bar, z, lo);
    const double f_hi = quartic_lf(iid, s_bar, z, hi);
    if (!(f_lo < 0.0) || !(f_hi > 0.0))
        throw NumericalError("iid_mF: bracket sign condition failed");  // excluded analytically
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        if (quartic_lf(iid, s_bar, z, mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    // one secant polish inside the final bracket
    double m = 0.5 * (lo + hi);
    const double fa = quartic_lf(iid, s_bar, z, lo);
    const double fb = quartic_lf(iid, s_bar, z, hi);
    if (fb != fa) {
        const double cand = lo - fa * (hi - lo) / (fb - fa);
        if (cand > 0.0 && cand < 1.0 / z && std::abs(quartic_lf(iid, s_bar, z, cand)) <= std::abs(quartic_lf(iid, s_bar, z, m)))
            m = cand;
    }
    if (std::abs(quartic_lf(iid, s_bar, z, m)) > std::max(tol, 1e-12))
        throw NumericalError("iid_mF: root refinement failed");
    return m;
}

double iid_mG(double c1, double s_under, double z) {
    if (z <= 0.0 || s_under < 0.0 || c1 <= 0.0) throw ParameterError("iid_mG: invalid parameters");
    if (s_under == 0.0) return 1.0 / z;
    // s c1 z m^2 + (s (1 - c1) + z) m - 1 = 0, positive root
    const double a = s_under * c1 * z;
    const double b = s_under * (1.0 - c1) + z;
    const double disc = b * b + 4.0 * a;
    const double root = (-b + std::sqrt(disc)) / (2.0 * a);
    return root;
}

std::array<double, 4> residuals_system1(const SolverWorkspace& ws, const SystemParams& p,
                                        const SolutionS1& sol) {
    const auto [wb_rhs, wu_rhs] = ws.omega_rhs(p.s_bar * sol.delta, sol.delta * sol.gamma);
    const double lm = static_cast<double>(ws.L()) / ws.M();
    return {std::abs(sol.delta - ws.delta_rhs(p.z, p.s_bar * sol.omega_bar +
                                                       sol.gamma * sol.omega_under)),
            std::abs(sol.omega_bar - wb_rhs), std::abs(sol.omega_under - wu_rhs),
            std::abs(sol.gamma - ws.gamma_rhs(lm * sol.delta * sol.omega_under))};
}

std::array<double, 4> residuals_system1(const CorrelationSet& corr, const SystemParams& p,
                                        const SolutionS1& sol) {
    return residuals_system1(SolverWorkspace(corr), p, sol);
}

std::array<double, 2> residuals_system2(const SolverWorkspace& ws, const SystemParams& p,
                                        const SolutionS2& sol) {
    return {std::abs(sol.tau - ws.delta_rhs(p.z, p.s_under * sol.tau_bar)),
            std::abs(sol.tau_bar - ws.tau_bar_rhs(p.s_under * sol.tau))};
}

}  // namespace twohop
