#include "twohop/deterministic.hpp"

#include "twohop/linalg.hpp"
#include "twohop/model.hpp"

#include <Eigen/LU>

#include <cmath>

namespace twohop {

DetMatrices det_matrices(const CorrelationSet& corr, const SystemParams& p, const SolutionS1& s1,
                         const SolutionS2& s2) {
    p.validate();
    corr.validate_dims(p);
    const int n = p.N, l = p.L, m = p.M;
    const MatrixC& r1 = corr.R1.matrix();
    const MatrixC& t1 = corr.T1.matrix();
    const MatrixC& r2 = corr.R2.matrix();
    const MatrixC& t2 = corr.T2.matrix();

    DetMatrices dm;
    const double x = p.s_bar * s1.omega_bar + s1.gamma * s1.omega_under;
    MatrixC a = p.z * MatrixC::Identity(n, n) + x * r1;
    dm.F_delta = a.llt().solve(MatrixC::Identity(n, n));

    MatrixC b = MatrixC::Identity(l, l) + (p.s_bar * s1.delta) * t1 +
                (s1.delta * s1.gamma) * (r2 * t1);
    Eigen::PartialPivLU<MatrixC> lu(b);
    if (lu.determinant() == cxd(0.0, 0.0)) throw NumericalError("det_matrices: singular resolvent");
    dm.F_omega = lu.solve(MatrixC::Identity(l, l));

    const double lm = static_cast<double>(l) / m;
    MatrixC c = MatrixC::Identity(m, m) + (lm * s1.delta * s1.omega_under) * t2;
    dm.F_gamma = c.llt().solve(MatrixC::Identity(m, m));

    MatrixC d = p.z * MatrixC::Identity(n, n) + (p.s_under * s2.tau_bar) * r1;
    dm.G_tau = d.llt().solve(MatrixC::Identity(n, n));

    MatrixC e = MatrixC::Identity(l, l) + (p.s_under * s2.tau) * t1;
    dm.G_tau_bar = e.llt().solve(MatrixC::Identity(l, l));

    dm.fp_residuals = {
        std::abs(trace_prod(r1, dm.F_delta).real() / l - s1.delta),
        std::abs(trace_prod(t1, dm.F_omega).real() / l - s1.omega_bar),
        std::abs(trace_prod(r2 * t1, dm.F_omega).real() / l - s1.omega_under),
        std::abs(trace_prod(t2, dm.F_gamma).real() / m - s1.gamma),
        std::abs(trace_prod(r1, dm.G_tau).real() / l - s2.tau),
        std::abs(trace_prod(t1, dm.G_tau_bar).real() / l - s2.tau_bar)};
    return dm;
}

Functionals functionals(const CorrelationSet& corr, const DetMatrices& dm, const SolutionS1& s1,
                        const SolutionS2& s2, const SystemParams& p) {
    const int l = p.L, m = p.M;
    const MatrixC& r1 = corr.R1.matrix();
    const MatrixC& t1 = corr.T1.matrix();
    const MatrixC& r2 = corr.R2.matrix();
    const MatrixC& t2 = corr.T2.matrix();

    // cached building blocks
    const MatrixC a1 = r1 * dm.F_delta;      // R1 Fd
    const MatrixC a1sq = a1 * a1;
    const MatrixC b1 = t1 * dm.F_omega;      // T1 Fw
    const MatrixC b2 = r2 * b1;              // R2 T1 Fw
    const MatrixC b1b2 = b1 * b2;
    const MatrixC c1 = t2 * dm.F_gamma;      // T2 Fg
    const MatrixC d1 = r1 * dm.G_tau;        // R1 Gt
    const MatrixC e1 = t1 * dm.G_tau_bar;    // T1 Gtb
    const MatrixC b1r2 = b1 * r2;            // T1 Fw R2

    Functionals fn;
    fn.delta2 = trace_prod(a1, a1).real() / l;
    fn.delta3 = trace_prod(a1sq, a1).real() / l;
    fn.delta2I = trace_prod(a1, dm.F_delta).real() / l;
    fn.delta3I = trace_prod(a1sq, dm.F_delta).real() / l;

    fn.omega_bar2 = trace_prod(b1, b1).real() / l;
    fn.omega_bar3 = trace_prod(b1 * b1, b1).real() / l;
    fn.omega_under2 = trace_prod(b2, b2).real() / l;
    fn.omega_under3 = trace_prod(b2 * b2, b2).real() / l;
    fn.omega_under2I = trace_prod(b2, dm.F_omega).real() / l;
    fn.omega_under3I = trace_prod(b2 * b2, dm.F_omega).real() / l;

    fn.mixed11 = trace_prod(b1, b2).real() / l;
    fn.mixed21 = trace_prod(b1 * b1, b2).real() / l;
    fn.mixed12 = trace_prod(b1b2, b2).real() / l;  // Tr[(T1Fw)(R2T1Fw)^2]
    fn.mixed11I = trace_prod(b1, dm.F_omega).real() / l;
    fn.mixed12I = trace_prod(b1b2, dm.F_omega).real() / l;

    fn.gamma2 = trace_prod(c1, c1).real() / m;
    fn.gamma3 = trace_prod(c1 * c1, c1).real() / m;

    const double lm = static_cast<double>(l) / m;
    fn.varsigma = 2.0 * p.s_bar * s1.gamma * fn.mixed11 + s1.gamma * s1.gamma * fn.omega_under2 +
                  p.s_bar * p.s_bar * fn.omega_bar2;
    fn.Delta = 1.0 - lm * fn.gamma2 * fn.omega_under2 * s1.delta * s1.delta;
    fn.DeltaV1 = (1.0 - fn.varsigma * fn.delta2) * fn.Delta -
                 lm * fn.gamma2 * fn.omega_under2I * fn.omega_under2I * fn.delta2;

    fn.tau2 = trace_prod(d1, d1).real() / l;
    fn.tau3 = trace_prod(d1 * d1, d1).real() / l;
    fn.tau2I = trace_prod(d1, dm.G_tau).real() / l;
    fn.tau3I = trace_prod(d1 * d1, dm.G_tau).real() / l;
    fn.tau_bar2 = trace_prod(e1, e1).real() / l;
    fn.tau_bar3 = trace_prod(e1 * e1, e1).real() / l;
    fn.DeltaV2 = 1.0 - p.s_under * p.s_under * fn.tau2 * fn.tau_bar2;

    fn.vartheta = trace_prod(d1, a1).real() / l;
    fn.vartheta12 = trace_prod(d1, a1sq).real() / l;
    fn.vartheta12I = trace_prod(d1 * a1, dm.F_delta).real() / l;
    fn.vartheta1I1 = trace_prod(dm.G_tau, a1).real() / l;
    fn.phi_bar = trace_prod(e1, b1).real() / l;
    fn.phi_bar12 = trace_prod(e1, b1 * b1).real() / l;
    fn.phi_under = trace_prod(e1, b1r2).real() / l;
    fn.phi_under12 = trace_prod(e1, b1r2 * b1r2).real() / l;
    fn.cross_phi12 = trace_prod(e1, b1r2 * b1).real() / l;  // T1Gtb . (T1Fw R2)(T1Fw)
    fn.cross_phi12_tilde = trace_prod(e1, b1 * b1r2).real() / l;
    fn.DeltaC =
        1.0 - p.s_under * fn.vartheta * (s1.gamma * fn.phi_under + p.s_bar * fn.phi_bar);

    fn.delta = s1.delta;
    fn.omega_bar = s1.omega_bar;
    fn.omega_under = s1.omega_under;
    fn.gamma = s1.gamma;
    fn.tau = s2.tau;
    fn.tau_bar = s2.tau_bar;
    fn.ratio_mid_tx = lm;
    fn.s_bar = p.s_bar;
    fn.s_under = p.s_under;
    fn.z = p.z;
    return fn;
}

double mean_I1(const CorrelationSet& corr, const SystemParams& p, const SolutionS1& s1) {
    p.validate();
    corr.validate_dims(p);
    const int n = p.N, l = p.L, m = p.M;
    const double x = (p.s_bar * s1.omega_bar + s1.gamma * s1.omega_under) / p.z;
    const double ld1 =
        logdet_hermitian_pd(MatrixC::Identity(n, n) + x * corr.R1.matrix());
    // Hermitian-similar form of I + sbar*delta*T1 + delta*gamma*R2*T1
    const MatrixC t1_sqrt = psd_sqrt(corr.T1);
    MatrixC k = t1_sqrt * corr.R2.matrix() * t1_sqrt;
    k = 0.5 * (k + k.adjoint()).eval();
    const double ld2 = logdet_hermitian_pd(MatrixC::Identity(l, l) +
                                           (p.s_bar * s1.delta) * corr.T1.matrix() +
                                           (s1.delta * s1.gamma) * k);
    const double lm = static_cast<double>(l) / m;
    const double ld3 = logdet_hermitian_pd(
        MatrixC::Identity(m, m) + (lm * s1.delta * s1.omega_under) * corr.T2.matrix());
    return ld1 + ld2 + ld3 - p.s_bar * l * s1.delta * s1.omega_bar -
           2.0 * l * s1.delta * s1.omega_under * s1.gamma;
}

double mean_I2(const CorrelationSet& corr, const SystemParams& p, const SolutionS2& s2) {
    p.validate();
    corr.validate_dims(p);
    const int n = p.N, l = p.L;
    const double ld1 = logdet_hermitian_pd(MatrixC::Identity(n, n) +
                                           (p.s_under * s2.tau_bar / p.z) * corr.R1.matrix());
    const double ld2 =
        logdet_hermitian_pd(MatrixC::Identity(l, l) + (p.s_under * s2.tau) * corr.T1.matrix());
    return ld1 + ld2 - l * p.s_under * s2.tau * s2.tau_bar;
}

Eigen::Matrix2d covariance_V(const Functionals& fn) {
    if (!(fn.DeltaV1 > 0.0) || !(fn.DeltaV2 > 0.0) || !(fn.DeltaC > 0.0))
        throw NumericalError("covariance_V: nonpositive Delta term (upstream solve failed?)");
    Eigen::Matrix2d v;
    v << -std::log(fn.DeltaV1), -std::log(fn.DeltaC), -std::log(fn.DeltaC), -std::log(fn.DeltaV2);
    return v;
}

GaussianModel gaussian_model(const CorrelationSet& corr, const SystemParams& p,
                             const SolverOptions& opt) {
    const SolverWorkspace ws(corr);
    const SolutionS1 s1 = solve_system1(ws, p, opt);
    const SolutionS2 s2 = solve_system2(ws, p, opt);
    const DetMatrices dm = det_matrices(corr, p, s1, s2);
    const Functionals fn = functionals(corr, dm, s1, s2, p);
    GaussianModel gm;
    gm.mean_I1 = mean_I1(corr, p, s1);
    gm.mean_I2 = mean_I2(corr, p, s2);
    gm.V = covariance_V(fn);
    gm.equal_noise_args = (p.s_bar == p.s_under);
    return gm;
}

namespace {

double variance_of_difference(const GaussianModel& gm) {
    const double v = gm.V(0, 0) + gm.V(1, 1) - 2.0 * gm.V(0, 1);
    if (!(v > 0.0)) throw NumericalError("outage: variance of I1 - I2 is not positive");
    return v;
}

}  // namespace

double outage_probability(const GaussianModel& gm, double rate_nats) {
    if (!gm.equal_noise_args)
        throw ParameterError("outage requires equal noise arguments for the two MI terms");
    const double v = variance_of_difference(gm);
    return 1.0 - q_function((rate_nats - gm.mean_I1 + gm.mean_I2) / std::sqrt(v));
}

double outage_rate(const GaussianModel& gm, double p_out) {
    if (!gm.equal_noise_args)
        throw ParameterError("outage requires equal noise arguments for the two MI terms");
    if (!(p_out > 0.0 && p_out < 1.0)) throw ParameterError("outage probability must be in (0, 1)");
    const double v = variance_of_difference(gm);
    return gm.mean_I1 - gm.mean_I2 + std::sqrt(v) * q_inverse(1.0 - p_out);
}

std::pair<double, double> iid_means(const IidParams& iid, double N, double s1_sq, double s2_sq) {
    if (s1_sq < 0.0 || s2_sq <= 0.0) throw ParameterError("iid_means: invalid noise powers");
    const double c1 = iid.c1, c2 = iid.c2;
    const double L = N / c1, M = L / c2;
    const double mf = iid_mF(iid, s1_sq, s2_sq);
    const double mg = iid_mG(c1, s1_sq, s2_sq);
    const double af = c1 * s2_sq * mf + 1.0 - c1;
    const double ef = s2_sq * mf - 1.0 + s1_sq * mf * af;
    const double i1 = -N * std::log(s2_sq * mf) - L * std::log(af) -
                      M * std::log1p(c1 * c2 * ef) +
                      N * (2.0 * s2_sq * mf - 2.0 + s1_sq * mf * af);
    const double i2 = -N * std::log(s2_sq * mg) - L * std::log(c1 * s2_sq * mg + 1.0 - c1) +
                      N * (s2_sq * mg - 1.0);
    return {i1, i2};
}

Eigen::Matrix2d iid_covariance(const IidParams& iid, double s1_sq, double s2_sq) {
    if (s1_sq < 0.0 || s2_sq <= 0.0) throw ParameterError("iid_covariance: invalid noise powers");
    const double c1 = iid.c1, c2 = iid.c2;
    const double mf = iid_mF(iid, s1_sq, s2_sq);
    const double mg = iid_mG(c1, s1_sq, s2_sq);
    const double af = c1 * s2_sq * mf + 1.0 - c1;
    const double ef = s2_sq * mf - 1.0 + s1_sq * mf * af;
    const double dv1 = 1.0 + (2.0 * s2_sq + (c1 - 1.0) * (s1_sq + c2 + 1.0)) * ef -
                       c1 * (s2_sq * mf - 1.0) * (s2_sq * mf - 1.0) + (c1 - 1.0) / c1 +
                       (c1 + 1.0) / c1 * af + (2.0 * (s1_sq + 1.0) + c2 * (c1 + 1.0)) * ef * af;
    double dv2, dc;
    if (s1_sq == 0.0) {
        dv2 = 1.0;
        dc = 1.0;
    } else {
        dv2 = (s2_sq / s1_sq + 1.0 + c1) * s2_sq * mg + 1.0 - c1 - s2_sq / s1_sq;
        dc = 1.0 - c1 * (1.0 - s2_sq * mf) * (1.0 - s2_sq * mg);
    }
    if (!(dv1 > 0.0) || !(dv2 > 0.0) || !(dc > 0.0))
        throw NumericalError("iid_covariance: nonpositive Delta term");
    Eigen::Matrix2d v;
    v << -std::log(dv1), -std::log(dc), -std::log(dc), -std::log(dv2);
    return v;
}

std::pair<double, double> iid_large_L(double c, double N, double M, double s1_sq, double s2_sq) {
    if (c <= 0.0) throw ParameterError("iid_large_L: c must be > 0");
    if (s1_sq < 0.0 || s2_sq <= 0.0) throw ParameterError("iid_large_L: invalid noise powers");
    const double S = s1_sq + s2_sq;
    // c S m^2 + (S + 1 - c) m - 1 = 0, positive root
    const double a = c * S, b = S + 1.0 - c;
    const double m = (-b + std::sqrt(b * b + 4.0 * a)) / (2.0 * a);
    const double mean = -N * std::log(S * m) - M * std::log1p(c * S * m - c) + N * (S * m - 1.0);
    const double dv1 = (S + 1.0 + c) * S * m + 1.0 - c - S;
    if (!(dv1 > 0.0)) throw NumericalError("iid_large_L: nonpositive variance term");
    return {mean, -std::log(dv1)};
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

namespace {

// Rational approximation for the standard normal quantile (Acklam), refined
// below by Newton steps on the tail function.
double probit_approx(double u) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    if (u < plow) {
        const double q = std::sqrt(-2.0 * std::log(u));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (u > phigh) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - u));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = u - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double q_inverse(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("q_inverse: argument must be in (0, 1)");
    double x = -probit_approx(p);  // Q(x) = p  <=>  Phi(-x) = p
    for (int i = 0; i < 3; ++i) {
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        if (pdf == 0.0) break;
        const double step = (q_function(x) - p) / pdf;
        x += step;
        if (std::abs(step) < 1e-13 * (1.0 + std::abs(x))) break;
    }
    return x;
}

Eigen::Matrix4d jacobian_system1(const Functionals& fn) {
    const double lm = fn.ratio_mid_tx;
    Eigen::Matrix4d k;
    k << 1.0, fn.s_bar * fn.delta2, fn.gamma * fn.delta2, fn.omega_under * fn.delta2,
        fn.s_bar * fn.omega_bar2 + fn.gamma * fn.mixed11, 1.0, 0.0, fn.delta * fn.mixed11,
        fn.s_bar * fn.mixed11 + fn.gamma * fn.omega_under2, 0.0, 1.0, fn.delta * fn.omega_under2,
        lm * fn.omega_under * fn.gamma2, 0.0, lm * fn.delta * fn.gamma2, 1.0;
    return k;
}

Eigen::Matrix2d jacobian_system2(const Functionals& fn) {
    Eigen::Matrix2d k;
    k << 1.0, fn.s_under * fn.tau2, fn.s_under * fn.tau_bar2, 1.0;
    return k;
}

}  // namespace twohop
