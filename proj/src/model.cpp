#include "twohop/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <sstream>

namespace twohop {

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; symmetric).
constexpr int kGlOrder = 16;
constexpr double kGlNodes[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605, 0.4580167776572273863424194,
    0.6178762444026437484466718, 0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
constexpr double kGlWeights[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637, 0.1691565193950025381893121,
    0.1495959888165767320815017, 0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

// Composite Gauss-Legendre integral of f over [a, b] with `panels` panels.
template <typename F>
auto composite_gl(F&& f, double a, double b, int panels) -> decltype(f(0.0)) {
    using R = decltype(f(0.0));
    const double h = (b - a) / panels;
    R total{};
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        const double half = 0.5 * h;
        R s{};
        for (int i = 0; i < kGlOrder / 2; ++i) {
            s += kGlWeights[i] * (f(mid - half * kGlNodes[i]) + f(mid + half * kGlNodes[i]));
        }
        total += half * s;
    }
    return total;
}

cxd correlation_entry(double eta_deg, double delta_c_deg, double d_s, int lag, int panels) {
    const double inv_two_var = 1.0 / (2.0 * delta_c_deg * delta_c_deg);
    const double norm = 1.0 / std::sqrt(2.0 * M_PI * delta_c_deg * delta_c_deg);
    const double phase_coef = 2.0 * M_PI * d_s * lag;
    auto f = [&](double phi) -> cxd {
        const double d = phi - eta_deg;
        const double window = norm * std::exp(-d * d * inv_two_var);
        if (phase_coef == 0.0) return {window, 0.0};
        const double arg = phase_coef * std::sin(M_PI * phi / 180.0);
        return {window * std::cos(arg), window * std::sin(arg)};
    };
    return composite_gl(f, -180.0, 180.0, panels);
}

}  // namespace

HermitianPSD HermitianPSD::from_matrix(const MatrixC& m) {
    if (m.rows() != m.cols() || m.rows() < 1) throw ParameterError("HermitianPSD: matrix must be square");
    const double herm_err = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (herm_err > 1e-12)
        throw ParameterError("HermitianPSD: matrix is not Hermitian (max deviation " +
                             std::to_string(herm_err) + ")");
    Eigen::SelfAdjointEigenSolver<MatrixC> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("HermitianPSD: eigendecomposition failed");
    VectorD ev = es.eigenvalues();
    const double lam_max = ev.maxCoeff();
    const double tol = 1e-10 * std::max(lam_max, 0.0);
    double clamped = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -tol)
            throw ParameterError("HermitianPSD: eigenvalue " + std::to_string(ev[i]) +
                                 " below PSD repair tolerance");
        if (ev[i] < 0.0) {
            clamped -= ev[i];
            ev[i] = 0.0;
        }
    }
    MatrixC repaired = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    // keep exact hermiticity after the reassembly round-off
    repaired = 0.5 * (repaired + repaired.adjoint()).eval();
    return HermitianPSD(std::move(repaired), clamped);
}

HermitianPSD HermitianPSD::identity(int dim) {
    if (dim < 1) throw ParameterError("HermitianPSD: dim must be >= 1");
    return HermitianPSD(MatrixC::Identity(dim, dim), 0.0);
}

HermitianPSD HermitianPSD::zero(int dim) {
    if (dim < 1) throw ParameterError("HermitianPSD: dim must be >= 1");
    return HermitianPSD(MatrixC::Zero(dim, dim), 0.0);
}

HermitianPSD HermitianPSD::diagonal(const VectorD& d) {
    if (d.size() < 1) throw ParameterError("HermitianPSD: dim must be >= 1");
    if (d.minCoeff() < 0.0) throw ParameterError("HermitianPSD: diagonal entries must be >= 0");
    return HermitianPSD(d.cast<cxd>().asDiagonal(), 0.0);
}

HermitianPSD build_correlation(double eta_deg, double delta_c_deg, double d_s, int n) {
    if (delta_c_deg <= 0.0) throw ParameterError("build_correlation: angle spread must be > 0");
    if (d_s < 0.0) throw ParameterError("build_correlation: antenna spacing must be >= 0");
    if (n < 1) throw ParameterError("build_correlation: n must be >= 1");

    // Toeplitz: only lags 0..n-1 are needed; negative lags are conjugates.
    // The phase term oscillates at ~0.11 * d_s * lag radians per degree, so
    // the panel count grows with the lag to keep nodes per period constant.
    std::vector<cxd> g(n), g_fine(n);
    for (int k = 0; k < n; ++k) {
        const int panels =
            64 * std::max(1, static_cast<int>(std::ceil(d_s * k / 12.0)));
        g[k] = correlation_entry(eta_deg, delta_c_deg, d_s, k, panels);
        g_fine[k] = correlation_entry(eta_deg, delta_c_deg, d_s, k, 2 * panels);
        if (std::abs(g[k] - g_fine[k]) > 1e-9)
            throw NumericalError("build_correlation: quadrature did not converge at lag " +
                                 std::to_string(k));
    }
    MatrixC c(n, n);
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col)
            c(row, col) = (row >= col) ? g[row - col] : std::conj(g[col - row]);
    return HermitianPSD::from_matrix(c);
}

CorrelationSet reduce_raw_spec(const RawChannelSpec& raw) {
    const auto n = raw.A1.rows();
    const auto l = raw.B1.rows();
    const auto m = raw.B2.rows();
    if (raw.A1.cols() != n || raw.B1.cols() != l || raw.A2.rows() != l || raw.A2.cols() != l ||
        raw.B2.cols() != m || raw.Phi.rows() != l || raw.Phi.cols() != l || raw.P.rows() != m ||
        raw.P.cols() != m)
        throw ParameterError("reduce_raw_spec: inconsistent dimensions");

    auto left_gram = [](const MatrixC& a) {  // U Sigma^2 U^H = A A^H
        return HermitianPSD::from_matrix(0.5 * ((a * a.adjoint()).eval() +
                                                (a * a.adjoint()).eval().adjoint()));
    };
    auto right_gram = [](const MatrixC& a) {  // V Sigma^2 V^H = A^H A
        return HermitianPSD::from_matrix(0.5 * ((a.adjoint() * a).eval() +
                                                (a.adjoint() * a).eval().adjoint()));
    };

    const MatrixC b1phi = raw.B1 * raw.Phi;
    const MatrixC b2psqrt = raw.B2 * psd_sqrt(raw.P);
    return CorrelationSet{left_gram(raw.A1), right_gram(b1phi), left_gram(raw.A2),
                          right_gram(b2psqrt)};
}

MatrixC psd_sqrt(const MatrixC& m) {
    if (m.rows() != m.cols()) throw ParameterError("psd_sqrt: matrix must be square");
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw ParameterError("psd_sqrt: matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<MatrixC> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("psd_sqrt: eigendecomposition failed");
    VectorD ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

AssumptionReport assumption_report(const CorrelationSet& corr, const SystemParams& p) {
    p.validate();
    corr.validate_dims(p);
    AssumptionReport rep;
    rep.ratio_rx_mid = static_cast<double>(p.N) / p.L;
    rep.ratio_mid_tx = static_cast<double>(p.L) / p.M;
    rep.tr_r1 = corr.R1.matrix().real().trace() / p.N;
    rep.tr_r2 = corr.R2.matrix().real().trace() / p.L;
    rep.tr_t1 = corr.T1.matrix().real().trace() / p.L;
    rep.tr_t2 = corr.T2.matrix().real().trace() / p.M;
    rep.tr_r2t1 = (corr.R2.matrix() * corr.T1.matrix()).trace().real() / p.L;
    auto spectral_norm = [](const MatrixC& m) {
        Eigen::SelfAdjointEigenSolver<MatrixC> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    };
    rep.norm_r1 = spectral_norm(corr.R1.matrix());
    rep.norm_r2 = spectral_norm(corr.R2.matrix());
    rep.norm_t1 = spectral_norm(corr.T1.matrix());
    rep.norm_t2 = spectral_norm(corr.T2.matrix());
    return rep;
}

namespace {

cxd parse_complex_entry(const std::string& tok, const std::string& path) {
    // forms: "re", "re+imi", "re-imi"
    std::string s = tok;
    if (s.empty()) throw ParameterError(path + ": empty matrix entry");
    if (s.back() != 'i') {
        size_t pos = 0;
        const double re = std::stod(s, &pos);
        if (pos != s.size()) throw ParameterError(path + ": malformed entry '" + tok + "'");
        return {re, 0.0};
    }
    s.pop_back();
    // split at the sign that separates real and imaginary parts (skip a
    // leading sign and exponent signs)
    size_t split = std::string::npos;
    for (size_t i = 1; i < s.size(); ++i) {
        if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') split = i;
    }
    if (split == std::string::npos) throw ParameterError(path + ": malformed entry '" + tok + "'");
    const double re = std::stod(s.substr(0, split));
    const double im = std::stod(s.substr(split));
    return {re, im};
}

}  // namespace

MatrixC read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open matrix file: " + path);
    std::string header;
    std::getline(in, header);
    int dim = 0;
    if (std::sscanf(header.c_str(), "# dim=%d hermitian", &dim) != 1 || dim < 1)
        throw ParameterError(path + ": missing '# dim=<n> hermitian' header");
    MatrixC m(dim, dim);
    std::string line;
    for (int r = 0; r < dim; ++r) {
        if (!std::getline(in, line)) throw ParameterError(path + ": expected " + std::to_string(dim) + " rows");
        std::stringstream ss(line);
        std::string tok;
        for (int c = 0; c < dim; ++c) {
            if (!std::getline(ss, tok, ','))
                throw ParameterError(path + ": row " + std::to_string(r + 1) + " has too few entries");
            m(r, c) = parse_complex_entry(tok, path);
        }
    }
    return m;
}

void write_matrix_csv(const std::string& path, const MatrixC& m) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot open for writing: " + path);
    out << "# dim=" << m.rows() << " hermitian\n";
    char buf[128];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            const double re = m(r, c).real();
            const double im = m(r, c).imag();
            if (im == 0.0) {
                std::snprintf(buf, sizeof buf, "%.17g", re);
                out << buf;
            } else {
                std::snprintf(buf, sizeof buf, "%.17g%+.17gi", re, im);
                out << buf;
            }
        }
        out << '\n';
    }
}

}  // namespace twohop
