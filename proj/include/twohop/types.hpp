#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace twohop {

using cxd = std::complex<double>;
using MatrixC = Eigen::MatrixXcd;
using VectorD = Eigen::VectorXd;

/// Invalid arguments, inconsistent dimensions, malformed inputs.
class ParameterError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failures: loss of positive definiteness, quadrature disagreement,
/// degenerate variances, and similar.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Fixed-point iteration did not reach the requested residual. Carries the last
/// iterate so sweeps can log diagnostics and continue.
class ConvergenceError : public NumericalError {
  public:
    ConvergenceError(const std::string& what, double res, long iters, std::vector<cxd> last)
        : NumericalError(what), residual(res), iterations(iters), last_iterate(std::move(last)) {}

    double residual;
    long iterations;
    std::vector<cxd> last_iterate;
};

/// Antenna/element counts and the noise-power arguments of the two MI terms.
/// All powers are linear (watts).
struct SystemParams {
    int N = 0;  // receive antennas
    int L = 0;  // relay antennas / reflecting elements
    int M = 0;  // transmit antennas
    double s_bar = 0.0;    // relay-noise argument of I1
    double s_under = 0.0;  // relay-noise argument of I2 (need not equal s_bar)
    double z = 1.0;        // receiver noise power

    void validate() const {
        if (N < 1 || L < 1 || M < 1) throw ParameterError("dimensions must be >= 1");
        if (z <= 0.0) throw ParameterError("z must be > 0");
        if (s_bar < 0.0 || s_under < 0.0) throw ParameterError("noise arguments must be >= 0");
    }
};

/// Hermitian positive semidefinite matrix. Construction validates hermiticity
/// (1e-12 absolute) and repairs tiny negative eigenvalues; eigenvalues below
/// -1e-10 * lambda_max are rejected as a genuine indefiniteness.
class HermitianPSD {
  public:
    static HermitianPSD from_matrix(const MatrixC& m);
    static HermitianPSD identity(int dim);
    static HermitianPSD zero(int dim);
    /// Diagonal matrix from nonnegative entries.
    static HermitianPSD diagonal(const VectorD& d);

    const MatrixC& matrix() const { return mat_; }
    int dim() const { return static_cast<int>(mat_.rows()); }
    /// Eigenvalue mass removed by the PSD repair (0 when input was already PSD).
    double clamped_mass() const { return clamped_; }

  private:
    HermitianPSD(MatrixC m, double clamped) : mat_(std::move(m)), clamped_(clamped) {}
    MatrixC mat_;
    double clamped_ = 0.0;
};

/// The four correlation matrices of the equivalent channel model.
struct CorrelationSet {
    HermitianPSD R1;  // N x N receive
    HermitianPSD T1;  // L x L
    HermitianPSD R2;  // L x L
    HermitianPSD T2;  // M x M transmit

    static CorrelationSet identity(int N, int L, int M) {
        return {HermitianPSD::identity(N), HermitianPSD::identity(L), HermitianPSD::identity(L),
                HermitianPSD::identity(M)};
    }

    void validate_dims(const SystemParams& p) const {
        if (R1.dim() != p.N || T1.dim() != p.L || R2.dim() != p.L || T2.dim() != p.M)
            throw ParameterError("correlation matrix dimensions inconsistent with system parameters");
    }
};

/// Raw physical channel specification before the SVD reduction.
struct RawChannelSpec {
    MatrixC A1;   // N x N
    MatrixC B1;   // L x L
    MatrixC A2;   // L x L
    MatrixC B2;   // M x M
    MatrixC Phi;  // L x L amplification/reflection
    MatrixC P;    // M x M transmit covariance, Hermitian PSD
};

}  // namespace twohop
