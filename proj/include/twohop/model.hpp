#pragma once

#include "twohop/types.hpp"

#include <string>

namespace twohop {

/// Angular correlation matrix: entry (m,n) is the integral over the incidence
/// angle of a Gaussian power window (mean eta_deg, RMS spread delta_c_deg)
/// times the array phase term for antenna spacing d_s wavelengths. Entries
/// depend on m-n only (Toeplitz); the result is Hermitian and PSD-repaired.
/// Throws ParameterError for delta_c_deg <= 0 or n < 1, NumericalError when
/// panel-doubled quadrature disagrees beyond 1e-9.
HermitianPSD build_correlation(double eta_deg, double delta_c_deg, double d_s, int n);

/// SVD reduction of the raw channel description (A1, B1, A2, B2, Phi, P) to the
/// equivalent correlation set: R_i from the left factors of A_i, T_1 from
/// B1*Phi, T_2 from B2*P^{1/2}.
CorrelationSet reduce_raw_spec(const RawChannelSpec& raw);

/// Hermitian PSD square root via eigendecomposition with eigenvalue clamping
/// at zero. Throws ParameterError when the input is not Hermitian.
MatrixC psd_sqrt(const MatrixC& m);
inline MatrixC psd_sqrt(const HermitianPSD& m) { return psd_sqrt(m.matrix()); }

/// Dimension ratios, normalized traces, and spectral norms used as numeric
/// diagnostics of the large-system assumptions. Values only, no pass/fail.
struct AssumptionReport {
    double ratio_rx_mid = 0.0;  // N/L
    double ratio_mid_tx = 0.0;  // L/M
    double tr_r2t1 = 0.0;       // (1/L) Tr(R2 T1)
    double tr_r1 = 0.0;         // (1/N) Tr R1
    double tr_r2 = 0.0;         // (1/L) Tr R2
    double tr_t1 = 0.0;         // (1/L) Tr T1
    double tr_t2 = 0.0;         // (1/M) Tr T2
    double norm_r1 = 0.0, norm_r2 = 0.0, norm_t1 = 0.0, norm_t2 = 0.0;
};

AssumptionReport assumption_report(const CorrelationSet& corr, const SystemParams& p);

// Complex matrix CSV: header "# dim=<n> hermitian", one row per matrix row,
// entries like "0.5", "0.5+0.25i", "0.5-0.25i".
MatrixC read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const MatrixC& m);

}  // namespace twohop
