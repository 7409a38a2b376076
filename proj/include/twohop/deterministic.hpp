#pragma once

#include "twohop/fixed_point.hpp"
#include "twohop/types.hpp"

#include <array>
#include <utility>

namespace twohop {

/// The five deterministic resolvent-equivalent matrices, with the residuals of
/// the defining trace identities recorded at construction.
struct DetMatrices {
    MatrixC F_delta;    // N x N, Hermitian PD
    MatrixC F_omega;    // L x L, generally non-Hermitian
    MatrixC F_gamma;    // M x M, Hermitian PD
    MatrixC G_tau;      // N x N, Hermitian PD
    MatrixC G_tau_bar;  // L x L
    // |trace - solution| for delta, omega_bar, omega_under, gamma, tau, tau_bar
    std::array<double, 6> fp_residuals{};
};

DetMatrices det_matrices(const CorrelationSet& corr, const SystemParams& p, const SolutionS1& s1,
                         const SolutionS2& s2);

/// Normalized-trace functionals of the deterministic matrices. Naming follows
/// the subscript convention: a trailing I marks the variant with one bare
/// resolvent factor; mixed_kl is (1/L)Tr[(T1 Fw)^k (R2 T1 Fw)^l].
struct Functionals {
    double delta2 = 0, delta3 = 0, delta2I = 0, delta3I = 0;
    double omega_bar2 = 0, omega_bar3 = 0;
    double omega_under2 = 0, omega_under3 = 0, omega_under2I = 0, omega_under3I = 0;
    double mixed11 = 0, mixed21 = 0, mixed12 = 0;
    double mixed11I = 0, mixed12I = 0;
    double gamma2 = 0, gamma3 = 0;
    double varsigma = 0, Delta = 0, DeltaV1 = 0;

    double tau2 = 0, tau3 = 0, tau2I = 0, tau3I = 0;
    double tau_bar2 = 0, tau_bar3 = 0;
    double DeltaV2 = 0;

    double vartheta = 0;                      // (1/L)Tr[R1 Gt R1 Fd]
    double vartheta12 = 0, vartheta12I = 0;   // (1/L)Tr[R1 Gt (R1 Fd)^2], ... (R1 Fd) Fd]
    double vartheta1I1 = 0;                   // (1/L)Tr[Gt R1 Fd]
    double phi_bar = 0, phi_bar12 = 0;        // (1/L)Tr[(T1 Gtb)(T1 Fw)^l]
    double phi_under = 0, phi_under12 = 0;    // (1/L)Tr[(T1 Gtb)(T1 Fw R2)^l]
    double cross_phi12 = 0;                   // (1/L)Tr[T1 Gtb T1 Fw R2 T1 Fw]
    double cross_phi12_tilde = 0;             // (1/L)Tr[T1 Gtb T1 Fw T1 Fw R2]
    double DeltaC = 0;

    // solution scalars and parameters carried along for downstream assembly
    double delta = 0, omega_bar = 0, omega_under = 0, gamma = 0, tau = 0, tau_bar = 0;
    double ratio_mid_tx = 0;  // L/M
    double s_bar = 0, s_under = 0, z = 0;
};

Functionals functionals(const CorrelationSet& corr, const DetMatrices& dm, const SolutionS1& s1,
                        const SolutionS2& s2, const SystemParams& p);

/// Deterministic equivalents of the two MI means, in nats. The middle log-det
/// of the first mean is evaluated on its Hermitian-similar form.
double mean_I1(const CorrelationSet& corr, const SystemParams& p, const SolutionS1& s1);
double mean_I2(const CorrelationSet& corr, const SystemParams& p, const SolutionS2& s2);

/// 2x2 CLT covariance [[-log DV1, -log DC], [-log DC, -log DV2]]. Throws
/// NumericalError when any Delta term is not positive.
Eigen::Matrix2d covariance_V(const Functionals& fn);

/// Joint Gaussian description of (I1, I2).
struct GaussianModel {
    double mean_I1 = 0.0;
    double mean_I2 = 0.0;
    Eigen::Matrix2d V = Eigen::Matrix2d::Zero();
    bool equal_noise_args = false;  // s_bar == s_under at construction
};

GaussianModel gaussian_model(const CorrelationSet& corr, const SystemParams& p,
                             const SolverOptions& opt = {});

/// P(I <= R) under the Gaussian approximation; requires equal noise arguments
/// and positive variance of I1 - I2.
double outage_probability(const GaussianModel& gm, double rate_nats);
/// Largest rate with outage probability <= p_out.
double outage_rate(const GaussianModel& gm, double p_out);

/// Closed-form i.i.d. means (I1, I2) in nats for receive dimension N.
std::pair<double, double> iid_means(const IidParams& iid, double N, double s1_sq, double s2_sq);
/// Closed-form i.i.d. CLT covariance.
Eigen::Matrix2d iid_covariance(const IidParams& iid, double s1_sq, double s2_sq);
/// Mean and variance of I in the regime where the middle dimension outgrows
/// both ends, c = c1*c2 held fixed.
std::pair<double, double> iid_large_L(double c, double N, double M, double s1_sq, double s2_sq);

/// Gaussian tail probability and its inverse (Newton-polished to 1e-12).
double q_function(double x);
double q_inverse(double p);

/// Jacobian-style matrices of the two fixed-point systems; their determinants
/// reproduce DeltaV1 and DeltaV2.
Eigen::Matrix4d jacobian_system1(const Functionals& fn);
Eigen::Matrix2d jacobian_system2(const Functionals& fn);

}  // namespace twohop
