#pragma once

#include "twohop/deterministic.hpp"
#include "twohop/types.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace twohop {

/// One draw of the equivalent two-hop channel.
struct ChannelSample {
    MatrixC H1;  // N x L
    MatrixC H2;  // L x M
};

/// Draws channels H_i = R_i^{1/2} X_i T_i^{1/2} with counter-based streams:
/// sample `index` is a pure function of (seed, index), independent of the
/// order or parallelism of the draws.
class ChannelSampler {
  public:
    ChannelSampler(const CorrelationSet& corr, std::uint64_t seed);
    ChannelSample draw(std::uint64_t index) const;

  private:
    MatrixC sq_r1_, sq_t1_, sq_r2_, sq_t2_;
    int n_, l_, m_;
    std::uint64_t seed_;
};

/// Single-draw convenience wrapper over ChannelSampler.
ChannelSample sample_channel(const CorrelationSet& corr, const SystemParams& p,
                             std::uint64_t stream_index, std::uint64_t seed);

/// Exact MI pair (I1, I2) in nats of one channel draw, via Cholesky log-dets.
std::pair<double, double> mi_pair(const ChannelSample& ch, const SystemParams& p);

struct MCResult {
    long n_samples = 0;
    std::uint64_t seed = 0;
    double mean_I1 = 0.0, mean_I2 = 0.0;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    double stderr_I1 = 0.0, stderr_I2 = 0.0;
    std::vector<std::pair<double, double>> samples;  // per-draw (I1, I2), index order
};

/// Empirical mean/covariance of (I1, I2). The reduction runs in sample-index
/// order with compensated summation, so the result is identical for any
/// worker count.
MCResult run_mc(const CorrelationSet& corr, const SystemParams& p, long n_samples,
                std::uint64_t seed, int workers, bool keep_samples = true);

/// Squared Mahalanobis distances of the samples about the theoretical mean,
/// using V^{-1}; sorted ascending.
std::vector<double> mahalanobis_sq(const MCResult& mc, const GaussianModel& gm);

/// Kolmogorov-Smirnov distance between sorted squared distances and the
/// chi-square(2) distribution.
double ks_distance_chi2(const std::vector<double>& sorted_d2);

struct EsdHistogram {
    std::vector<double> edges;    // n_bins + 1
    std::vector<double> density;  // n_bins, integrates to mass
    double mass = 0.0;
};

/// Normalized eigenvalue histogram of H1 H2 H2^H H1^H + s_bar H1 H1^H.
/// hi <= lo selects the automatic range [0, 1.05 * max eigenvalue].
EsdHistogram empirical_esd(const ChannelSample& ch, double s_bar, int n_bins, double lo = 0.0,
                           double hi = 0.0);

struct ConvergencePoint {
    int dim = 0;
    double mean_err = 0.0, cov_err = 0.0;
    double mean_se = 0.0, cov_se = 0.0;
    bool reliable = true;  // false when the MC error exceeds half the gap
};

struct ConvergenceStudy {
    std::vector<ConvergencePoint> points;
    double mean_slope = 0.0, mean_intercept = 0.0;
    double cov_slope = 0.0, cov_intercept = 0.0;
};

/// Error of the deterministic equivalents versus MC across a dimension ramp
/// (N = L = M = dim), with log-log regression slopes over the reliable points.
ConvergenceStudy convergence_study(const std::function<CorrelationSet(int)>& family,
                                   const SystemParams& base, const std::vector<int>& dims,
                                   long n_samples, std::uint64_t seed, int workers);

/// Least-squares fit of log(y) against log(x); returns (slope, intercept).
std::pair<double, double> loglog_fit(const std::vector<std::pair<double, double>>& xy);

}  // namespace twohop
