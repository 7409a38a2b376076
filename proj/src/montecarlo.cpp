#include "twohop/montecarlo.hpp"

#include "twohop/linalg.hpp"
#include "twohop/model.hpp"
#include "twohop/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

namespace twohop {

namespace {

bool is_identity(const MatrixC& m) {
    return (m - MatrixC::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() < 1e-14;
}

}  // namespace

ChannelSampler::ChannelSampler(const CorrelationSet& corr, std::uint64_t seed)
    : sq_r1_(psd_sqrt(corr.R1)),
      sq_t1_(psd_sqrt(corr.T1)),
      sq_r2_(psd_sqrt(corr.R2)),
      sq_t2_(psd_sqrt(corr.T2)),
      n_(corr.R1.dim()),
      l_(corr.T1.dim()),
      m_(corr.T2.dim()),
      seed_(seed) {
    if (is_identity(sq_r1_)) sq_r1_.resize(0, 0);  // identity factors are skipped
    if (is_identity(sq_t1_)) sq_t1_.resize(0, 0);
    if (is_identity(sq_r2_)) sq_r2_.resize(0, 0);
    if (is_identity(sq_t2_)) sq_t2_.resize(0, 0);
}

ChannelSample ChannelSampler::draw(std::uint64_t index) const {
    // one Philox block per complex entry; counters are laid out column-major
    // over X1 then X2 so a draw never depends on evaluation order
    const double scale1 = 1.0 / std::sqrt(2.0 * l_);
    const double scale2 = 1.0 / std::sqrt(2.0 * m_);
    ChannelSample ch;
    ch.H1.resize(n_, l_);
    ch.H2.resize(l_, m_);
    std::uint64_t ctr = 0;
    for (int c = 0; c < l_; ++c)
        for (int r = 0; r < n_; ++r) ch.H1(r, c) = complex_gaussian(seed_, index, ctr++, scale1);
    for (int c = 0; c < m_; ++c)
        for (int r = 0; r < l_; ++r) ch.H2(r, c) = complex_gaussian(seed_, index, ctr++, scale2);
    if (sq_r1_.size()) ch.H1 = sq_r1_ * ch.H1;
    if (sq_t1_.size()) ch.H1 = ch.H1 * sq_t1_;
    if (sq_r2_.size()) ch.H2 = sq_r2_ * ch.H2;
    if (sq_t2_.size()) ch.H2 = ch.H2 * sq_t2_;
    return ch;
}

ChannelSample sample_channel(const CorrelationSet& corr, const SystemParams& p,
                             std::uint64_t stream_index, std::uint64_t seed) {
    corr.validate_dims(p);
    return ChannelSampler(corr, seed).draw(stream_index);
}

std::pair<double, double> mi_pair(const ChannelSample& ch, const SystemParams& p) {
    if (p.z <= 0.0) throw ParameterError("mi_pair: z must be > 0");
    const auto n = ch.H1.rows();
    MatrixC c;
    c.noalias() = ch.H1 * ch.H2;
    MatrixC g1 = MatrixC::Zero(n, n);
    g1.selfadjointView<Eigen::Lower>().rankUpdate(ch.H1);
    MatrixC a1 = MatrixC::Zero(n, n);
    a1.selfadjointView<Eigen::Lower>().rankUpdate(c);
    a1 = MatrixC::Identity(n, n) +
         (1.0 / p.z) * (MatrixC(a1.selfadjointView<Eigen::Lower>()) +
                        p.s_bar * MatrixC(g1.selfadjointView<Eigen::Lower>()));
    MatrixC a2 = MatrixC::Identity(n, n) +
                 (p.s_under / p.z) * MatrixC(g1.selfadjointView<Eigen::Lower>());
    return {logdet_hermitian_pd(a1), logdet_hermitian_pd(a2)};
}

MCResult run_mc(const CorrelationSet& corr, const SystemParams& p, long n_samples,
                std::uint64_t seed, int workers, bool keep_samples) {
    p.validate();
    corr.validate_dims(p);
    if (n_samples < 2) throw ParameterError("run_mc: need at least 2 samples");
    if (workers < 1) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;

    const ChannelSampler sampler(corr, seed);
    std::vector<std::pair<double, double>> vals(n_samples);

    std::atomic<long> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    long first_error_index = -1;

    auto work = [&]() {
        constexpr long kBlock = 16;
        for (;;) {
            const long start = next.fetch_add(kBlock);
            if (start >= n_samples) return;
            const long stop = std::min(start + kBlock, n_samples);
            for (long i = start; i < stop; ++i) {
                try {
                    vals[i] = mi_pair(sampler.draw(static_cast<std::uint64_t>(i)), p);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error || i < first_error_index) {
                        first_error = std::current_exception();
                        first_error_index = i;
                    }
                    return;
                }
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (first_error) {
        try {
            std::rethrow_exception(first_error);
        } catch (const std::exception& e) {
            throw NumericalError("run_mc: sample " + std::to_string(first_error_index) +
                                 " failed: " + e.what());
        }
    }

    // index-order compensated (Neumaier) reduction: identical for any worker count
    auto comp_sum = [](auto&& term, long n) {
        double s = 0.0, comp = 0.0;
        for (long i = 0; i < n; ++i) {
            const double x = term(i);
            const double t = s + x;
            comp += (std::abs(s) >= std::abs(x)) ? (s - t) + x : (x - t) + s;
            s = t;
        }
        return s + comp;
    };
    const double m1 = comp_sum([&](long i) { return vals[i].first; }, n_samples) / n_samples;
    const double m2 = comp_sum([&](long i) { return vals[i].second; }, n_samples) / n_samples;
    const double c11 =
        comp_sum([&](long i) { return (vals[i].first - m1) * (vals[i].first - m1); }, n_samples) /
        (n_samples - 1);
    const double c22 =
        comp_sum([&](long i) { return (vals[i].second - m2) * (vals[i].second - m2); },
                 n_samples) /
        (n_samples - 1);
    const double c12 =
        comp_sum([&](long i) { return (vals[i].first - m1) * (vals[i].second - m2); },
                 n_samples) /
        (n_samples - 1);

    MCResult res;
    res.n_samples = n_samples;
    res.seed = seed;
    res.mean_I1 = m1;
    res.mean_I2 = m2;
    res.cov << c11, c12, c12, c22;
    res.stderr_I1 = std::sqrt(c11 / n_samples);
    res.stderr_I2 = std::sqrt(c22 / n_samples);
    if (keep_samples) res.samples = std::move(vals);
    return res;
}

std::vector<double> mahalanobis_sq(const MCResult& mc, const GaussianModel& gm) {
    if (mc.samples.empty()) throw ParameterError("mahalanobis_sq: raw samples were not kept");
    const double det = gm.V(0, 0) * gm.V(1, 1) - gm.V(0, 1) * gm.V(1, 0);
    if (!(det > 0.0) || !std::isfinite(det))
        throw NumericalError("mahalanobis_sq: covariance matrix is singular");
    const double i11 = gm.V(1, 1) / det, i22 = gm.V(0, 0) / det, i12 = -gm.V(0, 1) / det;
    std::vector<double> d2;
    d2.reserve(mc.samples.size());
    for (const auto& [x, y] : mc.samples) {
        const double dx = x - gm.mean_I1, dy = y - gm.mean_I2;
        d2.push_back(i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy);
    }
    std::sort(d2.begin(), d2.end());
    return d2;
}

double ks_distance_chi2(const std::vector<double>& sorted_d2) {
    const auto n = sorted_d2.size();
    if (n == 0) throw ParameterError("ks_distance_chi2: empty sample");
    double ks = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double f = 1.0 - std::exp(-0.5 * sorted_d2[j]);  // chi^2_2 CDF
        ks = std::max(ks, std::max(std::abs(f - static_cast<double>(j) / n),
                                   std::abs(f - static_cast<double>(j + 1) / n)));
    }
    return ks;
}

EsdHistogram empirical_esd(const ChannelSample& ch, double s_bar, int n_bins, double lo,
                           double hi) {
    if (n_bins < 1) throw ParameterError("empirical_esd: need at least one bin");
    MatrixC c;
    c.noalias() = ch.H1 * ch.H2;
    MatrixC b = c * c.adjoint() + s_bar * (ch.H1 * ch.H1.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixC> es(0.5 * (b + b.adjoint()), Eigen::EigenvaluesOnly);
    const VectorD ev = es.eigenvalues();
    if (hi <= lo) {
        lo = 0.0;
        hi = 1.05 * std::max(ev.maxCoeff(), 1e-300);
    }
    const double width = (hi - lo) / n_bins;
    std::vector<long> counts(n_bins, 0);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        int bin = static_cast<int>(std::floor((ev[i] - lo) / width));
        bin = std::clamp(bin, 0, n_bins - 1);  // clip so the histogram keeps full mass
        ++counts[bin];
    }
    EsdHistogram h;
    h.edges.resize(n_bins + 1);
    for (int i = 0; i <= n_bins; ++i) h.edges[i] = lo + i * width;
    h.density.resize(n_bins);
    const double total = static_cast<double>(ev.size());
    for (int i = 0; i < n_bins; ++i) h.density[i] = counts[i] / (total * width);
    h.mass = std::accumulate(counts.begin(), counts.end(), 0L) / total;
    return h;
}

ConvergenceStudy convergence_study(const std::function<CorrelationSet(int)>& family,
                                   const SystemParams& base, const std::vector<int>& dims,
                                   long n_samples, std::uint64_t seed, int workers) {
    if (dims.size() < 3) throw ParameterError("convergence_study: need at least 3 dimensions");
    ConvergenceStudy study;
    std::vector<std::pair<double, double>> mean_pts, cov_pts;
    for (const int d : dims) {
        SystemParams p = base;
        p.N = p.L = p.M = d;
        const CorrelationSet corr = family(d);
        const GaussianModel gm = gaussian_model(corr, p);
        // decorrelate the per-dimension streams
        const std::uint64_t dim_seed = seed ^ (0x9E3779B97F4A7C15ull * (d + 1));
        const MCResult mc = run_mc(corr, p, n_samples, dim_seed, workers, false);

        ConvergencePoint pt;
        pt.dim = d;
        pt.mean_err = std::abs((mc.mean_I1 - mc.mean_I2) - (gm.mean_I1 - gm.mean_I2));
        const double var_i = mc.cov(0, 0) + mc.cov(1, 1) - 2.0 * mc.cov(0, 1);
        pt.mean_se = std::sqrt(std::max(var_i, 0.0) / n_samples);
        pt.cov_err = (mc.cov - gm.V).norm();
        double se2 = 0.0;  // Gaussian moment formula for covariance-entry noise
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                se2 += (mc.cov(i, i) * mc.cov(j, j) + mc.cov(i, j) * mc.cov(i, j)) / n_samples;
        pt.cov_se = std::sqrt(se2);
        pt.reliable = (pt.mean_se <= 0.5 * pt.mean_err) && (pt.cov_se <= 0.5 * pt.cov_err);
        study.points.push_back(pt);
        if (pt.mean_se <= 0.5 * pt.mean_err) mean_pts.push_back({double(d), pt.mean_err});
        if (pt.cov_se <= 0.5 * pt.cov_err) cov_pts.push_back({double(d), pt.cov_err});
    }
    if (mean_pts.size() >= 2) std::tie(study.mean_slope, study.mean_intercept) = loglog_fit(mean_pts);
    if (cov_pts.size() >= 2) std::tie(study.cov_slope, study.cov_intercept) = loglog_fit(cov_pts);
    return study;
}

std::pair<double, double> loglog_fit(const std::vector<std::pair<double, double>>& xy) {
    if (xy.size() < 2) throw ParameterError("loglog_fit: need at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : xy) {
        if (!(x > 0.0) || !(y > 0.0)) throw ParameterError("loglog_fit: points must be positive");
        const double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(xy.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

}  // namespace twohop
