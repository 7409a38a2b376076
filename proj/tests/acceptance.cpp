// Acceptance suite: every criterion prints one PASS/FAIL line; the process
// exit code is the number of failed criteria.

#include "twohop/deterministic.hpp"
#include "twohop/fixed_point.hpp"
#include "twohop/model.hpp"
#include "twohop/montecarlo.hpp"
#include "twohop/spectrum.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace twohop;

namespace {

std::string g_cli;  // path to the CLI binary (for the reproducibility criterion)
int g_failures = 0;

class Criterion {
  public:
    Criterion(int number, std::string title) : number_(number), title_(std::move(title)) {
        start_ = std::chrono::steady_clock::now();
    }
    void check(bool ok, const std::string& what) {
        if (!ok) {
            ok_ = false;
            details_ += (details_.empty() ? "" : "; ") + what;
        }
    }
    ~Criterion() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::printf("criterion %2d %-4s %s (%.1f s)%s%s\n", number_, ok_ ? "PASS" : "FAIL",
                    title_.c_str(), secs, details_.empty() ? "" : " -- ", details_.c_str());
        std::fflush(stdout);
        if (!ok_) ++g_failures;
    }

  private:
    int number_;
    std::string title_;
    bool ok_ = true;
    std::string details_;
    std::chrono::steady_clock::time_point start_;
};

HermitianPSD random_psd(int dim, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    MatrixC g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = cxd(nd(gen), nd(gen));
    MatrixC c = (g * g.adjoint()) / (2.0 * dim);  // mean eigenvalue about one
    c = 0.5 * (c + c.adjoint()).eval();
    return HermitianPSD::from_matrix(c);
}

struct RandomConfig {
    CorrelationSet corr;
    SystemParams p;
    SolutionS1 s1;
    SolutionS2 s2;
};

int workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 2;
}

std::vector<RandomConfig> g_random_configs;  // shared between criteria 1 and 3

void criterion_1() {
    Criterion c(1, "fixed-point residuals and containment on 50 random configs");
    std::mt19937_64 gen(20240901);
    std::uniform_int_distribution<int> dim_d(4, 64);
    std::uniform_real_distribution<double> z_d(0.1, 10.0), s_d(0.0, 4.0);
    double worst_res = 0.0;
    for (int k = 0; k < 50; ++k) {
        const int n = dim_d(gen), l = dim_d(gen), m = dim_d(gen);
        RandomConfig rc{CorrelationSet{random_psd(n, gen), random_psd(l, gen),
                                       random_psd(l, gen), random_psd(m, gen)},
                        SystemParams{n, l, m, s_d(gen), s_d(gen), z_d(gen)},
                        {},
                        {}};
        const SolverWorkspace ws(rc.corr);
        try {
            rc.s1 = solve_system1(ws, rc.p);
            rc.s2 = solve_system2(ws, rc.p);
        } catch (const std::exception& e) {
            c.check(false, "config " + std::to_string(k) + " failed: " + e.what());
            continue;
        }
        const auto res1 = residuals_system1(ws, rc.p, rc.s1);
        for (double r : res1) worst_res = std::max(worst_res, r);
        const auto res2 = residuals_system2(ws, rc.p, rc.s2);
        worst_res = std::max({worst_res, res2[0], res2[1]});
        c.check(*std::max_element(res1.begin(), res1.end()) <= 1e-10,
                "system-1 residual above 1e-10 at config " + std::to_string(k));
        c.check(std::max(res2[0], res2[1]) <= 1e-10,
                "system-2 residual above 1e-10 at config " + std::to_string(k));
        const auto box = positive_solution_bounds(ws, rc.p);
        c.check(box.contains(rc.s1), "containment box violated at config " + std::to_string(k));
        g_random_configs.push_back(std::move(rc));
    }
    c.check(g_random_configs.size() == 50, "not all configs solved");
}

void criterion_2() {
    Criterion c(2, "closed-form equivalence of the identity-correlation solutions");
    const double s_grid[5] = {0.0, 0.5, 1.0, 2.0, 4.0};
    const double z_grid[5] = {0.25, 0.5, 1.0, 2.0, 4.0};
    for (auto [n, l, m] : {std::array<int, 3>{16, 16, 16}, std::array<int, 3>{16, 32, 24}}) {
        const auto corr = CorrelationSet::identity(n, l, m);
        const SolverWorkspace ws(corr);
        const IidParams iid{double(n) / l, double(l) / m};
        for (double s : s_grid)
            for (double z : z_grid) {
                SystemParams p{n, l, m, s, s, z};
                const SolutionS1 s1 = solve_system1(ws, p);
                const SolutionS2 s2 = solve_system2(ws, p);
                c.check(std::abs(s1.delta - iid.c1 * iid_mF(iid, s, z)) <= 1e-8,
                        "quartic mismatch at s=" + std::to_string(s) + " z=" + std::to_string(z));
                c.check(std::abs(s2.tau - iid.c1 * iid_mG(iid.c1, s, z)) <= 1e-10,
                        "quadratic mismatch at s=" + std::to_string(s) + " z=" + std::to_string(z));
            }
    }
}

void criterion_3() {
    Criterion c(3, "structural determinant and trace identities on the criterion-1 set");
    c.check(!g_random_configs.empty(), "criterion 1 produced no configs");
    for (std::size_t k = 0; k < g_random_configs.size(); ++k) {
        const auto& rc = g_random_configs[k];
        const DetMatrices dm = det_matrices(rc.corr, rc.p, rc.s1, rc.s2);
        const Functionals fn = functionals(rc.corr, dm, rc.s1, rc.s2, rc.p);
        const double det1 = jacobian_system1(fn).determinant();
        const double det2 = jacobian_system2(fn).determinant();
        c.check(std::abs(det1 - fn.DeltaV1) <= 1e-9 * std::abs(fn.DeltaV1),
                "det(K1) mismatch at config " + std::to_string(k));
        c.check(std::abs(det2 - fn.DeltaV2) <= 1e-9 * std::abs(fn.DeltaV2),
                "det(K2) mismatch at config " + std::to_string(k));
        const double x = rc.p.s_bar * rc.s1.omega_bar + rc.s1.gamma * rc.s1.omega_under;
        const double rhs_d = rc.p.z * fn.delta2I + x * fn.delta2;
        c.check(std::abs(rc.s1.delta - rhs_d) <= 1e-9 * rc.s1.delta,
                "delta trace identity at config " + std::to_string(k));
        const double rhs_w = fn.omega_under2I + rc.p.s_bar * rc.s1.delta * fn.mixed11 +
                             rc.s1.delta * rc.s1.gamma * fn.omega_under2;
        c.check(std::abs(rc.s1.omega_under - rhs_w) <= 1e-9 * rc.s1.omega_under,
                "omega_under trace identity at config " + std::to_string(k));
    }
}

void criterion_4() {
    Criterion c(4, "mean accuracy against Monte Carlo at dimension 32");
    const auto corr = CorrelationSet::identity(32, 32, 32);
    SystemParams p{32, 32, 32, 1.0, 1.0, 1.0};
    const GaussianModel gm = gaussian_model(corr, p);
    const MCResult mc = run_mc(corr, p, 20000, 420001, workers(), false);
    std::ostringstream det;
    det << "I1 gap " << std::abs(mc.mean_I1 - gm.mean_I1) / mc.stderr_I1 << " SE, I2 gap "
        << std::abs(mc.mean_I2 - gm.mean_I2) / mc.stderr_I2 << " SE";
    c.check(std::abs(mc.mean_I1 - gm.mean_I1) <= 3.0 * mc.stderr_I1, det.str());
    c.check(std::abs(mc.mean_I2 - gm.mean_I2) <= 3.0 * mc.stderr_I2, det.str());
}

void criterion_5() {
    Criterion c(5, "first-order convergence rate across dimensions");
    // Identity correlations at equal noise powers 0.1 keep the error of the
    // MI difference on a clean first-order decay through this whole dimension
    // range. Sample counts rise with the dimension so the measured gaps stay
    // several standard errors wide; the largest dimension keeps the baseline
    // count and drops out through the reliability rule (its gap sits inside
    // the Monte Carlo noise at any count affordable here).
    const std::vector<int> dims = {8, 16, 32, 64};
    const std::vector<long> counts = {400000, 800000, 1200000, 100000};
    std::vector<std::pair<double, double>> pts;
    std::ostringstream det;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const int d = dims[i];
        const auto corr = CorrelationSet::identity(d, d, d);
        SystemParams p{d, d, d, 0.1, 0.1, 0.1};
        const GaussianModel gm = gaussian_model(corr, p);
        const MCResult mc = run_mc(corr, p, counts[i],
                                   555 ^ (0x9E3779B97F4A7C15ull * (d + 1)), workers(), false);
        const double gap = std::abs((mc.mean_I1 - mc.mean_I2) - (gm.mean_I1 - gm.mean_I2));
        const double var_i = mc.cov(0, 0) + mc.cov(1, 1) - 2.0 * mc.cov(0, 1);
        const double se = std::sqrt(std::max(var_i, 0.0) / counts[i]);
        const bool reliable = se <= 0.5 * gap;
        det << (i ? ", " : "") << "d=" << d << " gap " << gap << (reliable ? "" : " (unreliable)");
        if (reliable) pts.push_back({double(d), gap});
    }
    c.check(pts.size() >= 3, "fewer than 3 reliable points: " + det.str());
    if (pts.size() >= 2) {
        const auto [slope, intercept] = loglog_fit(pts);
        (void)intercept;
        std::ostringstream d2;
        d2 << "mean-error slope " << slope << " [" << det.str() << "]";
        c.check(slope >= -1.4 && slope <= -0.6, d2.str());
    }
}

void criterion_6() {
    Criterion c(6, "covariance accuracy and positive definiteness");
    const auto corr = CorrelationSet::identity(32, 32, 32);
    SystemParams p{32, 32, 32, 1.0, 1.0, 1.0};
    const GaussianModel gm = gaussian_model(corr, p);
    const MCResult mc = run_mc(corr, p, 100000, 606062, workers(), false);
    const double rel = (mc.cov - gm.V).norm() / gm.V.norm();
    std::ostringstream det;
    det << "relative covariance error " << rel;
    c.check(rel <= 0.10, det.str());

    std::mt19937_64 gen(77007);
    std::uniform_int_distribution<int> dim_d(4, 32);
    std::uniform_real_distribution<double> z_d(0.2, 5.0), s_d(0.05, 3.0);
    for (int k = 0; k < 100; ++k) {
        const int n = dim_d(gen), l = dim_d(gen), m = dim_d(gen);
        const CorrelationSet rc{random_psd(n, gen), random_psd(l, gen), random_psd(l, gen),
                                random_psd(m, gen)};
        SystemParams rp{n, l, m, s_d(gen), s_d(gen), z_d(gen)};
        try {
            const GaussianModel g = gaussian_model(rc, rp);
            const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(g.V);
            c.check(es.eigenvalues().minCoeff() > 0.0,
                    "V not positive definite at random config " + std::to_string(k));
        } catch (const std::exception& e) {
            c.check(false, std::string("random config failed: ") + e.what());
        }
    }
}

void criterion_7() {
    Criterion c(7, "joint Gaussianity via the Mahalanobis chi-square comparison");
    const auto corr = CorrelationSet::identity(64, 64, 64);
    SystemParams p{64, 64, 64, 1.0, 1.0, 1.0};
    const GaussianModel gm = gaussian_model(corr, p);
    const MCResult mc = run_mc(corr, p, 10000, 777003, workers(), true);
    const double ks = ks_distance_chi2(mahalanobis_sq(mc, gm));
    std::ostringstream det;
    det << "KS distance " << ks;
    c.check(ks <= 0.02, det.str());
}

void criterion_8() {
    Criterion c(8, "outage probability curve against the empirical distribution");
    const auto corr = CorrelationSet::identity(32, 32, 32);
    for (double snr_db : {5.0, 10.0, 15.0}) {
        const double sigma = std::pow(10.0, -snr_db / 10.0);
        SystemParams p{32, 32, 32, sigma, sigma, sigma};
        const GaussianModel gm = gaussian_model(corr, p);
        const MCResult mc = run_mc(corr, p, 50000, 808080 + int(snr_db), workers(), true);
        std::vector<double> mi(mc.samples.size());
        for (std::size_t i = 0; i < mc.samples.size(); ++i)
            mi[i] = mc.samples[i].first - mc.samples[i].second;
        std::sort(mi.begin(), mi.end());
        const double mean = gm.mean_I1 - gm.mean_I2;
        const double sd = std::sqrt(gm.V(0, 0) + gm.V(1, 1) - 2.0 * gm.V(0, 1));
        double worst = 0.0;
        for (int j = -12; j <= 12; ++j) {
            const double rate = mean + sd * j / 3.0;
            if (rate <= 0.0) continue;
            const double model = outage_probability(gm, rate);
            const double emp =
                static_cast<double>(std::upper_bound(mi.begin(), mi.end(), rate) - mi.begin()) /
                static_cast<double>(mi.size());
            worst = std::max(worst, std::abs(model - emp));
        }
        std::ostringstream det;
        det << "max CDF gap " << worst << " at " << snr_db << " dB";
        c.check(worst <= 0.03, det.str());
    }
}

void criterion_9() {
    Criterion c(9, "limiting spectral density mass and distance to the sampled spectrum");
    const int n = 150, l = 600, m = 450;
    const auto corr = CorrelationSet::identity(n, l, m);
    for (double s : {0.0, 2.0}) {
        const auto grid = default_grid(corr, s, 400);
        const double y = default_im_offset(corr, s);
        const SpectralDensity sd = lsd_density(corr, s, grid, y);
        std::ostringstream det;
        det << "mass " << sd.mass << " at s=" << s;
        c.check(sd.mass >= 0.97 && sd.mass <= 1.01, det.str());

        // 50-sample averaged spectrum binned around the density grid
        const ChannelSampler sampler(corr, 909090);
        std::vector<double> edges(grid.size() + 1);
        for (std::size_t i = 1; i < grid.size(); ++i) edges[i] = 0.5 * (grid[i - 1] + grid[i]);
        edges[0] = 0.0;
        edges[grid.size()] = grid.back() + 0.5 * (grid[grid.size() - 1] - grid[grid.size() - 2]);
        std::vector<double> counts(grid.size(), 0.0);
        long total = 0;
        for (int k = 0; k < 50; ++k) {
            const auto ch = sampler.draw(k);
            MatrixC prod;
            prod.noalias() = ch.H1 * ch.H2;
            MatrixC b = prod * prod.adjoint();
            if (s > 0.0) b += s * (ch.H1 * ch.H1.adjoint());
            Eigen::SelfAdjointEigenSolver<MatrixC> es(0.5 * (b + b.adjoint()),
                                                      Eigen::EigenvaluesOnly);
            for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
                const double x = es.eigenvalues()[i];
                const auto it = std::upper_bound(edges.begin(), edges.end(), x);
                const long bin = std::clamp<long>(it - edges.begin() - 1, 0,
                                                  static_cast<long>(counts.size()) - 1);
                counts[bin] += 1.0;
                ++total;
            }
        }
        double l1 = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double width = edges[i + 1] - edges[i];
            const double emp = counts[i] / (total * width);
            l1 += std::abs(emp - sd.density[i]) * width;
        }
        std::ostringstream det2;
        det2 << "L1 distance " << l1 << " at s=" << s;
        c.check(l1 <= 0.08, det2.str());
    }
}

void criterion_10() {
    Criterion c(10, "degenerate exactness at zero argument and huge noise");
    const auto corr = CorrelationSet::identity(16, 16, 16);
    SystemParams p{16, 16, 16, 1.0, 0.0, 1.0};
    const SolutionS1 s1 = solve_system1(corr, p);
    const SolutionS2 s2 = solve_system2(corr, p);
    const DetMatrices dm = det_matrices(corr, p, s1, s2);
    const Functionals fn = functionals(corr, dm, s1, s2, p);
    c.check(mean_I2(corr, p, s2) == 0.0, "I2 mean not exactly zero");
    c.check(fn.DeltaC == 1.0, "DeltaC not exactly one");
    c.check(fn.DeltaV2 == 1.0, "DeltaV2 not exactly one");

    SystemParams ph{16, 16, 16, 1.0, 1.0, 1e8};
    const SolutionS1 s1h = solve_system1(corr, ph);
    const double i1 = mean_I1(corr, ph, s1h);
    std::ostringstream det;
    det << "I1 at huge noise " << i1;
    c.check(std::abs(i1) <= 1e-5, det.str());
}

void criterion_11() {
    Criterion c(11, "large middle dimension limit and fixed-power sweep shape");
    const IidParams iid{16.0 / 4096.0, 4096.0 / 16.0};
    const auto [i1, i2] = iid_means(iid, 16.0, 1.0, 1.0);
    const auto [lim, var] = iid_large_L(1.0, 16.0, 16.0, 1.0, 1.0);
    (void)var;
    const double rel = std::abs((i1 - i2) - lim) / std::abs(i1 - i2);
    std::ostringstream det;
    det << "relative gap to the limit " << rel;
    c.check(rel <= 0.02, det.str());

    // fixed total transmit + amplification power: mean MI rises then falls in L
    const int n = 16, m = 16;
    const double p_t = 1.0, p_a = 0.5, sigma = std::pow(10.0, -1.2);  // 12 dB
    std::vector<double> mi;
    const std::vector<int> ls = {2, 4, 8, 16, 32, 64, 128};
    for (int l : ls) {
        const double a_sq = p_a / (l * (p_t / m + sigma));
        CorrelationSet corr{
            HermitianPSD::identity(n),
            HermitianPSD::from_matrix(a_sq * MatrixC::Identity(l, l)),
            HermitianPSD::identity(l),
            HermitianPSD::from_matrix((p_t / m) * MatrixC::Identity(m, m))};
        SystemParams p{n, l, m, sigma, sigma, sigma};
        const GaussianModel gm = gaussian_model(corr, p);
        mi.push_back(gm.mean_I1 - gm.mean_I2);
    }
    const auto peak = std::max_element(mi.begin(), mi.end()) - mi.begin();
    std::ostringstream det2;
    det2 << "peak at L=" << ls[peak];
    c.check(peak > 0 && peak + 1 < static_cast<long>(mi.size()), det2.str());
}

void criterion_12() {
    Criterion c(12, "byte-identical Monte Carlo output across runs and worker counts");
    if (g_cli.empty()) {
        c.check(false, "CLI path not supplied");
        return;
    }
    const char* cfg = R"({
      "dims": {"N": 16, "L": 16, "M": 16},
      "noise": {"sigma1_sq_bar": 1.0, "sigma1_sq_under": 1.0, "sigma2_sq": 1.0},
      "correlation": {
        "R1": {"type": "identity"}, "T1": {"type": "identity"},
        "R2": {"type": "identity"}, "T2": {"type": "identity"}
      },
      "mc": {"samples": 2000, "seed": 123456}
    })";
    std::ofstream("acc_repro.json") << cfg;
    auto run = [&](int workers, const std::string& tag) {
        const std::string cmd = g_cli + " mc --config acc_repro.json --workers " +
                                std::to_string(workers) + " --dump-samples acc_s_" + tag +
                                ".csv --out acc_r_" + tag + ".json > /dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    auto slurp = [](const std::string& path) {
        std::ifstream in(path);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    c.check(run(1, "w1a") && run(1, "w1b") && run(4, "w4") && run(8, "w8"), "CLI run failed");
    const std::string a = slurp("acc_s_w1a.csv");
    c.check(!a.empty(), "no sample dump produced");
    c.check(a == slurp("acc_s_w1b.csv"), "repeat run differs");
    c.check(a == slurp("acc_s_w4.csv"), "4-worker run differs");
    c.check(a == slurp("acc_s_w8.csv"), "8-worker run differs");
    c.check(slurp("acc_r_w1a.json") == slurp("acc_r_w4.json"), "report differs across workers");
    for (const char* f : {"acc_repro.json", "acc_s_w1a.csv", "acc_s_w1b.csv", "acc_s_w4.csv",
                          "acc_s_w8.csv", "acc_r_w1a.json", "acc_r_w1b.json", "acc_r_w4.json",
                          "acc_r_w8.json"})
        std::remove(f);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli = argv[1];
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    if (g_failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criteria FAILED\n", g_failures);
    return g_failures;
}
