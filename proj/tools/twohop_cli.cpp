// Command-line front end: solve / analyze / mc / spectrum / sweep / iid.
// Exit codes: 0 success, 1 usage or config error, 2 numerical/solver error.

#include "twohop/deterministic.hpp"
#include "twohop/fixed_point.hpp"
#include "twohop/model.hpp"
#include "twohop/montecarlo.hpp"
#include "twohop/spectrum.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using json = nlohmann::ordered_json;
using namespace twohop;

namespace {

constexpr double kLn2 = 0.69314718055994530942;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct ConfigError : ParameterError {
    using ParameterError::ParameterError;
};

const json& need(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError("config: missing " + path + "." + key);
    return j.at(key);
}

double need_num(const json& j, const std::string& key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number()) throw ConfigError("config: " + path + "." + key + " must be a number");
    return v.get<double>();
}

int need_int(const json& j, const std::string& key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number_integer() || v.get<long>() < 1)
        throw ConfigError("config: " + path + "." + key + " must be a positive integer");
    return v.get<int>();
}

struct CorrelationSpec {
    std::string type;  // identity | model | file
    double eta_deg = 0.0, delta_c_deg = 0.0, d_s = 0.0;
    std::string path;

    HermitianPSD build(int dim) const {
        if (type == "identity") return HermitianPSD::identity(dim);
        if (type == "model") return build_correlation(eta_deg, delta_c_deg, d_s, dim);
        if (type == "file") {
            const MatrixC m = read_matrix_csv(path);
            if (m.rows() != dim)
                throw ConfigError("config: matrix file " + path + " has dim " +
                                  std::to_string(m.rows()) + ", expected " + std::to_string(dim));
            return HermitianPSD::from_matrix(m);
        }
        throw ConfigError("config: unknown correlation type '" + type + "'");
    }
    bool resizable() const { return type == "identity" || type == "model"; }
};

struct PowerModel {
    double p_t = 1.0;          // total transmit power
    double p_a = 0.5;          // total amplification power
    double pathloss_db = 0.0;  // per hop
};

struct RunConfig {
    SystemParams params;
    CorrelationSpec r1, t1, r2, t2;
    bool from_raw = false;
    std::string raw_a1, raw_b1, raw_a2, raw_b2, raw_phi, raw_p;
    std::optional<PowerModel> power;
    bool snr_noise = false;
    double snr_db = 0.0, snr_p_t = 1.0;
    SolverOptions solver;
    long mc_samples = 10000;
    std::uint64_t mc_seed = 1;
    int mc_workers = 0;  // 0 = hardware
    std::string units = "nats";

    CorrelationSet correlation() const {
        if (from_raw) {
            RawChannelSpec raw;
            raw.A1 = read_matrix_csv(raw_a1);
            raw.B1 = read_matrix_csv(raw_b1);
            raw.A2 = read_matrix_csv(raw_a2);
            raw.B2 = read_matrix_csv(raw_b2);
            raw.Phi = read_matrix_csv(raw_phi);
            raw.P = read_matrix_csv(raw_p);
            const CorrelationSet cs = reduce_raw_spec(raw);
            cs.validate_dims(params);
            return cs;
        }
        return {r1.build(params.N), t1.build(params.L), r2.build(params.L), t2.build(params.M)};
    }
};

CorrelationSpec parse_corr_spec(const json& j, const std::string& path) {
    CorrelationSpec spec;
    if (!j.is_object()) throw ConfigError("config: " + path + " must be an object");
    spec.type = need(j, "type", path).get<std::string>();
    if (spec.type == "model") {
        spec.eta_deg = need_num(j, "eta_deg", path);
        spec.delta_c_deg = need_num(j, "delta_c_deg", path);
        spec.d_s = need_num(j, "d_s", path);
    } else if (spec.type == "file") {
        spec.path = need(j, "path", path).get<std::string>();
    } else if (spec.type != "identity") {
        throw ConfigError("config: " + path + ".type must be identity, model, or file");
    }
    return spec;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    RunConfig cfg;
    const json& dims = need(j, "dims", "");
    cfg.params.N = need_int(dims, "N", "dims");
    cfg.params.L = need_int(dims, "L", "dims");
    cfg.params.M = need_int(dims, "M", "dims");

    const json& noise = need(j, "noise", "");
    if (noise.contains("snr_db")) {
        cfg.snr_noise = true;
        cfg.snr_db = need_num(noise, "snr_db", "noise");
        cfg.snr_p_t = noise.contains("p_t") ? need_num(noise, "p_t", "noise") : 1.0;
        const double sigma = cfg.snr_p_t * std::pow(10.0, -cfg.snr_db / 10.0);
        cfg.params.s_bar = cfg.params.s_under = cfg.params.z = sigma;
    } else {
        cfg.params.s_bar = need_num(noise, "sigma1_sq_bar", "noise");
        cfg.params.s_under = need_num(noise, "sigma1_sq_under", "noise");
        cfg.params.z = need_num(noise, "sigma2_sq", "noise");
    }
    if (cfg.params.z <= 0.0) throw ConfigError("config: noise.sigma2_sq must be > 0");
    if (cfg.params.s_bar < 0.0 || cfg.params.s_under < 0.0)
        throw ConfigError("config: noise powers must be >= 0");

    const json& corr = need(j, "correlation", "");
    if (corr.contains("raw")) {
        const json& raw = corr.at("raw");
        cfg.from_raw = true;
        cfg.raw_a1 = need(raw, "A1", "correlation.raw").get<std::string>();
        cfg.raw_b1 = need(raw, "B1", "correlation.raw").get<std::string>();
        cfg.raw_a2 = need(raw, "A2", "correlation.raw").get<std::string>();
        cfg.raw_b2 = need(raw, "B2", "correlation.raw").get<std::string>();
        cfg.raw_phi = need(raw, "Phi", "correlation.raw").get<std::string>();
        cfg.raw_p = need(raw, "P", "correlation.raw").get<std::string>();
    } else {
        cfg.r1 = parse_corr_spec(need(corr, "R1", "correlation"), "correlation.R1");
        cfg.t1 = parse_corr_spec(need(corr, "T1", "correlation"), "correlation.T1");
        cfg.r2 = parse_corr_spec(need(corr, "R2", "correlation"), "correlation.R2");
        cfg.t2 = parse_corr_spec(need(corr, "T2", "correlation"), "correlation.T2");
    }

    if (j.contains("power")) {
        PowerModel pm;
        const json& p = j.at("power");
        pm.p_t = need_num(p, "p_t", "power");
        pm.p_a = need_num(p, "p_a", "power");
        if (p.contains("pathloss_db")) pm.pathloss_db = need_num(p, "pathloss_db", "power");
        cfg.power = pm;
    }

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        if (s.contains("tol")) cfg.solver.tol = need_num(s, "tol", "solver");
        if (s.contains("max_outer")) cfg.solver.max_outer = need_int(s, "max_outer", "solver");
        if (s.contains("max_inner")) cfg.solver.max_inner = need_int(s, "max_inner", "solver");
        if (s.contains("damping")) cfg.solver.damping = need_num(s, "damping", "solver");
    }
    if (j.contains("mc")) {
        const json& m = j.at("mc");
        if (m.contains("samples")) cfg.mc_samples = need_int(m, "samples", "mc");
        if (m.contains("seed")) cfg.mc_seed = m.at("seed").get<std::uint64_t>();
        if (m.contains("workers")) cfg.mc_workers = need_int(m, "workers", "mc");
    }
    if (j.contains("units")) {
        cfg.units = j.at("units").get<std::string>();
        if (cfg.units != "nats" && cfg.units != "bits")
            throw ConfigError("config: units must be nats or bits");
    }
    return cfg;
}

struct CommonOpts {
    std::string config_path;
    std::string out_path;
    std::string format = "json";
    std::string units;       // overrides config when nonempty
    std::uint64_t seed = 0;  // overrides when nonzero
    int workers = -1;        // overrides when >= 0
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_config = true) {
    auto* copt = cmd->add_option("--config", o.config_path, "JSON run configuration");
    if (needs_config) copt->required();
    cmd->add_option("--out", o.out_path, "output file (default stdout)");
    cmd->add_option("--format", o.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--units", o.units, "nats|bits")->check(CLI::IsMember({"nats", "bits"}));
    cmd->add_option("--seed", o.seed, "Monte Carlo seed override");
    cmd->add_option("--workers", o.workers, "Monte Carlo worker override");
}

RunConfig effective_config(const CommonOpts& o) {
    RunConfig cfg = load_config(o.config_path);
    if (!o.units.empty()) cfg.units = o.units;
    if (o.seed != 0) cfg.mc_seed = o.seed;
    if (o.workers >= 0) cfg.mc_workers = o.workers;
    return cfg;
}

void emit(const CommonOpts& o, const json& doc) {
    std::ostringstream body;
    if (o.format == "json") {
        body << doc.dump(2) << '\n';
    } else {
        // flat key,value CSV; nested objects joined with '.'
        body << "key,value\n";
        std::function<void(const json&, const std::string&)> walk = [&](const json& node,
                                                                        const std::string& prefix) {
            for (const auto& [k, v] : node.items()) {
                const std::string key = prefix.empty() ? k : prefix + "." + k;
                if (v.is_object())
                    walk(v, key);
                else if (v.is_number_float())
                    body << key << ',' << fmt17(v.get<double>()) << '\n';
                else if (v.is_string())
                    body << key << ',' << v.get<std::string>() << '\n';
                else
                    body << key << ',' << v.dump() << '\n';
            }
        };
        walk(doc, "");
    }
    if (o.out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream out(o.out_path, std::ios::binary);
        if (!out) throw ConfigError("cannot open output file: " + o.out_path);
        out << body.str();
    }
}

double unit_scale(const RunConfig& cfg) { return cfg.units == "bits" ? 1.0 / kLn2 : 1.0; }

json v_to_json(const Eigen::Matrix2d& v, double scale) {
    json out;
    out["V11"] = v(0, 0) * scale * scale;
    out["V12"] = v(0, 1) * scale * scale;
    out["V22"] = v(1, 1) * scale * scale;
    return out;
}

int cmd_solve(const CommonOpts& o) {
    const RunConfig cfg = effective_config(o);
    const CorrelationSet corr = cfg.correlation();
    const SolverWorkspace ws(corr);
    const SolutionS1 s1 = solve_system1(ws, cfg.params, cfg.solver);
    const SolutionS2 s2 = solve_system2(ws, cfg.params, cfg.solver);
    const DetMatrices dm = det_matrices(corr, cfg.params, s1, s2);
    const Functionals fn = functionals(corr, dm, s1, s2, cfg.params);

    json doc;
    doc["solution"] = {{"delta", s1.delta},
                       {"omega_bar", s1.omega_bar},
                       {"omega_under", s1.omega_under},
                       {"gamma", s1.gamma},
                       {"tau", s2.tau},
                       {"tau_bar", s2.tau_bar}};
    doc["residuals"] = {{"system1", s1.residual}, {"system2", s2.residual}};
    doc["iterations"] = {{"system1", s1.iterations}, {"system2", s2.iterations}};
    doc["functionals"] = {{"delta2", fn.delta2},
                          {"delta3", fn.delta3},
                          {"delta2I", fn.delta2I},
                          {"delta3I", fn.delta3I},
                          {"omega_bar2", fn.omega_bar2},
                          {"omega_bar3", fn.omega_bar3},
                          {"omega_under2", fn.omega_under2},
                          {"omega_under3", fn.omega_under3},
                          {"omega_under2I", fn.omega_under2I},
                          {"omega_under3I", fn.omega_under3I},
                          {"mixed11", fn.mixed11},
                          {"mixed21", fn.mixed21},
                          {"mixed12", fn.mixed12},
                          {"mixed11I", fn.mixed11I},
                          {"mixed12I", fn.mixed12I},
                          {"gamma2", fn.gamma2},
                          {"gamma3", fn.gamma3},
                          {"varsigma", fn.varsigma},
                          {"Delta", fn.Delta},
                          {"DeltaV1", fn.DeltaV1},
                          {"tau2", fn.tau2},
                          {"tau2I", fn.tau2I},
                          {"tau_bar2", fn.tau_bar2},
                          {"DeltaV2", fn.DeltaV2},
                          {"vartheta", fn.vartheta},
                          {"phi_bar", fn.phi_bar},
                          {"phi_under", fn.phi_under},
                          {"DeltaC", fn.DeltaC}};
    emit(o, doc);
    return 0;
}

int cmd_analyze(const CommonOpts& o, double rate, double outage_prob, bool rate_set,
                bool oprob_set) {
    const RunConfig cfg = effective_config(o);
    const CorrelationSet corr = cfg.correlation();
    const GaussianModel gm = gaussian_model(corr, cfg.params, cfg.solver);
    const double u = unit_scale(cfg);
    json doc;
    doc["units"] = cfg.units;
    doc["I1"] = gm.mean_I1 * u;
    doc["I2"] = gm.mean_I2 * u;
    doc["I"] = (gm.mean_I1 - gm.mean_I2) * u;
    doc["V"] = v_to_json(gm.V, u);
    if (rate_set || oprob_set) {
        if (cfg.params.s_bar != cfg.params.s_under)
            throw ConfigError(
                "outage needs equal noise arguments (sigma1_sq_bar == sigma1_sq_under)");
    }
    if (rate_set) {
        doc["rate"] = rate;
        doc["p_out"] = outage_probability(gm, rate / u);  // rate arrives in output units
    }
    if (oprob_set) {
        doc["p_out_target"] = outage_prob;
        doc["C_out"] = outage_rate(gm, outage_prob) * u;
    }
    emit(o, doc);
    return 0;
}

int cmd_mc(const CommonOpts& o, const std::string& dump_path, const std::string& maha_path) {
    const RunConfig cfg = effective_config(o);
    const CorrelationSet corr = cfg.correlation();
    const GaussianModel gm = gaussian_model(corr, cfg.params, cfg.solver);
    const bool keep = !dump_path.empty() || !maha_path.empty();
    const MCResult mc = run_mc(corr, cfg.params, cfg.mc_samples, cfg.mc_seed, cfg.mc_workers, keep);

    const double u = unit_scale(cfg);
    json doc;
    doc["n_samples"] = mc.n_samples;
    doc["seed"] = mc.seed;
    doc["units"] = cfg.units;
    doc["empirical"] = {{"I1", mc.mean_I1 * u},
                        {"I2", mc.mean_I2 * u},
                        {"stderr_I1", mc.stderr_I1 * u},
                        {"stderr_I2", mc.stderr_I2 * u}};
    doc["empirical"]["cov"] = v_to_json(mc.cov, u);
    doc["deterministic"] = {{"I1", gm.mean_I1 * u}, {"I2", gm.mean_I2 * u}};
    doc["deterministic"]["V"] = v_to_json(gm.V, u);
    doc["gap_in_se"] = {{"I1", (mc.mean_I1 - gm.mean_I1) / mc.stderr_I1},
                        {"I2", (mc.mean_I2 - gm.mean_I2) / mc.stderr_I2}};

    if (!dump_path.empty()) {
        std::ofstream out(dump_path, std::ios::binary);
        if (!out) throw ConfigError("cannot open " + dump_path);
        out << "sample,I1,I2\n";
        for (std::size_t i = 0; i < mc.samples.size(); ++i)
            out << i << ',' << fmt17(mc.samples[i].first * u) << ','
                << fmt17(mc.samples[i].second * u) << '\n';
    }
    if (!maha_path.empty()) {
        const auto d2 = mahalanobis_sq(mc, gm);
        std::ofstream out(maha_path, std::ios::binary);
        if (!out) throw ConfigError("cannot open " + maha_path);
        out << "d2,chi2_quantile\n";
        const double n = static_cast<double>(d2.size());
        for (std::size_t i = 0; i < d2.size(); ++i) {
            const double p = (static_cast<double>(i) + 0.5) / n;
            out << fmt17(d2[i]) << ',' << fmt17(-2.0 * std::log1p(-p)) << '\n';
        }
    }
    emit(o, doc);
    return 0;
}

int cmd_spectrum(const CommonOpts& o, int points, double grid_max, double y_opt, int empirical) {
    const RunConfig cfg = effective_config(o);
    if (o.out_path.empty()) throw ConfigError("spectrum requires --out <density csv>");
    const CorrelationSet corr = cfg.correlation();
    const double s = cfg.params.s_bar;

    std::vector<double> grid;
    if (grid_max > 0.0) {
        grid.resize(points);
        for (int i = 0; i < points; ++i) grid[i] = grid_max * i / (points - 1);
    } else {
        grid = default_grid(corr, s, points);
    }
    const double y = y_opt > 0.0 ? y_opt : default_im_offset(corr, s);
    const SpectralDensity sd = lsd_density(corr, s, grid, y);

    std::ofstream out(o.out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + o.out_path);
    out << "x,f\n";
    for (std::size_t i = 0; i < sd.grid.size(); ++i)
        out << fmt17(sd.grid[i]) << ',' << fmt17(sd.density[i]) << '\n';
    out.close();

    if (empirical > 0) {
        // averaged eigenvalue histogram with one bin centered on each grid point
        const SystemParams& p = cfg.params;
        const ChannelSampler sampler(corr, cfg.mc_seed);
        std::vector<double> edges(sd.grid.size() + 1);
        for (std::size_t i = 1; i < sd.grid.size(); ++i)
            edges[i] = 0.5 * (sd.grid[i - 1] + sd.grid[i]);
        edges[0] = sd.grid.front() - 0.5 * (sd.grid[1] - sd.grid[0]);
        edges[sd.grid.size()] =
            sd.grid.back() + 0.5 * (sd.grid[sd.grid.size() - 1] - sd.grid[sd.grid.size() - 2]);
        std::vector<double> counts(sd.grid.size(), 0.0);
        long total = 0;
        for (int k = 0; k < empirical; ++k) {
            const auto ch = sampler.draw(k);
            MatrixC c;
            c.noalias() = ch.H1 * ch.H2;
            MatrixC b = c * c.adjoint() + p.s_bar * (ch.H1 * ch.H1.adjoint());
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
        const std::string emp_path = o.out_path + ".emp.csv";
        std::ofstream emp(emp_path, std::ios::binary);
        if (!emp) throw ConfigError("cannot open " + emp_path);
        emp << "x,f_emp\n";
        for (std::size_t i = 0; i < sd.grid.size(); ++i) {
            const double width = edges[i + 1] - edges[i];
            emp << fmt17(sd.grid[i]) << ',' << fmt17(counts[i] / (total * width)) << '\n';
        }
    }
    std::cerr << "mass " << fmt17(sd.mass) << " im_offset " << fmt17(sd.im_offset) << "\n";
    return 0;
}

// Holds the total transmit and amplification power fixed while the middle
// dimension sweeps: per-element amplification shrinks as 1/L and its noise
// contribution eventually dominates.
void apply_power_model(const RunConfig& cfg, CorrelationSet& corr) {
    if (!cfg.power) return;
    const PowerModel& pm = *cfg.power;
    const double gain = std::pow(10.0, -pm.pathloss_db / 10.0);
    const double t2_scale = gain * pm.p_t / cfg.params.M;
    const double a_sq =
        pm.p_a / (cfg.params.L * (gain * pm.p_t / cfg.params.M + cfg.params.s_bar));
    corr.T1 = HermitianPSD::from_matrix(a_sq * gain * corr.T1.matrix());
    corr.T2 = HermitianPSD::from_matrix(t2_scale * corr.T2.matrix());
}

int cmd_sweep(const CommonOpts& o, const std::string& param, std::vector<double> values) {
    if (values.empty()) throw ConfigError("sweep: --values must be nonempty");
    const RunConfig base = effective_config(o);
    if (param != "snr_db" && param != "L" && param != "N")
        throw ConfigError("sweep: --param must be snr_db, L, or N");

    const double u = unit_scale(base);
    std::ostringstream body;
    body << param << ",I1,I2,I,V11,V12,V22\n";
    int warnings = 0;
    for (double v : values) {
        RunConfig cfg = base;
        if (param == "snr_db") {
            const double sigma = cfg.snr_p_t * std::pow(10.0, -v / 10.0);
            cfg.params.s_bar = cfg.params.s_under = cfg.params.z = sigma;
        } else {
            const int dim = static_cast<int>(v);
            if (dim < 1 || v != dim) {
                body << fmt17(v) << ",NA,NA,NA,NA,NA,NA\n";
                ++warnings;
                continue;
            }
            if (param == "L") {
                if (cfg.from_raw || !cfg.t1.resizable() || !cfg.r2.resizable())
                    throw ConfigError("sweep over L needs resizable T1/R2 (identity or model)");
                cfg.params.L = dim;
            } else {
                if (cfg.from_raw || !cfg.r1.resizable())
                    throw ConfigError("sweep over N needs resizable R1 (identity or model)");
                cfg.params.N = dim;
            }
        }
        try {
            CorrelationSet corr = cfg.correlation();
            apply_power_model(cfg, corr);
            const GaussianModel gm = gaussian_model(corr, cfg.params, cfg.solver);
            body << fmt17(v) << ',' << fmt17(gm.mean_I1 * u) << ',' << fmt17(gm.mean_I2 * u) << ','
                 << fmt17((gm.mean_I1 - gm.mean_I2) * u) << ',' << fmt17(gm.V(0, 0) * u * u) << ','
                 << fmt17(gm.V(0, 1) * u * u) << ',' << fmt17(gm.V(1, 1) * u * u) << '\n';
        } catch (const NumericalError&) {
            body << fmt17(v) << ",NA,NA,NA,NA,NA,NA\n";
            ++warnings;
        }
    }
    if (o.out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream out(o.out_path, std::ios::binary);
        if (!out) throw ConfigError("cannot open " + o.out_path);
        out << body.str();
    }
    if (warnings) std::cerr << warnings << " sweep point(s) failed and were emitted as NA\n";
    return 0;
}

int cmd_iid(const CommonOpts& o, double c1, double c2, double s1, double s2, double large_l,
            double n_dim) {
    if (c1 <= 0.0 || c2 <= 0.0) throw ConfigError("iid: c1 and c2 must be > 0");
    if (s1 < 0.0 || s2 <= 0.0) throw ConfigError("iid: invalid noise powers");
    const IidParams iid{c1, c2};
    const bool bits = o.units == "bits";
    const double u = bits ? 1.0 / kLn2 : 1.0;

    json doc;
    doc["units"] = bits ? "bits" : "nats";
    doc["mF"] = iid_mF(iid, s1, s2);
    doc["mG"] = iid_mG(c1, s1, s2);
    const auto [i1, i2] = iid_means(iid, n_dim, s1, s2);
    doc["I1"] = i1 * u;
    doc["I2"] = i2 * u;
    doc["I"] = (i1 - i2) * u;
    doc["V"] = v_to_json(iid_covariance(iid, s1, s2), u);
    if (large_l > 0.0) {
        const auto [mean, var] = iid_large_L(large_l, n_dim, n_dim / large_l, s1, s2);
        doc["large_L"] = {{"c", large_l}, {"I", mean * u}, {"variance", var * u * u}};
    }
    emit(o, doc);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Deterministic equivalents and Monte Carlo validation of two-hop MIMO mutual information"};
    app.require_subcommand(1);

    CommonOpts solve_o, analyze_o, mc_o, spec_o, sweep_o, iid_o;

    auto* solve = app.add_subcommand("solve", "solve the fixed-point systems, report functionals");
    add_common(solve, solve_o);

    auto* analyze = app.add_subcommand("analyze", "means, covariance, optional outage");
    add_common(analyze, analyze_o);
    double rate = 0.0, oprob = 0.0;
    auto* rate_opt = analyze->add_option("--rate", rate, "rate threshold for outage probability");
    auto* oprob_opt =
        analyze->add_option("--outage-prob", oprob, "target outage probability for outage rate");

    auto* mc = app.add_subcommand("mc", "Monte Carlo validation run");
    add_common(mc, mc_o);
    std::string dump_path, maha_path;
    mc->add_option("--dump-samples", dump_path, "write per-sample CSV (sample,I1,I2)");
    mc->add_option("--mahalanobis", maha_path, "write sorted d2 CSV (d2,chi2_quantile)");

    auto* spectrum = app.add_subcommand("spectrum", "limiting spectral density CSV");
    add_common(spectrum, spec_o);
    int points = 400, empirical = 0;
    double grid_max = 0.0, y_opt = 0.0;
    spectrum->add_option("--points", points, "grid points (default 400)");
    spectrum->add_option("--grid-max", grid_max, "grid upper end (default auto)");
    spectrum->add_option("--y", y_opt, "imaginary offset (default auto)");
    spectrum->add_option("--empirical", empirical,
                         "also write an averaged sampled overlay from this many draws");

    auto* sweep = app.add_subcommand("sweep", "sweep one parameter, emit a CSV table");
    add_common(sweep, sweep_o);
    std::string sweep_param;
    std::vector<double> sweep_values;
    sweep->add_option("--param", sweep_param, "snr_db|L|N")->required();
    sweep->add_option("--values", sweep_values, "sweep values")->required()->delimiter(',');

    auto* iid = app.add_subcommand("iid", "closed forms for identity correlations");
    add_common(iid, iid_o, false);
    double c1 = 1.0, c2 = 1.0, s1 = 1.0, s2 = 1.0, large_l = 0.0, n_dim = 1.0;
    iid->add_option("--c1", c1, "N/L ratio")->required();
    iid->add_option("--c2", c2, "L/M ratio")->required();
    iid->add_option("--sigma1-sq", s1, "first-hop noise power")->required();
    iid->add_option("--sigma2-sq", s2, "receiver noise power")->required();
    iid->add_option("--large-l", large_l,
                    "emit the large-middle-dimension limit at this c = c1*c2");
    iid->add_option("--n", n_dim, "receive dimension scale (default 1: per-antenna values)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (solve->parsed()) return cmd_solve(solve_o);
        if (analyze->parsed())
            return cmd_analyze(analyze_o, rate, oprob, rate_opt->count() > 0,
                               oprob_opt->count() > 0);
        if (mc->parsed()) return cmd_mc(mc_o, dump_path, maha_path);
        if (spectrum->parsed()) return cmd_spectrum(spec_o, points, grid_max, y_opt, empirical);
        if (sweep->parsed()) return cmd_sweep(sweep_o, sweep_param, sweep_values);
        if (iid->parsed()) return cmd_iid(iid_o, c1, c2, s1, s2, large_l, n_dim);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
