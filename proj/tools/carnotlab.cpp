// carnotlab: batch experiment runner for the group-law samplers, entropy and
// energy estimators, and the inequality checkers.
//
// Exit codes: 0 all checks hold or are inconclusive, 1 at least one check is
// violated, 2 configuration or usage errors.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "carnotlab/bank.hpp"
#include "carnotlab/config.hpp"
#include "carnotlab/curvature.hpp"
#include "carnotlab/estimators.hpp"
#include "carnotlab/inequalities.hpp"
#include "carnotlab/report.hpp"

namespace {

using namespace carnotlab;

constexpr int kExitOk = 0;
constexpr int kExitViolated = 1;
constexpr int kExitUsage = 2;

struct CommonOpts {
    std::string config_path;
    int threads = -1; // -1 = take from config
    std::string output;
    std::string read_bank;
    std::string write_bank;
};

ExperimentConfig load_config(const CommonOpts& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw std::runtime_error("cannot open config file " + opts.config_path);
        cfg = parse_config(in);
    }
    apply_env_overrides(cfg);
    if (opts.threads >= 0) cfg.threads = opts.threads;
    if (!opts.output.empty()) cfg.output = opts.output;
    return cfg;
}

void emit(const ExperimentConfig& cfg, const std::string& text) {
    if (cfg.output.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    const std::filesystem::path p(cfg.output);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write output file " + cfg.output);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

int exit_code_for(std::span<const InequalityReport> reports) {
    for (const auto& r : reports)
        if (r.verdict == Verdict::violated) return kExitViolated;
    return kExitOk;
}

std::vector<PathSample> load_or_make_bank(const ExperimentConfig& cfg,
                                          const CommonOpts& opts) {
    if (!opts.read_bank.empty()) {
        auto [header, bank] = read_bank(opts.read_bank);
        return std::move(bank);
    }
    const SeedPlan plan{cfg.seed, cfg.chunk_size};
    auto bank = make_bank(plan, cfg.n_paths, cfg.grid_k, cfg.substeps, cfg.beta, cfg.threads);
    if (!opts.write_bank.empty()) {
        BankHeader h;
        h.master_seed = cfg.seed;
        h.chunk_size = cfg.chunk_size;
        h.K = cfg.grid_k;
        h.substeps = static_cast<std::uint64_t>(cfg.substeps);
        h.beta = cfg.beta;
        write_bank(opts.write_bank, h, bank);
    }
    return bank;
}

// --- selftest ---------------------------------------------------------------

int run_selftest(const ExperimentConfig&) {
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const GroupPoint g{rng.normal(), rng.normal(), rng.normal()};
        const GroupPoint h{rng.normal(), rng.normal(), rng.normal()};
        const GroupPoint k{rng.normal(), rng.normal(), rng.normal()};
        const GroupPoint l = multiply(multiply(g, h), k);
        const GroupPoint r = multiply(g, multiply(h, k));
        if (std::abs(l.z - r.z) > 1e-12 || std::abs(l.x - r.x) > 1e-12) {
            std::cerr << "selftest: associativity failed\n";
            return kExitViolated;
        }
        const GroupPoint e = multiply(g, inverse(g));
        if (e.x != 0.0 || e.y != 0.0 || e.z != 0.0) {
            std::cerr << "selftest: inverse failed\n";
            return kExitViolated;
        }
    }

    for (const auto& m : standard_suite()) {
        const auto comm = field_product(m.fn, {Field::X, Field::Y}) -
                          field_product(m.fn, {Field::Y, Field::X}) -
                          m.fn.apply_field(Field::Z);
        for (int i = 0; i < 100; ++i) {
            const GroupPoint p{rng.normal(), rng.normal(), rng.normal()};
            if (std::abs(comm.evaluate(p)) > 1e-10) {
                std::cerr << "selftest: commutation identity failed on " << m.name << "\n";
                return kExitViolated;
            }
        }
        if (!m.fn.is_integrable()) {
            std::cerr << "selftest: suite member not integrable: " << m.name << "\n";
            return kExitViolated;
        }
    }

    const PathSample a = path_sample(8, 8, 1.0, 7);
    const PathSample b = path_sample(8, 8, 1.0, 7);
    if (a.area != b.area || a.w != b.w) {
        std::cerr << "selftest: sampler determinism failed\n";
        return kExitViolated;
    }

    std::cout << "selftest: ok\n";
    return kExitOk;
}

// --- clt --------------------------------------------------------------------

int run_clt(const ExperimentConfig& cfg) {
    std::ostringstream csv;
    csv << "metric,n,beta,value,target,sigma,ok\n";
    csv << std::setprecision(17);
    bool all_ok = true;

    const SeedPlan plan{cfg.seed, cfg.chunk_size};
    for (std::size_t n : {16ul, 256ul, 4096ul}) {
        const std::size_t samples = cfg.n_paths;
        std::vector<double> xs(samples), ys(samples), zs(samples);
        parallel_chunks(samples, cfg.chunk_size, cfg.threads,
                        [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const GroupPoint s =
                    walk_sample(n, cfg.beta, child_seed(plan.path_base(i), n));
                xs[i] = s.x;
                ys[i] = s.y;
                zs[i] = s.z;
            }
        });

        auto var_of = [&](const std::vector<double>& v) {
            const double m = mean_of(v);
            double s = 0.0, m4 = 0.0;
            for (double x : v) s += (x - m) * (x - m);
            s /= double(v.size());
            for (double x : v) m4 += std::pow((x - m), 4);
            m4 /= double(v.size());
            return std::pair{s, std::sqrt(std::max(0.0, m4 - s * s) / double(v.size()))};
        };
        const auto [vx, sx] = var_of(xs);
        const auto [vy, sy] = var_of(ys);
        const auto [vz, sz] = var_of(zs);
        double cxz = 0.0;
        for (std::size_t i = 0; i < samples; ++i) cxz += xs[i] * zs[i];
        cxz /= double(samples);
        const double s_cxz = std::sqrt((vx * vz + cxz * cxz) / double(samples));

        const double target_z = cfg.beta * cfg.beta + 0.25;
        struct Row {
            const char* metric;
            double value, target, sigma;
        } rows[] = {{"var_x", vx, 1.0, sx},
                    {"var_y", vy, 1.0, sy},
                    {"var_z", vz, target_z, sz},
                    {"cov_xz", cxz, 0.0, s_cxz}};
        for (const auto& row : rows) {
            // allowance 1/(4n) covers the exact finite-n area variance bias
            const bool ok = std::abs(row.value - row.target) <=
                            3.0 * row.sigma + 0.25 / double(n);
            all_ok = all_ok && ok;
            csv << row.metric << ',' << n << ',' << cfg.beta << ',' << row.value << ','
                << row.target << ',' << row.sigma << ',' << (ok ? 1 : 0) << '\n';
        }
    }
    emit(cfg, csv.str());
    return all_ok ? kExitOk : kExitViolated;
}

// --- lsi --------------------------------------------------------------------

int run_lsi(const ExperimentConfig& cfg, const CommonOpts& opts, const std::string& name) {
    const auto suite = resolve_suite(cfg);
    const LsiRunConfig run = cfg.lsi_run_config();
    std::vector<InequalityReport> reports;

    auto integrable_members = [&] {
        std::vector<NamedTestFunction> out;
        for (const auto& m : suite)
            if (m.fn.is_integrable()) out.push_back(m);
        return out;
    };

    if (name == "theorem1" || name == "poincare") {
        std::vector<FnDerivs> fns;
        for (const auto& m : integrable_members()) fns.push_back(make_derivs(m));
        std::vector<JointColumns> cols;
        if (!opts.read_bank.empty()) {
            auto [header, bank] = read_bank(opts.read_bank);
            LsiRunConfig bank_run = run;
            bank_run.beta = header.beta;
            for (const auto& d : fns)
                cols.push_back(joint_columns_from_bank(bank, d, cfg.t_quadrature));
            for (const auto& col : cols)
                reports.push_back(name == "theorem1"
                                      ? check_theorem1_from_columns(col, bank_run)
                                      : check_poincare_from_columns(col, bank_run));
        } else {
            cols = joint_pass(run, fns);
            for (const auto& col : cols)
                reports.push_back(name == "theorem1" ? check_theorem1_from_columns(col, run)
                                                     : check_poincare_from_columns(col, run));
        }
    } else if (name == "corollary" || name == "li_sym" || name == "bg_nu" || name == "bg_w") {
        LsiRunConfig endpoint_run = run;
        endpoint_run.beta = 0.0;
        EndpointBank bank;
        if (!opts.read_bank.empty()) {
            auto [header, paths] = read_bank(opts.read_bank);
            bank = endpoint_bank_from_bank(paths);
        } else {
            bank = make_endpoint_bank(endpoint_run);
        }

        double C = cfg.bridge_c;
        if (name == "corollary" && C == 0.0) {
            // "auto": fit the bridge constant first, then compose
            const SeedPlan plan{cfg.seed, cfg.chunk_size};
            auto paths = make_bank(plan, std::min<std::size_t>(cfg.n_paths, 20000), cfg.grid_k,
                                   cfg.substeps, 0.0, cfg.threads);
            const auto ts = midpoint_nodes(5);
            std::vector<GroupPoint> targets;
            for (double r : {0.5, 1.0, 2.0})
                for (double z : {-1.0, 0.0, 1.0}) targets.push_back({r, 0.0, z});
            const std::size_t k = cfg.knn ? cfg.knn : default_knn(paths.size());
            const BridgeFit fit = bridge_lemma_fit(paths, ts, targets, k,
                                                   tag_seed(cfg.seed, "bridge"));
            C = corollary_weight_from_bridge(fit.c_integrated);
        }

        for (const auto& m : integrable_members()) {
            if (name == "corollary") {
                reports.push_back(check_corollary(m, C, bank, cfg.seed));
            } else if (name == "li_sym") {
                reports.push_back(check_li_symmetrized(m, cfg.c_lsi, bank, cfg.seed));
            } else if (name == "bg_nu") {
                for (double nu : cfg.nu_list)
                    reports.push_back(check_bg(m, nu, BgVariant::sublaplacian, bank, cfg.seed));
            } else {
                for (double nu : cfg.nu_list)
                    reports.push_back(check_bg(m, nu, BgVariant::weighted, bank, cfg.seed));
            }
        }
    } else if (name == "finite_n") {
        for (const auto& m : integrable_members())
            for (std::size_t n : cfg.finite_n)
                reports.push_back(check_finite_n(m, n, cfg.beta, run));
    } else if (name == "best_constant") {
        std::vector<FnDerivs> fns;
        for (const auto& m : integrable_members())
            if (m.horizontal) fns.push_back(make_derivs(m));
        const auto cols = joint_pass(run, fns);
        const McEstimate best = estimate_best_constant(cols, cfg.seed);
        std::ostringstream csv;
        csv << "estimator,params,value,ci,n,seed\n"
            << estimate_csv_row("best_constant", "family=theorem1-horizontal", best) << '\n';
        emit(cfg, csv.str());
        return kExitOk;
    } else {
        std::cerr << "lsi: unknown checker '" << name << "'\n";
        return kExitUsage;
    }

    emit(cfg, reports_to_json(reports).dump(2));
    return exit_code_for(reports);
}

// --- bridge -----------------------------------------------------------------

int run_bridge(const ExperimentConfig& cfg, const CommonOpts& opts) {
    ExperimentConfig bcfg = cfg;
    bcfg.beta = 0.0;
    auto bank = load_or_make_bank(bcfg, opts);
    const std::size_t k = cfg.knn ? cfg.knn : default_knn(bank.size());

    // quadrature nodes on the bank grid (interior points)
    std::vector<double> ts;
    for (std::size_t i = 1; i < bank[0].size() - 1; ++i) ts.push_back(bank[0].grid[i]);
    std::vector<GroupPoint> targets;
    for (double r : {0.5, 1.0, 1.5, 2.0, 2.5})
        for (double z : {-1.0, -0.5, 0.0, 0.5, 1.0}) targets.push_back({r, 0.0, z});

    const std::uint64_t seed = tag_seed(cfg.seed, "bridge");
    const BridgeFit full = bridge_lemma_fit(bank, ts, targets, k, seed);
    const BridgeFit eucl = bridge_lemma_fit(bank, ts, targets, k, seed, true);

    std::ostringstream csv;
    csv << "estimator,params,value,ci,n,seed\n" << std::setprecision(17);
    const auto row = [&](const std::string& est, double value) {
        csv << estimate_csv_row(est, "k=" + std::to_string(k), {value, 0.0, bank.size(), seed})
            << '\n';
    };
    row("bridge_c_pointwise", full.c_pointwise);
    row("bridge_c_integrated", full.c_integrated);
    row("bridge_c_euclidean", eucl.c_pointwise);
    row("corollary_weight", corollary_weight_from_bridge(full.c_integrated));

    // heat-kernel shape fit on the same endpoints
    const auto endpoints = endpoint_bank_from_bank(bank);
    const HeatBoundFit heat = heat_shape_check(endpoints.pts, 2.5);
    row("heat_c1", heat.c1_hat);
    row("heat_c2", heat.c2_hat);
    row("heat_log_slope", heat.slope);

    emit(cfg, csv.str());
    return kExitOk;
}

// --- curvature ---------------------------------------------------------------

int run_curvature(const ExperimentConfig& cfg) {
    std::ostringstream csv;
    csv << curvature_csv_header() << '\n' << std::setprecision(17);
    Rng rng(child_seed(cfg.seed, stable_hash64("curvature")));
    bool all_ok = true;
    const std::vector<double> nus = cfg.nu_list;
    for (const auto& m : standard_suite()) {
        const auto ops = make_curvature_ops(m.fn);
        for (int i = 0; i < 50; ++i) {
            const GroupPoint p{2.0 * rng.normal(), 2.0 * rng.normal(), 2.0 * rng.normal()};
            for (double nu : nus) {
                const FormValue v = gamma_forms(ops, p, nu);
                const double margin = v.gamma2_mix + (1.0 / nu) * v.gamma_elli;
                all_ok = all_ok && margin >= -1e-10;
                csv << curvature_csv_row(m.name, v, margin) << '\n';
            }
        }
    }
    emit(cfg, csv.str());
    return all_ok ? kExitOk : kExitViolated;
}

// --- carnot -----------------------------------------------------------------

int run_carnot(const ExperimentConfig& cfg, const std::string& spec_path) {
    const std::string path = spec_path.empty() ? cfg.carnot_spec_file : spec_path;
    if (path.empty()) {
        std::cerr << "carnot: no spec file (flag --spec or config key carnot_spec)\n";
        return kExitUsage;
    }
    std::ifstream in(path);
    if (!in) {
        std::cerr << "carnot: cannot open spec file " << path << "\n";
        return kExitUsage;
    }
    const CarnotSpec spec = parse_carnot_spec(in);

    LsiRunConfig run = cfg.lsi_run_config();
    run.beta = 0.0;
    std::vector<CarnotFnDerivs> fns;
    for (const auto& m : carnot_suite(spec))
        if (m.fn.is_integrable(spec.d())) fns.push_back(make_carnot_derivs(m, spec));
    const auto cols = carnot_joint_pass(spec, run, fns);
    std::vector<InequalityReport> reports;
    for (const auto& col : cols) reports.push_back(check_carnot_from_columns(col, run, spec));

    emit(cfg, reports_to_json(reports).dump(2));
    return exit_code_for(reports);
}

// --- report -----------------------------------------------------------------

int run_report(const ExperimentConfig& cfg, const std::vector<std::string>& files) {
    std::vector<InequalityReport> all;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) {
            std::cerr << "report: cannot open " << file << "\n";
            return kExitUsage;
        }
        nlohmann::json j;
        in >> j;
        const auto reports = reports_from_json(j);
        all.insert(all.end(), reports.begin(), reports.end());
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.name() < b.name();
    });
    emit(cfg, render_table(all));
    return exit_code_for(all);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for heat-kernel functional inequalities on the "
                 "Heisenberg group and rank-two Carnot groups"};
    app.require_subcommand(1);

    CommonOpts opts;
    app.add_option("--config", opts.config_path, "experiment config file (key = value)");
    app.add_option("--threads", opts.threads, "worker cap; does not change any numbers");
    app.add_option("--output", opts.output, "output file (default: stdout)");

    auto* selftest = app.add_subcommand("selftest", "group axioms and symbolic identities");
    auto* clt = app.add_subcommand("clt", "walk moment panel (CSV)");

    std::string lsi_name = "theorem1";
    double lsi_beta = -1.0;
    auto* lsi = app.add_subcommand("lsi", "run an inequality checker over the suite (JSON)");
    lsi->add_option("--name", lsi_name,
                    "theorem1|poincare|corollary|li_sym|bg_nu|bg_w|finite_n|best_constant");
    lsi->add_option("--beta", lsi_beta, "override the configured beta");
    lsi->add_option("--read-bank", opts.read_bank, "reuse a stored path bank");

    auto* bridge = app.add_subcommand("bridge", "bridge lemma fit and heat shape fit (CSV)");
    bridge->add_option("--read-bank", opts.read_bank, "reuse a stored path bank");
    bridge->add_option("--write-bank", opts.write_bank, "store the generated path bank");

    auto* curvature = app.add_subcommand("curvature", "curvature inequality sweep (CSV)");

    std::string spec_path;
    auto* carnot = app.add_subcommand("carnot", "rank-two group checks from a spec file");
    carnot->add_option("--spec", spec_path, "CarnotSpec file");

    std::vector<std::string> report_files;
    auto* report = app.add_subcommand("report", "merge JSON reports into one table");
    report->add_option("files", report_files, "JSON report files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        ExperimentConfig cfg = load_config(opts);
        if (lsi->parsed() && lsi_beta >= 0.0) cfg.beta = lsi_beta;
        if (selftest->parsed()) return run_selftest(cfg);
        if (clt->parsed()) return run_clt(cfg);
        if (lsi->parsed()) return run_lsi(cfg, opts, lsi_name);
        if (bridge->parsed()) return run_bridge(cfg, opts);
        if (curvature->parsed()) return run_curvature(cfg);
        if (carnot->parsed()) return run_carnot(cfg, spec_path);
        if (report->parsed()) return run_report(cfg, report_files);
    } catch (const ConfigParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CarnotSpecParseError& e) {
        std::cerr << "spec error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
