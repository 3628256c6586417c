// Command-line front end: solve single preferences, run preference sweeps,
// compute front metrics, and run the verification battery.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 verification
// failure. Machine-readable JSON goes to stdout, human messages to stderr.

#include "cmdpi/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

using namespace cmdpi;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("cannot parse " + what + " entry '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError(what + " must be a non-empty comma-separated list");
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw UsageError("cannot parse seed '" + item + "'");
        }
    }
    return out;
}

Momdp resolve_env(const std::string& spec) {
    if (spec == "builtin:toy") return toy_momdp();
    if (spec.rfind("builtin:", 0) == 0) throw UsageError("unknown builtin environment: " + spec);
    return load_momdp(spec);
}

Method parse_method(const std::string& name) {
    try {
        return method_from_name(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Preference parse_omega(const std::string& text, int m) {
    std::vector<double> vals = parse_double_list(text, "--omega");
    if (static_cast<int>(vals.size()) != m)
        throw UsageError("--omega must have " + std::to_string(m) + " entries");
    Preference w{Eigen::Map<Vector>(vals.data(), vals.size()), 0.0};
    try {
        check_preference(w, 1e-9);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return w;
}

std::optional<std::uint64_t> env_seed_override() {
    if (const char* s = std::getenv("CMDPI_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw UsageError("CMDPI_SEED is not a valid seed");
        }
    }
    return std::nullopt;
}

// Points from a CSV file: either J_1..J_m columns of a sweep export, or a
// headerless all-numeric table whose columns are the coordinates.
std::vector<ObjectiveVector> load_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open points file " + path);
    std::string line;
    std::vector<std::vector<std::string>> table;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        table.push_back(std::move(cells));
    }
    if (table.empty()) throw UsageError("points file is empty: " + path);

    auto is_number = [](const std::string& s) {
        try {
            std::size_t used = 0;
            std::stod(s, &used);
            return used == s.size();
        } catch (const std::exception&) {
            return false;
        }
    };

    std::vector<int> cols;
    std::size_t first_row = 0;
    bool has_header = false;
    for (const auto& cell : table[0])
        if (!is_number(cell)) has_header = true;
    if (has_header) {
        for (int c = 0; c < static_cast<int>(table[0].size()); ++c)
            if (table[0][c].rfind("J_", 0) == 0) cols.push_back(c);
        if (cols.empty()) throw UsageError("no J_* columns in " + path);
        first_row = 1;
    } else {
        for (int c = 0; c < static_cast<int>(table[0].size()); ++c) cols.push_back(c);
    }

    std::vector<ObjectiveVector> points;
    for (std::size_t r = first_row; r < table.size(); ++r) {
        ObjectiveVector p(cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] >= static_cast<int>(table[r].size()) || !is_number(table[r][cols[k]]))
                throw UsageError("malformed points row " + std::to_string(r + 1) + " in " + path);
            p(static_cast<int>(k)) = std::stod(table[r][cols[k]]);
        }
        points.push_back(std::move(p));
    }
    if (points.empty()) throw UsageError("no data rows in " + path);
    return points;
}

int run_solve(const std::string& env_spec, const std::string& method_str,
              const std::string& omega_str, double tau, std::optional<double> alpha_opt,
              int iters, std::uint64_t seed, const std::string& out_path) {
    Momdp env = resolve_env(env_spec);
    validate(env);
    Method method = parse_method(method_str);
    Preference w = parse_omega(omega_str, env.n_objectives);
    if (auto s = env_seed_override()) seed = *s;

    json out;
    out["method"] = method_name(method);
    out["env"] = env_spec;
    out["omega"] = vector_to_json(w.omega);
    out["seed"] = seed;

    ObjectiveVector j;
    if (method == Method::linear_vi) {
        ViResult vi = value_iteration_linear(env, w);
        j = vi.j;
        out["J"] = vector_to_json(vi.j);
        out["utility"] = linear_utility(vi.j, w);
        out["iters"] = vi.sweeps;
        out["termination"] = "residual";
    } else {
        if (!(tau > 0.0)) throw UsageError("--tau must be positive");
        StchParams params{tau, utopia_from_momdp(env)};
        SolverConfig cfg = solver_config_for_tau(tau);
        if (alpha_opt) cfg.alpha = *alpha_opt;
        cfg.max_outer_iters = iters;
        cfg.rng_seed = seed;
        Policy pi0 = random_policy(env, seed);
        SolveTrace trace = method == Method::cmdpi ? run_cmdpi(env, w, params, cfg, pi0)
                                                   : run_capql(env, w, params, cfg, pi0);
        j = trace.final_record().j;
        out["tau"] = tau;
        out["alpha"] = cfg.alpha;
        out["J"] = vector_to_json(j);
        out["utility"] = trace.final_record().utility;
        out["iters"] = trace.iterations();
        out["termination"] = trace.termination;
        if (!out_path.empty()) write_text_file(out_path, trace_to_json(trace).dump(2) + "\n");
    }
    if (env.n_objectives == 2) {
        try {
            out["dist_front"] = distance_to_front(pareto_front_oracle(env), j);
        } catch (const std::invalid_argument&) {
            // enumeration cap exceeded; omit the field
        }
    }
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int run_sweep_cmd(const std::string& env_spec, const std::string& method_str, int n_prefs,
                  double delta, const std::string& tau_list, const std::string& alpha_list,
                  const std::string& seed_list, int iters, const std::string& out_path,
                  const std::string& format, const std::string& front_out, int jobs,
                  bool timing) {
    SweepSpec spec;
    spec.env = resolve_env(env_spec);
    spec.env_name = env_spec;
    spec.method = parse_method(method_str);
    spec.n_prefs = n_prefs;
    spec.delta = delta;
    spec.taus = parse_double_list(tau_list, "--tau-list");
    if (!alpha_list.empty()) spec.alphas = parse_double_list(alpha_list, "--alpha-list");
    if (!seed_list.empty()) spec.seeds = parse_seed_list(seed_list);
    if (auto s = env_seed_override()) spec.seeds = {*s};
    spec.solver.max_outer_iters = iters;
    spec.out_path = out_path;

    SweepResult result = run_sweep(spec, jobs, timing);
    export_sweep(result, format, out_path);
    if (!front_out.empty())
        write_text_file(front_out, front_to_csv(pareto_front_oracle(spec.env)));

    json summary;
    summary["rows"] = result.rows.size();
    summary["out"] = out_path;
    summary["format"] = format;
    int failures = 0;
    for (const auto& r : result.rows) failures += r.error.empty() ? 0 : 1;
    summary["failed_rows"] = failures;
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int run_verify(const std::string& env_spec, const std::vector<std::string>& suites,
               const std::string& out_path, int jobs, bool quick) {
    Momdp env = resolve_env(env_spec);
    VerifyOptions opt;
    opt.jobs = jobs;
    if (quick) {
        // smoke-scale battery; bounds may legitimately fail at these budgets
        opt.uniq_n_prefs = 2;
        opt.uniq_n_inits = 2;
        opt.uniq_max_iters = 100;
        opt.lip_n = 6;
        opt.lip_max_iters = 100;
        opt.breg_pairs = 10;
        opt.rate_iters = 20;
        opt.rate_oracle_factor = 5;
        opt.cont_base_n = 5;
        opt.cont_halvings = 1;
        opt.cont_k = 5;
    }
    for (const auto& s : suites) {
        static const std::set<std::string> known{"uniqueness", "lipschitz", "bregman", "rate",
                                                 "continuity"};
        if (!known.count(s)) throw UsageError("unknown suite: " + s);
        opt.suites.insert(s);
    }
    VerificationReport report = verify_all(env, opt);
    json j = verification_report_to_json(report);
    if (!out_path.empty()) write_text_file(out_path, j.dump(2) + "\n");
    std::cout << j.dump(2) << std::endl;
    for (const auto& e : report.entries)
        std::cerr << (e.pass ? "PASS " : "FAIL ") << e.suite << " " << e.metric
                  << " measured=" << e.measured << " bound=" << e.bound << "\n";
    return report.all_pass() ? 0 : 3;
}

int run_metrics(const std::string& points_path, const std::string& ref_str, bool ref_auto,
                int n_prefs, double delta) {
    std::vector<ObjectiveVector> points = load_points_csv(points_path);
    const int m = static_cast<int>(points[0].size());
    Vector ref(m);
    if (ref_auto) {
        ref = points[0];
        for (const auto& p : points) ref = ref.cwiseMin(p);
    } else {
        if (ref_str.empty()) throw UsageError("either --ref or --ref-auto is required");
        std::vector<double> vals = parse_double_list(ref_str, "--ref");
        if (static_cast<int>(vals.size()) != m)
            throw UsageError("--ref must have " + std::to_string(m) + " entries");
        ref = Eigen::Map<Vector>(vals.data(), vals.size());
    }
    std::vector<Preference> prefs = preference_grid(n_prefs, m, delta);
    MetricReport rep = compute_metrics(points, ref, prefs,
                                       "simplex-grid-" + std::to_string(n_prefs));
    std::cout << metric_report_to_json(rep).dump(2) << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular multi-objective MDP planning toolkit"};
    app.require_subcommand(1);

    // solve
    auto* solve = app.add_subcommand("solve", "Solve one preference and print the result");
    std::string s_env = "builtin:toy", s_method, s_omega, s_out;
    double s_tau = 0.1;
    std::optional<double> s_alpha;
    int s_iters = 2000;
    std::uint64_t s_seed = 0;
    solve->add_option("--env", s_env, "Environment: builtin:toy or a JSON file");
    solve->add_option("--method", s_method, "vi | cmdpi | capql")->required();
    solve->add_option("--omega", s_omega, "Preference, comma separated")->required();
    solve->add_option("--tau", s_tau, "Smoothing temperature");
    solve->add_option("--alpha", s_alpha, "KL temperature (default 1/tau)");
    solve->add_option("--iters", s_iters, "Outer iteration cap");
    solve->add_option("--seed", s_seed, "Initialization seed");
    solve->add_option("--out", s_out, "Write the full solve trace JSON here");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a preference sweep and export rows");
    std::string w_env = "builtin:toy", w_method, w_out = "sweep.csv", w_format = "csv";
    std::string w_taus = "1,0.1,0.01", w_alphas, w_seeds, w_front_out;
    int w_nprefs = 100, w_iters = 2000, w_jobs = 0;
    double w_delta = 0.0;
    bool w_timing = false;
    sweep->add_option("--env", w_env, "Environment: builtin:toy or a JSON file");
    sweep->add_option("--method", w_method, "vi | cmdpi | capql")->required();
    sweep->add_option("--n-prefs", w_nprefs, "Preference grid size");
    sweep->add_option("--delta", w_delta, "Preference floor");
    sweep->add_option("--tau-list", w_taus, "Temperatures, comma separated");
    sweep->add_option("--alpha-list", w_alphas, "Alphas overriding the 1/tau pairing");
    sweep->add_option("--seeds", w_seeds, "Initialization seeds, comma separated");
    sweep->add_option("--iters", w_iters, "Outer iteration cap");
    sweep->add_option("--out", w_out, "Output path");
    sweep->add_option("--format", w_format, "csv | json");
    sweep->add_option("--front-out", w_front_out, "Also write the oracle front CSV here");
    sweep->add_option("--jobs", w_jobs, "Parallel workers (default: cores)");
    sweep->add_flag("--timing", w_timing, "Record wall-clock runtime_ms (breaks byte determinism)");

    // verify
    auto* verify = app.add_subcommand("verify", "Run the verification battery");
    std::string v_env = "builtin:toy", v_out;
    std::vector<std::string> v_suites;
    int v_jobs = 0;
    bool v_quick = false;
    verify->add_option("--env", v_env, "Environment: builtin:toy or a JSON file");
    verify->add_option("--suite", v_suites,
                       "Run only these suites (uniqueness, lipschitz, bregman, rate, continuity)");
    verify->add_option("--out", v_out, "Write the report JSON here");
    verify->add_option("--jobs", v_jobs, "Parallel workers (default: cores)");
    verify->add_flag("--quick", v_quick, "Smoke-scale budgets (bounds may fail)");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Front metrics of a point set");
    std::string m_points, m_ref;
    bool m_ref_auto = false;
    int m_prefs = 100;
    double m_delta = 0.0;
    metrics->add_option("--points", m_points, "CSV of points (J_* columns or bare numbers)")
        ->required();
    metrics->add_option("--ref", m_ref, "Hypervolume reference point, comma separated");
    metrics->add_flag("--ref-auto", m_ref_auto, "Use the component-wise minimum as reference");
    metrics->add_option("--prefs", m_prefs, "Preference grid size for the expected utility");
    metrics->add_option("--delta", m_delta, "Preference floor for the utility grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    }

    int jobs_default = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs_default <= 0) jobs_default = 1;

    try {
        if (solve->parsed())
            return run_solve(s_env, s_method, s_omega, s_tau, s_alpha, s_iters, s_seed, s_out);
        if (sweep->parsed())
            return run_sweep_cmd(w_env, w_method, w_nprefs, w_delta, w_taus, w_alphas, w_seeds,
                                 w_iters, w_out, w_format, w_front_out,
                                 w_jobs > 0 ? w_jobs : jobs_default, w_timing);
        if (verify->parsed())
            return run_verify(v_env, v_suites, v_out, v_jobs > 0 ? v_jobs : jobs_default, v_quick);
        if (metrics->parsed()) return run_metrics(m_points, m_ref, m_ref_auto, m_prefs, m_delta);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
