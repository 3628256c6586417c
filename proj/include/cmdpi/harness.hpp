#pragma once

#include "cmdpi/io.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <set>
#include <thread>

namespace cmdpi {

/// The 4-state, 2-action, 2-objective chain environment used throughout the
/// desk-scale experiments. Action 0 steps left deterministically, action 1
/// steps right with probability 0.9, both with boundary reflection;
/// gamma = 0.8, uniform initial distribution.
inline Momdp toy_momdp() {
    Momdp m;
    m.n_states = 4;
    m.n_actions = 2;
    m.n_objectives = 2;
    m.gamma = 0.8;
    m.p0 = Vector::Constant(4, 0.25);

    Matrix p_left(4, 4), p_right(4, 4);
    p_left << 1, 0, 0, 0,
              1, 0, 0, 0,
              0, 1, 0, 0,
              0, 0, 1, 0;
    p_right << 0.1, 0.9, 0,   0,
               0.1, 0,   0.9, 0,
               0,   0.1, 0,   0.9,
               0,   0,   0.1, 0.9;
    m.kernel = {p_left, p_right};

    m.rewards.resize(8, 2);
    m.rewards << 0, 0,    // s=0, a=0
                 0, 0,    // s=0, a=1
                 0, 2,    // s=1, a=0
                 0, 0,    // s=1, a=1
                 0, 1.6,  // s=2, a=0
                 0, 0,    // s=2, a=1
                 1, 0,    // s=3, a=0
                 0, 1;    // s=3, a=1
    return m;
}

/// Seeded random environment with full-support kernel rows (Dirichlet),
/// uniform initial distribution, and rewards uniform in [-1, 1].
inline Momdp random_momdp(int n_states, int n_actions, int n_objectives, double gamma,
                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unit = [&rng]() { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };

    Momdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.n_objectives = n_objectives;
    m.gamma = gamma;
    m.p0 = Vector::Constant(n_states, 1.0 / n_states);
    for (int a = 0; a < n_actions; ++a) {
        Matrix P(n_states, n_states);
        for (int s = 0; s < n_states; ++s) {
            double sum = 0.0;
            for (int t = 0; t < n_states; ++t) {
                P(s, t) = -std::log(unit());
                sum += P(s, t);
            }
            P.row(s) /= sum;
        }
        m.kernel.push_back(P);
    }
    m.rewards.resize(n_states * n_actions, n_objectives);
    for (int i = 0; i < m.rewards.rows(); ++i)
        for (int l = 0; l < n_objectives; ++l) m.rewards(i, l) = 2.0 * unit() - 1.0;
    return m;
}

enum class Method { linear_vi, cmdpi, capql };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::linear_vi: return "linear_vi";
        case Method::cmdpi: return "cmdpi";
        case Method::capql: return "capql";
    }
    throw std::logic_error("method_name: unknown method");
}

inline Method method_from_name(const std::string& s) {
    if (s == "linear_vi" || s == "vi") return Method::linear_vi;
    if (s == "cmdpi") return Method::cmdpi;
    if (s == "capql") return Method::capql;
    throw std::invalid_argument("unknown method: " + s);
}

/// A preference sweep over one environment and one method. For cmdpi/capql,
/// each tau becomes one configuration; alphas, when non-empty, override the
/// default alpha = 1/tau pairing position-wise.
struct SweepSpec {
    Momdp env;
    std::string env_name = "custom";
    Method method = Method::cmdpi;
    int n_prefs = 100;
    double delta = 0.0;
    std::vector<double> taus = {1.0, 0.1, 0.01};
    std::vector<double> alphas;
    std::vector<std::uint64_t> seeds;
    SolverConfig solver;
    std::string out_path;
};

struct SweepRow {
    std::string method;
    double tau = 0.0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    Vector omega;
    ObjectiveVector j;
    double utility = 0.0;
    int iters = 0;
    double dist_front = std::numeric_limits<double>::quiet_NaN();
    double runtime_ms = 0.0;
    std::string error;
};

struct SweepResult {
    int n_objectives = 0;
    std::vector<SweepRow> rows;
};

namespace detail {

inline void run_indexed(int n, int jobs, const std::function<void(int)>& body) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    int workers = std::min(jobs, n);
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Runs the sweep. Rows are ordered by (configuration, preference index, seed)
/// regardless of the parallelism degree. Exact evaluation throughout; per-row
/// failures are recorded in the row's error field and the sweep continues.
/// Wall-clock timing is off by default so that identical specs produce
/// byte-identical exports.
inline SweepResult run_sweep(const SweepSpec& spec, int jobs = 1, bool timing = false) {
    validate(spec.env);
    const Momdp& env = spec.env;
    const int m = env.n_objectives;

    std::vector<Preference> grid = preference_grid(spec.n_prefs, m, spec.delta);
    std::vector<std::uint64_t> seeds = spec.seeds.empty() ? std::vector<std::uint64_t>{0} : spec.seeds;
    Vector utopia = utopia_from_momdp(env);

    std::optional<ParetoFront2D> front;
    if (m == 2) {
        try {
            front = pareto_front_oracle(env);
        } catch (const std::invalid_argument&) {
            // enumeration cap exceeded; distances stay NaN
        }
    }

    struct Config {
        double tau, alpha;
    };
    std::vector<Config> configs;
    if (spec.method == Method::linear_vi) {
        configs.push_back({0.0, 0.0});
    } else {
        for (std::size_t i = 0; i < spec.taus.size(); ++i) {
            double tau = spec.taus[i];
            double alpha = i < spec.alphas.size() ? spec.alphas[i] : 1.0 / tau;
            configs.push_back({tau, alpha});
        }
    }

    SweepResult result;
    result.n_objectives = m;
    result.rows.resize(configs.size() * grid.size() * seeds.size());

    auto body = [&](int idx) {
        const int per_config = static_cast<int>(grid.size() * seeds.size());
        const int c = idx / per_config;
        const int w = (idx % per_config) / static_cast<int>(seeds.size());
        const int s = idx % static_cast<int>(seeds.size());

        SweepRow& row = result.rows[idx];
        row.method = method_name(spec.method);
        row.tau = configs[c].tau;
        row.alpha = configs[c].alpha;
        row.seed = seeds[s];
        row.omega = grid[w].omega;

        auto t0 = std::chrono::steady_clock::now();
        try {
            if (spec.method == Method::linear_vi) {
                ViResult vi = value_iteration_linear(env, grid[w], spec.solver.inner_tol);
                row.j = vi.j;
                row.utility = linear_utility(vi.j, grid[w]);
                row.iters = vi.sweeps;
            } else {
                StchParams params{configs[c].tau, utopia};
                SolverConfig cfg = spec.solver;
                cfg.alpha = configs[c].alpha;
                cfg.rng_seed = seeds[s];
                Policy pi0 = random_policy(env, seeds[s]);
                SolveTrace trace = spec.method == Method::cmdpi
                                       ? run_cmdpi(env, grid[w], params, cfg, pi0)
                                       : run_capql(env, grid[w], params, cfg, pi0);
                row.j = trace.final_record().j;
                row.utility = trace.final_record().utility;
                row.iters = trace.iterations();
            }
            if (front) row.dist_front = distance_to_front(*front, row.j);
        } catch (const std::exception& e) {
            row.error = e.what();
            row.j = ObjectiveVector::Constant(m, std::numeric_limits<double>::quiet_NaN());
            row.utility = std::numeric_limits<double>::quiet_NaN();
        }
        if (timing)
            row.runtime_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    };
    detail::run_indexed(static_cast<int>(result.rows.size()), jobs, body);
    return result;
}

/// CSV export. Columns:
///   method,tau,alpha,seed,omega_1..omega_m,J_1..J_m,utility,iters,dist_front,runtime_ms
/// All reals use 17 significant digits; LF line endings; '.' decimal separator.
inline std::string sweep_to_csv(const SweepResult& result) {
    std::ostringstream out;
    const int m = result.n_objectives;
    out << "method,tau,alpha,seed";
    for (int l = 1; l <= m; ++l) out << ",omega_" << l;
    for (int l = 1; l <= m; ++l) out << ",J_" << l;
    out << ",utility,iters,dist_front,runtime_ms\n";
    for (const auto& r : result.rows) {
        out << r.method << ',' << fmt17(r.tau) << ',' << fmt17(r.alpha) << ',' << r.seed;
        for (int l = 0; l < m; ++l) out << ',' << fmt17(r.omega(l));
        for (int l = 0; l < m; ++l) out << ',' << fmt17(r.j(l));
        out << ',' << fmt17(r.utility) << ',' << r.iters << ',' << fmt17(r.dist_front) << ','
            << fmt17(r.runtime_ms) << '\n';
    }
    return out.str();
}

inline json sweep_to_json(const SweepResult& result) {
    json j;
    j["n_objectives"] = result.n_objectives;
    json rows = json::array();
    for (const auto& r : result.rows) {
        json row;
        row["method"] = r.method;
        row["tau"] = r.tau;
        row["alpha"] = r.alpha;
        row["seed"] = r.seed;
        row["omega"] = vector_to_json(r.omega);
        row["J"] = vector_to_json(r.j);
        row["utility"] = r.utility;
        row["iters"] = r.iters;
        row["dist_front"] = r.dist_front;
        row["runtime_ms"] = r.runtime_ms;
        if (!r.error.empty()) row["error"] = r.error;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j;
}

inline SweepResult sweep_from_json(const json& j) {
    SweepResult result;
    result.n_objectives = j.at("n_objectives").get<int>();
    for (const auto& row : j.at("rows")) {
        SweepRow r;
        r.method = row.at("method").get<std::string>();
        r.tau = row.at("tau").get<double>();
        r.alpha = row.at("alpha").get<double>();
        r.seed = row.at("seed").get<std::uint64_t>();
        r.omega = vector_from_json(row.at("omega"));
        r.j = vector_from_json(row.at("J"));
        r.utility = row.at("utility").get<double>();
        r.iters = row.at("iters").get<int>();
        r.dist_front = row.at("dist_front").is_null()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : row.at("dist_front").get<double>();
        r.runtime_ms = row.at("runtime_ms").get<double>();
        if (row.contains("error")) r.error = row.at("error").get<std::string>();
        result.rows.push_back(std::move(r));
    }
    return result;
}

/// Writes a sweep in "csv" or "json" format.
inline void export_sweep(const SweepResult& result, const std::string& format,
                         const std::string& path) {
    if (format == "csv")
        write_text_file(path, sweep_to_csv(result));
    else if (format == "json")
        write_text_file(path, sweep_to_json(result).dump(2) + "\n");
    else
        throw std::invalid_argument("export_sweep: unknown format " + format);
}

// ---------------------------------------------------------------------------
// Verification battery
// ---------------------------------------------------------------------------

struct VerifyEntry {
    std::string suite;
    std::string metric;
    double bound = 0.0;
    double measured = 0.0;
    bool pass = false;
};

struct VerificationReport {
    std::vector<VerifyEntry> entries;

    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }
};

struct VerifyOptions {
    std::set<std::string> suites;  // empty = all five
    std::uint64_t seed = 12345;
    int jobs = 1;

    // uniqueness: interior preferences x random initializations
    int uniq_n_prefs = 5;
    int uniq_n_inits = 20;
    double uniq_tau = 0.1;
    int uniq_max_iters = 12000;  // tau = 0.1 converges geometrically but slowly
    double uniq_bound = 1e-5;

    // preference-Lipschitz probe
    double lip_delta = 0.05;
    int lip_n = 100;
    double lip_tau = 0.1;
    int lip_max_iters = 2000;

    // Bregman/KL identity
    int breg_pairs = 100;
    double breg_bound = 1e-9;

    // mirror-descent rate certificate
    double rate_tau = 0.1;
    int rate_iters = 300;
    int rate_oracle_factor = 10;
    double rate_slack = 1e-7;

    // finite-iteration preference continuity
    int cont_k = 50;
    int cont_base_n = 11;
    int cont_halvings = 2;
    double cont_delta = 0.05;
    double cont_tau = 0.1;
    double cont_ratio_bound = 2.0;  // allowed g(h/2) / g(h), ideal 0.5
};

inline bool verify_suite_selected(const VerifyOptions& opt, const std::string& name) {
    return opt.suites.empty() || opt.suites.count(name) > 0;
}

/// Runs the five verifier suites (uniqueness, lipschitz, bregman, rate,
/// continuity) on a two-objective environment and reports measured margins.
/// Failures become report entries, not errors.
inline VerificationReport verify_all(const Momdp& env, const VerifyOptions& opt = {}) {
    validate(env);
    if (env.n_objectives != 2)
        throw std::invalid_argument("verify_all: requires a two-objective environment");
    VerificationReport report;
    const Vector utopia = utopia_from_momdp(env);

    if (verify_suite_selected(opt, "uniqueness")) {
        // Prop: a fixed preference admits a unique optimal objective vector, so
        // converged runs from different initializations must agree.
        std::vector<Preference> interior = preference_grid(opt.uniq_n_prefs + 2, 2, 0.0);
        interior.erase(interior.begin());
        interior.pop_back();
        StchParams params{opt.uniq_tau, utopia};
        SolverConfig cfg = solver_config_for_tau(opt.uniq_tau);
        cfg.max_outer_iters = opt.uniq_max_iters;
        cfg.outer_tol = 1e-13;

        std::vector<std::vector<ObjectiveVector>> finals(interior.size());
        for (auto& f : finals) f.resize(opt.uniq_n_inits);
        detail::run_indexed(
            static_cast<int>(interior.size()) * opt.uniq_n_inits, opt.jobs, [&](int idx) {
                int w = idx / opt.uniq_n_inits, i = idx % opt.uniq_n_inits;
                Policy pi0 = random_policy(env, opt.seed + 1000 * w + i);
                finals[w][i] = run_cmdpi(env, interior[w], params, cfg, pi0).final_record().j;
            });
        double worst = 0.0;
        for (const auto& group : finals)
            for (std::size_t i = 0; i < group.size(); ++i)
                for (std::size_t k = i + 1; k < group.size(); ++k)
                    worst = std::max(worst, (group[i] - group[k]).cwiseAbs().maxCoeff());
        report.entries.push_back(
            {"uniqueness", "max_pairwise_J_gap", opt.uniq_bound, worst, worst <= opt.uniq_bound});
    }

    if (verify_suite_selected(opt, "lipschitz")) {
        // Empirical preference-sensitivity of converged objectives against the
        // theoretical constant built from enumeration bounds.
        std::vector<Preference> grid = preference_grid(opt.lip_n, 2, opt.lip_delta);
        StchParams params{opt.lip_tau, utopia};
        SolverConfig cfg = solver_config_for_tau(opt.lip_tau);
        cfg.max_outer_iters = opt.lip_max_iters;

        std::vector<std::pair<Preference, ObjectiveVector>> sweep(grid.size());
        detail::run_indexed(static_cast<int>(grid.size()), opt.jobs, [&](int i) {
            Policy pi0 = random_policy(env, opt.seed + i);
            sweep[i] = {grid[i], run_cmdpi(env, grid[i], params, cfg, pi0).final_record().j};
        });

        std::vector<std::pair<double, double>> j_bounds(2, {std::numeric_limits<double>::infinity(),
                                                            -std::numeric_limits<double>::infinity()});
        for (const Policy& pi : enumerate_deterministic_policies(env)) {
            ObjectiveVector j = objective_vector(env, pi);
            for (int l = 0; l < 2; ++l) {
                j_bounds[l].first = std::min(j_bounds[l].first, j(l));
                j_bounds[l].second = std::max(j_bounds[l].second, j(l));
            }
        }
        ConstantsReport constants = lipschitz_constant(j_bounds, utopia, opt.lip_delta, opt.lip_tau);
        LipschitzReport lip = lipschitz_empirical(sweep, constants.lipschitz_L);
        report.entries.push_back({"lipschitz", "max_dJ_over_domega", constants.lipschitz_L,
                                  lip.max_ratio, lip.ok});
    }

    if (verify_suite_selected(opt, "bregman")) {
        // Identity between the occupancy-weighted conditional KL and the
        // Bregman divergence of the negative conditional entropy.
        std::vector<Momdp> envs = {env, random_momdp(5, 3, 2, 0.9, opt.seed + 7),
                                   random_momdp(6, 2, 3, 0.85, opt.seed + 8)};
        double worst = 0.0;
        for (std::size_t e = 0; e < envs.size(); ++e) {
            for (int i = 0; i < opt.breg_pairs; ++i) {
                Policy a = random_policy(envs[e], opt.seed + 2 * i + 100000 * e);
                Policy b = random_policy(envs[e], opt.seed + 2 * i + 100000 * e + 1);
                double gamma_kl = occupancy_weighted_kl(envs[e], a, b);
                double breg = bregman_divergence(envs[e], occupancy_measure(envs[e], a),
                                                 occupancy_measure(envs[e], b));
                worst = std::max(worst, std::abs(gamma_kl - breg));
            }
        }
        report.entries.push_back(
            {"bregman", "max_abs_gamma_minus_D", opt.breg_bound, worst, worst <= opt.breg_bound});
    }

    if (verify_suite_selected(opt, "rate")) {
        // O(1/k) certificate at the theoretical step alpha = L_rel (1-gamma),
        // with the comparator taken from a longer run sharing the same start.
        Preference w{Vector::Constant(2, 0.5), 0.0};
        StchParams params{opt.rate_tau, utopia};
        double l_rel = relative_smoothness_constant(env, w, opt.rate_tau);
        SolverConfig cfg;
        cfg.alpha = l_rel * (1.0 - env.gamma);
        cfg.max_outer_iters = opt.rate_iters;
        cfg.outer_tol = 0.0;
        Policy pi0 = random_policy(env, opt.seed + 99);
        SolveTrace trace = run_cmdpi(env, w, params, cfg, pi0);

        SolverConfig oracle_cfg = cfg;
        oracle_cfg.max_outer_iters = opt.rate_iters * opt.rate_oracle_factor;
        SolveTrace oracle = run_cmdpi(env, w, params, oracle_cfg, pi0);
        double u_star = oracle.final_record().utility;
        double d0 = bregman_divergence(env, occupancy_measure(env, oracle.final_policy),
                                       occupancy_measure(env, pi0));
        CertificateReport cert = mirror_descent_certificate(trace, u_star, l_rel, d0, opt.rate_slack);
        report.entries.push_back({"rate", "max_gap_excess", opt.rate_slack, cert.max_excess,
                                  cert.violations == 0});
    }

    if (verify_suite_selected(opt, "continuity")) {
        // Finite-iteration policies vary continuously in the preference: the
        // max adjacent policy gap must shrink with the grid spacing.
        StchParams params{opt.cont_tau, utopia};
        SolverConfig cfg = solver_config_for_tau(opt.cont_tau);
        cfg.max_outer_iters = opt.cont_k;
        cfg.outer_tol = 0.0;  // exactly K steps
        Policy pi0 = random_policy(env, opt.seed + 5);

        auto max_gap = [&](int n) {
            std::vector<Matrix> finals(n);
            detail::run_indexed(n, opt.jobs, [&](int i) {
                double w1 = opt.cont_delta +
                            (1.0 - 2.0 * opt.cont_delta) * static_cast<double>(i) / (n - 1);
                Preference w{Vector(2), opt.cont_delta};
                w.omega << w1, 1.0 - w1;
                finals[i] = run_cmdpi(env, w, params, cfg, pi0).final_policy.probs;
            });
            double g = 0.0;
            for (int i = 0; i + 1 < n; ++i)
                g = std::max(g, (finals[i + 1] - finals[i]).cwiseAbs().maxCoeff());
            return g;
        };

        double worst_ratio = 0.0;
        int n = opt.cont_base_n;
        double g_prev = max_gap(n);
        for (int level = 0; level < opt.cont_halvings; ++level) {
            n = 2 * (n - 1) + 1;
            double g = max_gap(n);
            worst_ratio = std::max(worst_ratio, g_prev > 0.0 ? g / g_prev : 0.0);
            g_prev = g;
        }
        report.entries.push_back({"continuity", "max_gap_ratio_per_halving", opt.cont_ratio_bound,
                                  worst_ratio, worst_ratio <= opt.cont_ratio_bound});
    }

    return report;
}

inline json verification_report_to_json(const VerificationReport& report) {
    json entries = json::array();
    for (const auto& e : report.entries) {
        json entry;
        entry["suite"] = e.suite;
        entry["metric"] = e.metric;
        entry["bound"] = e.bound;
        entry["measured"] = e.measured;
        entry["pass"] = e.pass;
        entries.push_back(std::move(entry));
    }
    json j;
    j["suites"] = std::move(entries);
    j["all_pass"] = report.all_pass();
    return j;
}

}  // namespace cmdpi
