#include "cmdpi/harness.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace cmdpi;
using Catch::Approx;

namespace {

VerifyOptions quick_verify_options() {
    VerifyOptions opt;
    opt.jobs = 2;
    opt.uniq_n_prefs = 2;
    opt.uniq_n_inits = 3;
    opt.uniq_max_iters = 2500;
    opt.lip_n = 12;
    opt.lip_max_iters = 1200;
    opt.breg_pairs = 10;
    opt.rate_iters = 80;
    opt.rate_oracle_factor = 10;
    opt.cont_base_n = 5;
    opt.cont_halvings = 1;
    opt.cont_k = 30;
    return opt;
}

}  // namespace

TEST_CASE("toy environment constants") {
    Momdp toy = toy_momdp();
    REQUIRE_NOTHROW(validate(toy));
    REQUIRE(toy.gamma == 0.8);
    REQUIRE(toy.p0(2) == 0.25);

    // reward table spot checks
    REQUIRE(toy.reward(1, 0)(0) == 0.0);
    REQUIRE(toy.reward(1, 0)(1) == 2.0);
    REQUIRE(toy.reward(2, 0)(1) == 1.6);
    REQUIRE(toy.reward(3, 0)(0) == 1.0);
    REQUIRE(toy.reward(3, 1)(1) == 1.0);

    // kernel spot checks
    REQUIRE(toy.kernel[1](0, 0) == 0.1);
    REQUIRE(toy.kernel[1](0, 1) == 0.9);
    REQUIRE(toy.kernel[0](3, 2) == 1.0);

    Vector utopia = utopia_from_momdp(toy);
    REQUIRE(utopia(0) == Approx(5.0).margin(1e-12));
    REQUIRE(utopia(1) == Approx(10.0).margin(1e-12));
}

TEST_CASE("random environments are valid") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Momdp env = random_momdp(5, 3, 2, 0.9, seed);
        REQUIRE_NOTHROW(validate(env));
        Momdp again = random_momdp(5, 3, 2, 0.9, seed);
        REQUIRE((env.rewards - again.rewards).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("value-iteration sweep recovers exactly the front vertices") {
    SweepSpec spec;
    spec.env = toy_momdp();
    spec.method = Method::linear_vi;
    spec.n_prefs = 100;
    SweepResult result = run_sweep(spec, 2);
    REQUIRE(result.rows.size() == 100);

    std::vector<ObjectiveVector> distinct;
    for (const auto& row : result.rows) {
        REQUIRE(row.error.empty());
        REQUIRE(row.dist_front <= 1e-9);
        bool seen = false;
        for (const auto& d : distinct) seen = seen || (d - row.j).cwiseAbs().maxCoeff() <= 1e-8;
        if (!seen) distinct.push_back(row.j);
    }
    ParetoFront2D front = pareto_front_oracle(spec.env);
    REQUIRE(distinct.size() == front.vertices.size());
}

TEST_CASE("cmdpi sweep covers the front densely") {
    SweepSpec spec;
    spec.env = toy_momdp();
    spec.method = Method::cmdpi;
    spec.n_prefs = 12;
    spec.taus = {0.1};
    spec.solver.max_outer_iters = 1500;
    SweepResult result = run_sweep(spec, 2);
    REQUIRE(result.rows.size() == 12);
    for (const auto& row : result.rows) {
        REQUIRE(row.error.empty());
        REQUIRE(row.alpha == Approx(10.0));
        REQUIRE(row.dist_front <= 1e-3);
    }
}

TEST_CASE("cmdpi dominates capql at matched settings") {
    SweepSpec spec;
    spec.env = toy_momdp();
    spec.n_prefs = 6;
    spec.taus = {0.1};
    spec.solver.max_outer_iters = 1500;

    spec.method = Method::cmdpi;
    SweepResult ours = run_sweep(spec, 2);
    spec.method = Method::capql;
    SweepResult theirs = run_sweep(spec, 2);
    REQUIRE(ours.rows.size() == theirs.rows.size());
    for (std::size_t i = 0; i < ours.rows.size(); ++i)
        REQUIRE(ours.rows[i].utility >= theirs.rows[i].utility - 1e-6);
}

TEST_CASE("sweep defaults and determinism") {
    SweepSpec spec;
    spec.env = toy_momdp();
    spec.method = Method::cmdpi;
    spec.n_prefs = 4;
    spec.taus = {0.5};
    spec.solver.max_outer_iters = 300;

    SECTION("empty seeds fall back to seed 0") {
        SweepResult result = run_sweep(spec);
        REQUIRE(result.rows.size() == 4);
        for (const auto& row : result.rows) REQUIRE(row.seed == 0);
    }
    SECTION("identical spec gives byte-identical CSV, any parallelism") {
        std::string serial = sweep_to_csv(run_sweep(spec, 1));
        std::string parallel = sweep_to_csv(run_sweep(spec, 2));
        REQUIRE(serial == parallel);
        REQUIRE(sweep_to_csv(run_sweep(spec, 2)) == parallel);
    }
    SECTION("explicit seeds make one row each") {
        spec.seeds = {3, 9};
        SweepResult result = run_sweep(spec);
        REQUIRE(result.rows.size() == 8);
        REQUIRE(result.rows[0].seed == 3);
        REQUIRE(result.rows[1].seed == 9);
    }
    SECTION("per-row failures are recorded and the sweep continues") {
        spec.taus = {-1.0, 0.5};  // first config is invalid
        SweepResult result = run_sweep(spec);
        REQUIRE(result.rows.size() == 8);
        for (std::size_t i = 0; i < 4; ++i) {
            REQUIRE(!result.rows[i].error.empty());
            REQUIRE(std::isnan(result.rows[i].utility));
        }
        for (std::size_t i = 4; i < 8; ++i) REQUIRE(result.rows[i].error.empty());
    }
}

TEST_CASE("sweep export") {
    SweepSpec spec;
    spec.env = toy_momdp();
    spec.method = Method::linear_vi;
    spec.n_prefs = 100;
    SweepResult result = run_sweep(spec, 2);
    std::string csv = sweep_to_csv(result);

    SECTION("csv shape and header") {
        std::vector<std::string> lines;
        std::stringstream ss(csv);
        std::string line;
        while (std::getline(ss, line)) lines.push_back(line);
        REQUIRE(lines.size() == 101);
        REQUIRE(lines[0] ==
                "method,tau,alpha,seed,omega_1,omega_2,J_1,J_2,utility,iters,dist_front,runtime_ms");
        REQUIRE(csv.find('\r') == std::string::npos);
    }
    SECTION("omega columns round-trip exactly") {
        std::stringstream ss(csv);
        std::string line;
        std::getline(ss, line);  // header
        for (const auto& row : result.rows) {
            std::getline(ss, line);
            std::stringstream cells(line);
            std::string cell;
            for (int c = 0; c <= 4; ++c) std::getline(cells, cell, ',');
            REQUIRE(std::stod(cell) == row.omega(0));
        }
    }
    SECTION("json round trip preserves every row") {
        SweepResult back = sweep_from_json(sweep_to_json(result));
        REQUIRE(back.rows.size() == result.rows.size());
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            REQUIRE(back.rows[i].method == result.rows[i].method);
            REQUIRE(back.rows[i].seed == result.rows[i].seed);
            REQUIRE((back.rows[i].omega - result.rows[i].omega).cwiseAbs().maxCoeff() == 0.0);
            REQUIRE((back.rows[i].j - result.rows[i].j).cwiseAbs().maxCoeff() == 0.0);
            REQUIRE(back.rows[i].utility == result.rows[i].utility);
            REQUIRE(back.rows[i].iters == result.rows[i].iters);
            REQUIRE(back.rows[i].dist_front == result.rows[i].dist_front);
        }
    }
    SECTION("files are written and unwritable paths fail") {
        export_sweep(result, "csv", "/tmp/cmdpi_test_sweep.csv");
        std::ifstream in("/tmp/cmdpi_test_sweep.csv");
        std::stringstream buf;
        buf << in.rdbuf();
        REQUIRE(buf.str() == csv);
        REQUIRE_THROWS(export_sweep(result, "csv", "/nonexistent-dir/x.csv"));
    }
}

TEST_CASE("solve trace serialization") {
    Momdp toy = toy_momdp();
    StchParams params{0.1, utopia_from_momdp(toy)};
    SolverConfig cfg = solver_config_for_tau(0.1);
    cfg.max_outer_iters = 20;
    cfg.outer_tol = 0.0;
    SolveTrace trace = run_cmdpi(toy, Preference{Vector::Constant(2, 0.5), 0.0}, params, cfg,
                                 random_policy(toy, 0));

    json j = trace_to_json(trace);
    REQUIRE(j["records"].size() == trace.records.size());
    REQUIRE(j["termination"] == "max_iters");

    std::string csv = trace_to_csv(trace);
    std::vector<std::string> lines;
    std::stringstream ss(csv);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    REQUIRE(lines.size() == trace.records.size() + 1);
    REQUIRE(lines[0] == "k,utility,J_1,J_2,bellman_residual,policy_delta");
}

TEST_CASE("verification battery passes on the toy environment") {
    VerificationReport report = verify_all(toy_momdp(), quick_verify_options());
    REQUIRE(report.entries.size() == 5);
    for (const auto& e : report.entries) {
        INFO(e.suite << " " << e.metric << " measured=" << e.measured << " bound=" << e.bound);
        REQUIRE(e.pass);
    }
    REQUIRE(report.all_pass());

    json j = verification_report_to_json(report);
    REQUIRE(j["all_pass"] == true);
    REQUIRE(j["suites"].size() == 5);
}

TEST_CASE("front and constants serialization") {
    ParetoFront2D front = pareto_front_oracle(toy_momdp());
    std::string csv = front_to_csv(front);
    std::vector<std::string> lines;
    std::stringstream ss(csv);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    REQUIRE(lines.size() == front.vertices.size() + 1);
    REQUIRE(lines[0] == "J_1,J_2");
    REQUIRE(std::stod(lines[1].substr(0, lines[1].find(','))) == front.vertices[0](0));

    ConstantsReport rep = lipschitz_constant({{0.0, 2.0}, {0.0, 3.0}},
                                             (Vector(2) << 3.0, 4.0).finished(), 0.1, 0.5);
    rep.rel_smooth_L = 42.0;
    json j = constants_report_to_json(rep);
    REQUIRE(j["lipschitz_L"].get<double>() == rep.lipschitz_L);
    REQUIRE(j["rel_smooth_L"].get<double>() == 42.0);
    REQUIRE(j["alpha_star"].get<double>() == rep.alpha_star);
}

TEST_CASE("verification suites can be filtered") {
    VerifyOptions opt = quick_verify_options();
    opt.suites = {"bregman"};
    VerificationReport report = verify_all(toy_momdp(), opt);
    REQUIRE(report.entries.size() == 1);
    REQUIRE(report.entries[0].suite == "bregman");
}
