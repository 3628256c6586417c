#include "cmdpi/harness.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace cmdpi;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

ObjectiveVector point(double x, double y) {
    ObjectiveVector p(2);
    p << x, y;
    return p;
}

Momdp single_state_two_actions() {
    Momdp m;
    m.n_states = 1;
    m.n_actions = 2;
    m.n_objectives = 1;
    m.gamma = 0.7;
    m.p0 = Vector::Ones(1);
    m.kernel = {Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
    m.rewards = Matrix::Zero(2, 1);
    return m;
}

// Counts dominated unit cells on the integer lattice; exact for
// integer-coordinate points and reference.
double lattice_hypervolume(const std::vector<ObjectiveVector>& points, const Vector& ref,
                           int extent = 8) {
    const int m = static_cast<int>(ref.size());
    std::vector<int> idx(m, 0);
    double count = 0.0;
    while (true) {
        bool covered = false;
        for (const auto& p : points) {
            bool inside = true;
            for (int d = 0; d < m; ++d)
                inside = inside && ref(d) + idx[d] + 1 <= p(d);
            if (inside) {
                covered = true;
                break;
            }
        }
        count += covered ? 1.0 : 0.0;
        int d = 0;
        for (; d < m; ++d) {
            if (++idx[d] < extent) break;
            idx[d] = 0;
        }
        if (d == m) break;
    }
    return count;
}

}  // namespace

TEST_CASE("occupancy-weighted KL") {
    Momdp toy = toy_momdp();

    SECTION("zero on identical policies") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Policy pi = random_policy(toy, seed);
            REQUIRE(std::abs(occupancy_weighted_kl(toy, pi, pi)) <= 1e-12);
        }
    }
    SECTION("non-negative") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            Policy a = random_policy(toy, 2 * seed);
            Policy b = random_policy(toy, 2 * seed + 1);
            REQUIRE(occupancy_weighted_kl(toy, a, b) >= 0.0);
        }
    }
    SECTION("single-state value equals the plain KL") {
        Momdp env = single_state_two_actions();
        Policy pi{Matrix(1, 2)}, ref = uniform_policy(1, 2);
        pi.probs << 0.75, 0.25;
        double expect = 0.75 * std::log(0.75 / 0.5) + 0.25 * std::log(0.25 / 0.5);
        REQUIRE(occupancy_weighted_kl(env, pi, ref) == Approx(expect).margin(1e-12));
        REQUIRE(expect == Approx(0.130812).margin(5e-7));
    }
    SECTION("zero-entry reference is rejected") {
        Policy det = deterministic_policy(4, 2, {0, 1, 0, 1});
        REQUIRE_THROWS_WITH(occupancy_weighted_kl(toy, random_policy(toy, 1), det),
                            ContainsSubstring("full support"));
    }
}

TEST_CASE("Bregman divergence of the negative conditional entropy") {
    Momdp toy = toy_momdp();

    SECTION("zero at the same measure") {
        OccupancyMeasure om = occupancy_measure(toy, random_policy(toy, 5));
        REQUIRE(std::abs(bregman_divergence(toy, om, om)) <= 1e-12);
    }
    SECTION("agrees with the occupancy-weighted KL") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            Policy a = random_policy(toy, 2 * seed);
            Policy b = random_policy(toy, 2 * seed + 1);
            double gamma_kl = occupancy_weighted_kl(toy, a, b);
            double breg = bregman_divergence(toy, occupancy_measure(toy, a),
                                             occupancy_measure(toy, b));
            REQUIRE(std::abs(gamma_kl - breg) <= 1e-9);
            REQUIRE(breg >= -1e-12);
        }
    }
    SECTION("non-interior base point is rejected") {
        OccupancyMeasure om = occupancy_measure(toy, random_policy(toy, 5));
        OccupancyMeasure boundary = occupancy_measure(toy, random_policy(toy, 6));
        boundary.mu(1, 0) = 0.0;
        REQUIRE_THROWS_WITH(bregman_divergence(toy, om, boundary),
                            ContainsSubstring("strictly positive"));
    }
}

TEST_CASE("pareto front oracle") {
    Momdp toy = toy_momdp();
    ParetoFront2D front = pareto_front_oracle(toy);

    SECTION("vertices are ordered and mutually non-dominated") {
        REQUIRE(front.vertices.size() >= 2);
        for (std::size_t i = 0; i + 1 < front.vertices.size(); ++i) {
            REQUIRE(front.vertices[i](0) > front.vertices[i + 1](0));
            REQUIRE(front.vertices[i](1) < front.vertices[i + 1](1));
        }
        for (std::size_t i = 0; i < front.vertices.size(); ++i)
            for (std::size_t j = 0; j < front.vertices.size(); ++j)
                REQUIRE((i == j || !dominates(front.vertices[j], front.vertices[i])));
    }
    SECTION("matches the distinct value-iteration solutions over the grid") {
        std::vector<ObjectiveVector> distinct;
        for (const Preference& w : preference_grid(100, 2, 0.0)) {
            ObjectiveVector j = value_iteration_linear(toy, w).j;
            bool seen = false;
            for (const auto& d : distinct) seen = seen || (d - j).cwiseAbs().maxCoeff() <= 1e-8;
            if (!seen) distinct.push_back(j);
        }
        REQUIRE(distinct.size() == front.vertices.size());
        for (const auto& d : distinct) {
            bool matched = false;
            for (const auto& v : front.vertices)
                matched = matched || (d - v).cwiseAbs().maxCoeff() <= 1e-8;
            REQUIRE(matched);
        }
    }
    SECTION("every vertex is optimal for some linear weighting") {
        std::vector<ObjectiveVector> dets;
        for (const Policy& pi : enumerate_deterministic_policies(toy))
            dets.push_back(objective_vector(toy, pi));
        for (const auto& v : front.vertices) {
            bool supported = false;
            for (const Preference& w : preference_grid(1001, 2, 0.0)) {
                double best = -1e300;
                for (const auto& j : dets) best = std::max(best, linear_utility(j, w));
                if (linear_utility(v, w) >= best - 1e-12) {
                    supported = true;
                    break;
                }
            }
            REQUIRE(supported);
        }
    }
    SECTION("an environment with one attainable objective has one vertex") {
        Momdp flat = toy;
        flat.rewards = Matrix::Constant(8, 2, 1.0);
        flat.rewards.col(1).setConstant(2.0);
        REQUIRE(pareto_front_oracle(flat).vertices.size() == 1);
    }
    SECTION("three objectives are unsupported") {
        Momdp env3 = random_momdp(3, 2, 3, 0.9, 1);
        REQUIRE_THROWS_WITH(pareto_front_oracle(env3), ContainsSubstring("two objectives"));
    }
}

TEST_CASE("distance to front") {
    ParetoFront2D front{{point(2.0, 0.0), point(0.0, 1.0)}};

    SECTION("vertices and segment midpoints are on the front") {
        REQUIRE(distance_to_front(front, point(2.0, 0.0)) == 0.0);
        REQUIRE(distance_to_front(front, point(1.0, 0.5)) <= 1e-15);
    }
    SECTION("perpendicular offset below a horizontal segment") {
        ParetoFront2D flat{{point(1.0, 1.0), point(0.0, 1.0)}};
        REQUIRE(distance_to_front(flat, point(0.5, 1.0 - 0.25)) == Approx(0.25).margin(1e-14));
    }
    SECTION("single-vertex front measures point distance") {
        ParetoFront2D dot{{point(1.0, 1.0)}};
        REQUIRE(distance_to_front(dot, point(4.0, 5.0)) == Approx(5.0).margin(1e-14));
    }
    SECTION("empty front is rejected") {
        REQUIRE_THROWS_WITH(distance_to_front(ParetoFront2D{}, point(0, 0)),
                            ContainsSubstring("empty front"));
    }
}

TEST_CASE("hypervolume") {
    Vector ref2 = Vector::Zero(2);

    SECTION("unit box") {
        REQUIRE(hypervolume({point(1.0, 1.0)}, ref2) == Approx(1.0).margin(1e-15));
    }
    SECTION("two staircase points, checked against the lattice oracle") {
        std::vector<ObjectiveVector> pts{point(1.0, 2.0), point(2.0, 1.0)};
        double hv = hypervolume(pts, ref2);
        REQUIRE(hv == Approx(3.0).margin(1e-12));
        REQUIRE(lattice_hypervolume(pts, ref2) == Approx(hv).margin(1e-12));
    }
    SECTION("points below the reference contribute nothing") {
        std::vector<ObjectiveVector> pts{point(1.0, 1.0), point(-1.0, 5.0), point(0.5, -2.0)};
        REQUIRE(hypervolume(pts, ref2) == Approx(1.0).margin(1e-15));
    }
    SECTION("adding a non-dominated point never decreases the volume") {
        std::mt19937_64 rng(99);
        std::vector<ObjectiveVector> pts;
        double prev = 0.0;
        for (int i = 0; i < 30; ++i) {
            double x = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 4.0;
            double y = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 4.0;
            pts.push_back(point(x, y));
            double hv = hypervolume(pts, ref2);
            REQUIRE(hv >= prev - 1e-12);
            prev = hv;
        }
    }
    SECTION("three objectives via inclusion-exclusion, lattice-checked") {
        Vector ref3 = Vector::Zero(3);
        std::vector<ObjectiveVector> pts;
        ObjectiveVector a(3), b(3), c(3);
        a << 1, 1, 2;
        b << 2, 1, 1;
        c << 1, 2, 1;
        pts = {a, b, c};
        double hv = hypervolume(pts, ref3);
        REQUIRE(hv == Approx(lattice_hypervolume(pts, ref3)).margin(1e-12));
        REQUIRE(hv == Approx(4.0).margin(1e-12));  // 2+2+2 minus pairwise 1s plus 1
    }
    SECTION("more than four objectives is rejected") {
        REQUIRE_THROWS_WITH(hypervolume({}, Vector::Zero(5)), ContainsSubstring("more than 4"));
    }
}

TEST_CASE("expected utility metric") {
    SECTION("single point averages its own utilities") {
        std::vector<Preference> prefs = preference_grid(7, 2, 0.0);
        ObjectiveVector p = point(2.0, 5.0);
        double expect = 0.0;
        for (const auto& w : prefs) expect += w.omega.dot(p);
        expect /= static_cast<double>(prefs.size());
        REQUIRE(expected_utility_metric({p}, prefs) == Approx(expect).margin(1e-14));
    }
    SECTION("each extreme preference picks its own vertex") {
        std::vector<Preference> prefs{{point(1.0, 0.0), 0.0}, {point(0.0, 1.0), 0.0}};
        REQUIRE(expected_utility_metric({point(1, 0), point(0, 1)}, prefs) ==
                Approx(1.0).margin(1e-15));
    }
    SECTION("matches the double-loop oracle on the toy front") {
        ParetoFront2D front = pareto_front_oracle(toy_momdp());
        std::vector<Preference> prefs = preference_grid(100, 2, 0.0);
        double oracle = 0.0;
        for (const auto& w : prefs) {
            double best = -1e300;
            for (const auto& v : front.vertices) best = std::max(best, w.omega.dot(v));
            oracle += best;
        }
        oracle /= static_cast<double>(prefs.size());
        REQUIRE(expected_utility_metric(front.vertices, prefs) == Approx(oracle).margin(1e-12));
    }
    SECTION("dominated points never change the value") {
        std::vector<Preference> prefs = preference_grid(11, 2, 0.0);
        std::vector<ObjectiveVector> pts{point(3, 1), point(1, 3), point(0.5, 0.5), point(1, 1)};
        REQUIRE(expected_utility_metric(pts, prefs) ==
                Approx(expected_utility_metric(nondominated_filter(pts), prefs)).margin(1e-14));
    }
    SECTION("empty input is rejected") {
        REQUIRE_THROWS(expected_utility_metric({}, preference_grid(3, 2, 0.0)));
    }
}

TEST_CASE("sparsity") {
    SECTION("two diagonal points") {
        REQUIRE(sparsity({point(0, 0), point(1, 1)}) == 2.0);
    }
    SECTION("equally spaced points on a segment shrink quadratically") {
        auto segment_points = [](int n) {
            std::vector<ObjectiveVector> pts;
            for (int i = 0; i < n; ++i)
                pts.push_back(point(static_cast<double>(i) / (n - 1),
                                    1.0 - static_cast<double>(i) / (n - 1)));
            return pts;
        };
        for (int n : {2, 5, 10}) {
            // direct formula: (n-1) gaps of 1/(n-1) per objective, divisor n-1
            double gap = 1.0 / (n - 1);
            double expect = 2.0 * (n - 1) * gap * gap / (n - 1);
            REQUIRE(sparsity(segment_points(n)) == Approx(expect).margin(1e-14));
        }
        REQUIRE(sparsity(segment_points(10)) < sparsity(segment_points(5)));
        REQUIRE(sparsity(segment_points(5)) < sparsity(segment_points(2)));
    }
    SECTION("singleton scores zero") {
        REQUIRE(sparsity({point(3, 4)}) == 0.0);
    }
    SECTION("empty input is rejected") {
        REQUIRE_THROWS(sparsity({}));
    }
}

TEST_CASE("empirical lipschitz probe") {
    Momdp toy = toy_momdp();

    SECTION("identical objectives give ratio zero") {
        std::vector<std::pair<Preference, ObjectiveVector>> sweep;
        for (const Preference& w : preference_grid(11, 2, 0.05))
            sweep.push_back({w, point(1.0, 2.0)});
        REQUIRE(lipschitz_empirical(sweep, 1.0).max_ratio == 0.0);
    }
    SECTION("invariant under grid reversal") {
        std::vector<std::pair<Preference, ObjectiveVector>> sweep;
        std::mt19937_64 rng(3);
        for (const Preference& w : preference_grid(9, 2, 0.05)) {
            double x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            double y = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            sweep.push_back({w, point(x, y)});
        }
        auto reversed = sweep;
        std::reverse(reversed.begin(), reversed.end());
        REQUIRE(lipschitz_empirical(sweep, 1e9).max_ratio ==
                Approx(lipschitz_empirical(reversed, 1e9).max_ratio).margin(1e-15));
    }
    SECTION("fewer than two points is rejected") {
        REQUIRE_THROWS(lipschitz_empirical({}, 1.0));
    }
}

TEST_CASE("metric report composition") {
    std::vector<ObjectiveVector> pts{point(1, 2), point(2, 1), point(0.2, 0.2)};
    std::vector<Preference> prefs = preference_grid(5, 2, 0.0);
    MetricReport rep = compute_metrics(pts, Vector::Zero(2), prefs, "grid-5");
    REQUIRE(rep.hypervolume == Approx(3.0).margin(1e-12));
    REQUIRE(rep.sparsity == Approx(2.0).margin(1e-12));  // dominated point filtered
    REQUIRE(rep.preference_set_id == "grid-5");
}
