#pragma once

#include "cmdpi/solvers.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace cmdpi {

/// Occupancy-weighted conditional KL divergence
///   Gamma(pi, pi0) = sum_{s,a} mu_pi(s,a) log( pi(a|s) / pi0(a|s) )
///                  = sum_s rho_pi(s) KL( pi(.|s) || pi0(.|s) ).
/// pi0 must have full support; terms with mu_pi(s,a) = 0 contribute nothing.
inline double occupancy_weighted_kl(const Momdp& m, const Policy& pi, const Policy& pi0) {
    if (!pi0.full_support())
        throw std::invalid_argument("occupancy_weighted_kl: reference policy must have full support");
    if (pi.probs.rows() != pi0.probs.rows() || pi.probs.cols() != pi0.probs.cols())
        throw std::invalid_argument("occupancy_weighted_kl: dimension mismatch");
    OccupancyMeasure om = occupancy_measure(m, pi);
    double acc = 0.0;
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            double mu = om.mu(s, a);
            if (mu > 0.0) acc += mu * std::log(pi.probs(s, a) / pi0.probs(s, a));
        }
    return acc;
}

/// Bregman divergence of the negative conditional entropy
///   psi(mu) = sum_{s,a} mu(s,a) log( mu(s,a) / rho(s) ),
/// computed from the definition
///   D(mu | mu0) = psi(mu) - psi(mu0) - <grad psi(mu0), mu - mu0>
/// with grad psi(mu0)(s,a) = log( mu0(s,a) / rho0(s) ). mu0 must be strictly
/// positive componentwise (relative interior).
inline double bregman_divergence(const Momdp& m, const OccupancyMeasure& mu,
                                 const OccupancyMeasure& mu0) {
    if (mu.mu.rows() != m.n_states || mu.mu.cols() != m.n_actions ||
        mu0.mu.rows() != m.n_states || mu0.mu.cols() != m.n_actions)
        throw std::invalid_argument("bregman_divergence: dimension mismatch");
    if (!(mu0.mu.minCoeff() > 0.0))
        throw std::invalid_argument("bregman_divergence: mu0 must be strictly positive");

    Vector rho = mu.mu.rowwise().sum();
    Vector rho0 = mu0.mu.rowwise().sum();
    double psi = 0.0, psi0 = 0.0, cross = 0.0;
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            double x = mu.mu(s, a), x0 = mu0.mu(s, a);
            if (x > 0.0) psi += x * std::log(x / rho(s));
            psi0 += x0 * std::log(x0 / rho0(s));
            cross += std::log(x0 / rho0(s)) * (x - x0);
        }
    return psi - psi0 - cross;
}

/// True when y dominates x: y >= x componentwise with at least one strictly
/// greater entry, up to tol.
inline bool dominates(const ObjectiveVector& y, const ObjectiveVector& x, double tol = 1e-12) {
    return (y.array() >= x.array() - tol).all() && (y - x).maxCoeff() > tol;
}

/// Indices of the mutually non-dominated points.
inline std::vector<int> nondominated_indices(const std::vector<ObjectiveVector>& points,
                                             double tol = 1e-12) {
    std::vector<int> keep;
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
        bool dominated = false;
        for (int j = 0; j < static_cast<int>(points.size()) && !dominated; ++j)
            dominated = j != i && dominates(points[j], points[i], tol);
        if (!dominated) keep.push_back(i);
    }
    return keep;
}

inline std::vector<ObjectiveVector> nondominated_filter(const std::vector<ObjectiveVector>& points,
                                                        double tol = 1e-12) {
    std::vector<ObjectiveVector> out;
    for (int i : nondominated_indices(points, tol)) out.push_back(points[i]);
    return out;
}

/// Piecewise-linear two-objective Pareto front: vertices ordered by descending
/// first objective, segments implied between consecutive vertices.
struct ParetoFront2D {
    std::vector<ObjectiveVector> vertices;
};

/// Exact front of a two-objective MOMDP from deterministic-policy enumeration:
/// the Pareto-optimal vertices of the convex hull of the deterministic-policy
/// objective set, sorted by descending J_1. These are exactly the supported
/// extreme points (each optimal for some linear weighting).
inline ParetoFront2D pareto_front_oracle(const Momdp& m, std::uint64_t cap = 1000000) {
    if (m.n_objectives != 2)
        throw std::invalid_argument("pareto_front_oracle: only two objectives supported");
    std::vector<ObjectiveVector> points;
    for (const Policy& pi : enumerate_deterministic_policies(m, cap))
        points.push_back(objective_vector(m, pi));

    std::vector<ObjectiveVector> cand = nondominated_filter(points);
    // dedupe
    std::vector<ObjectiveVector> uniq;
    for (const auto& p : cand) {
        bool seen = false;
        for (const auto& q : uniq) seen = seen || (p - q).cwiseAbs().maxCoeff() <= 1e-9;
        if (!seen) uniq.push_back(p);
    }
    std::sort(uniq.begin(), uniq.end(), [](const ObjectiveVector& a, const ObjectiveVector& b) {
        return a(0) != b(0) ? a(0) < b(0) : a(1) < b(1);
    });

    // Upper hull, monotone chain; collinear middle points are dropped so only
    // extreme points remain.
    std::vector<ObjectiveVector> hull;
    for (const auto& p : uniq) {
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull[hull.size() - 1];
            double cross = (b(0) - a(0)) * (p(1) - a(1)) - (b(1) - a(1)) * (p(0) - a(0));
            if (cross >= -1e-12)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(p);
    }
    std::reverse(hull.begin(), hull.end());  // descending J_1
    return ParetoFront2D{std::move(hull)};
}

/// Euclidean distance from a point to the union of front segments (vertices
/// included); zero on the front itself.
inline double distance_to_front(const ParetoFront2D& front, const ObjectiveVector& point) {
    if (front.vertices.empty()) throw std::invalid_argument("distance_to_front: empty front");
    if (point.size() != 2) throw std::invalid_argument("distance_to_front: point must be 2D");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < front.vertices.size(); ++i) {
        const auto& a = front.vertices[i];
        if (i + 1 < front.vertices.size()) {
            const auto& b = front.vertices[i + 1];
            Eigen::Vector2d ab = b.head<2>() - a.head<2>();
            double len2 = ab.squaredNorm();
            double t = len2 > 0.0 ? std::clamp((point.head<2>() - a.head<2>()).dot(ab) / len2, 0.0, 1.0)
                                  : 0.0;
            best = std::min(best, (point.head<2>() - (a.head<2>() + t * ab)).norm());
        } else {
            best = std::min(best, (point.head<2>() - a.head<2>()).norm());
        }
    }
    return best;
}

namespace detail {

// Union volume of the boxes [ref, p] by inclusion-exclusion; points must be
// mutually non-dominated. Exponential in the point count, desk scale only.
inline double hypervolume_incl_excl(const std::vector<ObjectiveVector>& points,
                                    const Vector& ref) {
    const int n = static_cast<int>(points.size());
    const int m = static_cast<int>(ref.size());
    if (n == 0) return 0.0;
    if (n > 25) throw std::invalid_argument("hypervolume: too many points for inclusion-exclusion");
    double total = 0.0;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        Vector lo = Vector::Constant(m, std::numeric_limits<double>::infinity());
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) lo = lo.cwiseMin(points[i]);
        double vol = 1.0;
        for (int d = 0; d < m; ++d) vol *= std::max(0.0, lo(d) - ref(d));
        total += (std::popcount(mask) % 2 ? 1.0 : -1.0) * vol;
    }
    return total;
}

}  // namespace detail

/// Hypervolume dominated by `points` with respect to `reference`: the Lebesgue
/// measure of the union of boxes [reference, p]. Points not dominating the
/// reference are discarded. Two objectives use a sort-and-sweep; three and
/// four use inclusion-exclusion over the non-dominated subset.
inline double hypervolume(const std::vector<ObjectiveVector>& points, const Vector& reference) {
    const int m = static_cast<int>(reference.size());
    if (m > 4) throw std::invalid_argument("hypervolume: more than 4 objectives unsupported");
    std::vector<ObjectiveVector> kept;
    for (const auto& p : points) {
        if (p.size() != m) throw std::invalid_argument("hypervolume: dimension mismatch");
        if ((p.array() >= reference.array()).all()) kept.push_back(p);
    }
    kept = nondominated_filter(kept);
    if (kept.empty()) return 0.0;
    if (m == 1) {
        double best = 0.0;
        for (const auto& p : kept) best = std::max(best, p(0) - reference(0));
        return best;
    }
    if (m == 2) {
        std::sort(kept.begin(), kept.end(),
                  [](const ObjectiveVector& a, const ObjectiveVector& b) { return a(0) > b(0); });
        double hv = 0.0, prev_y = reference(1);
        for (const auto& p : kept) {
            hv += (p(0) - reference(0)) * (p(1) - prev_y);
            prev_y = p(1);
        }
        return hv;
    }
    return detail::hypervolume_incl_excl(kept, reference);
}

/// Expected utility metric: mean over the preference set of the best linear
/// utility any point achieves.
inline double expected_utility_metric(const std::vector<ObjectiveVector>& points,
                                      const std::vector<Preference>& prefs) {
    if (points.empty() || prefs.empty())
        throw std::invalid_argument("expected_utility_metric: empty input");
    double acc = 0.0;
    for (const auto& w : prefs) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& p : points) best = std::max(best, linear_utility(p, w));
        acc += best;
    }
    return acc / static_cast<double>(prefs.size());
}

/// Sparsity of a front approximation: mean squared gap between consecutive
/// values of each objective,
///   SP = 1/(|P|-1) * sum_j sum_i (P_j(i) - P_j(i+1))^2,
/// with P_j the j-th objective sorted over the set. The input is taken as the
/// (already non-dominated) front approximation; singletons score 0.
inline double sparsity(const std::vector<ObjectiveVector>& points) {
    if (points.empty()) throw std::invalid_argument("sparsity: empty input");
    const int n = static_cast<int>(points.size());
    if (n == 1) return 0.0;
    const int m = static_cast<int>(points[0].size());
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
        std::vector<double> vals;
        vals.reserve(n);
        for (const auto& p : points) vals.push_back(p(j));
        std::sort(vals.begin(), vals.end());
        for (int i = 0; i + 1 < n; ++i) acc += (vals[i + 1] - vals[i]) * (vals[i + 1] - vals[i]);
    }
    return acc / (n - 1);
}

struct LipschitzReport {
    double max_ratio = 0.0;
    int argmax_pair = -1;  // index i of the (i, i+1) pair attaining the max
    double l_theory = 0.0;
    bool ok = true;
};

/// Empirical Lipschitz probe over a converged preference sweep: the largest
/// ||J_i+1 - J_i|| / ||w_i+1 - w_i|| over adjacent grid pairs, flagged against
/// a theoretical constant.
inline LipschitzReport lipschitz_empirical(
    const std::vector<std::pair<Preference, ObjectiveVector>>& sweep, double l_theory) {
    if (sweep.size() < 2) throw std::invalid_argument("lipschitz_empirical: need at least 2 points");
    LipschitzReport rep;
    rep.l_theory = l_theory;
    for (std::size_t i = 0; i + 1 < sweep.size(); ++i) {
        double dw = (sweep[i + 1].first.omega - sweep[i].first.omega).norm();
        if (dw <= 0.0) continue;
        double ratio = (sweep[i + 1].second - sweep[i].second).norm() / dw;
        if (ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.argmax_pair = static_cast<int>(i);
        }
    }
    rep.ok = rep.max_ratio <= l_theory;
    return rep;
}

/// Pareto-front quality summary of a point set.
struct MetricReport {
    double hypervolume = 0.0;
    double eum = 0.0;
    double sparsity = 0.0;
    Vector reference_point;
    std::string preference_set_id;
};

/// HV/EUM/SP of a point set. HV and EUM are invariant to dominated points; SP
/// is computed on the non-dominated subset.
inline MetricReport compute_metrics(const std::vector<ObjectiveVector>& points,
                                    const Vector& reference,
                                    const std::vector<Preference>& prefs,
                                    const std::string& preference_set_id = "") {
    MetricReport rep;
    rep.reference_point = reference;
    rep.preference_set_id = preference_set_id;
    rep.hypervolume = hypervolume(points, reference);
    rep.eum = expected_utility_metric(points, prefs);
    rep.sparsity = sparsity(nondominated_filter(points));
    return rep;
}

}  // namespace cmdpi
