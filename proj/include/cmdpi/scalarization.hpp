#pragma once

#include "cmdpi/momdp.hpp"

#include <algorithm>
#include <limits>
#include <optional>

namespace cmdpi {

/// Point on the m-simplex with an optional entry floor delta.
struct Preference {
    Vector omega;
    double delta = 0.0;

    int size() const { return static_cast<int>(omega.size()); }
};

inline void check_preference(const Preference& w, double tol = 1e-12) {
    if (w.omega.size() == 0) throw std::invalid_argument("preference: empty");
    if (std::abs(w.omega.sum() - 1.0) > tol)
        throw std::invalid_argument("preference: entries do not sum to 1");
    if (w.omega.minCoeff() < w.delta - tol)
        throw std::invalid_argument("preference: entry below floor delta");
    if (w.omega.minCoeff() < 0.0) throw std::invalid_argument("preference: negative entry");
}

/// Smoothing temperature and utopia anchor of the smooth Tchebycheff utility.
struct StchParams {
    double tau = 0.1;
    Vector utopia;
};

/// Theoretical constants attached to a preference-to-objective map:
/// the Lipschitz bound L = U / mu_strong and the relative-smoothness constant,
/// together with the intermediates they are built from.
struct ConstantsReport {
    double alpha_star = 0.0;   // min_i (I_i - max attainable J_i)
    Vector alpha;              // per-objective utopia gap to the max
    Vector beta;               // per-objective utopia gap to the min
    double U = 0.0;            // gradient sensitivity bound
    double mu_strong = 0.0;    // strong-convexity modulus
    double lipschitz_L = 0.0;  // U / mu_strong
    std::optional<double> rel_smooth_L;
};

namespace detail {

// Overflow-safe log(sum_k exp(z_k)).
inline double log_sum_exp(const Vector& z) {
    double zmax = z.maxCoeff();
    if (!std::isfinite(zmax)) return zmax;
    double acc = 0.0;
    for (int k = 0; k < z.size(); ++k) acc += std::exp(z(k) - zmax);
    return zmax + std::log(acc);
}

inline Vector softmax(const Vector& z) {
    double zmax = z.maxCoeff();
    Vector p = (z.array() - zmax).exp();
    return p / p.sum();
}

}  // namespace detail

/// Smooth Tchebycheff utility
///   u(f, w) = -tau * log sum_k exp(w_k (I_k - f_k) / tau).
/// Concave and strictly increasing in every component of f.
inline double stch_utility(const Vector& f, const Preference& w, const StchParams& p) {
    if (f.size() != w.omega.size() || f.size() != p.utopia.size())
        throw std::invalid_argument("stch_utility: dimension mismatch");
    if (!(p.tau > 0.0)) throw std::invalid_argument("stch_utility: tau must be positive");
    Vector z = w.omega.cwiseProduct(p.utopia - f) / p.tau;
    return -p.tau * detail::log_sum_exp(z);
}

/// Gradient of the smooth Tchebycheff utility:
///   grad_k = w_k * softmax(w (I - f) / tau)_k.
/// Strictly positive in every component for interior preferences.
inline Vector stch_gradient(const Vector& f, const Preference& w, const StchParams& p) {
    if (f.size() != w.omega.size() || f.size() != p.utopia.size())
        throw std::invalid_argument("stch_gradient: dimension mismatch");
    if (!(p.tau > 0.0)) throw std::invalid_argument("stch_gradient: tau must be positive");
    Vector z = w.omega.cwiseProduct(p.utopia - f) / p.tau;
    return w.omega.cwiseProduct(detail::softmax(z));
}

/// Linear utility <w, f>.
inline double linear_utility(const Vector& f, const Preference& w) {
    if (f.size() != w.omega.size()) throw std::invalid_argument("linear_utility: dimension mismatch");
    return w.omega.dot(f);
}

/// Tabular utopia rule: I_l = max_{s,a} |r_l(s,a)| / (1 - gamma).
/// Dominates every attainable J_l whenever objective l has sign-constrained
/// rewards; callers on mixed-sign rewards should check dominance themselves.
inline Vector utopia_from_momdp(const Momdp& m) {
    Vector I = m.rewards.cwiseAbs().colwise().maxCoeff();
    return I / (1.0 - m.gamma);
}

/// Lipschitz constant of the preference-to-objective map on the delta-floored
/// simplex. j_bounds gives per-objective [min, max] attainable values; the
/// utopia point must strictly dominate every max. Intermediates follow
///   alpha_i = I_i - max_i,  beta_i = I_i - min_i,
///   mu      = (delta/tau)^2 exp(delta alpha* / tau),
///   U       = max_i (1/tau)(1 + beta_i/tau) exp(beta_i/tau),
///   L       = U / mu.
/// L is assembled in log space so extreme beta/tau ratios do not overflow
/// before the ratio is taken.
inline ConstantsReport lipschitz_constant(const std::vector<std::pair<double, double>>& j_bounds,
                                          const Vector& utopia, double delta, double tau) {
    const int m = static_cast<int>(j_bounds.size());
    if (utopia.size() != m) throw std::invalid_argument("lipschitz_constant: dimension mismatch");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("lipschitz_constant: delta must lie in (0,1)");
    if (!(tau > 0.0)) throw std::invalid_argument("lipschitz_constant: tau must be positive");

    ConstantsReport rep;
    rep.alpha.resize(m);
    rep.beta.resize(m);
    for (int i = 0; i < m; ++i) {
        rep.alpha(i) = utopia(i) - j_bounds[i].second;
        rep.beta(i) = utopia(i) - j_bounds[i].first;
        if (!(rep.alpha(i) > 0.0))
            throw std::invalid_argument("lipschitz_constant: alpha_i <= 0 (utopia must strictly "
                                        "dominate the attainable maximum)");
    }
    rep.alpha_star = rep.alpha.minCoeff();

    double log_mu = 2.0 * std::log(delta / tau) + delta * rep.alpha_star / tau;
    double log_U = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
        double b = rep.beta(i) / tau;
        log_U = std::max(log_U, std::log1p(b) - std::log(tau) + b);
    }
    rep.mu_strong = std::exp(log_mu);
    rep.U = std::exp(log_U);
    rep.lipschitz_L = std::exp(log_U - log_mu);
    return rep;
}

/// Relative-smoothness constant of the scalarized objective over occupancy
/// measures:  L_rel = w_max^2 R_1max^2 / (4 tau (1-gamma)^4),  with
/// R_1max = max_{s,a} ||r(s,a)||_1.
inline double relative_smoothness_constant(const Momdp& m, const Preference& w, double tau) {
    if (!(tau > 0.0))
        throw std::invalid_argument("relative_smoothness_constant: tau must be positive");
    double r1max = m.rewards.cwiseAbs().rowwise().sum().maxCoeff();
    double wmax = w.omega.maxCoeff();
    double om = 1.0 - m.gamma;
    return wmax * wmax * r1max * r1max / (4.0 * tau * om * om * om * om);
}

namespace detail {

// Pushes a simplex point onto the delta-floored simplex: entries below the
// floor are clipped to it and the remaining mass is renormalized over the
// free entries. Renormalizing can push further entries below the floor, so
// the pass repeats; each pass clips at least one new entry.
inline Vector floor_simplex(Vector w, double delta) {
    const int m = static_cast<int>(w.size());
    std::vector<bool> clipped(m, false);
    while (true) {
        bool changed = false;
        for (int i = 0; i < m; ++i)
            if (!clipped[i] && w(i) < delta) {
                clipped[i] = true;
                changed = true;
            }
        if (!changed) break;
        int n_clipped = 0;
        double free_mass = 0.0;
        for (int i = 0; i < m; ++i) {
            if (clipped[i])
                ++n_clipped;
            else
                free_mass += w(i);
        }
        double target = 1.0 - delta * n_clipped;
        for (int i = 0; i < m; ++i) {
            if (clipped[i])
                w(i) = delta;
            else
                w(i) = free_mass > 0.0 ? w(i) * target / free_mass : target / (m - n_clipped);
        }
    }
    return w;
}

// All length-m compositions of total, lexicographically ordered.
inline void compositions(int total, int m, std::vector<int>& head,
                         std::vector<std::vector<int>>& out) {
    if (m == 1) {
        head.push_back(total);
        out.push_back(head);
        head.pop_back();
        return;
    }
    for (int k = total; k >= 0; --k) {
        head.push_back(k);
        compositions(total - k, m - 1, head, out);
        head.pop_back();
    }
}

}  // namespace detail

/// Deterministic, equally spaced preference grid on the m-simplex.
/// For m = 2 this is the n-point path ((i/(n-1), 1 - i/(n-1)))_{i=0..n-1},
/// starting at (0,1); for larger m it is the simplex lattice of granularity n.
/// A positive delta floors every entry (clip and renormalize).
inline std::vector<Preference> preference_grid(int n, int m = 2, double delta = 0.0) {
    if (n < 2) throw std::invalid_argument("preference_grid: n must be at least 2");
    if (m < 1) throw std::invalid_argument("preference_grid: m must be positive");
    if (m * delta > 1.0) throw std::invalid_argument("preference_grid: infeasible delta");

    std::vector<Preference> grid;
    if (m == 1) {
        grid.push_back({Vector::Ones(1), delta});
        return grid;
    }
    if (m == 2) {
        for (int i = 0; i < n; ++i) {
            Vector w(2);
            w(0) = static_cast<double>(i) / (n - 1);
            w(1) = 1.0 - w(0);
            grid.push_back({w, delta});
        }
    } else {
        std::vector<std::vector<int>> combos;
        std::vector<int> head;
        detail::compositions(n - 1, m, head, combos);
        for (const auto& c : combos) {
            Vector w(m);
            for (int i = 0; i < m; ++i) w(i) = static_cast<double>(c[i]) / (n - 1);
            grid.push_back({w, delta});
        }
    }
    if (delta > 0.0)
        for (auto& p : grid) p.omega = detail::floor_simplex(p.omega, delta);
    return grid;
}

}  // namespace cmdpi
