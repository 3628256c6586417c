#pragma once

#include "cmdpi/scalarization.hpp"

#include <random>

namespace cmdpi {

/// Knobs shared by the iterative planners. alpha is the KL temperature of the
/// proximal step; pairing alpha = 1/tau is the usual choice and
/// solver_config_for_tau applies it.
struct SolverConfig {
    double alpha = 10.0;
    int max_outer_iters = 2000;   // K
    double inner_tol = 1e-10;     // soft Bellman sup-norm residual
    int inner_max_iters = 100000;
    double outer_tol = 1e-9;      // on ||J_{k+1} - J_k||_inf
    std::uint64_t rng_seed = 0;
    bool warm_start_q = false;    // reuse Q across outer iterations
    bool capql_linear = false;    // CAPQL weighting: linear instead of the utility gradient
};

inline SolverConfig solver_config_for_tau(double tau) {
    SolverConfig cfg;
    cfg.alpha = 1.0 / tau;
    return cfg;
}

/// One outer iteration of an iterative planner. bellman_residual and
/// policy_delta describe the improvement step taken *from* this iterate; both
/// are 0 on the final record.
struct TraceRecord {
    int k = 0;
    Policy policy;
    ObjectiveVector j;
    double utility = 0.0;
    double bellman_residual = 0.0;
    double policy_delta = 0.0;
};

struct SolveTrace {
    std::vector<TraceRecord> records;
    Policy final_policy;
    std::string termination;  // "outer_tol" or "max_iters"

    int iterations() const { return records.empty() ? 0 : records.back().k; }
    const TraceRecord& final_record() const { return records.back(); }
};

struct ViResult {
    Policy policy;  // deterministic
    ObjectiveVector j;
    int sweeps = 0;
};

/// Standard discounted value iteration on the scalar reward <w, r(s,a)>.
/// Sweeps stop once ||V' - V||_inf <= tol (1-gamma) / (2 gamma), which makes
/// the greedy policy tol-optimal; argmax ties go to the lowest action index.
/// The returned objective vector is the exact J of the greedy policy.
inline ViResult value_iteration_linear(const Momdp& m, const Preference& w, double tol = 1e-10) {
    if (w.omega.size() != m.n_objectives)
        throw std::invalid_argument("value_iteration_linear: preference dimension mismatch");
    check_preference(w, 1e-9);
    Vector r(m.n_states * m.n_actions);
    for (int i = 0; i < r.size(); ++i) r(i) = m.rewards.row(i).dot(w.omega);

    Vector v = Vector::Zero(m.n_states);
    const double stop = tol * (1.0 - m.gamma) / (2.0 * m.gamma);
    int sweeps = 0;
    for (; sweeps < 1000000; ++sweeps) {
        Vector v_next(m.n_states);
        for (int s = 0; s < m.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < m.n_actions; ++a)
                best = std::max(best, r(m.sa_index(s, a)) + m.gamma * m.kernel[a].row(s).dot(v));
            v_next(s) = best;
        }
        double residual = (v_next - v).cwiseAbs().maxCoeff();
        v = v_next;
        if (residual <= stop) break;
    }

    // greedy extraction from the final value function
    std::vector<int> greedy(m.n_states, 0);
    for (int s = 0; s < m.n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < m.n_actions; ++a) {
            double q = r(m.sa_index(s, a)) + m.gamma * m.kernel[a].row(s).dot(v);
            if (q > best) {
                best = q;
                greedy[s] = a;
            }
        }
    }
    ViResult out;
    out.policy = deterministic_policy(m.n_states, m.n_actions, greedy);
    out.j = objective_vector(m, out.policy);
    out.sweeps = sweeps + 1;
    return out;
}

/// One application of the soft Bellman operator
///   (T Q)(s,a) = r(s,a) + gamma E_{s'}[ chi(s'; Q, pi_ref) ],
///   chi(s') = alpha log sum_b pi_ref(b|s') exp(Q(s',b) / alpha),
/// with a per-state max shift inside the log-sum-exp. scalar_reward is
/// n_states x n_actions.
inline Matrix soft_bellman_operator(const Momdp& m, const Matrix& scalar_reward,
                                    const Policy& pi_ref, double alpha, const Matrix& q) {
    Vector chi(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        double qmax = q.row(s).maxCoeff();
        double acc = 0.0;
        for (int a = 0; a < m.n_actions; ++a)
            acc += pi_ref.probs(s, a) * std::exp((q(s, a) - qmax) / alpha);
        chi(s) = qmax + alpha * std::log(acc);
    }
    Matrix out(m.n_states, m.n_actions);
    for (int a = 0; a < m.n_actions; ++a) out.col(a) = scalar_reward.col(a) + m.gamma * (m.kernel[a] * chi);
    return out;
}

/// Fixed point of the soft Bellman operator, iterated from Q = 0 until the
/// sup-norm residual drops below tol. The operator is a gamma-contraction, so
/// the fixed point is unique. Reports the last residual through *residual_out
/// when given.
inline Matrix soft_bellman_solve(const Momdp& m, const Matrix& scalar_reward, const Policy& pi_ref,
                                 double alpha, double tol = 1e-10, int max_iters = 100000,
                                 double* residual_out = nullptr, const Matrix* q_init = nullptr) {
    if (!pi_ref.full_support())
        throw std::invalid_argument("soft_bellman_solve: reference policy must have full support");
    if (!(alpha > 0.0)) throw std::invalid_argument("soft_bellman_solve: alpha must be positive");
    if (scalar_reward.rows() != m.n_states || scalar_reward.cols() != m.n_actions)
        throw std::invalid_argument("soft_bellman_solve: reward dimension mismatch");

    Matrix q = q_init ? *q_init : Matrix::Zero(m.n_states, m.n_actions);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        Matrix q_next = soft_bellman_operator(m, scalar_reward, pi_ref, alpha, q);
        residual = (q_next - q).cwiseAbs().maxCoeff();
        q = q_next;
        if (residual <= tol) break;
    }
    if (residual_out) *residual_out = residual;
    return q;
}

/// KL-proximal greedy step: pi'(a|s) proportional to pi_ref(a|s) exp(Q(s,a)/alpha),
/// normalized state-wise with a max shift.
inline Policy multiplicative_improvement(const Policy& pi_ref, const Matrix& q, double alpha) {
    if (!pi_ref.full_support())
        throw std::invalid_argument("multiplicative_improvement: reference policy must have full support");
    if (!(alpha > 0.0))
        throw std::invalid_argument("multiplicative_improvement: alpha must be positive");
    if (q.rows() != pi_ref.probs.rows() || q.cols() != pi_ref.probs.cols())
        throw std::invalid_argument("multiplicative_improvement: dimension mismatch");
    Policy out;
    out.probs.resize(pi_ref.probs.rows(), pi_ref.probs.cols());
    for (int s = 0; s < pi_ref.n_states(); ++s) {
        double qmax = q.row(s).maxCoeff();
        for (int a = 0; a < pi_ref.n_actions(); ++a)
            out.probs(s, a) = pi_ref.probs(s, a) * std::exp((q(s, a) - qmax) / alpha);
        out.probs.row(s) /= out.probs.row(s).sum();
    }
    return out;
}

/// Full-support policy with every state row drawn uniformly from the simplex
/// (Dirichlet(1,...,1)). Deterministic given the seed; the uniform deviates
/// are derived from raw 64-bit draws so results do not depend on the standard
/// library's distribution implementations.
inline Policy random_policy(const Momdp& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unit = [&rng]() {
        return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;  // (0,1)
    };
    Policy pi;
    pi.probs.resize(m.n_states, m.n_actions);
    for (int s = 0; s < m.n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < m.n_actions; ++a) {
            pi.probs(s, a) = -std::log(unit());  // Exp(1)
            sum += pi.probs(s, a);
        }
        pi.probs.row(s) /= sum;
    }
    return pi;
}

namespace detail {

// Shared outer loop of the mirror-descent planners. ref_of(pi_k) supplies the
// reference policy of iteration k; weights_of(J_k) the reward weighting g_k.
template <typename RefFn, typename WeightFn>
SolveTrace proximal_iteration(const Momdp& m, const Preference& w, const StchParams& params,
                              const SolverConfig& cfg, Policy pi, RefFn&& ref_of,
                              WeightFn&& weights_of) {
    check_policy(m, pi, 1e-9);
    if (!pi.full_support())
        throw std::invalid_argument("planner: initial policy must have full support");
    if (w.omega.size() != m.n_objectives)
        throw std::invalid_argument("planner: preference dimension mismatch");
    check_preference(w, 1e-9);

    SolveTrace trace;
    Matrix q_prev;
    ObjectiveVector j_prev;
    for (int k = 0;; ++k) {
        TraceRecord rec;
        rec.k = k;
        rec.policy = pi;
        rec.j = objective_vector(m, pi);
        rec.utility = stch_utility(rec.j, w, params);

        bool converged = k > 0 && (rec.j - j_prev).cwiseAbs().maxCoeff() <= cfg.outer_tol;
        j_prev = rec.j;
        if (converged || k >= cfg.max_outer_iters) {
            trace.records.push_back(std::move(rec));
            trace.termination = converged ? "outer_tol" : "max_iters";
            break;
        }

        Vector g = weights_of(rec.j);
        Matrix r_k(m.n_states, m.n_actions);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a)
                r_k(s, a) = m.rewards.row(m.sa_index(s, a)).dot(g);

        const Policy& ref = ref_of(pi);
        Matrix q = soft_bellman_solve(m, r_k, ref, cfg.alpha, cfg.inner_tol, cfg.inner_max_iters,
                                      &rec.bellman_residual,
                                      cfg.warm_start_q && q_prev.size() ? &q_prev : nullptr);
        Policy pi_next = multiplicative_improvement(ref, q, cfg.alpha);
        rec.policy_delta = (pi_next.probs - pi.probs).cwiseAbs().maxCoeff();
        trace.records.push_back(std::move(rec));
        pi = std::move(pi_next);
        if (cfg.warm_start_q) q_prev = std::move(q);
    }
    trace.final_policy = pi;
    return trace;
}

}  // namespace detail

/// Concave mirror-descent policy iteration for the smooth Tchebycheff
/// objective. Each outer step reweights the vector reward by the utility
/// gradient at the current objective value, evaluates the resulting scalar
/// reward through the soft Bellman fixed point with the *current* policy as
/// reference, and applies the KL-proximal improvement. Stops when consecutive
/// objective vectors agree within outer_tol or after max_outer_iters steps.
inline SolveTrace run_cmdpi(const Momdp& m, const Preference& w, const StchParams& params,
                            const SolverConfig& cfg, const Policy& pi0) {
    return detail::proximal_iteration(
        m, w, params, cfg, pi0, [](const Policy& pi_k) -> const Policy& { return pi_k; },
        [&](const ObjectiveVector& j) { return stch_gradient(j, w, params); });
}

/// Tabular CAPQL planning: the same loop as cmdpi but with the reference
/// policy of both the evaluation and the improvement step frozen to the
/// uniform distribution. cfg.capql_linear switches the reward weighting from
/// the utility gradient to the preference itself.
inline SolveTrace run_capql(const Momdp& m, const Preference& w, const StchParams& params,
                            const SolverConfig& cfg, const Policy& pi0) {
    Policy uniform = uniform_policy(m.n_states, m.n_actions);
    return detail::proximal_iteration(
        m, w, params, cfg, pi0,
        [uniform = std::move(uniform)](const Policy&) -> const Policy& { return uniform; },
        [&](const ObjectiveVector& j) -> Vector {
            return cfg.capql_linear ? Vector(w.omega) : stch_gradient(j, w, params);
        });
}

/// Random-initialization overload; the initial policy is drawn from
/// cfg.rng_seed as in the experiment protocol.
inline SolveTrace run_capql(const Momdp& m, const Preference& w, const StchParams& params,
                            const SolverConfig& cfg) {
    return run_capql(m, w, params, cfg, random_policy(m, cfg.rng_seed));
}

struct CertificateEntry {
    int k = 0;
    double gap = 0.0;    // u_star - utility_k
    double bound = 0.0;  // (L_rel / k) * D0
    bool ok = true;
};

struct CertificateReport {
    std::vector<CertificateEntry> entries;
    int violations = 0;
    double max_excess = -std::numeric_limits<double>::infinity();  // max_k (gap_k - bound_k)
};

/// Checks the mirror-descent suboptimality bound
///   u_star - utility_k <= (L_rel / k) * D0        (k >= 1)
/// against a solve trace, with `slack` of numerical allowance. u_star and D0
/// must come from a longer oracle run sharing the trace's initialization
/// (u_star = utility of the oracle's final iterate, D0 = Bregman divergence of
/// that iterate's occupancy from the initial one). Throws if u_star falls
/// below the best utility observed in the trace.
inline CertificateReport mirror_descent_certificate(const SolveTrace& trace, double u_star,
                                                    double l_rel, double d0,
                                                    double slack = 1e-7) {
    if (trace.records.empty())
        throw std::invalid_argument("mirror_descent_certificate: empty trace");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& r : trace.records) best = std::max(best, r.utility);
    if (u_star < best - 1e-9)
        throw std::invalid_argument("mirror_descent_certificate: u_star below trace maximum "
                                    "(inconsistent oracle)");
    CertificateReport rep;
    for (const auto& r : trace.records) {
        if (r.k < 1) continue;
        CertificateEntry e;
        e.k = r.k;
        e.gap = u_star - r.utility;
        e.bound = l_rel / r.k * d0;
        e.ok = e.gap <= e.bound + slack;
        rep.max_excess = std::max(rep.max_excess, e.gap - e.bound);
        if (!e.ok) ++rep.violations;
        rep.entries.push_back(e);
    }
    return rep;
}

}  // namespace cmdpi
