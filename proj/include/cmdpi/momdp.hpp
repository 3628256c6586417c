#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmdpi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Vector of discounted returns, one entry per objective.
using ObjectiveVector = Eigen::VectorXd;

/// Tabular stochastic policy. Row s holds the action distribution at state s.
struct Policy {
    Matrix probs;

    int n_states() const { return static_cast<int>(probs.rows()); }
    int n_actions() const { return static_cast<int>(probs.cols()); }

    /// True when every action has strictly positive probability in every state.
    bool full_support() const { return probs.size() > 0 && probs.minCoeff() > 0.0; }
};

/// Discounted state-action occupancy measure and its state marginal.
/// Normalized so that mu sums to 1 over all (s,a).
struct OccupancyMeasure {
    Matrix mu;   // n_states x n_actions
    Vector rho;  // rho(s) = sum_a mu(s,a)

    double total() const { return mu.sum(); }
};

/// Finite discounted MDP with an m-dimensional vector reward.
///
/// kernel[a] is the n_states x n_states row-stochastic transition matrix of
/// action a. rewards stores one m-vector per (s,a) pair, s-major: row
/// s * n_actions + a. p0 is the initial state distribution and must have full
/// support (every state reachable at time 0).
struct Momdp {
    int n_states = 0;
    int n_actions = 0;
    int n_objectives = 0;
    double gamma = 0.0;
    std::vector<Matrix> kernel;
    Matrix rewards;  // (n_states * n_actions) x n_objectives
    Vector p0;

    int sa_index(int s, int a) const { return s * n_actions + a; }

    Eigen::RowVectorXd reward(int s, int a) const { return rewards.row(sa_index(s, a)); }
};

/// Checks all structural invariants; throws std::invalid_argument naming the
/// first violated one.
inline void validate(const Momdp& m, double tol = 1e-12) {
    if (m.n_states <= 0 || m.n_actions <= 0 || m.n_objectives <= 0)
        throw std::invalid_argument("momdp: state/action/objective counts must be positive");
    if (!(m.gamma > 0.0 && m.gamma < 1.0))
        throw std::invalid_argument("momdp: gamma must lie in (0,1)");
    if (static_cast<int>(m.kernel.size()) != m.n_actions)
        throw std::invalid_argument("momdp: kernel must hold one matrix per action");
    for (int a = 0; a < m.n_actions; ++a) {
        const Matrix& P = m.kernel[a];
        if (P.rows() != m.n_states || P.cols() != m.n_states)
            throw std::invalid_argument("momdp: kernel dimension mismatch for action " +
                                        std::to_string(a));
        if (P.minCoeff() < 0.0)
            throw std::invalid_argument("momdp: negative transition probability in action " +
                                        std::to_string(a));
        for (int s = 0; s < m.n_states; ++s) {
            if (std::abs(P.row(s).sum() - 1.0) > tol)
                throw std::invalid_argument("momdp: row not stochastic (action " +
                                            std::to_string(a) + ", state " + std::to_string(s) +
                                            ")");
        }
    }
    if (m.rewards.rows() != m.n_states * m.n_actions || m.rewards.cols() != m.n_objectives)
        throw std::invalid_argument("momdp: rewards dimension mismatch");
    if (!m.rewards.allFinite()) throw std::invalid_argument("momdp: rewards must be finite");
    if (m.p0.size() != m.n_states) throw std::invalid_argument("momdp: p0 dimension mismatch");
    if (std::abs(m.p0.sum() - 1.0) > tol)
        throw std::invalid_argument("momdp: p0 does not sum to 1");
    if (m.p0.minCoeff() <= 0.0) throw std::invalid_argument("momdp: p0 not full support");
}

inline void check_policy(const Momdp& m, const Policy& pi, double tol = 1e-12) {
    if (pi.n_states() != m.n_states || pi.n_actions() != m.n_actions)
        throw std::invalid_argument("policy: dimension mismatch");
    if (pi.probs.minCoeff() < 0.0) throw std::invalid_argument("policy: negative probability");
    for (int s = 0; s < m.n_states; ++s)
        if (std::abs(pi.probs.row(s).sum() - 1.0) > tol)
            throw std::invalid_argument("policy: row " + std::to_string(s) + " not stochastic");
}

/// Uniform policy over actions in every state.
inline Policy uniform_policy(int n_states, int n_actions) {
    Policy pi;
    pi.probs = Matrix::Constant(n_states, n_actions, 1.0 / n_actions);
    return pi;
}

/// Deterministic policy selecting actions[s] in state s.
inline Policy deterministic_policy(int n_states, int n_actions, const std::vector<int>& actions) {
    if (static_cast<int>(actions.size()) != n_states)
        throw std::invalid_argument("deterministic_policy: one action per state required");
    Policy pi;
    pi.probs = Matrix::Zero(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) pi.probs(s, actions[s]) = 1.0;
    return pi;
}

/// State-transition matrix induced by a policy:
/// P_pi(s,s') = sum_a pi(a|s) P(s'|s,a).
inline Matrix induced_kernel(const Momdp& m, const Policy& pi) {
    if (pi.n_states() != m.n_states || pi.n_actions() != m.n_actions)
        throw std::invalid_argument("induced_kernel: dimension mismatch");
    Matrix P = Matrix::Zero(m.n_states, m.n_states);
    for (int a = 0; a < m.n_actions; ++a) P += pi.probs.col(a).asDiagonal() * m.kernel[a];
    return P;
}

/// Discounted state occupancy, the unique solution of
///   rho^T = (1-gamma) p0^T + gamma rho^T P_pi,
/// obtained by a direct dense solve of (I - gamma P_pi^T) rho = (1-gamma) p0.
inline Vector state_occupancy(const Momdp& m, const Policy& pi) {
    Matrix A = Matrix::Identity(m.n_states, m.n_states) - m.gamma * induced_kernel(m, pi).transpose();
    return A.partialPivLu().solve((1.0 - m.gamma) * m.p0);
}

/// mu(s,a) = rho(s) pi(a|s); sums to 1 over all (s,a).
inline OccupancyMeasure occupancy_measure(const Momdp& m, const Policy& pi) {
    OccupancyMeasure om;
    om.rho = state_occupancy(m, pi);
    om.mu = om.rho.asDiagonal() * pi.probs;
    return om;
}

/// Exact vector objective J(pi) = 1/(1-gamma) * sum_{s,a} mu(s,a) r(s,a),
/// computed through the occupancy measure.
inline ObjectiveVector objective_vector(const Momdp& m, const Policy& pi) {
    OccupancyMeasure om = occupancy_measure(m, pi);
    ObjectiveVector j = ObjectiveVector::Zero(m.n_objectives);
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a)
            j += om.mu(s, a) * m.rewards.row(m.sa_index(s, a)).transpose();
    return j / (1.0 - m.gamma);
}

/// Per-objective state values V_l, solved from (I - gamma P_pi) V_l = r_l^pi.
/// Returns an n_states x n_objectives matrix. p0^T V reproduces J(pi); kept as
/// an independent evaluation route.
inline Matrix state_values(const Momdp& m, const Policy& pi) {
    Matrix r_pi = Matrix::Zero(m.n_states, m.n_objectives);
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a)
            r_pi.row(s) += pi.probs(s, a) * m.rewards.row(m.sa_index(s, a));
    Matrix A = Matrix::Identity(m.n_states, m.n_states) - m.gamma * induced_kernel(m, pi);
    return A.partialPivLu().solve(r_pi);
}

/// Recovers the policy pi_mu(a|s) = mu(s,a) / rho(s). Requires every state
/// marginal to be positive.
inline Policy policy_from_occupancy(const OccupancyMeasure& om) {
    Policy pi;
    pi.probs = om.mu;
    for (int s = 0; s < pi.n_states(); ++s) {
        double row = om.mu.row(s).sum();
        if (!(row > 0.0))
            throw std::domain_error("policy_from_occupancy: zero marginal at state " +
                                    std::to_string(s));
        pi.probs.row(s) /= row;
    }
    return pi;
}

/// All |A|^|S| deterministic policies. Intended as a desk-scale oracle; throws
/// when the count exceeds cap.
inline std::vector<Policy> enumerate_deterministic_policies(const Momdp& m,
                                                            std::uint64_t cap = 1000000) {
    long double count = std::pow(static_cast<long double>(m.n_actions),
                                 static_cast<long double>(m.n_states));
    if (count > static_cast<long double>(cap))
        throw std::invalid_argument("enumerate_deterministic_policies: cap exceeded");
    std::vector<Policy> out;
    out.reserve(static_cast<std::size_t>(count));
    std::vector<int> actions(m.n_states, 0);
    while (true) {
        out.push_back(deterministic_policy(m.n_states, m.n_actions, actions));
        int s = 0;
        for (; s < m.n_states; ++s) {
            if (++actions[s] < m.n_actions) break;
            actions[s] = 0;
        }
        if (s == m.n_states) break;
    }
    return out;
}

}  // namespace cmdpi
