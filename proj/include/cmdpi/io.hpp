#pragma once

#include "cmdpi/analysis.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace cmdpi {

using nlohmann::json;

/// Locale-independent decimal formatting with 17 significant digits
/// (round-trip exact for doubles).
inline std::string fmt17(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Vector vector_from_json(const json& j) {
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
    return v;
}

inline json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

namespace detail {

// Accepts either nested rows or a flat row-major list.
inline Matrix matrix_from_json(const json& j, int rows, int cols, const std::string& what) {
    Matrix m(rows, cols);
    if (!j.is_array()) throw std::invalid_argument("momdp json: " + what + " must be an array");
    if (!j.empty() && j[0].is_array()) {
        if (static_cast<int>(j.size()) != rows)
            throw std::invalid_argument("momdp json: " + what + " row count mismatch");
        for (int r = 0; r < rows; ++r) {
            if (static_cast<int>(j[r].size()) != cols)
                throw std::invalid_argument("momdp json: " + what + " column count mismatch");
            for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
        }
    } else {
        if (static_cast<int>(j.size()) != rows * cols)
            throw std::invalid_argument("momdp json: " + what + " size mismatch");
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = j[r * cols + c].get<double>();
    }
    return m;
}

}  // namespace detail

inline json momdp_to_json(const Momdp& m) {
    json j;
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["n_objectives"] = m.n_objectives;
    j["gamma"] = m.gamma;
    j["p0"] = vector_to_json(m.p0);
    json kernel = json::array();
    for (const auto& P : m.kernel) kernel.push_back(matrix_to_json(P));
    j["kernel"] = kernel;
    j["rewards"] = matrix_to_json(m.rewards);
    return j;
}

/// Parses and validates an environment. kernel holds one row-major matrix per
/// action (nested rows or flat); rewards holds one m-vector per (s,a), s-major.
inline Momdp momdp_from_json(const json& j) {
    Momdp m;
    try {
        m.n_states = j.at("n_states").get<int>();
        m.n_actions = j.at("n_actions").get<int>();
        m.n_objectives = j.at("n_objectives").get<int>();
        m.gamma = j.at("gamma").get<double>();
        m.p0 = vector_from_json(j.at("p0"));
        const json& kernel = j.at("kernel");
        if (static_cast<int>(kernel.size()) != m.n_actions)
            throw std::invalid_argument("momdp json: kernel must hold one matrix per action");
        for (int a = 0; a < m.n_actions; ++a)
            m.kernel.push_back(detail::matrix_from_json(kernel[a], m.n_states, m.n_states,
                                                        "kernel[" + std::to_string(a) + "]"));
        m.rewards = detail::matrix_from_json(j.at("rewards"), m.n_states * m.n_actions,
                                             m.n_objectives, "rewards");
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("momdp json: ") + e.what());
    }
    validate(m);
    return m;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Momdp load_momdp(const std::string& path) { return momdp_from_json(read_json_file(path)); }

inline void save_momdp(const Momdp& m, const std::string& path) {
    write_text_file(path, momdp_to_json(m).dump(2) + "\n");
}

inline json policy_to_json(const Policy& pi) { return matrix_to_json(pi.probs); }

inline json trace_to_json(const SolveTrace& trace) {
    json j;
    j["termination"] = trace.termination;
    j["iterations"] = trace.iterations();
    j["final_policy"] = policy_to_json(trace.final_policy);
    json recs = json::array();
    for (const auto& r : trace.records) {
        json rec;
        rec["k"] = r.k;
        rec["policy"] = policy_to_json(r.policy);
        rec["J"] = vector_to_json(r.j);
        rec["utility"] = r.utility;
        rec["bellman_residual"] = r.bellman_residual;
        rec["policy_delta"] = r.policy_delta;
        recs.push_back(std::move(rec));
    }
    j["records"] = std::move(recs);
    return j;
}

/// Compact per-iteration view: k, utility, objective components, residuals.
inline std::string trace_to_csv(const SolveTrace& trace) {
    std::ostringstream out;
    const int m = trace.records.empty() ? 0 : static_cast<int>(trace.records.front().j.size());
    out << "k,utility";
    for (int l = 1; l <= m; ++l) out << ",J_" << l;
    out << ",bellman_residual,policy_delta\n";
    for (const auto& r : trace.records) {
        out << r.k << ',' << fmt17(r.utility);
        for (int l = 0; l < m; ++l) out << ',' << fmt17(r.j(l));
        out << ',' << fmt17(r.bellman_residual) << ',' << fmt17(r.policy_delta) << '\n';
    }
    return out.str();
}

/// Plot-ready front export: one vertex per row, descending first objective.
inline std::string front_to_csv(const ParetoFront2D& front) {
    std::ostringstream out;
    out << "J_1,J_2\n";
    for (const auto& v : front.vertices) out << fmt17(v(0)) << ',' << fmt17(v(1)) << '\n';
    return out.str();
}

inline json metric_report_to_json(const MetricReport& rep) {
    json j;
    j["hypervolume"] = rep.hypervolume;
    j["eum"] = rep.eum;
    j["sparsity"] = rep.sparsity;
    j["reference_point"] = vector_to_json(rep.reference_point);
    j["preference_set_id"] = rep.preference_set_id;
    return j;
}

inline json constants_report_to_json(const ConstantsReport& rep) {
    json j;
    j["alpha_star"] = rep.alpha_star;
    j["alpha"] = vector_to_json(rep.alpha);
    j["beta"] = vector_to_json(rep.beta);
    j["U"] = rep.U;
    j["mu_strong"] = rep.mu_strong;
    j["lipschitz_L"] = rep.lipschitz_L;
    if (rep.rel_smooth_L) j["rel_smooth_L"] = *rep.rel_smooth_L;
    return j;
}

}  // namespace cmdpi
