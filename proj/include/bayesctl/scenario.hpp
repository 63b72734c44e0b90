#pragma once

// Problem instances: per-stage system and loss matrices, the random-horizon
// distribution, the Pareto prior, and their JSON configuration format.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "bayesctl/errors.hpp"
#include "bayesctl/linalg.hpp"

namespace bayesctl {

using Rng = std::mt19937_64;

/// Uniform draw on [0, 1) from the top 53 bits of the stream.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Distribution of the stopping stage N over {0, ..., M}.
struct HorizonDist {
    std::vector<double> probs;

    int max_stage() const { return static_cast<int>(probs.size()) - 1; }
};

/// Tail mass sum_{i >= n} p_i. Accumulated from the back so small tails keep
/// their precision; the total mass is pinned to exactly 1.
inline double tail_mass(const HorizonDist& h, int n) {
    if (n < 0 || n > h.max_stage())
        throw InvalidInput("tail_mass: stage " + std::to_string(n) + " outside [0, " +
                           std::to_string(h.max_stage()) + "]");
    if (n == 0) return 1.0;
    double acc = 0.0;
    for (int i = h.max_stage(); i >= n; --i) acc += h.probs[static_cast<std::size_t>(i)];
    return std::min(acc, 1.0);
}

inline int sample_horizon(const HorizonDist& h, Rng& rng) {
    const double u = uniform01(rng);
    double cum = 0.0;
    for (int n = 0; n < h.max_stage(); ++n) {
        cum += h.probs[static_cast<std::size_t>(n)];
        if (u < cum) return n;
    }
    return h.max_stage();
}

/// Pareto prior on the uniform scale parameters. Only the first `k`
/// coordinates are active; the rest are structurally zero.
struct PriorSpec {
    Vector beta;
    Vector rbar;
    int k = 0;
};

struct StageData {
    Matrix alpha;  // r x m
    Matrix b;      // r x m
    Matrix c;      // r x m
    Matrix s;      // 2m x 2m, weights (x, lambda)
    Matrix k;      // m x m, control weight
};

struct Scenario {
    int m = 1;
    int r = 1;
    std::vector<StageData> stages;
    HorizonDist horizon;
    PriorSpec prior;
    Vector x0;

    int max_stage() const { return horizon.max_stage(); }
    bool generalized() const { return r != m; }
};

/// Leading coefficient of the generalized system: [I_m; 0] when r > m,
/// [I_r 0] when r < m.
inline Matrix embedding(int r, int m) { return Matrix::Identity(r, m); }

/// Square (m x m) stage matrices acting on the state. For r != m the next
/// state is the minimum-norm least-squares completion, i.e. the
/// pseudoinverse of the embedding (its transpose) applied to the right-hand
/// side.
inline StageData effective_stage(const Scenario& sc, int n) {
    const StageData& st = sc.stages.at(static_cast<std::size_t>(n));
    if (!sc.generalized()) return st;
    const Matrix lift = embedding(sc.r, sc.m).transpose();
    return StageData{lift * st.alpha, lift * st.b, lift * st.c, st.s, st.k};
}

namespace detail {

inline std::string idx(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

inline void check_psd(const Matrix& m, const std::string& field) {
    const double scale = 1.0 + m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ValidationError(field, "matrix must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(m), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10)
        throw ValidationError(field, "matrix must be positive semidefinite");
}

inline void check_shape(const Matrix& mat, Eigen::Index rows, Eigen::Index cols,
                        const std::string& field) {
    if (mat.rows() != rows || mat.cols() != cols)
        throw ValidationError(field, "expected " + std::to_string(rows) + "x" +
                                         std::to_string(cols) + ", got " +
                                         std::to_string(mat.rows()) + "x" +
                                         std::to_string(mat.cols()));
    if (!mat.allFinite()) throw ValidationError(field, "entries must be finite");
}

}  // namespace detail

/// Checks every scenario invariant; throws ValidationError naming the field.
inline void validate(const Scenario& sc) {
    using detail::idx;
    if (sc.m < 1) throw ValidationError("m", "state dimension must be positive");
    if (sc.r < 1) throw ValidationError("r", "row dimension must be positive");

    const auto& probs = sc.horizon.probs;
    if (probs.empty()) throw ValidationError("horizon.probs", "must be nonempty");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!std::isfinite(probs[i]) || probs[i] < 0.0)
            throw ValidationError(idx("horizon.probs", i), "probability must be nonnegative");
        total += probs[i];
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError("horizon.probs", "probabilities must sum to 1");
    if (!(probs.back() > 0.0))
        throw ValidationError(idx("horizon.probs", probs.size() - 1),
                              "last probability p_M must be positive");

    const std::size_t nstages = probs.size();
    if (sc.stages.size() != nstages)
        throw ValidationError("stages", "expected M+1 = " + std::to_string(nstages) +
                                            " stages, got " + std::to_string(sc.stages.size()));
    for (std::size_t n = 0; n < nstages; ++n) {
        const StageData& st = sc.stages[n];
        const std::string base = idx("stages", n);
        detail::check_shape(st.alpha, sc.r, sc.m, base + ".alpha");
        detail::check_shape(st.b, sc.r, sc.m, base + ".b");
        detail::check_shape(st.c, sc.r, sc.m, base + ".c");
        detail::check_shape(st.s, 2 * sc.m, 2 * sc.m, base + ".s");
        detail::check_shape(st.k, sc.m, sc.m, base + ".k");
        detail::check_psd(st.s, base + ".s");
        detail::check_psd(st.k, base + ".k");
    }

    const PriorSpec& pr = sc.prior;
    if (pr.k < 0 || pr.k > sc.m)
        throw ValidationError("prior.k", "active coordinate count must lie in [0, m]");
    if (pr.beta.size() != sc.m || pr.rbar.size() != sc.m)
        throw ValidationError("prior", "beta and r must have length m after padding");
    for (int i = 0; i < sc.m; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (i < pr.k) {
            if (!std::isfinite(pr.beta(i)) || !(pr.beta(i) > 2.0))
                throw ValidationError(idx("prior.beta", ui), "beta must exceed 2");
            if (!std::isfinite(pr.rbar(i)) || !(pr.rbar(i) > 0.0))
                throw ValidationError(idx("prior.r", ui), "r must be positive");
        } else {
            if (pr.beta(i) != 0.0)
                throw ValidationError(idx("prior.beta", ui), "inactive coordinate must be zero");
            if (pr.rbar(i) != 0.0)
                throw ValidationError(idx("prior.r", ui), "inactive coordinate must be zero");
        }
    }

    if (sc.x0.size() != sc.m) throw ValidationError("x0", "initial state must have length m");
    if (!sc.x0.allFinite()) throw ValidationError("x0", "entries must be finite");
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const char* key, const std::string& field) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(field, "missing field");
    return j.at(key);
}

inline double read_number(const json& j, const std::string& field) {
    if (!j.is_number()) throw ValidationError(field, "expected a number");
    return j.get<double>();
}

inline int read_int(const json& j, const std::string& field) {
    if (!j.is_number_integer()) throw ValidationError(field, "expected an integer");
    return j.get<int>();
}

inline Vector read_vector(const json& j, const std::string& field) {
    if (!j.is_array()) throw ValidationError(field, "expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = read_number(j[i], idx(field, i));
    return v;
}

// Matrices are arrays of rows.
inline Matrix read_matrix(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw ValidationError(field, "expected an array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string row = idx(field, i);
        if (!j[i].is_array() || j[i].size() != cols)
            throw ValidationError(row, "rows must be arrays of equal length");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                read_number(j[i][c], idx(row, c));
    }
    return m;
}

inline json write_matrix(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json write_vector(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Vector pad(const Vector& v, int m) {
    Vector out = Vector::Zero(m);
    out.head(std::min<Eigen::Index>(v.size(), m)) = v.head(std::min<Eigen::Index>(v.size(), m));
    return out;
}

}  // namespace detail

/// Builds and validates a scenario from its JSON document.
inline Scenario scenario_from_json(const nlohmann::json& j) {
    using namespace detail;
    if (!j.is_object()) throw ValidationError("<root>", "expected a JSON object");
    Scenario sc;
    sc.m = read_int(require(j, "m", "m"), "m");
    sc.r = j.contains("r") ? read_int(j.at("r"), "r") : sc.m;
    const int max_stage = read_int(require(j, "M", "M"), "M");
    if (sc.m < 1) throw ValidationError("m", "state dimension must be positive");
    if (max_stage < 0) throw ValidationError("M", "horizon bound must be nonnegative");

    const json& horizon = require(j, "horizon", "horizon");
    const Vector probs = read_vector(require(horizon, "probs", "horizon.probs"), "horizon.probs");
    if (probs.size() != max_stage + 1)
        throw ValidationError("horizon.probs", "expected M+1 = " + std::to_string(max_stage + 1) +
                                                   " probabilities, got " +
                                                   std::to_string(probs.size()));
    sc.horizon.probs.assign(probs.data(), probs.data() + probs.size());

    const json& stages = require(j, "stages", "stages");
    if (!stages.is_array()) throw ValidationError("stages", "expected an array");
    for (std::size_t n = 0; n < stages.size(); ++n) {
        const std::string base = idx("stages", n);
        const json& st = stages[n];
        sc.stages.push_back(StageData{
            read_matrix(require(st, "alpha", base + ".alpha"), base + ".alpha"),
            read_matrix(require(st, "b", base + ".b"), base + ".b"),
            read_matrix(require(st, "c", base + ".c"), base + ".c"),
            read_matrix(require(st, "s", base + ".s"), base + ".s"),
            read_matrix(require(st, "k", base + ".k"), base + ".k"),
        });
    }

    const json& prior = require(j, "prior", "prior");
    const Vector beta = read_vector(require(prior, "beta", "prior.beta"), "prior.beta");
    const Vector rbar = read_vector(require(prior, "r", "prior.r"), "prior.r");
    if (beta.size() != rbar.size())
        throw ValidationError("prior.r", "must have the same length as prior.beta");
    if (beta.size() > sc.m) throw ValidationError("prior.beta", "longer than m");
    sc.prior.k = prior.contains("k") ? read_int(prior.at("k"), "prior.k")
                                     : static_cast<int>(beta.size());
    sc.prior.beta = pad(beta, sc.m);
    sc.prior.rbar = pad(rbar, sc.m);

    sc.x0 = read_vector(require(j, "x0", "x0"), "x0");
    validate(sc);
    return sc;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
    using namespace detail;
    json j;
    j["m"] = sc.m;
    j["r"] = sc.r;
    j["M"] = sc.max_stage();
    j["horizon"]["probs"] = sc.horizon.probs;
    json stages = json::array();
    for (const StageData& st : sc.stages)
        stages.push_back({{"alpha", write_matrix(st.alpha)},
                          {"b", write_matrix(st.b)},
                          {"c", write_matrix(st.c)},
                          {"s", write_matrix(st.s)},
                          {"k", write_matrix(st.k)}});
    j["stages"] = std::move(stages);
    j["prior"]["k"] = sc.prior.k;
    j["prior"]["beta"] = write_vector(sc.prior.beta);
    j["prior"]["r"] = write_vector(sc.prior.rbar);
    j["x0"] = write_vector(sc.x0);
    return j;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path, "cannot open scenario file");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path, std::string("parse error: ") + e.what());
    }
    return scenario_from_json(j);
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("save_scenario: cannot write " + path);
    out << scenario_to_json(sc).dump(2) << '\n';
}

}  // namespace bayesctl
