#pragma once

#include "errors.hpp"
#include "fmap.hpp"
#include "geodesic.hpp"
#include "local_basis.hpp"
#include "spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace sfmap {

/// One inequality lhs <= rhs.
struct BoundCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
    std::string note; // set when the check was skipped or re-estimated

    double tightness() const { return lhs > 0.0 ? rhs / lhs : std::numeric_limits<double>::infinity(); }
};

namespace detail {
inline BoundCheck make_check(std::string name, double lhs, double rhs)
{
    // Relative slack for rounding in the accumulated sums.
    const bool ok = lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs));
    return {std::move(name), lhs, rhs, ok, {}};
}

inline double weighted_sq_norm(const Eigen::VectorXd& mass, const Eigen::MatrixXd& m)
{
    return (m.array().square().colwise() * mass.array()).sum();
}
} // namespace detail

struct BoundReport {
    double epsilon_eig = 0.0;
    double epsilon_sup = std::numeric_limits<double>::quiet_NaN(); // NaN when the prop1 check was skipped
    double alpha = 0.0;
    double B_T_raw = 0.0;
    double B_T_hat = 0.0;
    std::vector<BoundCheck> checks;

    bool all_satisfied() const
    {
        for (const auto& c : checks)
            if (!c.satisfied) return false;
        return true;
    }
};

inline void write_report(std::ostream& out, const BoundReport& r)
{
    out.precision(10);
    out << "epsilon_eig = " << r.epsilon_eig << '\n';
    out << "epsilon_sup = " << r.epsilon_sup << '\n';
    out << "alpha = " << r.alpha << '\n';
    out << "B_T_raw = " << r.B_T_raw << '\n';
    out << "B_T_hat = " << r.B_T_hat << '\n';
    for (const auto& c : r.checks) {
        out << c.name << ".lhs = " << c.lhs << '\n';
        out << c.name << ".rhs = " << c.rhs << '\n';
        out << c.name << ".rhs_over_lhs = " << c.tightness() << '\n';
        out << c.name << ".satisfied = " << (c.satisfied ? "true" : "false") << '\n';
        if (!c.note.empty()) out << c.name << ".note = " << c.note << '\n';
    }
    out << "all_satisfied = " << (r.all_satisfied() ? "true" : "false") << '\n';
}

/// `count` random combinations of the columns of `basis` (Gaussian coefficients).
inline Eigen::MatrixXd band_limited_trials(const Eigen::MatrixXd& basis, int count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd coeffs(basis.cols(), count);
    for (Eigen::Index c = 0; c < coeffs.cols(); ++c)
        for (Eigen::Index r = 0; r < coeffs.rows(); ++r) coeffs(r, c) = normal(rng);
    return basis * coeffs;
}

struct LipschitzEstimate {
    double raw = 0.0;      // max observed ||f o T||_N / ||f||_M
    double inflated = 0.0; // raw * 1.1
};

/// Empirical lower estimate of B_T over trial functions on M (one per column).
inline LipschitzEstimate estimate_BT(const PointwiseMap& map, const Eigen::VectorXd& mass_n,
                                     const Eigen::VectorXd& mass_m, const Eigen::MatrixXd& trials)
{
    if (trials.rows() != mass_m.size() || map.size() != mass_n.size())
        throw DimensionError("estimate_BT: sizes disagree");
    const Eigen::MatrixXd pulled = gather_rows(trials, map);
    double best = 0.0;
    for (Eigen::Index c = 0; c < trials.cols(); ++c) {
        const double num = std::sqrt((pulled.col(c).array().square() * mass_n.array()).sum());
        const double den = std::sqrt((trials.col(c).array().square() * mass_m.array()).sum());
        if (den > 0.0) best = std::max(best, num / den);
    }
    return {best, 1.1 * best};
}

struct EpsilonMeasure {
    double epsilon = 0.0;
    std::vector<double> per_k; // max over pairs for eigenvector k alone
};

/// Largest variation of the lifted eigenvectors and of their coefficient
/// vectors between pairs of samples within the record radius of each other.
inline EpsilonMeasure measure_epsilon_eig(const ReducedSpectrum& spectrum, const SampleSet& samples,
                                          const GeodesicRecord& record, int K)
{
    if (K < 1 || K > spectrum.rank()) throw DimensionError("measure_epsilon_eig: K out of range");
    if (spectrum.lifted.cols() < K) throw DimensionError("measure_epsilon_eig: lifted eigenvectors required");
    const Eigen::MatrixXd& psi = spectrum.lifted;
    const Eigen::MatrixXd& phi = spectrum.coeffs;

    std::vector<int> sample_of(static_cast<std::size_t>(psi.rows()), -1);
    for (int j = 0; j < samples.size(); ++j) sample_of[samples.indices[j]] = j;

    EpsilonMeasure out;
    out.per_k.assign(K, 0.0);
    for (int j = 0; j < record.size(); ++j) {
        const auto& list = record.lists[j];
        const int reach = list.count_below(std::nextafter(record.radius, std::numeric_limits<double>::infinity()));
        for (int e = 0; e < reach; ++e) {
            const int l = sample_of[list.vertex[e]];
            if (l < 0 || l == j) continue;
            const int vj = samples.indices[j], vl = samples.indices[l];
            for (int k = 0; k < K; ++k) {
                const double d = std::max(std::abs(psi(vj, k) - psi(vl, k)), std::abs(phi(j, k) - phi(l, k)));
                out.per_k[k] = std::max(out.per_k[k], d);
            }
        }
    }
    for (double v : out.per_k) out.epsilon = std::max(out.epsilon, v);
    return out;
}

/// Flips columns of `approx` to agree in sign with `exact` under the mass inner product.
inline Eigen::MatrixXd align_signs(const Eigen::MatrixXd& exact, const Eigen::MatrixXd& approx,
                                   const Eigen::VectorXd& mass)
{
    Eigen::MatrixXd out = approx;
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        if ((exact.col(c).array() * out.col(c).array() * mass.array()).sum() < 0.0) out.col(c) *= -1.0;
    return out;
}

/// max_j ||exact_j - approx_j||_inf over the first K columns.
inline double sup_norm_gap(const Eigen::MatrixXd& exact, const Eigen::MatrixXd& approx, int K)
{
    if (exact.rows() != approx.rows() || exact.cols() < K || approx.cols() < K)
        throw DimensionError("sup_norm_gap: shapes differ");
    return (exact.leftCols(K) - approx.leftCols(K)).cwiseAbs().maxCoeff();
}

/// (1/K) ||C - C_bar||_F^2 <= eps^2 (1 + B_T^2).
inline BoundCheck check_prop1(const Eigen::MatrixXd& C, const Eigen::MatrixXd& C_bar, double epsilon_sup,
                              double B_T, int K)
{
    if (C.rows() < K || C.cols() < K || C_bar.rows() < K || C_bar.cols() < K)
        throw DimensionError("check_prop1: maps smaller than K");
    const double lhs = (C.topLeftCorner(K, K) - C_bar.topLeftCorner(K, K)).squaredNorm() / K;
    return detail::make_check("prop1", lhs, epsilon_sup * epsilon_sup * (1.0 + B_T * B_T));
}

/// (1/K) ||Pi Psi_bar^M - U^N Pi_bar Phi_bar^M||_N^2 <= eps^2 (1 - alpha) + eps^2 B_T^2.
/// Requires the dense map to send every source sample to the image sample.
inline BoundCheck check_prop2(const PointwiseMap& map, const PointwiseMap& sample_map, const LocalBasis& basis_n,
                              const LocalBasis& basis_m, const ReducedSpectrum& spectrum_m,
                              const Eigen::VectorXd& mass_n, double epsilon, double alpha, double B_T, int K)
{
    if (sample_map.size() != basis_n.size()) throw DimensionError("check_prop2: sample map size");
    if (spectrum_m.lifted.cols() < K || spectrum_m.coeffs.cols() < K) throw DimensionError("check_prop2: K too large");
    for (int j = 0; j < sample_map.size(); ++j) {
        const int v = basis_n.samples.indices[j];
        const int t = sample_map[j];
        if (t < 0 || t >= basis_m.size() || map[v] != basis_m.samples.indices[t])
            throw HypothesisError("dense map and sample map disagree at source sample " + std::to_string(j));
    }
    const Eigen::MatrixXd lhs_a = gather_rows(spectrum_m.lifted.leftCols(K), map);
    const Eigen::MatrixXd lhs_b = basis_n.U * gather_rows(spectrum_m.coeffs.leftCols(K), sample_map);
    const double lhs = detail::weighted_sq_norm(mass_n, lhs_a - lhs_b) / K;
    const double e2 = epsilon * epsilon;
    return detail::make_check("prop2", lhs, e2 * (1.0 - alpha) + e2 * B_T * B_T);
}

struct InterpolationCheck {
    double epsilon = 0.0;          // variation of f between each center and its support
    double max_error = 0.0;        // max_x |f_tilde(x) - f(x)|
    std::vector<double> sample_errors;
    std::vector<double> sample_bounds; // epsilon * (1 - u_j(v_j))
    bool satisfied = false;
};

/// Interpolation f_tilde = sum_j f(v_j) u_j against f. The modulus epsilon is
/// measured over (center, support vertex) pairs, the only pairs the estimate uses.
inline InterpolationCheck check_interpolation_prop(const LocalBasis& basis, const Eigen::VectorXd& f)
{
    if (f.size() != basis.vertex_count()) throw DimensionError("check_interpolation_prop: f size");
    const int p = basis.size();
    InterpolationCheck out;
    Eigen::VectorXd at_samples(p);
    for (int j = 0; j < p; ++j) at_samples(j) = f(basis.samples.indices[j]);
    for (Eigen::Index j = 0; j < basis.U.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(basis.U, j); it; ++it)
            out.epsilon = std::max(out.epsilon, std::abs(f(it.row()) - at_samples(j)));

    const Eigen::VectorXd interp = basis.U * at_samples;
    const Eigen::VectorXd err = (interp - f).cwiseAbs();
    out.max_error = err.maxCoeff();
    const double slack = 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff());
    out.satisfied = out.max_error <= out.epsilon + slack;
    for (int j = 0; j < p; ++j) {
        const double e = err(basis.samples.indices[j]);
        const double b = out.epsilon * (1.0 - basis.self_weights(j));
        out.sample_errors.push_back(e);
        out.sample_bounds.push_back(b);
        if (e > b + slack) out.satisfied = false;
    }
    return out;
}

struct Lemma3Check {
    double max_ratio = 0.0; // max ||U beta||_N^2 / ||beta||^2
    int trials = 0;
    bool satisfied = false;
};

/// ||U beta||_N^2 <= ||beta||^2 for random Gaussian beta (area-normalized mesh).
inline Lemma3Check check_lemma3(const LocalBasis& basis, const Eigen::VectorXd& mass, int trials = 100,
                                std::uint64_t seed = 7)
{
    if (mass.size() != basis.vertex_count()) throw DimensionError("check_lemma3: mass size");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Lemma3Check out;
    out.trials = trials;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd beta(basis.size());
        for (Eigen::Index j = 0; j < beta.size(); ++j) beta(j) = normal(rng);
        const Eigen::VectorXd ub = basis.U * beta;
        out.max_ratio = std::max(out.max_ratio, (ub.array().square() * mass.array()).sum() / beta.squaredNorm());
    }
    out.satisfied = out.max_ratio <= 1.0 + 1e-12;
    return out;
}

} // namespace sfmap
