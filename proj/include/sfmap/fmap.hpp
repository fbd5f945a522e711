#pragma once

#include "errors.hpp"

#include <Eigen/Dense>

#include <iostream>
#include <string>
#include <vector>

namespace sfmap {

// Orientation used throughout:
//   a pointwise map T runs N -> M (source N, target M), stored as one target
//   index per source entry;
//   its functional map C transports functions the other way, f -> f o T, so
//   C is K_N x K_M and acts on coefficient vectors of functions on M.
//   C = Psi_N^T A_N Pi Psi_M, where Pi gathers rows of Psi_M by T.

/// Vertex-to-vertex (or sample-to-sample) map, one target index per source entry.
struct PointwiseMap {
    std::vector<int> assignment;

    int size() const { return static_cast<int>(assignment.size()); }
    int operator[](int i) const { return assignment[i]; }

    static PointwiseMap identity(int n)
    {
        PointwiseMap m;
        m.assignment.resize(n);
        for (int i = 0; i < n; ++i) m.assignment[i] = i;
        return m;
    }
};

enum class FmapKind { Exact, Reduced, Restricted, FastLS, RestrictedReweighted };

struct FunctionalMap {
    Eigen::MatrixXd C; // K_N x K_M
    FmapKind kind = FmapKind::Exact;
};

/// Rows of `m` gathered through the map: out.row(i) = m.row(map[i]). This is Pi * m.
inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const PointwiseMap& map)
{
    Eigen::MatrixXd out(map.size(), m.cols());
    for (int i = 0; i < map.size(); ++i) {
        const int t = map[i];
        if (t < 0 || t >= m.rows())
            throw DimensionError("map entry " + std::to_string(i) + " -> " + std::to_string(t) + " outside [0, "
                                 + std::to_string(m.rows()) + ")");
        out.row(i) = m.row(t);
    }
    return out;
}

namespace detail {
inline void expect(bool ok, const std::string& what)
{
    if (!ok) throw DimensionError(what);
}
} // namespace detail

/// C = Psi_N^T diag(A_N) Pi Psi_M for A-orthonormal dense bases.
inline FunctionalMap exact_fmap(const Eigen::MatrixXd& psi_n, const Eigen::VectorXd& mass_n, const PointwiseMap& map,
                                const Eigen::MatrixXd& psi_m)
{
    detail::expect(psi_n.rows() == mass_n.size() && map.size() == psi_n.rows(), "exact_fmap: source sizes disagree");
    return {psi_n.transpose() * mass_n.asDiagonal() * gather_rows(psi_m, map), FmapKind::Exact};
}

/// Same construction on the lifted approximate bases.
inline FunctionalMap reduced_fmap(const Eigen::MatrixXd& psi_bar_n, const Eigen::VectorXd& mass_n,
                                  const PointwiseMap& map, const Eigen::MatrixXd& psi_bar_m)
{
    auto out = exact_fmap(psi_bar_n, mass_n, map, psi_bar_m);
    out.kind = FmapKind::Reduced;
    return out;
}

/// C_hat = Phi_N^T A_bar_N Pi_bar Phi_M, built from sample-level objects only.
inline FunctionalMap restricted_fmap(const Eigen::MatrixXd& phi_n, const Eigen::MatrixXd& a_bar_n,
                                     const PointwiseMap& sample_map, const Eigen::MatrixXd& phi_m)
{
    detail::expect(phi_n.rows() == a_bar_n.rows() && sample_map.size() == phi_n.rows(),
                   "restricted_fmap: source sizes disagree");
    return {phi_n.transpose() * (a_bar_n * gather_rows(phi_m, sample_map)), FmapKind::Restricted};
}

/// Variant transporting pointwise values: Phi_M is replaced by Psi_bar_M
/// evaluated at M's sample vertices (one row per sample).
inline FunctionalMap restricted_fmap_reweighted(const Eigen::MatrixXd& phi_n, const Eigen::MatrixXd& a_bar_n,
                                                const PointwiseMap& sample_map,
                                                const Eigen::MatrixXd& psi_bar_m_at_samples)
{
    auto out = restricted_fmap(phi_n, a_bar_n, sample_map, psi_bar_m_at_samples);
    out.kind = FmapKind::RestrictedReweighted;
    return out;
}

/// Least-squares map argmin_X ||E_N X - Pi E_M|| over selected rows, where
/// E_N = Q_N Psi_N (q x K) and `map` sends each selected N row to a row of
/// E_M = Q_M Psi_M. Solved through the normal equations; a 1e-10 * trace
/// Tikhonov term is added (and reported on stderr) only if the Gram matrix
/// fails to factor.
inline FunctionalMap fast_ls_fmap(const Eigen::MatrixXd& psi_n_selected, const PointwiseMap& map,
                                  const Eigen::MatrixXd& psi_m_selected)
{
    detail::expect(map.size() == psi_n_selected.rows(), "fast_ls_fmap: map size must equal selected N rows");
    const auto K = psi_n_selected.cols();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(psi_n_selected);
    qr.setThreshold(1e-12);
    if (qr.rank() < K)
        throw RankDeficientError("selected rows have rank " + std::to_string(qr.rank()) + " < " + std::to_string(K));

    Eigen::MatrixXd gram = psi_n_selected.transpose() * psi_n_selected;
    const Eigen::MatrixXd rhs = psi_n_selected.transpose() * gather_rows(psi_m_selected, map);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        const double tau = 1e-10 * gram.trace();
        std::cerr << "fast_ls_fmap: Gram matrix not positive definite, adding Tikhonov term " << tau << "\n";
        gram.diagonal().array() += tau;
        llt.compute(gram);
    }
    return {llt.solve(rhs), FmapKind::FastLS};
}

} // namespace sfmap
