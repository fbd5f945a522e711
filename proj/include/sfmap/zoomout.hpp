#pragma once

#include "errors.hpp"
#include "fmap.hpp"
#include "knn.hpp"
#include "local_basis.hpp"
#include "mesh.hpp"
#include "spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <vector>

namespace sfmap {

struct ZoomOutSchedule {
    int k_init = 20;
    int k_final = 100;
    int step = 1;

    /// Spectral sizes visited, ascending; always ends at k_final.
    std::vector<int> sizes() const
    {
        std::vector<int> out;
        for (int k = k_init; k < k_final; k += step) out.push_back(k);
        out.push_back(k_final);
        return out;
    }

    void validate(int available) const
    {
        if (k_init < 1 || k_init > k_final || step < 1)
            throw ScheduleError("invalid schedule " + std::to_string(k_init) + ":" + std::to_string(step) + ":"
                                + std::to_string(k_final));
        if (k_final > available)
            throw ScheduleError("k_final = " + std::to_string(k_final) + " exceeds the " + std::to_string(available)
                                + " available basis functions");
    }
};

/// Optional instrumentation for the refinement loops.
struct ZoomOutAudit {
    Eigen::Index max_rows = 0;             // largest row count of any matrix built inside the loop
    std::vector<double> iteration_seconds; // wall time per spectral size
    std::vector<double> residuals;         // ||E_N C - Pi E_M||_F^2 / k after each step

    void touch(Eigen::Index rows) { max_rows = std::max(max_rows, rows); }
};

struct ZoomOutResult {
    FunctionalMap fmap;
    PointwiseMap map;
};

/// Pointwise map N -> M from a functional map: each row of E_N * C is sent to
/// its nearest row of E_M (lowest index on ties). A previous map, if given,
/// only seeds the search.
inline PointwiseMap pointwise_from_fmap(const Eigen::MatrixXd& embed_m, const Eigen::MatrixXd& embed_n,
                                        const Eigen::MatrixXd& C, const PointwiseMap* previous = nullptr)
{
    if (embed_n.cols() != C.rows() || embed_m.cols() != C.cols())
        throw DimensionError("pointwise_from_fmap: embedding widths do not match C");
    const KdTree tree{RowMatrix(embed_m)};
    const RowMatrix queries = embed_n * C;
    if (previous) return {tree.nearest_all(queries, previous->assignment)};
    return {tree.nearest_all(queries)};
}

namespace detail {

// One ZoomOut loop; `pull_back(k, map)` returns Basis_N[:, :k]^T Mass_N Pi Basis_M[:, :k].
template <class PullBack>
ZoomOutResult zoomout_loop(const Eigen::MatrixXd& basis_n, const Eigen::MatrixXd& basis_m, PointwiseMap map,
                           const ZoomOutSchedule& schedule, PullBack&& pull_back, FmapKind kind, ZoomOutAudit* audit)
{
    schedule.validate(static_cast<int>(std::min(basis_n.cols(), basis_m.cols())));
    if (map.size() != basis_n.rows()) throw DimensionError("initial map must cover every source entry");

    ZoomOutResult result;
    for (int k : schedule.sizes()) {
        const auto start = std::chrono::steady_clock::now();
        Eigen::MatrixXd C = pull_back(k, map);
        const Eigen::MatrixXd embed_m = basis_m.leftCols(k);
        const Eigen::MatrixXd embed_n = basis_n.leftCols(k);
        map = pointwise_from_fmap(embed_m, embed_n, C, &map);
        if (audit) {
            audit->touch(embed_m.rows());
            audit->touch(embed_n.rows());
            audit->touch(C.rows());
            audit->residuals.push_back((embed_n * C - gather_rows(embed_m, map)).squaredNorm() / k);
            audit->iteration_seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
        result.fmap = {std::move(C), kind};
    }
    result.map = std::move(map);
    return result;
}

} // namespace detail

/// Refinement carried out entirely on the samples: alternates the restricted
/// functional map at size k with a nearest-neighbor search between coefficient
/// rows. Only p-sized objects (coeffs, A_bar) are read; lifted vectors are not.
inline ZoomOutResult scalable_zoomout(const ReducedSpectrum& source, const ReducedSpectrum& target,
                                      PointwiseMap sample_map, const ZoomOutSchedule& schedule,
                                      ZoomOutAudit* audit = nullptr)
{
    auto pull_back = [&](int k, const PointwiseMap& map) {
        const Eigen::MatrixXd gathered = gather_rows(target.coeffs.leftCols(k), map);
        if (audit) audit->touch(gathered.rows());
        return Eigen::MatrixXd(source.coeffs.leftCols(k).transpose() * (source.A_bar * gathered));
    };
    return detail::zoomout_loop(source.coeffs, target.coeffs, std::move(sample_map), schedule, pull_back,
                                FmapKind::Restricted, audit);
}

/// Classic ZoomOut on dense A-orthonormal bases.
inline ZoomOutResult standard_zoomout(const Eigen::MatrixXd& basis_n, const Eigen::VectorXd& mass_n,
                                      const Eigen::MatrixXd& basis_m, PointwiseMap map,
                                      const ZoomOutSchedule& schedule, ZoomOutAudit* audit = nullptr)
{
    if (mass_n.size() != basis_n.rows()) throw DimensionError("standard_zoomout: mass size differs from basis rows");
    auto pull_back = [&](int k, const PointwiseMap& m) {
        const Eigen::MatrixXd gathered = gather_rows(basis_m.leftCols(k), m);
        if (audit) audit->touch(gathered.rows());
        return Eigen::MatrixXd(basis_n.leftCols(k).transpose() * mass_n.asDiagonal() * gathered);
    };
    return detail::zoomout_loop(basis_n, basis_m, std::move(map), schedule, pull_back, FmapKind::Exact, audit);
}

/// Candidate images for guided conversion: for x in N,
/// I(x) = { y in M : u^M_{T(j)}(y) > 0 for some j with u^N_j(x) > 0 }.
/// Candidates are enumerated on demand from the sparsity patterns.
class GuidedCandidates {
public:
    GuidedCandidates(const LocalBasis& basis_n, const LocalBasis& basis_m, PointwiseMap sample_map)
        : sample_map_(std::move(sample_map)), target_vertices_(basis_m.vertex_count())
    {
        if (sample_map_.size() != basis_n.size())
            throw DimensionError("sample map must cover every source sample");
        for (int j = 0; j < sample_map_.size(); ++j)
            if (sample_map_[j] < 0 || sample_map_[j] >= basis_m.size())
                throw DimensionError("sample map entry out of range");

        // Row supports of U_N (CSR).
        const auto n = basis_n.vertex_count();
        row_offsets_.assign(n + 1, 0);
        for (Eigen::Index j = 0; j < basis_n.U.outerSize(); ++j)
            for (SparseMatrix::InnerIterator it(basis_n.U, j); it; ++it)
                if (it.value() > 0.0) ++row_offsets_[it.row() + 1];
        for (int i = 0; i < n; ++i) row_offsets_[i + 1] += row_offsets_[i];
        row_samples_.resize(row_offsets_[n]);
        std::vector<int> fill(row_offsets_.begin(), row_offsets_.end() - 1);
        for (Eigen::Index j = 0; j < basis_n.U.outerSize(); ++j)
            for (SparseMatrix::InnerIterator it(basis_n.U, j); it; ++it)
                if (it.value() > 0.0) row_samples_[fill[it.row()]++] = static_cast<int>(j);

        // Column supports of U_M (CSC).
        col_offsets_.assign(basis_m.size() + 1, 0);
        for (Eigen::Index j = 0; j < basis_m.U.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(basis_m.U, j); it; ++it)
                if (it.value() > 0.0) col_vertices_.push_back(static_cast<int>(it.row()));
            col_offsets_[j + 1] = static_cast<int>(col_vertices_.size());
        }
    }

    int query_count() const { return static_cast<int>(row_offsets_.size()) - 1; }
    int target_vertex_count() const { return target_vertices_; }

    /// Sorted, duplicate-free candidate set of source vertex x.
    std::vector<int> candidates(int x) const
    {
        std::vector<int> out;
        for (int e = row_offsets_[x]; e < row_offsets_[x + 1]; ++e) {
            const int image = sample_map_[row_samples_[e]];
            out.insert(out.end(), col_vertices_.begin() + col_offsets_[image],
                       col_vertices_.begin() + col_offsets_[image + 1]);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    PointwiseMap sample_map_;
    int target_vertices_;
    std::vector<int> row_offsets_, row_samples_;
    std::vector<int> col_offsets_, col_vertices_;
};

inline GuidedCandidates build_guided_candidates(const LocalBasis& basis_n, const LocalBasis& basis_m,
                                                const PointwiseMap& sample_map)
{
    return GuidedCandidates(basis_n, basis_m, sample_map);
}

/// Dense map N -> M from a refined functional map: every row of Psi_bar_N C is
/// matched to its nearest row of Psi_bar_M, over all of M or only over the
/// guided candidate set.
inline PointwiseMap dense_conversion(const Eigen::MatrixXd& psi_bar_n, const Eigen::MatrixXd& psi_bar_m,
                                     const Eigen::MatrixXd& C, const GuidedCandidates* guided = nullptr)
{
    if (C.rows() > psi_bar_n.cols() || C.cols() > psi_bar_m.cols())
        throw DimensionError("dense_conversion: C is larger than the available bases");
    const RowMatrix queries = psi_bar_n.leftCols(C.rows()) * C;
    if (!guided) {
        const KdTree tree{RowMatrix(psi_bar_m.leftCols(C.cols()))};
        return {tree.nearest_all(queries)};
    }
    if (guided->query_count() != queries.rows() || guided->target_vertex_count() != psi_bar_m.rows())
        throw DimensionError("guided candidates built for different meshes");
    const RowMatrix points = psi_bar_m.leftCols(C.cols());
    PointwiseMap out;
    out.assignment.resize(static_cast<std::size_t>(queries.rows()));
#pragma omp parallel for schedule(dynamic, 256)
    for (Eigen::Index x = 0; x < queries.rows(); ++x) {
        const auto cand = guided->candidates(static_cast<int>(x));
        out.assignment[x] = nearest_among(points, queries.row(x).data(), cand).index;
    }
    return out;
}

/// Locally constant extension of a sample map: each source vertex follows the
/// sample with the largest local-function value at it (lowest index on ties).
inline PointwiseMap locally_constant_extension(const LocalBasis& basis_n, const PointwiseMap& sample_map,
                                               const SampleSet& samples_m)
{
    const auto n = basis_n.vertex_count();
    std::vector<double> best(n, -1.0);
    std::vector<int> owner(n, -1);
    for (Eigen::Index j = 0; j < basis_n.U.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(basis_n.U, j); it; ++it)
            if (it.value() > best[it.row()]) {
                best[it.row()] = it.value();
                owner[it.row()] = static_cast<int>(j);
            }
    PointwiseMap out;
    out.assignment.resize(n);
    for (int x = 0; x < n; ++x) out.assignment[x] = samples_m.indices[sample_map[owner[x]]];
    return out;
}

/// Restricts a dense N -> M map to the samples: each source sample goes to the
/// target sample nearest (in 3D) to its dense image.
inline PointwiseMap restrict_to_samples(const PointwiseMap& dense, const SampleSet& samples_n, const TriMesh& mesh_m,
                                        const SampleSet& samples_m)
{
    RowMatrix sample_points(samples_m.size(), 3);
    for (int j = 0; j < samples_m.size(); ++j) sample_points.row(j) = mesh_m.vertices().row(samples_m.indices[j]);
    const KdTree tree{std::move(sample_points)};
    PointwiseMap out;
    out.assignment.resize(samples_n.size());
    for (int j = 0; j < samples_n.size(); ++j) {
        const int v = samples_n.indices[j];
        if (v >= dense.size() || dense[v] < 0 || dense[v] >= mesh_m.vertex_count())
            throw InitMapError("initial map has no valid image for source sample vertex " + std::to_string(v));
        const Eigen::RowVector3d y = mesh_m.vertices().row(dense[v]);
        out.assignment[j] = tree.nearest(y.data()).index;
    }
    return out;
}

} // namespace sfmap
