#pragma once

#include "chi.hpp"
#include "errors.hpp"
#include "geodesic.hpp"
#include "laplacian.hpp"
#include "mesh.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <vector>

namespace sfmap {

/// Partition-of-unity local functions: column j of U is u_j, supported on the
/// geodesic ball of radius rho_j around sample j.
struct LocalBasis {
    SparseMatrix U;               // n x p, column major
    Eigen::VectorXd self_weights; // u_j(v_j)
    SampleSet samples;            // indices and final radii
    double self_weight_threshold = 0.0;
    ChiKind profile = ChiKind::Polynomial;

    int vertex_count() const { return static_cast<int>(U.rows()); }
    int size() const { return static_cast<int>(U.cols()); }
    double min_self_weight() const { return self_weights.minCoeff(); }
};

/// Unnormalized functions: Utilde(i, j) = chi(d(x_i, v_j) / rho_j), stored only where d < rho_j.
inline SparseMatrix build_unnormalized(int vertex_count, const GeodesicRecord& record, const std::vector<double>& radii,
                                       ChiProfile profile)
{
    const int p = record.size();
    SparseMatrix out(vertex_count, p);
    std::vector<int> col_nnz(p);
    for (int j = 0; j < p; ++j) col_nnz[j] = record.lists[j].count_below(radii[j]);
    out.reserve(col_nnz);
    for (int j = 0; j < p; ++j) {
        const auto& list = record.lists[j];
        for (int k = 0; k < col_nnz[j]; ++k) out.insert(list.vertex[k], j) = profile(list.distance[k] / radii[j]);
    }
    out.makeCompressed();
    return out;
}

/// Row-normalizes Utilde so that every row sums to one.
/// Throws CoverageError when a vertex lies outside every support.
inline LocalBasis normalize_partition(SparseMatrix utilde, const std::vector<int>& sample_indices)
{
    const auto n = utilde.rows();
    Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < utilde.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(utilde, j); it; ++it) row_sum(it.row()) += it.value();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(row_sum(i) > 0.0))
            throw CoverageError("vertex " + std::to_string(i) + " is not covered by any local function");

    for (Eigen::Index j = 0; j < utilde.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(utilde, j); it; ++it) it.valueRef() /= row_sum(it.row());

    LocalBasis out;
    out.U = std::move(utilde);
    out.self_weights.resize(static_cast<Eigen::Index>(sample_indices.size()));
    for (std::size_t j = 0; j < sample_indices.size(); ++j)
        out.self_weights(static_cast<Eigen::Index>(j)) =
            out.U.coeff(sample_indices[j], static_cast<Eigen::Index>(j));
    out.samples.indices = sample_indices;
    return out;
}

struct AdaptOptions {
    double threshold = 0.3; // minimal self-weight; 0 disables adaptation
    long max_rounds = -1;   // -1 means 50 * p
    ChiProfile profile{};
    /// Called after every round with the current samples (radii updated) and self-weights.
    std::function<void(long round, const SampleSet&, const Eigen::VectorXd&)> on_round;
};

struct AdaptResult {
    LocalBasis basis;
    GeodesicRecord record; // extended with singleton entries for promoted vertices
    long rounds = 0;
    int promoted = 0;      // vertices turned into samples after losing coverage
};

/// Adaptive-radius construction of the local functions.
///
/// While some sample k has self-weight below the threshold, the sample j != k
/// with the largest utilde_j(v_k) (lowest index on ties) has its radius halved.
/// Halving never touches utilde_j(v_j) = chi(0) = 1, so every self-weight is
/// non-decreasing. Radii are floored at the shortest edge incident to their
/// center, at which point a ball contains only its center. Vertices that lose
/// all coverage become samples whose ball is that single vertex. Only stored
/// distances are used; no Dijkstra runs happen here.
inline AdaptResult adapt_radii(const TriMesh& mesh, SampleSet samples, GeodesicRecord record, AdaptOptions options = {})
{
    const int n = mesh.vertex_count();
    const int p0 = samples.size();
    const double eps = options.threshold;
    if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("self-weight threshold must lie in [0, 1)");
    const long max_rounds = options.max_rounds < 0 ? 50L * std::max(1, p0) : options.max_rounds;
    const ChiProfile chi = options.profile;

    std::vector<int> sample_of(n, -1);
    for (int j = 0; j < p0; ++j) sample_of[samples.indices[j]] = j;

    // rows[k]: (j, d(v_k, v_j)) for every other sample j whose record reaches v_k.
    struct Link {
        int sample;
        double distance;
    };
    std::vector<std::vector<Link>> rows(p0), cols(p0);
    for (int j = 0; j < p0; ++j) {
        const auto& list = record.lists[j];
        for (int e = 0; e < list.size(); ++e) {
            const int k = sample_of[list.vertex[e]];
            if (k < 0 || k == j) continue;
            rows[k].push_back({j, list.distance[e]});
            cols[j].push_back({k, list.distance[e]});
        }
    }

    std::vector<int> cover(n, 0);
    for (int j = 0; j < p0; ++j) {
        const auto& list = record.lists[j];
        const int cnt = list.count_below(samples.radii[j]);
        for (int e = 0; e < cnt; ++e) ++cover[list.vertex[e]];
    }

    auto weight = [&](const Link& l) {
        return l.distance < samples.radii[l.sample] ? chi(l.distance / samples.radii[l.sample]) : 0.0;
    };
    auto self_weight_of = [&](int k) {
        double s = 1.0;
        for (const auto& l : rows[k]) s += weight(l);
        return 1.0 / s;
    };

    Eigen::VectorXd sw(p0);
    for (int k = 0; k < p0; ++k) sw(k) = self_weight_of(k);

    AdaptResult result;
    long round = 0;
    while (eps > 0.0) {
        int k = -1;
        double lowest = eps;
        for (int i = 0; i < p0; ++i)
            if (sw(i) < lowest) {
                lowest = sw(i);
                k = i;
            }
        if (k < 0) break;
        if (round >= max_rounds) {
            std::string offenders;
            for (int i = 0; i < p0 && offenders.size() < 200; ++i)
                if (sw(i) < eps) offenders += " " + std::to_string(samples.indices[i]);
            throw NonTerminationError("self-weights still below " + std::to_string(eps) + " after "
                                      + std::to_string(round) + " rounds; samples:" + offenders);
        }

        int j = -1;
        double strongest = 0.0;
        for (const auto& l : rows[k]) { // rows are sorted by sample index, so ties keep the lowest
            const double w = weight(l);
            if (w > strongest) {
                strongest = w;
                j = l.sample;
            }
        }

        const double old_radius = samples.radii[j];
        const double floor = mesh.graph().shortest_incident(samples.indices[j]);
        const double new_radius = std::max(0.5 * old_radius, floor);
        samples.radii[j] = new_radius;

        std::vector<int> lost;
        {
            const auto& list = record.lists[j];
            const int keep = list.count_below(new_radius);
            const int had = list.count_below(old_radius);
            for (int e = keep; e < had; ++e)
                if (--cover[list.vertex[e]] == 0) lost.push_back(list.vertex[e]);
        }
        for (int v : lost) {
            // v lost its last support: promote it to a single-vertex sample.
            samples.indices.push_back(v);
            samples.radii.push_back(std::min(mesh.graph().shortest_incident(v), samples.initial_radius));
            DistanceList own;
            own.vertex.push_back(v);
            own.distance.push_back(0.0);
            record.lists.push_back(std::move(own));
            cover[v] = 1;
            ++result.promoted;
        }

        for (const auto& l : cols[j]) sw(l.sample) = self_weight_of(l.sample);
        ++round;
        if (options.on_round) {
            Eigen::VectorXd all = Eigen::VectorXd::Ones(samples.size());
            all.head(p0) = sw;
            options.on_round(round, samples, all);
        }
    }

    auto utilde = build_unnormalized(n, record, samples.radii, chi);
    result.basis = normalize_partition(std::move(utilde), samples.indices);
    result.basis.samples = samples;
    result.basis.self_weight_threshold = eps;
    result.basis.profile = chi.kind;
    result.record = std::move(record);
    result.rounds = round;
    return result;
}

/// Local functions with every radius left at rho_0.
inline LocalBasis fixed_radius_basis(int vertex_count, const SampleSet& samples, const GeodesicRecord& record,
                                     ChiProfile profile = {})
{
    auto basis = normalize_partition(build_unnormalized(vertex_count, record, samples.radii, profile), samples.indices);
    basis.samples = samples;
    basis.profile = profile.kind;
    return basis;
}

} // namespace sfmap
