#pragma once

#include "errors.hpp"
#include "fmap.hpp"
#include "geodesic.hpp"
#include "laplacian.hpp"
#include "mesh.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace sfmap {

/// Pairwise (cascade) summation; the result does not depend on thread count.
inline double pairwise_sum(std::span<const double> values)
{
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const auto half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

struct ErrorCurve {
    std::vector<double> thresholds;
    std::vector<double> fraction_below; // fraction of errors <= threshold
};

struct AccuracyResult {
    double mean = 0.0;
    std::vector<int> evaluated;  // source vertices that were scored
    std::vector<double> errors;  // geodesic error per evaluated vertex
    ErrorCurve curve;
};

/// Cumulative error curve at `count` evenly spaced thresholds over [0, max_threshold].
inline ErrorCurve error_curve(const std::vector<double>& errors, double max_threshold = 0.1, int count = 100)
{
    ErrorCurve out;
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : max_threshold * i / (count - 1);
        const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        out.thresholds.push_back(t);
        out.fraction_below.push_back(sorted.empty() ? 0.0 : static_cast<double>(below) / sorted.size());
    }
    return out;
}

/// Mean geodesic distance on M between predicted and ground-truth images.
/// Entries of `gt` that are negative mean "no ground truth". Without a subset,
/// every vertex with ground truth is scored; with a subset, every listed vertex
/// must have one. Distances come from single-source Dijkstra runs rooted at
/// the ground-truth images, one per distinct image.
inline AccuracyResult accuracy(const PointwiseMap& map, const PointwiseMap& gt, const TriMesh& mesh_m,
                               const std::optional<std::vector<int>>& subset = std::nullopt,
                               double curve_max = 0.1)
{
    const int n_m = mesh_m.vertex_count();
    AccuracyResult out;
    if (subset) {
        for (int x : *subset) {
            if (x < 0 || x >= map.size()) throw IndexRangeError("subset vertex " + std::to_string(x) + " out of range");
            if (x >= gt.size() || gt[x] < 0) throw MissingGTError("no ground truth for vertex " + std::to_string(x));
            out.evaluated.push_back(x);
        }
    } else {
        for (int x = 0; x < std::min(map.size(), gt.size()); ++x)
            if (gt[x] >= 0) out.evaluated.push_back(x);
        if (out.evaluated.empty()) throw MissingGTError("ground truth map is empty");
    }

    std::map<int, Eigen::VectorXd> cache;
    out.errors.resize(out.evaluated.size());
    for (std::size_t e = 0; e < out.evaluated.size(); ++e) {
        const int x = out.evaluated[e];
        const int g = gt[x], y = map[x];
        if (g >= n_m) throw IndexRangeError("ground truth image " + std::to_string(g) + " out of range");
        if (y < 0 || y >= n_m) throw IndexRangeError("map image " + std::to_string(y) + " out of range");
        auto it = cache.find(g);
        if (it == cache.end()) it = cache.emplace(g, dijkstra_full(mesh_m, g)).first;
        out.errors[e] = it->second(y);
    }
    out.mean = pairwise_sum(out.errors) / static_cast<double>(out.errors.size());
    out.curve = error_curve(out.errors, curve_max);
    return out;
}

/// Area fraction of M hit by the map's image.
inline double coverage(const PointwiseMap& map, const TriMesh& mesh_m)
{
    std::vector<char> hit(mesh_m.vertex_count(), 0);
    for (int y : map.assignment)
        if (y >= 0 && y < mesh_m.vertex_count()) hit[y] = 1;
    std::vector<double> areas;
    for (int y = 0; y < mesh_m.vertex_count(); ++y)
        if (hit[y]) areas.push_back(mesh_m.per_vertex_area()(y));
    return std::clamp(pairwise_sum(areas) / mesh_m.total_area(), 0.0, 1.0);
}

inline int distinct_images(const PointwiseMap& map)
{
    std::vector<int> v = map.assignment;
    std::sort(v.begin(), v.end());
    return static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
}

/// Dirichlet energy of M's coordinates pulled back to N: sum_c (g_c o T)^T W_N (g_c o T).
inline double smoothness(const PointwiseMap& map, const SparseMatrix& stiffness_n, const TriMesh& mesh_m)
{
    if (map.size() != stiffness_n.rows()) throw DimensionError("smoothness: map size differs from the source mesh");
    const Eigen::MatrixXd coords = mesh_m.vertices();
    const Eigen::MatrixXd pulled = gather_rows(coords, map);
    return (pulled.transpose() * (stiffness_n * pulled)).trace();
}

inline double smoothness(const PointwiseMap& map, const TriMesh& mesh_n, const TriMesh& mesh_m)
{
    return smoothness(map, assemble_laplacian(mesh_n).stiffness, mesh_m);
}

/// Frobenius norm of the gap between the reduced and restricted maps.
inline double estimation_delta(const Eigen::MatrixXd& c_bar, const Eigen::MatrixXd& c_hat)
{
    if (c_bar.rows() != c_hat.rows() || c_bar.cols() != c_hat.cols())
        throw DimensionError("estimation_delta: shapes differ");
    return (c_bar - c_hat).norm();
}

struct EvalReport {
    double mean_geodesic_error = 0.0; // raw, unscaled
    std::vector<int> evaluated;
    std::vector<double> errors;
    double coverage_ratio = 0.0;
    double dirichlet_energy = 0.0;
    int distinct_image_count = 0;
    ErrorCurve curve;
};

inline EvalReport evaluate(const PointwiseMap& map, const PointwiseMap& gt, const TriMesh& mesh_n,
                           const TriMesh& mesh_m, const std::optional<std::vector<int>>& subset = std::nullopt)
{
    auto acc = accuracy(map, gt, mesh_m, subset);
    EvalReport r;
    r.mean_geodesic_error = acc.mean;
    r.evaluated = std::move(acc.evaluated);
    r.errors = std::move(acc.errors);
    r.curve = std::move(acc.curve);
    r.coverage_ratio = coverage(map, mesh_m);
    r.dirichlet_energy = smoothness(map, mesh_n, mesh_m);
    r.distinct_image_count = distinct_images(map);
    return r;
}

/// JSON summary; `error_scale` multiplies the mean error (1000 for the usual x10^3 display).
inline nlohmann::json to_json(const EvalReport& r, double error_scale = 1.0)
{
    return {{"mean_geodesic_error", r.mean_geodesic_error * error_scale},
            {"error_scale", error_scale},
            {"evaluated_count", r.evaluated.size()},
            {"coverage_ratio", r.coverage_ratio},
            {"dirichlet_energy", r.dirichlet_energy},
            {"distinct_image_count", r.distinct_image_count}};
}

inline void write_curve(std::ostream& out, const ErrorCurve& curve)
{
    out.precision(17);
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i)
        out << curve.thresholds[i] << ' ' << curve.fraction_below[i] << '\n';
}

} // namespace sfmap
