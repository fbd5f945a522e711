#pragma once

#include "mesh.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

namespace sfmap {

/// Sample vertices with their per-sample support radii.
struct SampleSet {
    std::vector<int> indices;  // distinct vertex ids
    std::vector<double> radii; // rho_j, 0 < rho_j <= initial_radius
    double initial_radius = 0.0;

    int size() const { return static_cast<int>(indices.size()); }
};

/// Vertices reached from one source, sorted by non-decreasing distance.
struct DistanceList {
    std::vector<int> vertex;
    std::vector<double> distance;

    int size() const { return static_cast<int>(vertex.size()); }

    /// Number of leading entries with distance strictly below `radius`.
    int count_below(double radius) const
    {
        return static_cast<int>(std::lower_bound(distance.begin(), distance.end(), radius) - distance.begin());
    }
};

/// Edge-graph distances from every sample, truncated at the record radius.
/// Entry j belongs to sample j of the SampleSet it was computed for. Shrinking
/// a sample radius only re-truncates its list.
struct GeodesicRecord {
    std::vector<DistanceList> lists;
    double radius = 0.0;

    int size() const { return static_cast<int>(lists.size()); }
};

namespace detail {
inline std::atomic<std::int64_t>& dijkstra_counter()
{
    static std::atomic<std::int64_t> counter{0};
    return counter;
}
} // namespace detail

/// Total number of single-source Dijkstra runs performed by this process.
/// Used to check that radius adaptation never recomputes distances.
inline std::int64_t dijkstra_run_count() { return detail::dijkstra_counter().load(); }

/// Shortest edge-path distances from `source` to every vertex within `radius`.
/// With `euclidean_prune` the search skips vertices whose straight-line
/// distance already exceeds the radius; since graph distances along embedded
/// edges dominate Euclidean distance this never changes the result.
inline DistanceList bounded_dijkstra(const TriMesh& mesh, int source, double radius, bool euclidean_prune = true)
{
    detail::dijkstra_counter().fetch_add(1, std::memory_order_relaxed);
    const EdgeGraph& g = mesh.graph();
    const auto& pts = mesh.vertices();
    const double r2 = radius * radius;

    // Sparse workspace: only touched vertices are stored.
    thread_local std::vector<double> dist;
    thread_local std::vector<int> touched;
    if (static_cast<int>(dist.size()) < mesh.vertex_count())
        dist.assign(mesh.vertex_count(), std::numeric_limits<double>::infinity());

    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    DistanceList out;
    dist[source] = 0.0;
    touched.push_back(source);
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[v]) continue;
        out.vertex.push_back(v);
        out.distance.push_back(d);
        for (int e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
            const int w = g.neighbors[e];
            const double nd = d + g.lengths[e];
            if (nd > radius || nd >= dist[w]) continue;
            if (euclidean_prune && (pts.row(w) - pts.row(source)).squaredNorm() > r2) continue;
            if (dist[w] == std::numeric_limits<double>::infinity()) touched.push_back(w);
            dist[w] = nd;
            heap.emplace(nd, w);
        }
    }
    for (int v : touched) dist[v] = std::numeric_limits<double>::infinity();
    touched.clear();
    return out;
}

/// Unbounded single-source Dijkstra; unreachable vertices get +inf.
inline Eigen::VectorXd dijkstra_full(const TriMesh& mesh, int source)
{
    detail::dijkstra_counter().fetch_add(1, std::memory_order_relaxed);
    const EdgeGraph& g = mesh.graph();
    Eigen::VectorXd dist = Eigen::VectorXd::Constant(mesh.vertex_count(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist(source) = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, v] = heap.top();
        heap.pop();
        if (d > dist(v)) continue;
        for (int e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
            const int w = g.neighbors[e];
            const double nd = d + g.lengths[e];
            if (nd < dist(w)) {
                dist(w) = nd;
                heap.emplace(nd, w);
            }
        }
    }
    return dist;
}

/// Fixed-radius Dijkstra from every sample, bounded by the samples' initial radius.
inline GeodesicRecord local_dijkstra(const TriMesh& mesh, const SampleSet& samples)
{
    GeodesicRecord record;
    record.radius = samples.initial_radius;
    record.lists.resize(samples.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (int j = 0; j < samples.size(); ++j)
        record.lists[j] = bounded_dijkstra(mesh, samples.indices[j], samples.initial_radius);
    return record;
}

/// Per-vertex flag: covered by some sample j at distance strictly below rho_j.
inline std::vector<char> covered_vertices(int vertex_count, const SampleSet& samples, const GeodesicRecord& record)
{
    std::vector<char> covered(vertex_count, 0);
    for (int j = 0; j < record.size(); ++j) {
        const auto& list = record.lists[j];
        const int cnt = list.count_below(samples.radii[j]);
        for (int k = 0; k < cnt; ++k) covered[list.vertex[k]] = 1;
    }
    return covered;
}

/// Promotes unreached vertices to samples (radius rho_0, own Dijkstra run) until
/// every vertex lies strictly inside some sample's ball.
inline std::pair<SampleSet, GeodesicRecord> cover_unreached(const TriMesh& mesh, SampleSet samples, GeodesicRecord record)
{
    auto covered = covered_vertices(mesh.vertex_count(), samples, record);
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        if (covered[v]) continue;
        samples.indices.push_back(v);
        samples.radii.push_back(samples.initial_radius);
        record.lists.push_back(bounded_dijkstra(mesh, v, samples.initial_radius));
        const auto& list = record.lists.back();
        const int cnt = list.count_below(samples.initial_radius);
        for (int k = 0; k < cnt; ++k) covered[list.vertex[k]] = 1;
        covered[v] = 1; // a zero radius still covers its own center
    }
    return {std::move(samples), std::move(record)};
}

} // namespace sfmap
