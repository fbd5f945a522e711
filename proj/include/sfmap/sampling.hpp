#pragma once

#include "errors.hpp"
#include "geodesic.hpp"
#include "mesh.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <vector>

namespace sfmap {

/// Initial support radius: three times the radius of a disk of area Area/p.
inline double initial_radius(double area, double p)
{
    return 3.0 * std::sqrt(area / (p * std::numbers::pi));
}

inline double initial_radius(const TriMesh& mesh, int p)
{
    return initial_radius(mesh.total_area(), static_cast<double>(p));
}

struct PoissonSample {
    SampleSet samples;
    double separation = 0.0; // every pair of samples is at least this far apart (edge-graph distance)
};

namespace detail {

// Seeded Fisher-Yates over vertex ids; independent of the standard library's
// distribution implementations so output is stable across toolchains.
inline std::vector<int> seeded_permutation(int n, std::uint64_t seed)
{
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(order[i], order[j]);
    }
    return order;
}

// Maximal Poisson-disk set in visiting order: a vertex is accepted when no
// accepted sample lies strictly closer than `radius`.
inline std::vector<int> dart_throw(const TriMesh& mesh, const std::vector<int>& order, double radius)
{
    std::vector<char> blocked(mesh.vertex_count(), 0);
    std::vector<int> accepted;
    for (int v : order) {
        if (blocked[v]) continue;
        accepted.push_back(v);
        const auto ball = bounded_dijkstra(mesh, v, radius);
        const int cnt = ball.count_below(radius);
        for (int k = 0; k < cnt; ++k) blocked[ball.vertex[k]] = 1;
    }
    return accepted;
}

// Grows `accepted` to `target` vertices by farthest-point insertion (largest
// edge-graph distance to the current set, lowest index on ties). Returns the
// smallest insertion distance, which bounds the separation of the added samples.
inline double farthest_fill(const TriMesh& mesh, std::vector<int>& accepted, int target)
{
    const int n = mesh.vertex_count();
    const auto& g = mesh.graph();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    auto relax_from = [&](int source) {
        dist[source] = 0.0;
        heap.push({0.0, source});
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u]) continue;
            for (int e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
                const int w = g.neighbors[e];
                const double nd = d + g.lengths[e];
                if (nd < dist[w]) {
                    dist[w] = nd;
                    heap.push({nd, w});
                }
            }
        }
    };
    for (int v : accepted) relax_from(v);
    double smallest = std::numeric_limits<double>::infinity();
    while (static_cast<int>(accepted.size()) < target) {
        int best = -1;
        for (int v = 0; v < n; ++v)
            if (best < 0 || dist[v] > dist[best]) best = v;
        smallest = std::min(smallest, dist[best]);
        accepted.push_back(best);
        relax_from(best);
    }
    return smallest;
}

} // namespace detail

/// Poisson-disk sampling with edge-graph separation.
///
/// Vertices are visited in a seeded random order and accepted unless an
/// earlier sample is closer than the separation radius. The radius starts from
/// the random-sequential-packing density (about 0.70 * Area / r^2 samples) and
/// is then bisected until the sample count is within 2% of the target. The
/// returned count always lies in [0.8, 1.2] x target.
inline PoissonSample poisson_disk_sample(const TriMesh& mesh, int target_count, std::uint64_t seed)
{
    const int n = mesh.vertex_count();
    if (target_count < 1) throw SamplingError("target_count must be positive");
    if (target_count > n)
        throw SamplingError("mesh has " + std::to_string(n) + " vertices, fewer than the requested "
                            + std::to_string(target_count) + " samples");

    PoissonSample out;
    auto finish = [&](std::vector<int> idx) {
        std::sort(idx.begin(), idx.end());
        out.samples.indices = std::move(idx);
        out.samples.initial_radius = initial_radius(mesh, out.samples.size());
        out.samples.radii.assign(out.samples.size(), out.samples.initial_radius);
        return out;
    };

    if (target_count == n) {
        double shortest = std::numeric_limits<double>::infinity();
        for (double l : mesh.graph().lengths) shortest = std::min(shortest, l);
        out.separation = shortest;
        std::vector<int> all(n);
        for (int i = 0; i < n; ++i) all[i] = i;
        return finish(std::move(all));
    }

    const auto order = detail::seeded_permutation(n, seed);
    constexpr double kPackingDensity = 0.6965;
    double radius = std::sqrt(kPackingDensity * mesh.total_area() / target_count);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    std::vector<int> best, under; // closest count overall, largest count below target
    double best_radius = radius, under_radius = radius;
    const double tolerance = std::max(1.0, 0.02 * target_count);

    for (int iter = 0; iter < 60; ++iter) {
        auto accepted = detail::dart_throw(mesh, order, radius);
        const int count = static_cast<int>(accepted.size());
        if (count < target_count && count > static_cast<int>(under.size())) {
            under = accepted;
            under_radius = radius;
        }
        if (best.empty()
            || std::abs(count - target_count) < std::abs(static_cast<int>(best.size()) - target_count)) {
            best = std::move(accepted);
            best_radius = radius;
        }
        if (std::abs(count - target_count) <= tolerance) break;
        if (count > target_count) lo = radius; // too many samples: grow the disks
        else hi = radius;
        radius = std::isinf(hi) ? radius * 1.5 : 0.5 * (lo + hi);
    }
    if (std::abs(static_cast<double>(best.size()) - target_count) > tolerance && !under.empty()) {
        // Edge-graph distances are quantized on coarse meshes, so the count can
        // jump past the target between two radii. Top up the largest set below it.
        const double fill = detail::farthest_fill(mesh, under, target_count);
        out.separation = std::min(under_radius, fill);
        return finish(std::move(under));
    }
    const auto count = static_cast<double>(best.size());
    if (count < 0.8 * target_count || count > 1.2 * target_count)
        throw SamplingError("could not reach " + std::to_string(target_count) + " samples (best "
                            + std::to_string(best.size()) + ")");
    out.separation = best_radius;
    return finish(std::move(best));
}

} // namespace sfmap
