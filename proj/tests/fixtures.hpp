#pragma once

// Mesh generators and brute-force oracles shared by the tests.

#include <sfmap/sfmap.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <random>
#include <utility>
#include <vector>

namespace fixtures {

using sfmap::Points;
using sfmap::Triangles;
using sfmap::TriMesh;

inline TriMesh make(const std::vector<Eigen::Vector3d>& v, const std::vector<Eigen::Vector3i>& f)
{
    Points p(static_cast<Eigen::Index>(v.size()), 3);
    for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
    Triangles t(static_cast<Eigen::Index>(f.size()), 3);
    for (std::size_t i = 0; i < f.size(); ++i) t.row(static_cast<Eigen::Index>(i)) = f[i].transpose();
    return TriMesh::from_arrays(std::move(p), std::move(t));
}

inline TriMesh tetrahedron()
{
    return make({{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}, {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

/// Single right isosceles triangle with legs of length 1.
inline TriMesh right_triangle() { return make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}); }

/// Unit-radius icosphere; level 3 has 642 vertices.
inline TriMesh icosphere(int level)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& x : v) x.normalize();
    std::vector<Eigen::Vector3i> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7}, {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            v.push_back((0.5 * (v[a] + v[b])).normalized());
            const int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<Eigen::Vector3i> next;
        for (const auto& tri : f) {
            const int a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], a, c});
            next.push_back({tri[1], b, a});
            next.push_back({tri[2], c, b});
            next.push_back({a, b, c});
        }
        f = std::move(next);
    }
    return make(v, f);
}

/// Flat grid over [0, width] x [0, height] with nx x ny cells. Vertex (i, j) has
/// index j * (nx + 1) + i. `xs`/`ys` override the coordinates when non-empty.
/// `alternate` flips the diagonal on every other cell; `jitter` moves interior
/// vertices by up to that fraction of a cell.
inline TriMesh grid(int nx, int ny, double width = 1.0, double height = 1.0, bool alternate = false,
                    double jitter = 0.0, unsigned seed = 1, std::vector<double> xs = {}, std::vector<double> ys = {})
{
    if (xs.empty())
        for (int i = 0; i <= nx; ++i) xs.push_back(width * i / nx);
    if (ys.empty())
        for (int j = 0; j <= ny; ++j) ys.push_back(height * j / ny);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<Eigen::Vector3d> v;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            double x = xs[i], y = ys[j];
            if (jitter > 0.0 && i > 0 && i < nx && j > 0 && j < ny) {
                x += jitter * uni(rng) * std::min(xs[i + 1] - xs[i], xs[i] - xs[i - 1]);
                y += jitter * uni(rng) * std::min(ys[j + 1] - ys[j], ys[j] - ys[j - 1]);
            }
            v.push_back({x, y, 0.0});
        }
    std::vector<Eigen::Vector3i> f;
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if (alternate && (i + j) % 2 == 1) {
                f.push_back({a, b, d});
                f.push_back({b, c, d});
            } else {
                f.push_back({a, b, c});
                f.push_back({a, c, d});
            }
        }
    return make(v, f);
}

/// Unit square whose cells are 10x wider and taller on the left half than on
/// the right, so triangle areas differ by 100:1. `cells` is the count of fine
/// cells along each axis half.
inline TriMesh skewed_grid(int cells)
{
    // left half: cells/10 coarse cells, right half: `cells` fine cells, both spanning 0.5
    std::vector<double> xs;
    const int coarse = std::max(1, cells / 10);
    for (int i = 0; i <= coarse; ++i) xs.push_back(0.5 * i / coarse);
    for (int i = 1; i <= cells; ++i) xs.push_back(0.5 + 0.5 * i / cells);
    std::vector<double> ys = xs;
    return grid(static_cast<int>(xs.size()) - 1, static_cast<int>(ys.size()) - 1, 1.0, 1.0, true, 0.0, 1, xs, ys);
}

/// Vertex nearest to the mirror image of each vertex across the bounding-box
/// midplane x = const. On an alternating grid with an even cell count this is
/// an exact symmetry.
inline sfmap::PointwiseMap mirror_x(const TriMesh& mesh)
{
    const auto& V = mesh.vertices();
    const double sum = V.col(0).minCoeff() + V.col(0).maxCoeff();
    sfmap::KdTree tree(V);
    sfmap::PointwiseMap out;
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        const Eigen::Vector3d q(sum - V(i, 0), V(i, 1), V(i, 2));
        out.assignment.push_back(tree.nearest(q.data()).index);
    }
    return out;
}

/// Long thin strip, one cell high.
inline TriMesh chain_strip(int cells) { return grid(cells, 1, static_cast<double>(cells), 1.0); }

/// Two unit icospheres whose centers are 10 apart; the edge graph is disconnected.
inline TriMesh two_blobs(int level)
{
    const auto a = icosphere(level);
    Points p(2 * a.vertex_count(), 3);
    Triangles t(2 * a.triangle_count(), 3);
    p.topRows(a.vertex_count()) = a.vertices();
    p.bottomRows(a.vertex_count()) = a.vertices();
    p.bottomRows(a.vertex_count()).col(0).array() += 10.0;
    t.topRows(a.triangle_count()) = a.triangles();
    t.bottomRows(a.triangle_count()) = a.triangles().array() + a.vertex_count();
    return TriMesh::from_arrays(std::move(p), std::move(t));
}

/// 1 -> 4 midpoint subdivision; the original vertices keep their indices.
inline TriMesh subdivide(const TriMesh& mesh)
{
    std::vector<Eigen::Vector3d> v;
    for (int i = 0; i < mesh.vertex_count(); ++i) v.push_back(mesh.vertex(i));
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = mid.find(key);
        if (it != mid.end()) return it->second;
        v.push_back(0.5 * (v[a] + v[b]));
        const int id = static_cast<int>(v.size()) - 1;
        mid.emplace(key, id);
        return id;
    };
    std::vector<Eigen::Vector3i> f;
    for (int k = 0; k < mesh.triangle_count(); ++k) {
        const auto tri = mesh.triangles().row(k);
        const int a = midpoint(tri(0), tri(1)), b = midpoint(tri(1), tri(2)), c = midpoint(tri(2), tri(0));
        f.push_back({tri(0), a, c});
        f.push_back({tri(1), b, a});
        f.push_back({tri(2), c, b});
        f.push_back({a, b, c});
    }
    return make(v, f);
}

/// Rigid rotation about the z axis followed by a translation.
inline TriMesh rotated(const TriMesh& mesh, double angle)
{
    Points p = mesh.vertices();
    const Eigen::Matrix3d R = Eigen::AngleAxisd(angle, Eigen::Vector3d(0.3, 0.5, 0.8).normalized()).toRotationMatrix();
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) = (R * p.row(i).transpose()).transpose() + Eigen::RowVector3d(1, 2, 3);
    return TriMesh::from_arrays(std::move(p), mesh.triangles());
}

/// Same surface with vertices relabelled: new vertex i is old vertex perm[i].
inline TriMesh permuted(const TriMesh& mesh, const std::vector<int>& perm)
{
    std::vector<int> inverse(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<int>(i);
    Points p(mesh.vertex_count(), 3);
    for (int i = 0; i < mesh.vertex_count(); ++i) p.row(i) = mesh.vertices().row(perm[i]);
    Triangles t = mesh.triangles();
    for (Eigen::Index k = 0; k < t.rows(); ++k)
        for (int c = 0; c < 3; ++c) t(k, c) = inverse[t(k, c)];
    return TriMesh::from_arrays(std::move(p), std::move(t));
}

/// Isometric pair: a flat 1.7 x 1 strip and a differently tessellated copy
/// rolled onto a cylinder of radius 0.5. `params` hold the flat coordinates of
/// each vertex so ground truth is the nearest vertex in parameter space.
struct IsometricPair {
    TriMesh flat;     // N
    TriMesh rolled;   // M
    Eigen::MatrixX2d flat_params, rolled_params;
    sfmap::PointwiseMap gt; // N -> M
};

inline IsometricPair bent_cylinder(int nx_n = 50, int ny_n = 29, int nx_m = 57, int ny_m = 33)
{
    constexpr double L = 1.7, H = 1.0, R = 0.5;
    IsometricPair pair;
    pair.flat = grid(nx_n, ny_n, L, H, false, 0.0);
    const auto flat_m = grid(nx_m, ny_m, L, H, true, 0.25, 7);
    pair.flat_params = pair.flat.vertices().leftCols(2);
    pair.rolled_params = flat_m.vertices().leftCols(2);
    Points p(flat_m.vertex_count(), 3);
    for (int i = 0; i < flat_m.vertex_count(); ++i) {
        const double x = flat_m.vertices()(i, 0), y = flat_m.vertices()(i, 1);
        p.row(i) << R * std::sin(x / R), y, R * (1.0 - std::cos(x / R));
    }
    pair.rolled = TriMesh::from_arrays(std::move(p), flat_m.triangles());
    pair.gt.assignment.resize(pair.flat.vertex_count());
    for (int i = 0; i < pair.flat.vertex_count(); ++i) {
        Eigen::Index best;
        (pair.rolled_params.rowwise() - pair.flat_params.row(i)).rowwise().squaredNorm().minCoeff(&best);
        pair.gt.assignment[i] = static_cast<int>(best);
    }
    return pair;
}

/// Ground truth with a fraction of entries replaced by random target vertices.
inline sfmap::PointwiseMap corrupt(const sfmap::PointwiseMap& map, int target_count, double fraction, unsigned seed)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, target_count - 1);
    auto out = map;
    for (auto& t : out.assignment)
        if (coin(rng) < fraction) t = pick(rng);
    return out;
}

inline void write_off(const std::filesystem::path& path, const TriMesh& mesh)
{
    std::ofstream out(path, std::ios::trunc);
    out.precision(17);
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.triangle_count() << " 0\n";
    for (int i = 0; i < mesh.vertex_count(); ++i)
        out << mesh.vertices()(i, 0) << ' ' << mesh.vertices()(i, 1) << ' ' << mesh.vertices()(i, 2) << '\n';
    for (int k = 0; k < mesh.triangle_count(); ++k)
        out << "3 " << mesh.triangles()(k, 0) << ' ' << mesh.triangles()(k, 1) << ' ' << mesh.triangles()(k, 2) << '\n';
}

// ---- oracles ----

/// Dense generalized eigenproblem W x = lambda diag(A) x.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_eigen(const sfmap::LaplacianPair& lap)
{
    const Eigen::MatrixXd W = Eigen::MatrixXd(lap.stiffness);
    const Eigen::MatrixXd A = lap.mass.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(W, A);
    return {eig.eigenvalues(), eig.eigenvectors()};
}

/// Quadratic-time single-source shortest paths on the edge graph (no heap).
inline Eigen::VectorXd slow_dijkstra(const TriMesh& mesh, int source)
{
    const int n = mesh.vertex_count();
    const auto& g = mesh.graph();
    Eigen::VectorXd d = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    std::vector<char> done(n, 0);
    d(source) = 0.0;
    for (int it = 0; it < n; ++it) {
        int u = -1;
        for (int v = 0; v < n; ++v)
            if (!done[v] && (u < 0 || d(v) < d(u))) u = v;
        if (u < 0 || std::isinf(d(u))) break;
        done[u] = 1;
        for (int e = g.offsets[u]; e < g.offsets[u + 1]; ++e)
            d(g.neighbors[e]) = std::min(d(g.neighbors[e]), d(u) + g.lengths[e]);
    }
    return d;
}

/// Brute-force nearest row with lowest-index tie-breaking.
inline std::vector<int> brute_nn(const Eigen::MatrixXd& points, const Eigen::MatrixXd& queries)
{
    std::vector<int> out(queries.rows());
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        double best = std::numeric_limits<double>::infinity();
        int arg = -1;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            double d = 0.0; // coordinate order, like the tree
            for (Eigen::Index k = 0; k < points.cols(); ++k) d += (queries(q, k) - points(i, k)) * (queries(q, k) - points(i, k));
            if (d < best) {
                best = d;
                arg = static_cast<int>(i);
            }
        }
        out[q] = arg;
    }
    return out;
}

/// Mean parameter-space distance between predicted and ground-truth images,
/// equal to the geodesic error on the developable pair.
inline double param_error(const IsometricPair& pair, const sfmap::PointwiseMap& map)
{
    double s = 0.0;
    for (int i = 0; i < map.size(); ++i)
        s += (pair.rolled_params.row(map[i]) - pair.rolled_params.row(pair.gt[i])).norm();
    return s / map.size();
}

} // namespace fixtures
