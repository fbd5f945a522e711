#pragma once

#include "errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sfmap {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Undirected edge graph in CSR form; neighbors of each vertex sorted by index.
struct EdgeGraph {
    std::vector<int> offsets;    // size n + 1
    std::vector<int> neighbors;  // size 2 * edge count
    std::vector<double> lengths; // Euclidean edge lengths, parallel to neighbors

    int vertex_count() const { return static_cast<int>(offsets.size()) - 1; }
    int degree(int v) const { return offsets[v + 1] - offsets[v]; }

    /// Length of the shortest edge incident to v.
    double shortest_incident(int v) const
    {
        double best = std::numeric_limits<double>::infinity();
        for (int e = offsets[v]; e < offsets[v + 1]; ++e) best = std::min(best, lengths[e]);
        return best;
    }
};

inline double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c)
{
    return 0.5 * (b - a).cross(c - a).norm();
}

/// Validated, immutable triangle mesh with lumped (barycentric) vertex areas.
///
/// Vertices not referenced by any triangle are dropped at construction; the
/// surviving vertices keep their relative order and `original_index()` maps
/// each of them back to its position in the source arrays (or file).
class TriMesh {
public:
    TriMesh() = default;

    /// Validates topology and computes areas and the edge graph.
    /// Throws TopologyError on out-of-range or repeated triangle indices,
    /// non-manifold edges, or a mesh without area.
    static TriMesh from_arrays(Points vertices, Triangles triangles)
    {
        const auto n_in = static_cast<int>(vertices.rows());
        const auto m = static_cast<int>(triangles.rows());
        if (m < 1) throw TopologyError("mesh has no triangles");
        if (n_in < 3) throw TopologyError("mesh has fewer than 3 vertices");

        for (int f = 0; f < m; ++f) {
            for (int c = 0; c < 3; ++c) {
                const int v = triangles(f, c);
                if (v < 0 || v >= n_in)
                    throw TopologyError("triangle " + std::to_string(f) + " references vertex "
                                        + std::to_string(v) + " outside [0, "
                                        + std::to_string(n_in) + ")");
            }
            if (triangles(f, 0) == triangles(f, 1) || triangles(f, 1) == triangles(f, 2)
                || triangles(f, 0) == triangles(f, 2))
                throw TopologyError("triangle " + std::to_string(f) + " repeats a vertex");
        }

        // Drop isolated vertices, keeping order.
        std::vector<int> remap(n_in, -1);
        for (int f = 0; f < m; ++f)
            for (int c = 0; c < 3; ++c) remap[triangles(f, c)] = 0;
        TriMesh mesh;
        mesh.file_vertex_count_ = n_in;
        int n = 0;
        for (int v = 0; v < n_in; ++v) {
            if (remap[v] < 0) continue;
            remap[v] = n++;
            mesh.original_index_.push_back(v);
        }
        mesh.isolated_count_ = n_in - n;

        mesh.vertices_.resize(n, 3);
        for (int v = 0; v < n; ++v) mesh.vertices_.row(v) = vertices.row(mesh.original_index_[v]);
        mesh.triangles_.resize(m, 3);
        for (int f = 0; f < m; ++f)
            for (int c = 0; c < 3; ++c) mesh.triangles_(f, c) = remap[triangles(f, c)];

        mesh.check_manifold_edges();
        mesh.compute_areas();
        mesh.build_graph();
        return mesh;
    }

    int vertex_count() const { return static_cast<int>(vertices_.rows()); }
    int triangle_count() const { return static_cast<int>(triangles_.rows()); }
    const Points& vertices() const { return vertices_; }
    const Triangles& triangles() const { return triangles_; }
    Eigen::Vector3d vertex(int v) const { return vertices_.row(v).transpose(); }
    const Eigen::VectorXd& per_vertex_area() const { return per_vertex_area_; }
    double total_area() const { return total_area_; }
    const EdgeGraph& graph() const { return graph_; }

    /// Position of each vertex in the source arrays, before isolated vertices were dropped.
    const std::vector<int>& original_index() const { return original_index_; }
    int file_vertex_count() const { return file_vertex_count_; }
    int isolated_count() const { return isolated_count_; }

    /// Inverse of original_index(): file index -> compact index, or -1 for isolated vertices.
    std::vector<int> compact_index() const
    {
        std::vector<int> out(file_vertex_count_, -1);
        for (int v = 0; v < vertex_count(); ++v) out[original_index_[v]] = v;
        return out;
    }

    double face_area(int f) const
    {
        return triangle_area(vertex(triangles_(f, 0)), vertex(triangles_(f, 1)), vertex(triangles_(f, 2)));
    }

    /// Copy with every vertex position multiplied by `factor`.
    TriMesh scaled(double factor) const
    {
        TriMesh out = *this;
        out.vertices_ *= factor;
        out.per_vertex_area_ *= factor * factor;
        out.total_area_ *= factor * factor;
        for (auto& l : out.graph_.lengths) l *= factor;
        return out;
    }

private:
    void check_manifold_edges() const
    {
        std::map<std::pair<int, int>, int> count;
        for (int f = 0; f < triangle_count(); ++f) {
            for (int c = 0; c < 3; ++c) {
                int a = triangles_(f, c), b = triangles_(f, (c + 1) % 3);
                if (a > b) std::swap(a, b);
                if (++count[{a, b}] > 2)
                    throw TopologyError("non-manifold edge (" + std::to_string(original_index_[a]) + ", "
                                        + std::to_string(original_index_[b]) + ")");
            }
        }
    }

    void compute_areas()
    {
        per_vertex_area_ = Eigen::VectorXd::Zero(vertex_count());
        for (int f = 0; f < triangle_count(); ++f) {
            const double third = face_area(f) / 3.0;
            for (int c = 0; c < 3; ++c) per_vertex_area_(triangles_(f, c)) += third;
        }
        total_area_ = per_vertex_area_.sum();
        if (!(total_area_ > 0.0)) throw TopologyError("mesh has zero total area");
    }

    void build_graph()
    {
        const int n = vertex_count();
        std::vector<std::vector<int>> adj(n);
        for (int f = 0; f < triangle_count(); ++f)
            for (int c = 0; c < 3; ++c) {
                const int a = triangles_(f, c), b = triangles_(f, (c + 1) % 3);
                adj[a].push_back(b);
                adj[b].push_back(a);
            }
        graph_.offsets.assign(n + 1, 0);
        graph_.neighbors.clear();
        graph_.lengths.clear();
        for (int v = 0; v < n; ++v) {
            auto& list = adj[v];
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
            for (int w : list) {
                graph_.neighbors.push_back(w);
                graph_.lengths.push_back((vertices_.row(v) - vertices_.row(w)).norm());
            }
            graph_.offsets[v + 1] = static_cast<int>(graph_.neighbors.size());
        }
    }

    Points vertices_;
    Triangles triangles_;
    Eigen::VectorXd per_vertex_area_;
    double total_area_ = 0.0;
    std::vector<int> original_index_;
    int file_vertex_count_ = 0;
    int isolated_count_ = 0;
    EdgeGraph graph_;
};

/// Uniformly rescales the mesh so that its total area is 1.
inline TriMesh normalize_area(const TriMesh& mesh)
{
    return mesh.scaled(1.0 / std::sqrt(mesh.total_area()));
}

} // namespace sfmap
