#pragma once

#include "errors.hpp"
#include "mesh.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace sfmap {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Cotangent stiffness W and lumped mass A of a triangle mesh.
///
/// W is positive semi-definite: W(i,j) = -1/2 (cot a_ij + cot b_ij) off the
/// diagonal and W(i,i) = -sum_j W(i,j). Boundary edges carry a single cotangent
/// (natural Neumann condition). Obtuse corners give negative weights that are
/// kept as-is.
struct LaplacianPair {
    SparseMatrix stiffness;
    Eigen::VectorXd mass; // diagonal of A

    int size() const { return static_cast<int>(mass.size()); }
};

/// Half cotangents of the three corners of each triangle, one row per triangle.
/// Entry c is the weight contributed to the edge opposite corner c.
inline Eigen::MatrixX3d cotangent_half_weights(const TriMesh& mesh)
{
    const int m = mesh.triangle_count();
    Eigen::MatrixX3d out(m, 3);
    double mean_area = 0.0;
    for (int f = 0; f < m; ++f) mean_area += mesh.face_area(f);
    mean_area /= m;

    for (int f = 0; f < m; ++f) {
        const double area = mesh.face_area(f);
        if (area < 1e-12 * mean_area)
            throw DegenerateTriangleError("triangle " + std::to_string(f) + " has area "
                                          + std::to_string(area));
        for (int c = 0; c < 3; ++c) {
            const Eigen::Vector3d o = mesh.vertex(mesh.triangles()(f, c));
            const Eigen::Vector3d a = mesh.vertex(mesh.triangles()(f, (c + 1) % 3)) - o;
            const Eigen::Vector3d b = mesh.vertex(mesh.triangles()(f, (c + 2) % 3)) - o;
            // cot = (a.b) / |a x b|, and |a x b| = 2 area
            out(f, c) = 0.5 * a.dot(b) / (2.0 * area);
        }
    }
    return out;
}

inline LaplacianPair assemble_laplacian(const TriMesh& mesh)
{
    const int n = mesh.vertex_count();
    const auto half_cot = cotangent_half_weights(mesh);

    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(mesh.triangle_count()) * 12);
    for (int f = 0; f < mesh.triangle_count(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int i = mesh.triangles()(f, (c + 1) % 3);
            const int j = mesh.triangles()(f, (c + 2) % 3);
            const double w = half_cot(f, c);
            entries.emplace_back(i, j, -w);
            entries.emplace_back(j, i, -w);
            entries.emplace_back(i, i, w);
            entries.emplace_back(j, j, w);
        }
    }
    LaplacianPair out;
    out.stiffness.resize(n, n);
    out.stiffness.setFromTriplets(entries.begin(), entries.end());
    out.stiffness.makeCompressed();
    out.mass = mesh.per_vertex_area();
    return out;
}

} // namespace sfmap
