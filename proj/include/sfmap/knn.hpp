#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace sfmap {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Squared Euclidean distance accumulated in coordinate order, abandoning the
/// sum once it exceeds `bound` (checked every 8 coordinates). Adding
/// non-negative terms never decreases a floating-point sum, so an abandoned
/// point can never tie or win.
inline double partial_squared_distance(const double* a, const double* b, Eigen::Index dim, double bound)
{
    double s = 0.0;
    Eigen::Index k = 0;
    for (; k + 8 <= dim; k += 8) {
        for (Eigen::Index j = k; j < k + 8; ++j) {
            const double d = a[j] - b[j];
            s += d * d;
        }
        if (s > bound) return s;
    }
    for (; k < dim; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

struct Neighbor {
    int index = -1;
    double squared_distance = std::numeric_limits<double>::infinity();

    // (distance, index) lexicographic: equal distances resolve to the lowest index.
    void offer(int i, double d)
    {
        if (d < squared_distance || (d == squared_distance && i < index)) {
            index = i;
            squared_distance = d;
        }
    }
};

/// Exact nearest-neighbor search over the rows of a dense matrix.
class KdTree {
public:
    explicit KdTree(RowMatrix points, int leaf_size = 12) : points_(std::move(points)), leaf_size_(leaf_size)
    {
        order_.resize(static_cast<std::size_t>(points_.rows()));
        std::iota(order_.begin(), order_.end(), 0);
        if (points_.rows() > 0) build(0, static_cast<int>(order_.size()));
    }

    Eigen::Index size() const { return points_.rows(); }
    Eigen::Index dim() const { return points_.cols(); }

    /// A valid `hint` row seeds the search bound; the result is the same exact
    /// argmin with the same tie-breaking, only found with less work.
    Neighbor nearest(const double* query, int hint = -1) const
    {
        Neighbor best;
        if (hint >= 0 && hint < size())
            best.offer(hint, partial_squared_distance(query, points_.row(hint).data(), dim(),
                                                      std::numeric_limits<double>::infinity()));
        if (!nodes_.empty()) search(0, query, best);
        return best;
    }

    /// Nearest row for each row of `queries`, optionally seeded per query.
    std::vector<int> nearest_all(const RowMatrix& queries, std::span<const int> hints = {}) const
    {
        std::vector<int> out(static_cast<std::size_t>(queries.rows()));
        const bool seeded = static_cast<Eigen::Index>(hints.size()) == queries.rows();
#pragma omp parallel for schedule(static)
        for (Eigen::Index q = 0; q < queries.rows(); ++q)
            out[q] = nearest(queries.row(q).data(), seeded ? hints[q] : -1).index;
        return out;
    }

private:
    struct Node {
        int begin, end;       // range in order_
        int split_dim = -1;   // -1 for leaves
        double split_value = 0.0;
        int left = -1, right = -1;
    };

    int build(int begin, int end)
    {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({begin, end});
        if (end - begin <= leaf_size_) return id;

        int best_dim = 0;
        double best_spread = -1.0;
        for (Eigen::Index d = 0; d < dim(); ++d) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int i = begin; i < end; ++i) {
                const double x = points_(order_[i], d);
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best_dim = static_cast<int>(d);
            }
        }
        if (best_spread <= 0.0) return id; // all points coincide

        const int mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) { return points_(a, best_dim) < points_(b, best_dim); });
        const double split = points_(order_[mid], best_dim);
        nodes_[id].split_dim = best_dim;
        nodes_[id].split_value = split;
        // left holds values <= split, right values >= split
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(int id, const double* q, Neighbor& best) const
    {
        const Node& node = nodes_[id];
        if (node.split_dim < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[i];
                const double d = partial_squared_distance(q, points_.row(idx).data(), dim(), best.squared_distance);
                best.offer(idx, d);
            }
            return;
        }
        const double diff = q[node.split_dim] - node.split_value;
        const int near = diff <= 0.0 ? node.left : node.right;
        const int far = diff <= 0.0 ? node.right : node.left;
        search(near, q, best);
        if (diff * diff <= best.squared_distance) search(far, q, best);
    }

    RowMatrix points_;
    int leaf_size_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// Nearest row of `points` among the listed candidate rows.
inline Neighbor nearest_among(const RowMatrix& points, const double* query, std::span<const int> candidates)
{
    Neighbor best;
    for (int idx : candidates)
        best.offer(idx, partial_squared_distance(query, points.row(idx).data(), points.cols(), best.squared_distance));
    return best;
}

} // namespace sfmap
