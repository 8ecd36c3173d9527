#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace semreg {

// Static 3D point kd-tree for nearest-neighbor queries. Ties on squared
// distance resolve to the lower point index, matching a brute-force scan.
class PointKdTree {
public:
    explicit PointKdTree(const Eigen::MatrixX3d& points) : points_(points) {
        const Eigen::Index n = points.rows();
        order_.resize(static_cast<size_t>(n));
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(static_cast<size_t>(n));
        if (n > 0) root_ = build(0, static_cast<int>(n), 0);
    }

    // Returns the index of the nearest point and its squared distance.
    int nearest(const Eigen::Vector3d& query, double* sq_dist_out = nullptr) const {
        Best best;
        search(root_, query, best);
        if (sq_dist_out) *sq_dist_out = best.sq_dist;
        return best.index;
    }

private:
    struct Node {
        int point = -1;    // index into points_
        int axis = 0;
        int left = -1;
        int right = -1;
    };
    struct Best {
        double sq_dist = std::numeric_limits<double>::infinity();
        int index = -1;
    };

    int build(int lo, int hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const int mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](int a, int b) {
                             const double ca = points_(a, axis), cb = points_(b, axis);
                             return ca < cb || (ca == cb && a < b);
                         });
        Node node;
        node.point = order_[static_cast<size_t>(mid)];
        node.axis = axis;
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        nodes_[self].left = build(lo, mid, depth + 1);
        nodes_[self].right = build(mid + 1, hi, depth + 1);
        return self;
    }

    void search(int node_id, const Eigen::Vector3d& q, Best& best) const {
        if (node_id < 0) return;
        const Node& node = nodes_[static_cast<size_t>(node_id)];
        const Eigen::Vector3d p = points_.row(node.point);
        const double d2 = (p - q).squaredNorm();
        if (d2 < best.sq_dist || (d2 == best.sq_dist && node.point < best.index)) {
            best.sq_dist = d2;
            best.index = node.point;
        }
        const double delta = q[node.axis] - points_(node.point, node.axis);
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search(near, q, best);
        if (delta * delta <= best.sq_dist) search(far, q, best);
    }

    const Eigen::MatrixX3d& points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace semreg
