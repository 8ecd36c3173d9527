#include "semreg/tri_bvh.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace semreg {

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                          Eigen::Vector3d& bary) {
    const Eigen::Vector3d ab = b - a;
    const Eigen::Vector3d ac = c - a;
    const Eigen::Vector3d ap = p - a;

    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        bary = {1.0, 0.0, 0.0};
        return a;
    }

    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        bary = {0.0, 1.0, 0.0};
        return b;
    }

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        bary = {1.0 - v, v, 0.0};
        return a + v * ab;
    }

    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        bary = {0.0, 0.0, 1.0};
        return c;
    }

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        bary = {1.0 - w, 0.0, w};
        return a + w * ac;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        bary = {0.0, 1.0 - w, w};
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    bary = {1.0 - v - w, v, w};
    return a + ab * v + ac * w;
}

TriangleBvh::TriangleBvh(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces)
    : vertices_(vertices), faces_(faces) {
    const Eigen::Index f = faces.rows();
    order_.resize(static_cast<size_t>(f));
    std::iota(order_.begin(), order_.end(), 0);
    centroids_.resize(f, 3);
    for (Eigen::Index i = 0; i < f; ++i) {
        centroids_.row(i) = (vertices.row(faces(i, 0)) + vertices.row(faces(i, 1)) +
                             vertices.row(faces(i, 2))) /
                            3.0;
    }
    if (f > 0) root_ = build(0, static_cast<int>(f));
}

int TriangleBvh::build(int lo, int hi) {
    Node node;
    node.box_lo.setConstant(std::numeric_limits<double>::infinity());
    node.box_hi.setConstant(-std::numeric_limits<double>::infinity());
    for (int i = lo; i < hi; ++i) {
        const int face = order_[static_cast<size_t>(i)];
        for (int k = 0; k < 3; ++k) {
            const Eigen::Vector3d v = vertices_.row(faces_(face, k));
            node.box_lo = node.box_lo.cwiseMin(v);
            node.box_hi = node.box_hi.cwiseMax(v);
        }
    }

    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (hi - lo <= kLeafSize) {
        nodes_[self].begin = lo;
        nodes_[self].end = hi;
        return self;
    }

    int axis;
    (node.box_hi - node.box_lo).maxCoeff(&axis);
    const int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) {
                         const double ca = centroids_(a, axis), cb = centroids_(b, axis);
                         return ca < cb || (ca == cb && a < b);
                     });
    nodes_[self].left = build(lo, mid);
    nodes_[self].right = build(mid, hi);
    return self;
}

double TriangleBvh::box_sq_dist(const Node& node, const Eigen::Vector3d& q) const {
    const Eigen::Vector3d clamped = q.cwiseMax(node.box_lo).cwiseMin(node.box_hi);
    return (q - clamped).squaredNorm();
}

void TriangleBvh::search(int node_id, const Eigen::Vector3d& q, Hit& best) const {
    const Node& node = nodes_[static_cast<size_t>(node_id)];
    if (node.left < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int face = order_[static_cast<size_t>(i)];
            Eigen::Vector3d bary;
            const Eigen::Vector3d cp =
                closest_point_on_triangle(q, vertices_.row(faces_(face, 0)),
                                          vertices_.row(faces_(face, 1)),
                                          vertices_.row(faces_(face, 2)), bary);
            const double d2 = (cp - q).squaredNorm();
            if (d2 < best.sq_dist || (d2 == best.sq_dist && face < best.face)) {
                best.sq_dist = d2;
                best.face = face;
                best.point = cp;
                best.bary = bary;
            }
        }
        return;
    }
    const double dl = box_sq_dist(nodes_[static_cast<size_t>(node.left)], q);
    const double dr = box_sq_dist(nodes_[static_cast<size_t>(node.right)], q);
    // Visit the nearer child first; on equal bounds keep left-first order so
    // the lower-face-id tie-break is reproducible.
    const int first = dl <= dr ? node.left : node.right;
    const int second = dl <= dr ? node.right : node.left;
    const double dfirst = std::min(dl, dr);
    const double dsecond = std::max(dl, dr);
    if (dfirst <= best.sq_dist) search(first, q, best);
    if (dsecond <= best.sq_dist) search(second, q, best);
}

TriangleBvh::Hit TriangleBvh::closest(const Eigen::Vector3d& query) const {
    Hit best;
    best.sq_dist = std::numeric_limits<double>::infinity();
    if (root_ >= 0) search(root_, query, best);
    return best;
}

} // namespace semreg
