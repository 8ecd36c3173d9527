#pragma once

#include <Eigen/Core>

#include <vector>

namespace semreg {

// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
// Returns the point and its barycentric coordinates with respect to (a,b,c).
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                          Eigen::Vector3d& bary);

// Median-split AABB tree over triangles for globally nearest point-to-triangle
// queries. Ties on squared distance resolve to the lower face id.
class TriangleBvh {
public:
    TriangleBvh(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces);

    struct Hit {
        int face = -1;
        double sq_dist = 0.0;
        Eigen::Vector3d point = Eigen::Vector3d::Zero();
        Eigen::Vector3d bary = Eigen::Vector3d::Zero();
    };

    Hit closest(const Eigen::Vector3d& query) const;

private:
    struct Node {
        Eigen::Vector3d box_lo, box_hi;
        int left = -1, right = -1;  // internal children
        int begin = 0, end = 0;     // leaf triangle range in order_
    };

    int build(int lo, int hi);
    void search(int node_id, const Eigen::Vector3d& q, Hit& best) const;
    double box_sq_dist(const Node& node, const Eigen::Vector3d& q) const;

    const Eigen::MatrixX3d& vertices_;
    const Eigen::MatrixX3i& faces_;
    std::vector<int> order_;
    Eigen::MatrixX3d centroids_;
    std::vector<Node> nodes_;
    int root_ = -1;
    static constexpr int kLeafSize = 4;
};

} // namespace semreg
