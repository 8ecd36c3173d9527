#include "semreg/fixtures.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <map>
#include <vector>

namespace semreg::fixtures {

TriMesh icosphere(int subdivisions) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& v : verts) v.normalize();
    std::vector<Eigen::Vector3i> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoints;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            const auto it = midpoints.find(key);
            if (it != midpoints.end()) return it->second;
            const int idx = static_cast<int>(verts.size());
            verts.push_back(((verts[static_cast<size_t>(a)] + verts[static_cast<size_t>(b)]) / 2.0).normalized());
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<Eigen::Vector3i> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = midpoint(f[0], f[1]);
            const int bc = midpoint(f[1], f[2]);
            const int ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    TriMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i];
    mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(static_cast<Eigen::Index>(i)) = faces[i];
    mesh.normals = vertex_normals(mesh);
    return mesh;
}

TriMesh single_triangle() {
    TriMesh mesh;
    mesh.vertices.resize(3, 3);
    mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    mesh.faces.resize(1, 3);
    mesh.faces << 0, 1, 2;
    mesh.normals = vertex_normals(mesh);
    return mesh;
}

TriMesh quad_fan() {
    TriMesh mesh;
    mesh.vertices.resize(4, 3);
    mesh.vertices << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
    mesh.faces.resize(2, 3);
    mesh.faces << 0, 1, 2, 0, 2, 3;
    mesh.normals = vertex_normals(mesh);
    return mesh;
}

TriMesh rotated_y(const TriMesh& mesh, double angle_deg) {
    const double a = angle_deg * M_PI / 180.0;
    const Eigen::Matrix3d r = Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix();
    TriMesh out = mesh;
    out.vertices = mesh.vertices * r.transpose();
    out.normals = vertex_normals(out);
    return out;
}

TriMesh scaled_and_bent(const TriMesh& mesh, double rate_rad) {
    TriMesh out = mesh;
    for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
        Eigen::Vector3d v = mesh.vertices.row(i);
        v = {v.x() * 1.0, v.y() * 0.7, v.z() * 1.3};
        const double theta = rate_rad * v.y();
        const double c = std::cos(theta), s = std::sin(theta);
        out.vertices.row(i) << c * v.x() + s * v.z(), v.y(), -s * v.x() + c * v.z();
    }
    out.normals = vertex_normals(out);
    return out;
}

CorrespondenceMap identity_map(const TriMesh& mesh) {
    CorrespondenceMap map;
    map.entries.resize(static_cast<size_t>(mesh.num_vertices()));
    std::vector<bool> done(static_cast<size_t>(mesh.num_vertices()), false);
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int v = mesh.faces(f, k);
            if (done[static_cast<size_t>(v)]) continue;
            done[static_cast<size_t>(v)] = true;
            CorrespondenceEntry entry;
            entry.face = static_cast<int>(f);
            entry.bary.setZero();
            entry.bary[k] = 1.0;
            map.entries[static_cast<size_t>(v)] = entry;
        }
    }
    return map;
}

} // namespace semreg::fixtures
