#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace semreg {

// Indexed triangle mesh. Faces are counter-clockwise vertex index triples.
// Plain data; validate_mesh() enforces the invariants the solver relies on
// (indices in range, no degenerate faces, single connected component).
struct TriMesh {
    Eigen::MatrixX3d vertices;  // n x 3 positions, model units
    Eigen::MatrixX3i faces;     // f x 3 vertex indices
    Eigen::MatrixX3d normals;   // n x 3 per-vertex normals, may be empty

    Eigen::Index num_vertices() const { return vertices.rows(); }
    Eigen::Index num_faces() const { return faces.rows(); }
};

// Similarity transform recorded by normalize_mesh. Applies as
//   normalized = (x + translation) * scale
// and inverts as x = normalized / scale - translation.
struct SimilarityTransform {
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double scale = 1.0;

    Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return (x + translation) * scale; }
    Eigen::Vector3d invert(const Eigen::Vector3d& x) const { return x / scale - translation; }
};

// Per-face orthonormal tangent frames. basis[i] columns span face i's plane:
// column 0 is the normalized first edge, column 1 completes it by
// Gram-Schmidt with the second edge.
struct TangentFrames {
    std::vector<Eigen::Matrix<double, 3, 2>> basis;
    Eigen::VectorXd areas;        // |t_i|
    Eigen::MatrixX3d normals;     // unit face normals
};

// Minimum face area accepted on a unit-normalized copy of the mesh.
inline constexpr double kDegenerateAreaEps = 1e-12;

TriMesh load_obj(const std::string& path);
void save_obj(const std::string& path, const TriMesh& mesh);

// Throws Error on any invariant violation. `require_connected` is relaxed by
// callers that operate on meshes before the connectivity gate (e.g. area
// accumulation over concatenated parts).
void validate_mesh(const TriMesh& mesh, bool require_connected = true);
bool is_connected(const TriMesh& mesh);

// Centers the bounding box at the origin and scales the longest axis-aligned
// extent to 2, so the result fits in [-1,1]^3. Returns the applied transform.
SimilarityTransform normalize_mesh(TriMesh& mesh);

Eigen::VectorXd face_areas(const TriMesh& mesh);
Eigen::MatrixX3d face_normals(const TriMesh& mesh);

// Area-weighted average of incident face normals, normalized per vertex.
// Falls back to the lowest-index incident face normal if the sum vanishes.
Eigen::MatrixX3d vertex_normals(const TriMesh& mesh);
Eigen::MatrixX3d vertex_normals(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces);

double total_surface_area(const TriMesh& mesh);

TangentFrames build_tangent_frames(const TriMesh& mesh);

} // namespace semreg
