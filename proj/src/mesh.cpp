#include "semreg/mesh.hpp"

#include "semreg/error.hpp"

#include <Eigen/Geometry>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

namespace semreg {

namespace {

// Resolves "v", "v/vt", "v//vn", "v/vt/vn" to the vertex index.
int parse_face_index(const std::string& token, Eigen::Index vertex_count, int line_no) {
    const size_t slash = token.find('/');
    const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
    int idx = 0;
    const auto res = std::from_chars(head.data(), head.data() + head.size(), idx);
    if (res.ec != std::errc{} || res.ptr != head.data() + head.size()) {
        throw Error(ErrorCode::ParseError,
                    "OBJ line " + std::to_string(line_no) + ": bad face index '" + token + "'");
    }
    if (idx < 0) idx = static_cast<int>(vertex_count) + idx + 1;  // relative indexing
    if (idx < 1 || idx > vertex_count) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "OBJ line " + std::to_string(line_no) + ": face index " + std::to_string(idx) +
                        " out of range (mesh has " + std::to_string(vertex_count) + " vertices)");
    }
    return idx - 1;
}

struct DisjointSet {
    explicit DisjointSet(Eigen::Index n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    Eigen::Index find(Eigen::Index x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(Eigen::Index a, Eigen::Index b) { parent[find(a)] = find(b); }
    std::vector<Eigen::Index> parent;
};

} // namespace

TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open OBJ file: " + path);

    std::vector<Eigen::Vector3d> verts;
    std::vector<std::vector<std::string>> face_tokens;
    std::vector<int> face_lines;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Eigen::Vector3d v;
            if (!(ls >> v.x() >> v.y() >> v.z())) {
                throw Error(ErrorCode::ParseError,
                            "OBJ line " + std::to_string(line_no) + ": bad vertex record");
            }
            verts.push_back(v);
        } else if (tag == "f") {
            std::vector<std::string> tokens;
            std::string tok;
            while (ls >> tok) tokens.push_back(tok);
            if (tokens.size() < 3) {
                throw Error(ErrorCode::ParseError,
                            "OBJ line " + std::to_string(line_no) + ": face with fewer than 3 indices");
            }
            face_tokens.push_back(std::move(tokens));
            face_lines.push_back(line_no);
        }
        // vt/vn/usemtl/mtllib/o/g/s records are ignored.
    }

    if (verts.empty() || face_tokens.empty()) {
        throw Error(ErrorCode::EmptyMesh, "OBJ file has no geometry: " + path);
    }

    TriMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i];

    // Polygons are fan-triangulated around their first vertex.
    std::vector<Eigen::Vector3i> tris;
    for (size_t fi = 0; fi < face_tokens.size(); ++fi) {
        const auto& tokens = face_tokens[fi];
        std::vector<int> idx(tokens.size());
        for (size_t k = 0; k < tokens.size(); ++k) {
            idx[k] = parse_face_index(tokens[k], mesh.num_vertices(), face_lines[fi]);
        }
        for (size_t k = 1; k + 1 < idx.size(); ++k) {
            tris.emplace_back(idx[0], idx[k], idx[k + 1]);
        }
    }
    mesh.faces.resize(static_cast<Eigen::Index>(tris.size()), 3);
    for (size_t i = 0; i < tris.size(); ++i) mesh.faces.row(static_cast<Eigen::Index>(i)) = tris[i];

    validate_mesh(mesh);
    mesh.normals = vertex_normals(mesh);
    return mesh;
}

void save_obj(const std::string& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write OBJ file: " + path);
    out.precision(17);
    for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
        out << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' '
            << mesh.vertices(i, 2) << '\n';
    }
    for (Eigen::Index i = 0; i < mesh.num_faces(); ++i) {
        out << "f " << mesh.faces(i, 0) + 1 << ' ' << mesh.faces(i, 1) + 1 << ' '
            << mesh.faces(i, 2) + 1 << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

void validate_mesh(const TriMesh& mesh, bool require_connected) {
    if (mesh.num_vertices() == 0 || mesh.num_faces() == 0) {
        throw Error(ErrorCode::EmptyMesh, "mesh has no vertices or no faces");
    }
    if (!mesh.vertices.allFinite()) {
        throw Error(ErrorCode::NonFiniteValue, "mesh has non-finite vertex coordinates");
    }
    const Eigen::Index n = mesh.num_vertices();
    for (Eigen::Index i = 0; i < mesh.num_faces(); ++i) {
        const int a = mesh.faces(i, 0), b = mesh.faces(i, 1), c = mesh.faces(i, 2);
        if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n) {
            throw Error(ErrorCode::IndexOutOfRange, "face " + std::to_string(i) + " index out of range");
        }
        if (a == b || b == c || a == c) {
            throw Error(ErrorCode::DegenerateFace, "face " + std::to_string(i) + " repeats a vertex");
        }
    }

    // Area degeneracy is tested scale-invariantly: on a copy normalized to
    // the unit box, every face must keep area above kDegenerateAreaEps.
    TriMesh probe;
    probe.vertices = mesh.vertices;
    probe.faces = mesh.faces;
    const Eigen::Vector3d lo = probe.vertices.colwise().minCoeff();
    const Eigen::Vector3d hi = probe.vertices.colwise().maxCoeff();
    const double extent = (hi - lo).maxCoeff();
    if (extent > 0.0) {
        probe.vertices.rowwise() -= ((lo + hi) * 0.5).transpose();
        probe.vertices *= 2.0 / extent;
    }
    const Eigen::VectorXd areas = face_areas(probe);
    for (Eigen::Index i = 0; i < areas.size(); ++i) {
        if (!(areas[i] > kDegenerateAreaEps)) {
            throw Error(ErrorCode::DegenerateFace,
                        "face " + std::to_string(i) + " is degenerate (area " +
                            std::to_string(areas[i]) + " after normalization)");
        }
    }

    if (require_connected && !is_connected(mesh)) {
        throw Error(ErrorCode::DisconnectedMesh, "mesh is not a single connected component");
    }
}

bool is_connected(const TriMesh& mesh) {
    if (mesh.num_vertices() == 0) return false;
    DisjointSet ds(mesh.num_vertices());
    for (Eigen::Index i = 0; i < mesh.num_faces(); ++i) {
        ds.unite(mesh.faces(i, 0), mesh.faces(i, 1));
        ds.unite(mesh.faces(i, 1), mesh.faces(i, 2));
    }
    const Eigen::Index root = ds.find(0);
    for (Eigen::Index v = 1; v < mesh.num_vertices(); ++v) {
        if (ds.find(v) != root) return false;
    }
    return true;
}

SimilarityTransform normalize_mesh(TriMesh& mesh) {
    if (mesh.num_vertices() == 0) throw Error(ErrorCode::EmptyMesh, "cannot normalize empty mesh");
    const Eigen::Vector3d lo = mesh.vertices.colwise().minCoeff();
    const Eigen::Vector3d hi = mesh.vertices.colwise().maxCoeff();
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0.0)) throw Error(ErrorCode::ZeroExtent, "mesh has zero spatial extent");

    SimilarityTransform xf;
    xf.translation = -(lo + hi) * 0.5;
    xf.scale = 2.0 / extent;
    mesh.vertices = (mesh.vertices.rowwise() + xf.translation.transpose()) * xf.scale;
    return xf;
}

Eigen::VectorXd face_areas(const TriMesh& mesh) {
    Eigen::VectorXd areas(mesh.num_faces());
    for (Eigen::Index i = 0; i < mesh.num_faces(); ++i) {
        const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(i, 0));
        const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(i, 1));
        const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(i, 2));
        areas[i] = 0.5 * (b - a).cross(c - a).norm();
    }
    return areas;
}

Eigen::MatrixX3d face_normals(const TriMesh& mesh) {
    Eigen::MatrixX3d fn(mesh.num_faces(), 3);
    for (Eigen::Index i = 0; i < mesh.num_faces(); ++i) {
        const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(i, 0));
        const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(i, 1));
        const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(i, 2));
        fn.row(i) = (b - a).cross(c - a).normalized();
    }
    return fn;
}

Eigen::MatrixX3d vertex_normals(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces) {
    const Eigen::Index n = vertices.rows();
    Eigen::MatrixX3d vn = Eigen::MatrixX3d::Zero(n, 3);
    std::vector<int> fallback_face(static_cast<size_t>(n), -1);
    for (Eigen::Index i = 0; i < faces.rows(); ++i) {
        const Eigen::Vector3d a = vertices.row(faces(i, 0));
        const Eigen::Vector3d b = vertices.row(faces(i, 1));
        const Eigen::Vector3d c = vertices.row(faces(i, 2));
        // cross/2 is the area-weighted face normal.
        const Eigen::Vector3d awn = 0.5 * (b - a).cross(c - a);
        for (int k = 0; k < 3; ++k) {
            const int v = faces(i, k);
            vn.row(v) += awn.transpose();
            if (fallback_face[static_cast<size_t>(v)] < 0) fallback_face[static_cast<size_t>(v)] = static_cast<int>(i);
        }
    }
    for (Eigen::Index v = 0; v < n; ++v) {
        const double len = vn.row(v).norm();
        if (len > 1e-14) {
            vn.row(v) /= len;
        } else if (fallback_face[static_cast<size_t>(v)] >= 0) {
            const Eigen::Index f = fallback_face[static_cast<size_t>(v)];
            const Eigen::Vector3d a = vertices.row(faces(f, 0));
            const Eigen::Vector3d b = vertices.row(faces(f, 1));
            const Eigen::Vector3d c = vertices.row(faces(f, 2));
            vn.row(v) = (b - a).cross(c - a).normalized().transpose();
        }
    }
    return vn;
}

Eigen::MatrixX3d vertex_normals(const TriMesh& mesh) {
    return vertex_normals(mesh.vertices, mesh.faces);
}

double total_surface_area(const TriMesh& mesh) {
    return face_areas(mesh).sum();
}

TangentFrames build_tangent_frames(const TriMesh& mesh) {
    TangentFrames frames;
    const Eigen::Index f = mesh.num_faces();
    frames.basis.resize(static_cast<size_t>(f));
    frames.areas.resize(f);
    frames.normals.resize(f, 3);
    for (Eigen::Index i = 0; i < f; ++i) {
        const Eigen::Vector3d vj = mesh.vertices.row(mesh.faces(i, 0));
        const Eigen::Vector3d vk = mesh.vertices.row(mesh.faces(i, 1));
        const Eigen::Vector3d vl = mesh.vertices.row(mesh.faces(i, 2));
        const Eigen::Vector3d e1 = vk - vj;
        const Eigen::Vector3d e2 = vl - vj;
        const double cross_norm = e1.cross(e2).norm();
        if (e1.norm() < 1e-14 || cross_norm < 1e-14) {
            throw Error(ErrorCode::DegenerateFace,
                        "face " + std::to_string(i) + " has collinear vertices");
        }
        const Eigen::Vector3d b1 = e1.normalized();
        const Eigen::Vector3d b2 = (e2 - e2.dot(b1) * b1).normalized();
        frames.basis[static_cast<size_t>(i)].col(0) = b1;
        frames.basis[static_cast<size_t>(i)].col(1) = b2;
        frames.areas[i] = 0.5 * cross_norm;
        frames.normals.row(i) = b1.cross(b2).transpose();
    }
    return frames;
}

} // namespace semreg
