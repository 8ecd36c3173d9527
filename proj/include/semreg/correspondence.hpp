#pragma once

#include "semreg/mesh.hpp"
#include "semreg/parallel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace semreg {

// Dense map from source vertices onto the target surface: nearest target
// face plus the barycentric coordinates of the closest point on it.
struct CorrespondenceEntry {
    int face = 0;
    Eigen::Vector3d bary = Eigen::Vector3d::Zero();
};

struct CorrespondenceMap {
    std::string target_mesh;          // path of the target this map indexes
    std::uint64_t target_hash = 0;    // FNV-1a of the target OBJ bytes, 0 if unknown
    std::vector<CorrespondenceEntry> entries;
};

void validate_correspondence(const CorrespondenceMap& map, const TriMesh& target);

// Globally nearest target face per deformed vertex (point-to-triangle
// distance; ties broken by lower face id) with closest-point barycentrics.
CorrespondenceMap extract_correspondence(const Eigen::MatrixX3d& deformed, const TriMesh& target,
                                         ThreadPool& pool);

Eigen::Vector3d barycentric_point(const TriMesh& mesh, const CorrespondenceEntry& entry);

void save_correspondence_json(const std::string& path, const CorrespondenceMap& map);
CorrespondenceMap load_correspondence_json(const std::string& path);

// Target vertex-edge graph with Euclidean edge lengths and the metric's
// normalization constant sqrt(total surface area).
class GeodesicIndex {
public:
    explicit GeodesicIndex(const TriMesh& target);

    // Shortest-path distances from `source_vertex` to every vertex. Stops
    // early once all `needed` vertices (if nonempty) are settled.
    Eigen::VectorXd distances_from(int source_vertex, const std::vector<int>& needed = {}) const;

    double normalization() const { return normalization_; }
    Eigen::Index num_vertices() const { return static_cast<Eigen::Index>(adjacency_.size()); }

private:
    std::vector<std::vector<std::pair<int, double>>> adjacency_;
    double normalization_ = 1.0;
};

struct GeodesicErrorReport {
    Eigen::VectorXd per_vertex;  // normalized geodesic error x100 per source vertex
    double mean = 0.0;
};

// Snaps each correspondence to its face's dominant-barycentric vertex and
// measures graph-shortest-path distance between prediction and ground truth,
// normalized by sqrt(target surface area) and reported x100.
GeodesicErrorReport geodesic_error(const CorrespondenceMap& predicted,
                                   const CorrespondenceMap& ground_truth, const TriMesh& target);

int snap_to_vertex(const TriMesh& target, const CorrespondenceEntry& entry);

} // namespace semreg
