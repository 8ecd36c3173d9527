#include "semreg/correspondence.hpp"

#include "semreg/error.hpp"
#include "semreg/tri_bvh.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <queue>
#include <unordered_map>

namespace semreg {

void validate_correspondence(const CorrespondenceMap& map, const TriMesh& target) {
    for (size_t i = 0; i < map.entries.size(); ++i) {
        const auto& e = map.entries[i];
        if (e.face < 0 || e.face >= target.num_faces()) {
            throw Error(ErrorCode::IndexOutOfRange,
                        "correspondence entry " + std::to_string(i) + " has invalid face id");
        }
        const double sum = e.bary.sum();
        if (e.bary.minCoeff() < -1e-6 || std::abs(sum - 1.0) > 1e-6) {
            throw Error(ErrorCode::InvalidArgument,
                        "correspondence entry " + std::to_string(i) + " has invalid barycentrics");
        }
    }
}

CorrespondenceMap extract_correspondence(const Eigen::MatrixX3d& deformed, const TriMesh& target,
                                         ThreadPool& pool) {
    TriangleBvh bvh(target.vertices, target.faces);
    CorrespondenceMap map;
    map.entries.resize(static_cast<size_t>(deformed.rows()));
    pool.parallel_for(0, deformed.rows(), [&](std::int64_t i) {
        const TriangleBvh::Hit hit = bvh.closest(deformed.row(i));
        map.entries[static_cast<size_t>(i)] = {hit.face, hit.bary};
    });
    return map;
}

Eigen::Vector3d barycentric_point(const TriMesh& mesh, const CorrespondenceEntry& entry) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(entry.face, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(entry.face, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(entry.face, 2));
    return entry.bary[0] * a + entry.bary[1] * b + entry.bary[2] * c;
}

void save_correspondence_json(const std::string& path, const CorrespondenceMap& map) {
    nlohmann::json j;
    j["target_mesh"] = map.target_mesh;
    if (map.target_hash != 0) {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(map.target_hash));
        j["target_hash"] = std::string(buf);
    }
    j["entries"] = nlohmann::json::array();
    for (const auto& e : map.entries) {
        j["entries"].push_back({{"face", e.face}, {"bary", {e.bary[0], e.bary[1], e.bary[2]}}});
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write correspondence file: " + path);
    out << j.dump(2) << '\n';
}

CorrespondenceMap load_correspondence_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open correspondence file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, "bad correspondence JSON: " + std::string(e.what()));
    }
    CorrespondenceMap map;
    try {
        map.target_mesh = j.at("target_mesh").get<std::string>();
        if (j.contains("target_hash")) {
            map.target_hash = std::stoull(j["target_hash"].get<std::string>(), nullptr, 16);
        }
        for (const auto& e : j.at("entries")) {
            CorrespondenceEntry entry;
            entry.face = e.at("face").get<int>();
            const auto& b = e.at("bary");
            entry.bary = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>()};
            map.entries.push_back(entry);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, "bad correspondence schema: " + std::string(e.what()));
    }
    return map;
}

GeodesicIndex::GeodesicIndex(const TriMesh& target) {
    if (!is_connected(target)) {
        throw Error(ErrorCode::DisconnectedMesh, "geodesic index requires a connected target");
    }
    adjacency_.resize(static_cast<size_t>(target.num_vertices()));
    auto add_edge = [&](int a, int b) {
        const double len = (target.vertices.row(a) - target.vertices.row(b)).norm();
        // Faces sharing an edge would insert it twice; duplicates are
        // harmless for Dijkstra but wasteful, so keep the first.
        for (const auto& [other, _] : adjacency_[static_cast<size_t>(a)]) {
            if (other == b) return;
        }
        adjacency_[static_cast<size_t>(a)].push_back({b, len});
        adjacency_[static_cast<size_t>(b)].push_back({a, len});
    };
    for (Eigen::Index i = 0; i < target.num_faces(); ++i) {
        add_edge(target.faces(i, 0), target.faces(i, 1));
        add_edge(target.faces(i, 1), target.faces(i, 2));
        add_edge(target.faces(i, 2), target.faces(i, 0));
    }
    normalization_ = std::sqrt(total_surface_area(target));
}

Eigen::VectorXd GeodesicIndex::distances_from(int source_vertex, const std::vector<int>& needed) const {
    const Eigen::Index n = num_vertices();
    Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> settled(static_cast<size_t>(n), 0);
    std::vector<std::uint8_t> wanted(static_cast<size_t>(n), 0);
    size_t remaining = 0;
    for (int v : needed) {
        if (!wanted[static_cast<size_t>(v)]) {
            wanted[static_cast<size_t>(v)] = 1;
            ++remaining;
        }
    }

    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
    dist[source_vertex] = 0.0;
    queue.push({0.0, source_vertex});
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (settled[static_cast<size_t>(u)]) continue;
        settled[static_cast<size_t>(u)] = 1;
        if (wanted[static_cast<size_t>(u)] && --remaining == 0 && !needed.empty()) break;
        for (const auto& [v, len] : adjacency_[static_cast<size_t>(u)]) {
            if (d + len < dist[v]) {
                dist[v] = d + len;
                queue.push({dist[v], v});
            }
        }
    }
    return dist;
}

int snap_to_vertex(const TriMesh& target, const CorrespondenceEntry& entry) {
    int corner = 0;
    entry.bary.maxCoeff(&corner);
    return target.faces(entry.face, corner);
}

GeodesicErrorReport geodesic_error(const CorrespondenceMap& predicted,
                                   const CorrespondenceMap& ground_truth, const TriMesh& target) {
    if (predicted.entries.size() != ground_truth.entries.size()) {
        throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth differ in length");
    }
    validate_correspondence(predicted, target);
    validate_correspondence(ground_truth, target);

    const size_t n = predicted.entries.size();
    std::vector<int> pred_vertex(n), gt_vertex(n);
    for (size_t i = 0; i < n; ++i) {
        pred_vertex[i] = snap_to_vertex(target, predicted.entries[i]);
        gt_vertex[i] = snap_to_vertex(target, ground_truth.entries[i]);
    }

    // One Dijkstra per unique predicted vertex, stopping once the ground
    // truth vertices it has to reach are settled.
    std::unordered_map<int, std::vector<size_t>> by_pred;
    for (size_t i = 0; i < n; ++i) by_pred[pred_vertex[i]].push_back(i);

    GeodesicIndex index(target);
    GeodesicErrorReport report;
    report.per_vertex.resize(static_cast<Eigen::Index>(n));
    for (const auto& [pv, indices] : by_pred) {
        std::vector<int> needed;
        needed.reserve(indices.size());
        for (size_t i : indices) needed.push_back(gt_vertex[i]);
        const Eigen::VectorXd dist = index.distances_from(pv, needed);
        for (size_t i : indices) {
            report.per_vertex[static_cast<Eigen::Index>(i)] =
                100.0 * dist[gt_vertex[i]] / index.normalization();
        }
    }
    report.mean = report.per_vertex.size() > 0 ? report.per_vertex.mean() : 0.0;
    return report;
}

} // namespace semreg
