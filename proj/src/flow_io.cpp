#include "semreg/flow_io.hpp"

#include "semreg/error.hpp"

#include <cstring>
#include <fstream>

namespace semreg {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'L', 'W'};

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw Error(ErrorCode::TruncatedFile, "flow file truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ofstream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

float get_f32(std::ifstream& in) {
    const std::uint32_t bits = get_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void write_flows(const std::string& path, const std::vector<FlowMap>& maps) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write flow file: " + path);
    out.write(kMagic, 4);
    put_u32(out, kFlowFileVersion);
    put_u32(out, static_cast<std::uint32_t>(maps.size()));
    for (std::uint32_t v = 0; v < maps.size(); ++v) {
        const FlowMap& m = maps[v];
        put_u32(out, v);
        put_u32(out, static_cast<std::uint32_t>(m.width));
        put_u32(out, static_cast<std::uint32_t>(m.height));
        for (size_t p = 0; p < m.pixel_count(); ++p) {
            put_f32(out, static_cast<float>(m.flow[p].x()));
            put_f32(out, static_cast<float>(m.flow[p].y()));
            put_f32(out, m.valid[p] ? 1.0f : 0.0f);
        }
    }
    if (!out) throw Error(ErrorCode::IoError, "flow file write failed: " + path);
}

std::vector<FlowMap> read_flows(const std::string& path, const CameraRig* rig) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open flow file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw Error(ErrorCode::BadMagic, "not a flow file: " + path);
    }
    const std::uint32_t version = get_u32(in);
    if (version != kFlowFileVersion) {
        throw Error(ErrorCode::VersionMismatch,
                    "flow file version " + std::to_string(version) + " unsupported");
    }
    const std::uint32_t views = get_u32(in);
    if (rig && static_cast<int>(views) != rig->view_count()) {
        throw Error(ErrorCode::DimensionMismatch, "flow file view count does not match the rig");
    }

    std::vector<FlowMap> maps(views);
    for (std::uint32_t v = 0; v < views; ++v) {
        const std::uint32_t cam = get_u32(in);
        if (cam != v) {
            throw Error(ErrorCode::ParseError, "flow file views out of order");
        }
        const std::uint32_t w = get_u32(in);
        const std::uint32_t h = get_u32(in);
        if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) {
            throw Error(ErrorCode::ParseError, "flow file has implausible dimensions");
        }
        if (rig && (static_cast<int>(w) != rig->resolution || static_cast<int>(h) != rig->resolution)) {
            throw Error(ErrorCode::DimensionMismatch, "flow map resolution does not match the rig");
        }
        FlowMap& m = maps[v];
        m.resize(static_cast<int>(w), static_cast<int>(h));
        for (size_t p = 0; p < m.pixel_count(); ++p) {
            const float u = get_f32(in);
            const float vv = get_f32(in);
            const float valid = get_f32(in);
            if (valid != 0.0f && valid != 1.0f) {
                throw Error(ErrorCode::ParseError, "flow validity flag must be exactly 0 or 1");
            }
            if (valid == 1.0f && (!std::isfinite(u) || !std::isfinite(vv))) {
                throw Error(ErrorCode::ParseError, "valid flow pixel carries non-finite displacement");
            }
            m.flow[p] = {static_cast<double>(u), static_cast<double>(vv)};
            m.valid[p] = valid == 1.0f ? 1 : 0;
        }
    }
    return maps;
}

namespace {

void erode_mask(FlowMap& map, int rounds) {
    for (int r = 0; r < rounds; ++r) {
        std::vector<std::uint8_t> next(map.valid.size(), 0);
        for (int y = 0; y < map.height; ++y) {
            for (int x = 0; x < map.width; ++x) {
                const size_t p = static_cast<size_t>(y) * map.width + x;
                if (!map.valid[p]) continue;
                const bool interior = x > 0 && x + 1 < map.width && y > 0 && y + 1 < map.height &&
                                      map.valid[p - 1] && map.valid[p + 1] &&
                                      map.valid[p - static_cast<size_t>(map.width)] &&
                                      map.valid[p + static_cast<size_t>(map.width)];
                if (interior) next[p] = 1;
            }
        }
        map.valid = std::move(next);
        for (size_t p = 0; p < map.pixel_count(); ++p) {
            if (!map.valid[p]) map.flow[p].setZero();
        }
    }
}

} // namespace

std::vector<FlowMap> oracle_flows(const TriMesh& source, const TriMesh& target,
                                  const CorrespondenceMap& gt, const CameraRig& rig,
                                  ThreadPool& pool, int erode_pixels) {
    if (static_cast<Eigen::Index>(gt.entries.size()) != source.num_vertices()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "ground-truth map length does not match the source vertex count");
    }
    validate_correspondence(gt, target);

    // Per-vertex corresponded target positions.
    Eigen::MatrixX3d corresponded(source.num_vertices(), 3);
    for (Eigen::Index v = 0; v < source.num_vertices(); ++v) {
        corresponded.row(v) = barycentric_point(target, gt.entries[static_cast<size_t>(v)]).transpose();
    }

    std::vector<FlowMap> maps(static_cast<size_t>(rig.view_count()));
    pool.parallel_for(0, rig.view_count(), [&](std::int64_t vi) {
        const Camera& cam = rig.cameras[static_cast<size_t>(vi)];
        const RasterCache cache = rasterize(source.vertices, source.faces, cam);
        FlowMap& map = maps[static_cast<size_t>(vi)];
        map.resize(cache.width, cache.height);
        for (int y = 0; y < cache.height; ++y) {
            for (int x = 0; x < cache.width; ++x) {
                const size_t p = static_cast<size_t>(y) * cache.width + x;
                const int f = cache.face_id[p];
                if (f < 0) continue;
                const Eigen::Vector3d& wt = cache.weights[p];
                const Eigen::Vector3d point =
                    wt[0] * Eigen::Vector3d(corresponded.row(source.faces(f, 0))) +
                    wt[1] * Eigen::Vector3d(corresponded.row(source.faces(f, 1))) +
                    wt[2] * Eigen::Vector3d(corresponded.row(source.faces(f, 2)));
                Eigen::Vector2d ndc;
                double depth;
                if (!cam.project_checked(point, ndc, depth)) continue;
                map.flow[p] = ndc - pixel_center_ndc(x, y, cache.width, cache.height);
                map.valid[p] = 1;
            }
        }
        if (erode_pixels > 0) erode_mask(map, erode_pixels);
    });
    return maps;
}

} // namespace semreg
