#include "semreg/raster.hpp"

#include "semreg/error.hpp"

#include <algorithm>
#include <cmath>

namespace semreg {

namespace {

inline double edge_function(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& q) {
    return (b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x());
}

// NDC -> continuous pixel coordinates.
inline double ndc_to_px(double u, int width) { return (u + 1.0) * 0.5 * width - 0.5; }
inline double ndc_to_py(double v, int height) { return (1.0 - v) * 0.5 * height - 0.5; }

} // namespace

RasterCache rasterize(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces,
                      const Camera& camera) {
    const int w = camera.resolution;
    const int h = camera.resolution;
    RasterCache cache;
    cache.width = w;
    cache.height = h;
    cache.face_id.assign(static_cast<size_t>(w) * h, -1);
    cache.weights.assign(static_cast<size_t>(w) * h, Eigen::Vector3d::Zero());
    cache.depth.assign(static_cast<size_t>(w) * h, std::numeric_limits<double>::infinity());

    const Eigen::Index n = vertices.rows();
    Eigen::MatrixX2d ndc(n, 2);
    Eigen::VectorXd depth(n);
    std::vector<std::uint8_t> in_front(static_cast<size_t>(n), 1);
    for (Eigen::Index v = 0; v < n; ++v) {
        Eigen::Vector2d p;
        double d;
        if (camera.project_checked(vertices.row(v), p, d)) {
            ndc.row(v) = p.transpose();
            depth[v] = d;
        } else {
            in_front[static_cast<size_t>(v)] = 0;
        }
    }

    const bool perspective = camera.mode == Projection::Perspective;
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
        if (!in_front[i0] || !in_front[i1] || !in_front[i2]) continue;
        const Eigen::Vector2d p0 = ndc.row(i0), p1 = ndc.row(i1), p2 = ndc.row(i2);
        const double area = edge_function(p0, p1, p2);
        if (std::abs(area) < 1e-14) continue;  // edge-on in screen space

        const double umin = std::min({p0.x(), p1.x(), p2.x()});
        const double umax = std::max({p0.x(), p1.x(), p2.x()});
        const double vmin = std::min({p0.y(), p1.y(), p2.y()});
        const double vmax = std::max({p0.y(), p1.y(), p2.y()});
        const int x0 = std::max(0, static_cast<int>(std::ceil(ndc_to_px(umin, w))));
        const int x1 = std::min(w - 1, static_cast<int>(std::floor(ndc_to_px(umax, w))));
        // v decreases with pixel row.
        const int y0 = std::max(0, static_cast<int>(std::ceil(ndc_to_py(vmax, h))));
        const int y1 = std::min(h - 1, static_cast<int>(std::floor(ndc_to_py(vmin, h))));

        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d q = pixel_center_ndc(x, y, w, h);
                double l0 = edge_function(p1, p2, q) / area;
                double l1 = edge_function(p2, p0, q) / area;
                double l2 = edge_function(p0, p1, q) / area;
                if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
                const double lsum = l0 + l1 + l2;
                l0 /= lsum;
                l1 /= lsum;
                l2 /= lsum;

                double pix_depth;
                Eigen::Vector3d wts;
                if (perspective) {
                    const double inv_d = l0 / depth[i0] + l1 / depth[i1] + l2 / depth[i2];
                    pix_depth = 1.0 / inv_d;
                    wts = {l0 / depth[i0] * pix_depth, l1 / depth[i1] * pix_depth,
                           l2 / depth[i2] * pix_depth};
                } else {
                    pix_depth = l0 * depth[i0] + l1 * depth[i1] + l2 * depth[i2];
                    wts = {l0, l1, l2};
                }

                const size_t p = static_cast<size_t>(y) * w + x;
                if (pix_depth < cache.depth[p] ||
                    (pix_depth == cache.depth[p] && static_cast<int>(f) < cache.face_id[p])) {
                    cache.depth[p] = pix_depth;
                    cache.face_id[p] = static_cast<int>(f);
                    cache.weights[p] = wts;
                }
            }
        }
    }
    return cache;
}

RasterCache rasterize_source(const TriMesh& mesh, const Camera& camera) {
    RasterCache cache = rasterize(mesh.vertices, mesh.faces, camera);
    const Eigen::Index n = mesh.num_vertices();
    cache.src_ndc.resize(n, 2);
    for (Eigen::Index v = 0; v < n; ++v) {
        Eigen::Vector2d p;
        double d;
        if (camera.project_checked(mesh.vertices.row(v), p, d)) {
            cache.src_ndc.row(v) = p.transpose();
        } else {
            cache.src_ndc.row(v).setZero();  // vertex never referenced by covered pixels
        }
    }
    return cache;
}

FlowMap render_flow(const RasterCache& cache, const Camera& camera, const Eigen::MatrixX3i& faces,
                    const Eigen::MatrixX3d& deformed, int* behind_camera_warnings) {
    if (cache.src_ndc.rows() != deformed.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "raster cache was not built on this source mesh");
    }
    FlowMap map;
    map.resize(cache.width, cache.height);

    const Eigen::Index n = deformed.rows();
    Eigen::MatrixX2d attr(n, 2);
    std::vector<std::uint8_t> ok(static_cast<size_t>(n), 1);
    for (Eigen::Index v = 0; v < n; ++v) {
        Eigen::Vector2d p;
        double d;
        if (camera.project_checked(deformed.row(v), p, d)) {
            attr.row(v) = (p - Eigen::Vector2d(cache.src_ndc.row(v))).transpose();
        } else {
            ok[static_cast<size_t>(v)] = 0;
        }
    }

    int behind = 0;
    for (size_t p = 0; p < cache.pixel_count(); ++p) {
        const int f = cache.face_id[p];
        if (f < 0) continue;
        const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
        if (!ok[i0] || !ok[i1] || !ok[i2]) {
            ++behind;
            continue;
        }
        const Eigen::Vector3d& wt = cache.weights[p];
        map.flow[p] = wt[0] * Eigen::Vector2d(attr.row(i0)) + wt[1] * Eigen::Vector2d(attr.row(i1)) +
                      wt[2] * Eigen::Vector2d(attr.row(i2));
        map.valid[p] = 1;
    }
    if (behind_camera_warnings) *behind_camera_warnings = behind;
    return map;
}

Eigen::MatrixX3d render_flow_backward(const RasterCache& cache, const Camera& camera,
                                      const Eigen::MatrixX3i& faces,
                                      const Eigen::MatrixX3d& deformed,
                                      const std::vector<Eigen::Vector2d>& pixel_grad) {
    if (pixel_grad.size() != cache.pixel_count()) {
        throw Error(ErrorCode::DimensionMismatch, "pixel gradient size mismatch");
    }
    const Eigen::Index n = deformed.rows();
    Eigen::MatrixX2d attr_grad = Eigen::MatrixX2d::Zero(n, 2);

    std::vector<std::uint8_t> ok(static_cast<size_t>(n), 1);
    for (Eigen::Index v = 0; v < n; ++v) {
        Eigen::Vector2d p;
        double d;
        if (!camera.project_checked(deformed.row(v), p, d)) ok[static_cast<size_t>(v)] = 0;
    }

    for (size_t p = 0; p < cache.pixel_count(); ++p) {
        const int f = cache.face_id[p];
        if (f < 0) continue;
        const Eigen::Vector2d& g = pixel_grad[p];
        if (g.isZero()) continue;
        const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
        if (!ok[i0] || !ok[i1] || !ok[i2]) continue;  // pixel was invalid in the forward pass
        const Eigen::Vector3d& wt = cache.weights[p];
        attr_grad.row(i0) += wt[0] * g.transpose();
        attr_grad.row(i1) += wt[1] * g.transpose();
        attr_grad.row(i2) += wt[2] * g.transpose();
    }

    Eigen::MatrixX3d vert_grad = Eigen::MatrixX3d::Zero(n, 3);
    for (Eigen::Index v = 0; v < n; ++v) {
        if (!ok[static_cast<size_t>(v)]) continue;
        const Eigen::Vector2d g = attr_grad.row(v);
        if (g.isZero()) continue;
        vert_grad.row(v) = (camera.projection_jacobian(deformed.row(v)).transpose() * g).transpose();
    }
    return vert_grad;
}

NormalImage render_normals(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces,
                           const Camera& camera, RasterCache* raster_out) {
    RasterCache raster = rasterize(vertices, faces, camera);
    NormalImage image = render_normals_from_raster(raster, vertices, faces);
    if (raster_out) *raster_out = std::move(raster);
    return image;
}

NormalImage render_normals_from_raster(const RasterCache& raster, const Eigen::MatrixX3d& vertices,
                                       const Eigen::MatrixX3i& faces) {
    NormalImage image;
    image.resize(raster.width, raster.height);
    const Eigen::MatrixX3d vn = vertex_normals(vertices, faces);

    for (size_t p = 0; p < raster.pixel_count(); ++p) {
        const int f = raster.face_id[p];
        if (f < 0) continue;
        const Eigen::Vector3d& wt = raster.weights[p];
        Eigen::Vector3d m = wt[0] * Eigen::Vector3d(vn.row(faces(f, 0))) +
                            wt[1] * Eigen::Vector3d(vn.row(faces(f, 1))) +
                            wt[2] * Eigen::Vector3d(vn.row(faces(f, 2)));
        const double len = m.norm();
        if (len > 1e-12) {
            image.normals[p] = m / len;
        } else {
            const Eigen::Vector3d a = vertices.row(faces(f, 0));
            const Eigen::Vector3d b = vertices.row(faces(f, 1));
            const Eigen::Vector3d c = vertices.row(faces(f, 2));
            image.normals[p] = (b - a).cross(c - a).normalized();
        }
        image.coverage[p] = 1;
    }
    return image;
}

Eigen::MatrixX3d render_normals_backward(const RasterCache& raster,
                                         const Eigen::MatrixX3d& vertices,
                                         const Eigen::MatrixX3i& faces,
                                         const std::vector<Eigen::Vector3d>& pixel_grad) {
    if (pixel_grad.size() != raster.pixel_count()) {
        throw Error(ErrorCode::DimensionMismatch, "pixel gradient size mismatch");
    }
    const Eigen::Index n = vertices.rows();

    // Recompute the forward intermediates: unnormalized vertex normal sums
    // and their normalized versions.
    Eigen::MatrixX3d unnorm = Eigen::MatrixX3d::Zero(n, 3);
    for (Eigen::Index i = 0; i < faces.rows(); ++i) {
        const Eigen::Vector3d a = vertices.row(faces(i, 0));
        const Eigen::Vector3d b = vertices.row(faces(i, 1));
        const Eigen::Vector3d c = vertices.row(faces(i, 2));
        const Eigen::Vector3d awn = 0.5 * (b - a).cross(c - a);
        unnorm.row(faces(i, 0)) += awn.transpose();
        unnorm.row(faces(i, 1)) += awn.transpose();
        unnorm.row(faces(i, 2)) += awn.transpose();
    }
    Eigen::MatrixX3d vn(n, 3);
    Eigen::VectorXd vn_len(n);
    for (Eigen::Index v = 0; v < n; ++v) {
        vn_len[v] = unnorm.row(v).norm();
        vn.row(v) = vn_len[v] > 1e-14 ? (unnorm.row(v) / vn_len[v]).eval() : unnorm.row(v).eval();
    }

    // Pixel renormalization and interpolation backward.
    Eigen::MatrixX3d vn_grad = Eigen::MatrixX3d::Zero(n, 3);
    for (size_t p = 0; p < raster.pixel_count(); ++p) {
        const int f = raster.face_id[p];
        if (f < 0) continue;
        const Eigen::Vector3d& g = pixel_grad[p];
        if (g.isZero()) continue;
        const Eigen::Vector3d& wt = raster.weights[p];
        const Eigen::Vector3d m = wt[0] * Eigen::Vector3d(vn.row(faces(f, 0))) +
                                  wt[1] * Eigen::Vector3d(vn.row(faces(f, 1))) +
                                  wt[2] * Eigen::Vector3d(vn.row(faces(f, 2)));
        const double len = m.norm();
        if (len <= 1e-12) continue;  // fallback pixels carry no attribute gradient
        const Eigen::Vector3d nrm = m / len;
        const Eigen::Vector3d gm = (g - nrm * nrm.dot(g)) / len;
        vn_grad.row(faces(f, 0)) += (wt[0] * gm).transpose();
        vn_grad.row(faces(f, 1)) += (wt[1] * gm).transpose();
        vn_grad.row(faces(f, 2)) += (wt[2] * gm).transpose();
    }

    // Vertex-normal normalization backward.
    Eigen::MatrixX3d unnorm_grad = Eigen::MatrixX3d::Zero(n, 3);
    for (Eigen::Index v = 0; v < n; ++v) {
        const Eigen::Vector3d g = vn_grad.row(v);
        if (g.isZero()) continue;
        if (vn_len[v] > 1e-14) {
            const Eigen::Vector3d nrm = vn.row(v);
            unnorm_grad.row(v) = ((g - nrm * nrm.dot(g)) / vn_len[v]).transpose();
        }
    }

    // Cross-product area weighting backward, scattered to face corners.
    Eigen::MatrixX3d vert_grad = Eigen::MatrixX3d::Zero(n, 3);
    for (Eigen::Index i = 0; i < faces.rows(); ++i) {
        const int ia = faces(i, 0), ib = faces(i, 1), ic = faces(i, 2);
        const Eigen::Vector3d g = 0.5 * (Eigen::Vector3d(unnorm_grad.row(ia)) +
                                         Eigen::Vector3d(unnorm_grad.row(ib)) +
                                         Eigen::Vector3d(unnorm_grad.row(ic)));
        if (g.isZero()) continue;
        const Eigen::Vector3d a = vertices.row(ia);
        const Eigen::Vector3d b = vertices.row(ib);
        const Eigen::Vector3d c = vertices.row(ic);
        const Eigen::Vector3d u = b - a;  // awn = 0.5 * u x w
        const Eigen::Vector3d w = c - a;
        const Eigen::Vector3d du = w.cross(g);
        const Eigen::Vector3d dw = g.cross(u);
        vert_grad.row(ib) += du.transpose();
        vert_grad.row(ic) += dw.transpose();
        vert_grad.row(ia) -= (du + dw).transpose();
    }
    return vert_grad;
}

} // namespace semreg
