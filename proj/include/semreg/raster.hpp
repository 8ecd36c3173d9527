#pragma once

#include "semreg/camera.hpp"
#include "semreg/mesh.hpp"

#include <cstdint>
#include <vector>

namespace semreg {

// Per-pixel 2D displacement in NDC units plus a validity flag. Invalid
// pixels carry zero displacement.
struct FlowMap {
    int width = 0;
    int height = 0;
    std::vector<Eigen::Vector2d> flow;
    std::vector<std::uint8_t> valid;

    void resize(int w, int h) {
        width = w;
        height = h;
        flow.assign(static_cast<size_t>(w) * h, Eigen::Vector2d::Zero());
        valid.assign(static_cast<size_t>(w) * h, 0);
    }
    size_t pixel_count() const { return flow.size(); }
};

struct NormalImage {
    int width = 0;
    int height = 0;
    std::vector<Eigen::Vector3d> normals;
    std::vector<std::uint8_t> coverage;

    void resize(int w, int h) {
        width = w;
        height = h;
        normals.assign(static_cast<size_t>(w) * h, Eigen::Vector3d::Zero());
        coverage.assign(static_cast<size_t>(w) * h, 0);
    }
};

// Hard z-buffered rasterization result: covered face id (-1 = empty),
// interpolation weights (perspective-correct; nonnegative, summing to 1 on
// covered pixels), and the depth buffer. For rasterizations of the source
// mesh, src_ndc additionally caches the per-vertex projections used by the
// flow shader.
struct RasterCache {
    int width = 0;
    int height = 0;
    std::vector<int> face_id;
    std::vector<Eigen::Vector3d> weights;
    std::vector<double> depth;
    Eigen::MatrixX2d src_ndc;  // only filled by rasterize_source

    size_t pixel_count() const { return face_id.size(); }
    bool covered(size_t p) const { return face_id[p] >= 0; }
};

// Deterministic hard rasterization at pixel centers: nearest face wins, ties
// at equal depth go to the lower face id. No back-face culling. Perspective
// faces with any vertex behind the near plane are skipped.
RasterCache rasterize(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces,
                      const Camera& camera);

// Rasterizes the (static) source mesh and caches its per-vertex projections.
RasterCache rasterize_source(const TriMesh& mesh, const Camera& camera);

// Flow shading: per-vertex attribute F_v = project(deformed_v) - project(source_v),
// interpolated with the cached source-coverage weights. Pixels whose face has
// a deformed vertex behind the camera are marked invalid and counted in
// behind_camera_warnings.
FlowMap render_flow(const RasterCache& cache, const Camera& camera, const Eigen::MatrixX3i& faces,
                    const Eigen::MatrixX3d& deformed, int* behind_camera_warnings = nullptr);

// Reverse-mode through render_flow. Coverage and weights are constants (the
// rasterized geometry is the static source); the chain runs through the
// interpolation weights and the projection Jacobian at the deformed
// positions. Returns d(loss)/d(deformed), n x 3.
Eigen::MatrixX3d render_flow_backward(const RasterCache& cache, const Camera& camera,
                                      const Eigen::MatrixX3i& faces,
                                      const Eigen::MatrixX3d& deformed,
                                      const std::vector<Eigen::Vector2d>& pixel_grad);

// Renders interpolated, per-pixel-renormalized vertex normals of the given
// geometry. Coverage is recomputed from the geometry itself. If raster_out is
// non-null the fresh raster is stored there (reused by the backward pass and
// by frozen-raster evaluations).
NormalImage render_normals(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces,
                           const Camera& camera, RasterCache* raster_out = nullptr);

// Same shading against a fixed raster (coverage/weights frozen, attributes
// recomputed from the given positions).
NormalImage render_normals_from_raster(const RasterCache& raster, const Eigen::MatrixX3d& vertices,
                                       const Eigen::MatrixX3i& faces);

// Reverse-mode through the normal shading attribute path: pixel renormalize,
// weight interpolation, vertex-normal normalization, and the cross-product
// area weighting. The raster itself is treated as constant.
Eigen::MatrixX3d render_normals_backward(const RasterCache& raster,
                                         const Eigen::MatrixX3d& vertices,
                                         const Eigen::MatrixX3i& faces,
                                         const std::vector<Eigen::Vector3d>& pixel_grad);

} // namespace semreg
