#include "semreg/losses.hpp"

#include "semreg/error.hpp"
#include "semreg/kdtree.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace semreg {

namespace {

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

} // namespace

void LossWeights::validate() const {
    const double values[] = {flow, chamfer, normal, shear, identity_start, identity_end};
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorCode::InvalidArgument, "loss weights must be finite and nonnegative");
        }
    }
    if (identity_start < identity_end) {
        throw Error(ErrorCode::InvalidArgument, "identity schedule must decay (start >= end)");
    }
}

double identity_weight(const LossWeights& weights, int iteration, int total_iterations) {
    if (total_iterations <= 1) return weights.identity_start;
    const double f = static_cast<double>(iteration) / static_cast<double>(total_iterations - 1);
    return weights.identity_start + (weights.identity_end - weights.identity_start) * f;
}

double LossReport::grad_norm() const {
    double sq = grad_translation.squaredNorm();
    for (const auto& g : grad_face_matrices) sq += g.squaredNorm();
    return std::sqrt(sq);
}

bool LossReport::finite() const {
    return std::isfinite(total) && std::isfinite(flow) && std::isfinite(chamfer) &&
           std::isfinite(normal) && std::isfinite(identity) && std::isfinite(shear);
}

double flow_loss(const std::vector<FlowMap>& rendered, const std::vector<FlowMap>& semantic,
                 Reduction reduction, std::vector<std::vector<Eigen::Vector2d>>* pixel_grads,
                 std::vector<long>* valid_counts) {
    if (rendered.size() != semantic.size()) {
        throw Error(ErrorCode::DimensionMismatch, "flow view count mismatch");
    }
    if (pixel_grads) pixel_grads->assign(rendered.size(), {});
    if (valid_counts) valid_counts->assign(rendered.size(), 0);

    double loss = 0.0;
    long total_valid = 0;
    for (size_t v = 0; v < rendered.size(); ++v) {
        const FlowMap& r = rendered[v];
        const FlowMap& s = semantic[v];
        if (r.width != s.width || r.height != s.height) {
            throw Error(ErrorCode::ResolutionMismatch, "flow resolution mismatch in view " + std::to_string(v));
        }
        long count = 0;
        for (size_t p = 0; p < r.pixel_count(); ++p) {
            if (r.valid[p] && s.valid[p]) ++count;
        }
        if (valid_counts) (*valid_counts)[v] = count;
        total_valid += count;
        if (count == 0) continue;

        const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(count) : 1.0;
        double view_loss = 0.0;
        std::vector<Eigen::Vector2d>* grads = nullptr;
        if (pixel_grads) {
            (*pixel_grads)[v].assign(r.pixel_count(), Eigen::Vector2d::Zero());
            grads = &(*pixel_grads)[v];
        }
        for (size_t p = 0; p < r.pixel_count(); ++p) {
            if (!(r.valid[p] && s.valid[p])) continue;
            const Eigen::Vector2d d = r.flow[p] - s.flow[p];
            view_loss += std::abs(d.x()) + std::abs(d.y());
            if (grads) (*grads)[p] = scale * Eigen::Vector2d(sign_of(d.x()), sign_of(d.y()));
        }
        loss += scale * view_loss;
    }
    if (total_valid == 0) {
        throw Error(ErrorCode::NoValidPixels, "no view has overlapping valid flow pixels");
    }
    return loss;
}

ChamferAssignments chamfer_assignments(const Eigen::MatrixX3d& deformed,
                                       const Eigen::MatrixX3d& target, ThreadPool& pool) {
    if (deformed.rows() == 0 || target.rows() == 0) {
        throw Error(ErrorCode::InvalidArgument, "chamfer requires nonempty point sets");
    }
    ChamferAssignments out;
    out.forward.resize(static_cast<size_t>(deformed.rows()));
    out.reverse.resize(static_cast<size_t>(target.rows()));
    {
        PointKdTree tree(target);
        pool.parallel_for(0, deformed.rows(), [&](std::int64_t i) {
            out.forward[static_cast<size_t>(i)] = tree.nearest(deformed.row(i));
        });
    }
    {
        PointKdTree tree(deformed);
        pool.parallel_for(0, target.rows(), [&](std::int64_t i) {
            out.reverse[static_cast<size_t>(i)] = tree.nearest(target.row(i));
        });
    }
    return out;
}

double chamfer_loss(const Eigen::MatrixX3d& deformed, const Eigen::MatrixX3d& target,
                    const ChamferAssignments& assignments, Eigen::MatrixX3d* grad) {
    const Eigen::Index n = deformed.rows();
    const Eigen::Index m = target.rows();
    if (assignments.forward.size() != static_cast<size_t>(n) ||
        assignments.reverse.size() != static_cast<size_t>(m)) {
        throw Error(ErrorCode::DimensionMismatch, "chamfer assignment size mismatch");
    }
    if (grad) grad->setZero(n, 3);

    double fwd = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d d = deformed.row(i) - target.row(assignments.forward[static_cast<size_t>(i)]);
        fwd += d.squaredNorm();
        if (grad) grad->row(i) += (d / static_cast<double>(n)).transpose();
    }
    double rev = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        const int i = assignments.reverse[static_cast<size_t>(j)];
        const Eigen::Vector3d d = deformed.row(i) - target.row(j);
        rev += d.squaredNorm();
        if (grad) grad->row(i) += (d / static_cast<double>(m)).transpose();
    }
    return 0.5 * (fwd / static_cast<double>(n) + rev / static_cast<double>(m));
}

double normal_map_loss(const std::vector<NormalImage>& rendered,
                       const std::vector<NormalImage>& target, Reduction reduction,
                       std::vector<std::vector<Eigen::Vector3d>>* pixel_grads, bool* all_empty) {
    if (rendered.size() != target.size()) {
        throw Error(ErrorCode::DimensionMismatch, "normal map view count mismatch");
    }
    if (pixel_grads) pixel_grads->assign(rendered.size(), {});

    double loss = 0.0;
    long total_overlap = 0;
    for (size_t v = 0; v < rendered.size(); ++v) {
        const NormalImage& r = rendered[v];
        const NormalImage& t = target[v];
        if (r.width != t.width || r.height != t.height) {
            throw Error(ErrorCode::ResolutionMismatch, "normal map resolution mismatch");
        }
        long count = 0;
        for (size_t p = 0; p < r.normals.size(); ++p) {
            if (r.coverage[p] && t.coverage[p]) ++count;
        }
        total_overlap += count;
        if (count == 0) continue;  // disjoint silhouettes contribute nothing

        const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(count) : 1.0;
        std::vector<Eigen::Vector3d>* grads = nullptr;
        if (pixel_grads) {
            (*pixel_grads)[v].assign(r.normals.size(), Eigen::Vector3d::Zero());
            grads = &(*pixel_grads)[v];
        }
        double view_loss = 0.0;
        for (size_t p = 0; p < r.normals.size(); ++p) {
            if (!(r.coverage[p] && t.coverage[p])) continue;
            const Eigen::Vector3d d = r.normals[p] - t.normals[p];
            view_loss += std::abs(d.x()) + std::abs(d.y()) + std::abs(d.z());
            if (grads) {
                (*grads)[p] = scale * Eigen::Vector3d(sign_of(d.x()), sign_of(d.y()), sign_of(d.z()));
            }
        }
        loss += scale * view_loss;
    }
    if (all_empty) *all_empty = total_overlap == 0;
    return loss;
}

double identity_loss(const JacobianField& field, Reduction reduction,
                     std::vector<Eigen::Matrix3d>* grad, double weight) {
    const Eigen::Index f = field.size();
    if (f == 0) return 0.0;
    const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(f) : 1.0;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < f; ++i) {
        const Eigen::Matrix3d d = field.face_matrices[static_cast<size_t>(i)] - Eigen::Matrix3d::Identity();
        const double norm = d.norm();
        loss += norm;
        if (grad && norm > 1e-14) {
            (*grad)[static_cast<size_t>(i)] += weight * scale / norm * d;
        }
    }
    return scale * loss;
}

Eigen::Matrix3d polar_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d s(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    return u * s.asDiagonal() * v.transpose();
}

std::vector<Eigen::Matrix3d> polar_rotations(const JacobianField& field, ThreadPool& pool) {
    std::vector<Eigen::Matrix3d> out(field.face_matrices.size());
    pool.parallel_for(0, field.size(), [&](std::int64_t i) {
        out[static_cast<size_t>(i)] = polar_rotation(field.face_matrices[static_cast<size_t>(i)]);
    });
    return out;
}

double shear_loss(const JacobianField& field, const std::vector<Eigen::Matrix3d>& rotations,
                  Reduction reduction, std::vector<Eigen::Matrix3d>* grad, double weight) {
    const Eigen::Index f = field.size();
    if (rotations.size() != static_cast<size_t>(f)) {
        throw Error(ErrorCode::DimensionMismatch, "rotation count mismatch");
    }
    if (f == 0) return 0.0;
    const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(f) : 1.0;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < f; ++i) {
        const Eigen::Matrix3d d =
            field.face_matrices[static_cast<size_t>(i)] - rotations[static_cast<size_t>(i)];
        const double norm = d.norm();
        loss += norm;
        if (grad && norm > 1e-14) {
            (*grad)[static_cast<size_t>(i)] += weight * scale / norm * d;
        }
    }
    return scale * loss;
}

LossReport total_loss(const Scene& scene, const JacobianField& field, const LossWeights& weights,
                      const TotalLossOptions& options, ThreadPool& pool) {
    weights.validate();
    if (!scene.source || !scene.frames || !scene.poisson || !scene.rig || !scene.source_rasters ||
        !scene.semantic_flows || !scene.target || !scene.target_normals) {
        throw Error(ErrorCode::InvalidArgument, "incomplete scene");
    }
    const int views = scene.rig->view_count();
    if (static_cast<int>(scene.source_rasters->size()) != views ||
        static_cast<int>(scene.semantic_flows->size()) != views ||
        static_cast<int>(scene.target_normals->size()) != views) {
        throw Error(ErrorCode::DimensionMismatch, "scene view counts disagree with the rig");
    }
    const Eigen::Index n = scene.source->num_vertices();
    const Eigen::Index f = scene.source->num_faces();
    if (field.size() != f) {
        throw Error(ErrorCode::DimensionMismatch, "field size does not match the source mesh");
    }

    LossReport report;
    report.grad_face_matrices.assign(static_cast<size_t>(f), Eigen::Matrix3d::Zero());

    // Forward deformation.
    const Eigen::MatrixXd stacked = project_to_tangent(field, *scene.frames);
    Eigen::MatrixX3d deformed = scene.poisson->solve_poisson(stacked);
    deformed.rowwise() += field.translation.transpose();

    const double lambda_id = identity_weight(weights, options.iteration, options.total_iterations);

    // --- Flow term: render per view, compare, and pull the pixel gradient
    // back to the deformed vertices. Per-view buffers keep the reduction
    // order fixed regardless of thread count.
    std::vector<FlowMap> rendered(static_cast<size_t>(views));
    pool.parallel_for(0, views, [&](std::int64_t v) {
        rendered[static_cast<size_t>(v)] = render_flow((*scene.source_rasters)[static_cast<size_t>(v)],
                                                       scene.rig->cameras[static_cast<size_t>(v)],
                                                       scene.source->faces, deformed);
    });
    std::vector<std::vector<Eigen::Vector2d>> flow_pixel_grads;
    report.flow = flow_loss(rendered, *scene.semantic_flows, weights.reduction,
                            options.with_gradients ? &flow_pixel_grads : nullptr,
                            &report.valid_pixels_per_view);

    Eigen::MatrixX3d vertex_grad = Eigen::MatrixX3d::Zero(n, 3);
    if (options.with_gradients && weights.flow > 0.0) {
        std::vector<Eigen::MatrixX3d> per_view(static_cast<size_t>(views));
        pool.parallel_for(0, views, [&](std::int64_t v) {
            if (flow_pixel_grads[static_cast<size_t>(v)].empty()) {
                per_view[static_cast<size_t>(v)].setZero(n, 3);
                return;
            }
            per_view[static_cast<size_t>(v)] = render_flow_backward(
                (*scene.source_rasters)[static_cast<size_t>(v)],
                scene.rig->cameras[static_cast<size_t>(v)], scene.source->faces, deformed,
                flow_pixel_grads[static_cast<size_t>(v)]);
        });
        for (const auto& g : per_view) vertex_grad += weights.flow * g;
    }

    // --- Chamfer term.
    const ChamferAssignments* assignments = nullptr;
    ChamferAssignments fresh_assignments;
    if (options.frozen) {
        assignments = &options.frozen->chamfer;
    } else {
        fresh_assignments = chamfer_assignments(deformed, scene.target->vertices, pool);
        assignments = &fresh_assignments;
    }
    Eigen::MatrixX3d chamfer_grad;
    report.chamfer = chamfer_loss(deformed, scene.target->vertices, *assignments,
                                  options.with_gradients ? &chamfer_grad : nullptr);
    if (options.with_gradients && weights.chamfer > 0.0) {
        vertex_grad += weights.chamfer * chamfer_grad;
    }

    // --- Normal term. Coverage comes from the deformed geometry (recomputed
    // here, or reused when frozen); attributes stay differentiable.
    std::vector<const RasterCache*> normal_rasters(static_cast<size_t>(views));
    std::vector<RasterCache> fresh_rasters;
    if (options.frozen) {
        for (int v = 0; v < views; ++v) {
            normal_rasters[static_cast<size_t>(v)] = &options.frozen->normal_rasters[static_cast<size_t>(v)];
        }
    } else {
        fresh_rasters.resize(static_cast<size_t>(views));
        pool.parallel_for(0, views, [&](std::int64_t v) {
            fresh_rasters[static_cast<size_t>(v)] =
                rasterize(deformed, scene.source->faces, scene.rig->cameras[static_cast<size_t>(v)]);
        });
        for (int v = 0; v < views; ++v) normal_rasters[static_cast<size_t>(v)] = &fresh_rasters[static_cast<size_t>(v)];
    }
    std::vector<NormalImage> rendered_normals(static_cast<size_t>(views));
    pool.parallel_for(0, views, [&](std::int64_t v) {
        rendered_normals[static_cast<size_t>(v)] = render_normals_from_raster(
            *normal_rasters[static_cast<size_t>(v)], deformed, scene.source->faces);
    });
    std::vector<std::vector<Eigen::Vector3d>> normal_pixel_grads;
    report.normal = normal_map_loss(rendered_normals, *scene.target_normals, weights.reduction,
                                    options.with_gradients ? &normal_pixel_grads : nullptr);
    if (options.with_gradients && weights.normal > 0.0) {
        std::vector<Eigen::MatrixX3d> per_view(static_cast<size_t>(views));
        pool.parallel_for(0, views, [&](std::int64_t v) {
            if (normal_pixel_grads[static_cast<size_t>(v)].empty()) {
                per_view[static_cast<size_t>(v)].setZero(n, 3);
                return;
            }
            per_view[static_cast<size_t>(v)] = render_normals_backward(
                *normal_rasters[static_cast<size_t>(v)], deformed, scene.source->faces,
                normal_pixel_grads[static_cast<size_t>(v)]);
        });
        for (const auto& g : per_view) vertex_grad += weights.normal * g;
    }

    // --- Regularizers (direct gradients in face-matrix space).
    report.identity = identity_loss(field, weights.reduction,
                                    options.with_gradients ? &report.grad_face_matrices : nullptr,
                                    lambda_id);
    const std::vector<Eigen::Matrix3d>* rotations = nullptr;
    std::vector<Eigen::Matrix3d> fresh_rotations;
    if (options.frozen) {
        rotations = &options.frozen->rotations;
    } else {
        fresh_rotations = polar_rotations(field, pool);
        rotations = &fresh_rotations;
    }
    report.shear = shear_loss(field, *rotations, weights.reduction,
                              options.with_gradients ? &report.grad_face_matrices : nullptr,
                              weights.shear);

    // --- Chain vertex-space gradients into the state.
    if (options.with_gradients) {
        report.grad_translation = vertex_grad.colwise().sum().transpose();
        const Eigen::MatrixXd stacked_grad = scene.poisson->solve_adjoint(vertex_grad);
        project_to_tangent_adjoint(stacked_grad, *scene.frames, report.grad_face_matrices);
    }

    report.total = weights.flow * report.flow + weights.chamfer * report.chamfer +
                   weights.normal * report.normal + lambda_id * report.identity +
                   weights.shear * report.shear;

    if (options.capture) {
        options.capture->chamfer = options.frozen ? options.frozen->chamfer : std::move(fresh_assignments);
        options.capture->rotations = options.frozen ? options.frozen->rotations : std::move(fresh_rotations);
        options.capture->normal_rasters.clear();
        if (options.frozen) {
            options.capture->normal_rasters = options.frozen->normal_rasters;
        } else {
            options.capture->normal_rasters = std::move(fresh_rasters);
        }
    }
    return report;
}

} // namespace semreg
