#pragma once

#include "semreg/camera.hpp"
#include "semreg/deform.hpp"
#include "semreg/mesh.hpp"
#include "semreg/parallel.hpp"
#include "semreg/poisson.hpp"
#include "semreg/raster.hpp"

#include <optional>
#include <vector>

namespace semreg {

enum class Reduction { Mean, Sum };

// Loss weights. Defaults follow the registration protocol: flow 10.0,
// chamfer 1.0, normal 0.1, shear 0.1, identity decaying linearly from 0.01
// to 0.0001 over the run.
struct LossWeights {
    double flow = 10.0;
    double chamfer = 1.0;
    double normal = 0.1;
    double shear = 0.1;
    double identity_start = 0.01;
    double identity_end = 0.0001;
    Reduction reduction = Reduction::Mean;

    void validate() const;
};

double identity_weight(const LossWeights& weights, int iteration, int total_iterations);

struct LossReport {
    double flow = 0.0;
    double chamfer = 0.0;
    double normal = 0.0;
    double identity = 0.0;
    double shear = 0.0;
    double total = 0.0;
    std::vector<Eigen::Matrix3d> grad_face_matrices;
    Eigen::Vector3d grad_translation = Eigen::Vector3d::Zero();
    std::vector<long> valid_pixels_per_view;

    double grad_norm() const;
    bool finite() const;
};

// L1 flow discrepancy over pixels valid in both maps, per view. Mean mode
// divides by the per-view valid count; views with no overlap contribute 0.
// Throws when every view has zero overlap. pixel_grads (optional) receives
// the per-pixel subgradient with respect to the rendered maps.
double flow_loss(const std::vector<FlowMap>& rendered, const std::vector<FlowMap>& semantic,
                 Reduction reduction,
                 std::vector<std::vector<Eigen::Vector2d>>* pixel_grads = nullptr,
                 std::vector<long>* valid_counts = nullptr);

// Nearest-neighbor index per deformed vertex (fwd) and per target vertex (rev).
struct ChamferAssignments {
    std::vector<int> forward;
    std::vector<int> reverse;
};

ChamferAssignments chamfer_assignments(const Eigen::MatrixX3d& deformed,
                                       const Eigen::MatrixX3d& target, ThreadPool& pool);

// Symmetric mean of squared nearest-neighbor distances with the assignments
// held fixed: 0.5*(mean_fwd + mean_rev). grad (optional) receives
// d(loss)/d(deformed).
double chamfer_loss(const Eigen::MatrixX3d& deformed, const Eigen::MatrixX3d& target,
                    const ChamferAssignments& assignments, Eigen::MatrixX3d* grad = nullptr);

// Per-view L1 between rendered and target normal maps over the coverage
// intersection, mean per pixel, summed over views. pixel_grads receives the
// per-pixel subgradient with respect to the rendered normals.
double normal_map_loss(const std::vector<NormalImage>& rendered,
                       const std::vector<NormalImage>& target, Reduction reduction,
                       std::vector<std::vector<Eigen::Vector3d>>* pixel_grads = nullptr,
                       bool* all_empty = nullptr);

// Frobenius distance to the identity per face. grad accumulates (+=).
double identity_loss(const JacobianField& field, Reduction reduction,
                     std::vector<Eigen::Matrix3d>* grad = nullptr, double weight = 1.0);

// Closest rotation (det +1) in Frobenius norm via SVD.
Eigen::Matrix3d polar_rotation(const Eigen::Matrix3d& m);

std::vector<Eigen::Matrix3d> polar_rotations(const JacobianField& field, ThreadPool& pool);

// Frobenius distance to the given per-face rotations, which are treated as
// constants within the evaluation. grad accumulates (+=).
double shear_loss(const JacobianField& field, const std::vector<Eigen::Matrix3d>& rotations,
                  Reduction reduction, std::vector<Eigen::Matrix3d>* grad = nullptr,
                  double weight = 1.0);

// Everything total_loss needs besides the optimization state. All members are
// borrowed and must outlive the evaluation.
struct Scene {
    const TriMesh* source = nullptr;
    const TriMesh* target = nullptr;
    const TangentFrames* frames = nullptr;
    const PoissonSystem* poisson = nullptr;
    const CameraRig* rig = nullptr;
    const std::vector<RasterCache>* source_rasters = nullptr;
    const std::vector<FlowMap>* semantic_flows = nullptr;
    const std::vector<NormalImage>* target_normals = nullptr;
};

// Snapshot of the non-smooth switches inside one evaluation: chamfer
// assignments, polar rotations, and the deformed-geometry rasters of the
// normal term. Gradient verification freezes these across probes.
struct FrozenEval {
    ChamferAssignments chamfer;
    std::vector<Eigen::Matrix3d> rotations;
    std::vector<RasterCache> normal_rasters;
};

struct TotalLossOptions {
    int iteration = 0;
    int total_iterations = 1;
    bool with_gradients = true;
    const FrozenEval* frozen = nullptr;  // reuse switches instead of recomputing
    FrozenEval* capture = nullptr;       // store freshly computed switches
};

// Assembles the weighted objective and, when requested, the full gradient:
// vertex-space terms chain through the Poisson adjoint and the tangent
// projection adjoint into the face matrices, and directly into the
// translation; the regularizers contribute to the face matrices alone.
LossReport total_loss(const Scene& scene, const JacobianField& field, const LossWeights& weights,
                      const TotalLossOptions& options, ThreadPool& pool);

} // namespace semreg
