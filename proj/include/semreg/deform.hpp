#pragma once

#include "semreg/mesh.hpp"
#include "semreg/poisson.hpp"

#include <vector>

namespace semreg {

// Optimization state of the deformation model: one unconstrained 3x3 matrix
// per face plus a global translation restoring the gauge-fixed degree of
// freedom.
struct JacobianField {
    std::vector<Eigen::Matrix3d> face_matrices;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Index size() const { return static_cast<Eigen::Index>(face_matrices.size()); }
    bool all_finite() const;
};

JacobianField init_identity(const TriMesh& mesh);

// J_i = tilde_J_i * B_i per face, stacked as a 2F x 3 matrix whose rows
// 2i..2i+1 hold J_i^T (the layout PoissonSystem::solve_poisson consumes).
Eigen::MatrixXd project_to_tangent(const JacobianField& field, const TangentFrames& frames);

// Adjoint of project_to_tangent: accumulates d(loss)/d(tilde_J_i) from
// d(loss)/d(stacked J).
void project_to_tangent_adjoint(const Eigen::MatrixXd& grad_stacked, const TangentFrames& frames,
                                std::vector<Eigen::Matrix3d>& grad_face_matrices);

// Full forward pass: tangent projection, Poisson solve, plus translation.
Eigen::MatrixX3d deform_vertices(const PoissonSystem& system, const TangentFrames& frames,
                                 const JacobianField& field);

} // namespace semreg
