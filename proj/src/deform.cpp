#include "semreg/deform.hpp"

#include "semreg/error.hpp"

namespace semreg {

bool JacobianField::all_finite() const {
    if (!translation.allFinite()) return false;
    for (const auto& m : face_matrices) {
        if (!m.allFinite()) return false;
    }
    return true;
}

JacobianField init_identity(const TriMesh& mesh) {
    JacobianField field;
    field.face_matrices.assign(static_cast<size_t>(mesh.num_faces()), Eigen::Matrix3d::Identity());
    field.translation.setZero();
    return field;
}

Eigen::MatrixXd project_to_tangent(const JacobianField& field, const TangentFrames& frames) {
    const Eigen::Index f = field.size();
    if (f != static_cast<Eigen::Index>(frames.basis.size())) {
        throw Error(ErrorCode::DimensionMismatch, "field/frames face count mismatch");
    }
    Eigen::MatrixXd stacked(2 * f, 3);
    for (Eigen::Index i = 0; i < f; ++i) {
        const Eigen::Matrix<double, 3, 2> j = field.face_matrices[static_cast<size_t>(i)] *
                                              frames.basis[static_cast<size_t>(i)];
        stacked.block<2, 3>(2 * i, 0) = j.transpose();
    }
    return stacked;
}

void project_to_tangent_adjoint(const Eigen::MatrixXd& grad_stacked, const TangentFrames& frames,
                                std::vector<Eigen::Matrix3d>& grad_face_matrices) {
    const Eigen::Index f = static_cast<Eigen::Index>(frames.basis.size());
    if (grad_stacked.rows() != 2 * f || grad_stacked.cols() != 3) {
        throw Error(ErrorCode::DimensionMismatch, "stacked gradient must be 2F x 3");
    }
    if (grad_face_matrices.size() != static_cast<size_t>(f)) {
        throw Error(ErrorCode::DimensionMismatch, "gradient accumulator size mismatch");
    }
    for (Eigen::Index i = 0; i < f; ++i) {
        const Eigen::Matrix<double, 3, 2> g = grad_stacked.block<2, 3>(2 * i, 0).transpose();
        grad_face_matrices[static_cast<size_t>(i)] += g * frames.basis[static_cast<size_t>(i)].transpose();
    }
}

Eigen::MatrixX3d deform_vertices(const PoissonSystem& system, const TangentFrames& frames,
                                 const JacobianField& field) {
    Eigen::MatrixX3d phi = system.solve_poisson(project_to_tangent(field, frames));
    phi.rowwise() += field.translation.transpose();
    return phi;
}

} // namespace semreg
