#include "semreg/poisson.hpp"

#include "semreg/error.hpp"

#include <string>
#include <vector>

namespace semreg {

PoissonSystem::PoissonSystem(const TriMesh& mesh, const TangentFrames& frames, int pinned_vertex)
    : n_(mesh.num_vertices()), f_(mesh.num_faces()), pin_(pinned_vertex) {
    if (pin_ < 0 || pin_ >= n_) {
        throw Error(ErrorCode::InvalidArgument, "pinned vertex out of range");
    }
    if (!is_connected(mesh)) {
        throw Error(ErrorCode::DisconnectedMesh, "Poisson system requires a connected mesh");
    }

    // Per face: gradient in tangent coordinates of the hat-function
    // interpolant, g = (E^T B)^{-1} [f_k - f_j; f_l - f_j].
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(f_) * 6);
    mass_.resize(2 * f_);
    for (Eigen::Index i = 0; i < f_; ++i) {
        const int j = mesh.faces(i, 0), k = mesh.faces(i, 1), l = mesh.faces(i, 2);
        const Eigen::Vector3d vj = mesh.vertices.row(j);
        Eigen::Matrix<double, 3, 2> edges;
        edges.col(0) = Eigen::Vector3d(mesh.vertices.row(k)) - vj;
        edges.col(1) = Eigen::Vector3d(mesh.vertices.row(l)) - vj;
        const Eigen::Matrix2d etb = edges.transpose() * frames.basis[static_cast<size_t>(i)];
        const double det = etb.determinant();
        if (std::abs(det) < 1e-16) {
            throw Error(ErrorCode::DegenerateFace, "face " + std::to_string(i) + " degenerate in gradient assembly");
        }
        const Eigen::Matrix2d w = etb.inverse();
        Eigen::Matrix<double, 2, 3> diff;
        diff << -1, 1, 0,
                -1, 0, 1;
        const Eigen::Matrix<double, 2, 3> local = w * diff;
        for (int r = 0; r < 2; ++r) {
            trips.emplace_back(2 * i + r, j, local(r, 0));
            trips.emplace_back(2 * i + r, k, local(r, 1));
            trips.emplace_back(2 * i + r, l, local(r, 2));
        }
        mass_[2 * i] = frames.areas[i];
        mass_[2 * i + 1] = frames.areas[i];
    }
    grad_.resize(2 * f_, n_);
    grad_.setFromTriplets(trips.begin(), trips.end());

    laplacian_ = grad_.transpose() * mass_.asDiagonal() * grad_;
    laplacian_.makeCompressed();

    // Reduced system with the pinned row/column eliminated stays strictly
    // positive definite on a connected mesh.
    Eigen::SparseMatrix<double> reduced(n_ - 1, n_ - 1);
    std::vector<Eigen::Triplet<double>> rtrips;
    rtrips.reserve(static_cast<size_t>(laplacian_.nonZeros()));
    for (Eigen::Index col = 0; col < laplacian_.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(laplacian_, col); it; ++it) {
            if (it.row() == pin_ || it.col() == pin_) continue;
            const Eigen::Index r = it.row() < pin_ ? it.row() : it.row() - 1;
            const Eigen::Index c = it.col() < pin_ ? it.col() : it.col() - 1;
            rtrips.emplace_back(r, c, it.value());
        }
    }
    reduced.setFromTriplets(rtrips.begin(), rtrips.end());

    solver_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    solver_->compute(reduced);
    if (solver_->info() != Eigen::Success) {
        const double diag_min = laplacian_.diagonal().minCoeff();
        const double diag_max = laplacian_.diagonal().maxCoeff();
        throw Error(ErrorCode::FactorizationFailed,
                    "Laplacian factorization failed (n=" + std::to_string(n_) +
                        ", diag range [" + std::to_string(diag_min) + ", " +
                        std::to_string(diag_max) + "])");
    }
}

Eigen::MatrixXd PoissonSystem::solve(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() != n_) throw Error(ErrorCode::DimensionMismatch, "rhs row count mismatch");
    if (!rhs.allFinite()) throw Error(ErrorCode::NonFiniteValue, "non-finite right-hand side");
    Eigen::MatrixXd reduced(n_ - 1, rhs.cols());
    reduced.topRows(pin_) = rhs.topRows(pin_);
    reduced.bottomRows(n_ - 1 - pin_) = rhs.bottomRows(n_ - 1 - pin_);
    const Eigen::MatrixXd x = solver_->solve(reduced);
    Eigen::MatrixXd full(n_, rhs.cols());
    full.topRows(pin_) = x.topRows(pin_);
    full.row(pin_).setZero();
    full.bottomRows(n_ - 1 - pin_) = x.bottomRows(n_ - 1 - pin_);
    return full;
}

Eigen::MatrixX3d PoissonSystem::solve_poisson(const Eigen::MatrixXd& jacobians_stacked) const {
    if (jacobians_stacked.rows() != 2 * f_ || jacobians_stacked.cols() != 3) {
        throw Error(ErrorCode::DimensionMismatch, "stacked Jacobians must be 2F x 3");
    }
    if (!jacobians_stacked.allFinite()) {
        throw Error(ErrorCode::NonFiniteValue, "non-finite Jacobians in Poisson solve");
    }
    const Eigen::MatrixXd rhs = grad_.transpose() * (mass_.asDiagonal() * jacobians_stacked);
    return solve(rhs);
}

Eigen::MatrixXd PoissonSystem::solve_adjoint(const Eigen::MatrixXd& grad_positions) const {
    if (grad_positions.rows() != n_) {
        throw Error(ErrorCode::DimensionMismatch, "adjoint input row count mismatch");
    }
    const Eigen::MatrixXd z = solve(grad_positions);
    return mass_.asDiagonal() * (grad_ * z);
}

} // namespace semreg
