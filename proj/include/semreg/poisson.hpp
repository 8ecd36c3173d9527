#pragma once

#include "semreg/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>

namespace semreg {

// Discrete gradient operator, face-area mass matrix, cotangent Laplacian
// L = grad^T A grad, and a reusable factorization of L with one vertex pinned
// to remove the translational nullspace.
//
// The gradient operator maps per-vertex scalars to per-face gradients
// expressed in each face's tangent basis: rows 2i and 2i+1 hold the two
// tangent components for face i. Solving
//     L Phi = grad^T A J
// with J the stacked per-face target Jacobians (rows 2i..2i+1 hold J_i^T)
// gives the least-squares-optimal vertex positions with the pinned vertex at
// the origin.
class PoissonSystem {
public:
    PoissonSystem(const TriMesh& mesh, const TangentFrames& frames, int pinned_vertex = 0);

    const Eigen::SparseMatrix<double>& gradient() const { return grad_; }
    const Eigen::VectorXd& mass() const { return mass_; }  // diagonal of A, length 2F
    const Eigen::SparseMatrix<double>& laplacian() const { return laplacian_; }
    int pinned_vertex() const { return pin_; }
    Eigen::Index num_vertices() const { return n_; }
    Eigen::Index num_faces() const { return f_; }

    // Solves L x = rhs per column under the pinned-vertex gauge (x[pin] = 0).
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

    // Least-squares vertex positions for stacked Jacobians (2F x 3).
    Eigen::MatrixX3d solve_poisson(const Eigen::MatrixXd& jacobians_stacked) const;

    // Reverse-mode through solve_poisson: maps d(loss)/d(positions) (n x 3)
    // to d(loss)/d(stacked Jacobians) (2F x 3). Valid because L is symmetric;
    // the pinned vertex's row is constant and its gradient is discarded.
    Eigen::MatrixXd solve_adjoint(const Eigen::MatrixXd& grad_positions) const;

private:
    Eigen::SparseMatrix<double> grad_;       // 2F x n
    Eigen::VectorXd mass_;                   // 2F
    Eigen::SparseMatrix<double> laplacian_;  // n x n
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
    Eigen::Index n_ = 0, f_ = 0;
    int pin_ = 0;
};

} // namespace semreg
