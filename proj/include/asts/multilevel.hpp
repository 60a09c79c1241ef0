#pragma once

#include "asts/assembly.hpp"
#include "asts/tspline_space.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace asts {

enum class DecompositionKind { micro, aligned, macro };
enum class SmootherKind { jacobi, sgs };

const char* to_string(DecompositionKind k);
const char* to_string(SmootherKind k);
DecompositionKind parse_decomposition(const std::string& s);
SmootherKind parse_smoother(const std::string& s);

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// One sweep of Jacobi or symmetric Gauss-Seidel on a subspace matrix.
class Smoother {
public:
    Smoother() = default;
    Smoother(SmootherKind kind, const Eigen::SparseMatrix<double>& A);

    SmootherKind kind() const { return kind_; }
    std::size_t size() const { return inv_diag_.size(); }
    // Jacobi: D^{-1} r.  SGS: (D+U)^{-1} D (D+L)^{-1} r.
    void apply(const double* r, double* z) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& r) const;

private:
    SmootherKind kind_ = SmootherKind::jacobi;
    RowMatrix A_;
    std::vector<double> diag_, inv_diag_;
};

// History steps grouped into one subspace. Steps are 1-based and inclusive;
// first == 0 denotes the initial tensor-product basis.
struct StepGroup {
    std::size_t first = 0, last = 0;
    int generation = 0;
};

std::vector<StepGroup> group_steps(const LevelSets& ls, DecompositionKind kind);

struct Subspace {
    StepGroup steps;
    std::vector<TSplineFunction> basis;  // one representative per column
    std::vector<int> patch;              // patch of each representative
    Eigen::SparseMatrix<double> psi;  // reduced dofs x subspace functions
    Eigen::SparseMatrix<double> A;    // psi^T A psi
    Smoother smoother;
};

class Decomposition {
public:
    // level_sets[i] belongs to patch i of the discretization.
    static Decomposition build(const Discretization& disc, const std::vector<const LevelSets*>& level_sets,
                               const Eigen::SparseMatrix<double>& A, DecompositionKind kind, SmootherKind smoother);

    DecompositionKind kind() const { return kind_; }
    SmootherKind smoother_kind() const { return smoother_; }
    const std::vector<Subspace>& subspaces() const { return subspaces_; }
    std::size_t num_dofs() const { return n_; }
    std::size_t dropped() const { return dropped_; }

    // z = sum_i psi_i R_i psi_i^T r, summed in subspace order.
    void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& r) const;

private:
    DecompositionKind kind_ = DecompositionKind::macro;
    SmootherKind smoother_ = SmootherKind::jacobi;
    std::size_t n_ = 0, dropped_ = 0;
    std::vector<Subspace> subspaces_;
};

using Preconditioner = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

Preconditioner identity_preconditioner();
Preconditioner bpx_preconditioner(const Decomposition& d);

// y = A x through the selected SIMD kernel.
void spmv(const RowMatrix& A, const Eigen::VectorXd& x, Eigen::VectorXd& y);

struct ConditionEstimate {
    double lambda_min = 0, lambda_max = 0, kappa = 0;
    int iterations = 0;
    bool converged = false;
};

struct LanczosOptions {
    double rel_change = 1e-4;
    int stable_steps = 5;
    double ritz_residual = 1e-2;  // relative residual bound of the extreme Ritz pairs
    int max_iterations = 400;
    std::uint64_t seed = 20170705;
    std::size_t reorth_budget_bytes = std::size_t(512) << 20;
};

ConditionEstimate estimate_condition(const Eigen::SparseMatrix<double>& A, const Preconditioner& B,
                                     const LanczosOptions& opt = {});

// Dense reference: eigenvalues of L^T B L with A = L L^T.
ConditionEstimate dense_condition(const Eigen::SparseMatrix<double>& A, const Preconditioner& B);
Eigen::MatrixXd dense_operator(const Preconditioner& B, Eigen::Index n);

struct SolveReport {
    int iterations = 0;
    bool converged = false;
    std::vector<double> residuals;  // preconditioned residual norms, relative to the first
    double lambda_min = 0, lambda_max = 0, kappa = 0;  // from the CG tridiagonal
    double setup_seconds = 0, solve_seconds = 0;
};

nlohmann::json to_json(const SolveReport& r);

SolveReport pcg_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b, const Preconditioner& B,
                      Eigen::VectorXd& x, double tol = 1e-6, int max_iterations = 5000);

}  // namespace asts
