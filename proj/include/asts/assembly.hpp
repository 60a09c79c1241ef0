#pragma once

#include "asts/tspline_space.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace asts {

// Gauss-Legendre rule on [0, 1].
struct QuadratureRule {
    std::vector<double> points, weights;
};

QuadratureRule gauss_legendre(int n);

struct GeometryEval {
    double x = 0, y = 0;
    double jac[2][2] = {{1, 0}, {0, 1}};  // jac[i][j] = d x_i / d u_j
    double det() const { return jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0]; }
};

class GeometryMap {
public:
    virtual ~GeometryMap() = default;
    virtual GeometryEval eval(double u, double v) const = 0;
    virtual std::string name() const = 0;
};

class IdentityMap : public GeometryMap {
public:
    GeometryEval eval(double u, double v) const override;
    std::string name() const override { return "identity-square"; }
};

// Biquadratic Bezier patch followed by a fixed linear map of the plane.
class BezierPatchMap : public GeometryMap {
public:
    using Point = std::array<double, 2>;
    // control[i][j]: i along u, j along v
    BezierPatchMap(std::array<std::array<Point, 3>, 3> control, std::array<double, 4> linear, std::string name);
    GeometryEval eval(double u, double v) const override;
    std::string name() const override { return name_; }

private:
    std::array<std::array<Point, 3>, 3> control_;
    std::array<double, 4> linear_;  // row-major 2x2
    std::string name_;
};

// Three-patch curved L-shape; the reentrant corner is the image of the origin.
std::vector<std::shared_ptr<const GeometryMap>> curved_l_maps();
std::vector<std::shared_ptr<const GeometryMap>> curved_l_maps(const nlohmann::json& data);
nlohmann::json curved_l_data();

// Patch edge identification with matching parametric orientation along the edge.
struct Interface {
    int patch_a = 0;
    Edge edge_a = kBottom;
    int patch_b = 0;
    Edge edge_b = kBottom;
};

std::vector<Interface> curved_l_interfaces();

// Global numbering of patch functions, interface gluing and Dirichlet flags.
class Discretization {
public:
    struct Patch {
        const TSplineSpace* space = nullptr;
        std::shared_ptr<const GeometryMap> geometry;
        std::vector<int> global;  // patch function -> global function
    };

    static Discretization single(const TSplineSpace& space, std::shared_ptr<const GeometryMap> geometry);
    static Discretization multipatch(std::vector<const TSplineSpace*> spaces,
                                     std::vector<std::shared_ptr<const GeometryMap>> geometries,
                                     const std::vector<Interface>& interfaces);

    const std::vector<Patch>& patches() const { return patches_; }
    int num_global() const { return num_global_; }
    int num_dofs() const { return static_cast<int>(global_of_dof_.size()); }
    bool dirichlet(int g) const { return dirichlet_[g]; }
    int dof(int g) const { return dof_of_global_[g]; }  // -1 for Dirichlet functions
    const std::vector<int>& global_of_dof() const { return global_of_dof_; }
    // Dirichlet edges of a patch (edges not on an interface)
    bool dirichlet_edge(int patch, Edge e) const { return dirichlet_edges_[patch][e]; }
    // members (patch, function) of each global function
    const std::vector<std::vector<std::pair<int, int>>>& members() const { return members_; }
    const std::vector<Interface>& interfaces() const { return interfaces_; }

private:
    void finish();

    std::vector<Patch> patches_;
    std::vector<std::array<bool, 4>> dirichlet_edges_;
    int num_global_ = 0;
    std::vector<bool> dirichlet_;
    std::vector<int> dof_of_global_, global_of_dof_;
    std::vector<std::vector<std::pair<int, int>>> members_;
    std::vector<Interface> interfaces_;
};

using ScalarField = std::function<double(double, double)>;

// Full (un-eliminated) system in global numbering.
struct AssembledSystem {
    Eigen::SparseMatrix<double> A;
    Eigen::VectorXd b;
};

// quad_order <= 0 selects p + 1 points per direction.
AssembledSystem assemble(const Discretization& disc, const ScalarField& source, int quad_order = 0);
Eigen::SparseMatrix<double> assemble_stiffness(const Discretization& disc, int quad_order = 0);
Eigen::VectorXd assemble_rhs(const Discretization& disc, const ScalarField& source, int quad_order = 0);

struct LinearSystem {
    Eigen::SparseMatrix<double> A;
    Eigen::VectorXd b;
    std::vector<int> global_of_dof;
};

LinearSystem apply_dirichlet(const AssembledSystem& full, const Discretization& disc);

// Expands reduced coefficients to global ones (zero on Dirichlet functions).
Eigen::VectorXd expand(const Discretization& disc, const Eigen::VectorXd& reduced);

// L2 norm of (u_h - exact) over the mapped domain.
double l2_error(const Discretization& disc, const Eigen::VectorXd& global_coefs, const ScalarField& exact,
                int quad_order = 0);

// Evaluates the discrete solution of one patch at a parametric point.
double evaluate(const Discretization& disc, const Eigen::VectorXd& global_coefs, int patch, double u, double v);

void write_matrix_market(const Eigen::SparseMatrix<double>& A, const std::string& path);
void write_vector(const Eigen::VectorXd& v, const std::string& path);

}  // namespace asts
