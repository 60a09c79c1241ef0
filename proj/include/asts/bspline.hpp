#pragma once

#include <Eigen/SparseCore>

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace asts::bspline {

// Global knot vector of degree p; basis size is knots.size() - p - 1.
struct KnotVector {
    std::vector<double> knots;
    int degree = 0;

    int size() const { return static_cast<int>(knots.size()) - degree - 1; }
    static KnotVector open_uniform(int degree, int elements);
};

// Value of the single B-spline defined by p+2 local knots. Right-continuous,
// except at x = 1 where the left limit is used.
double eval_local(std::span<const double> knots, int degree, double x);

// Derivative of the given order (0 returns the value). Orders above the degree
// give zero.
double eval_derivative(std::span<const double> knots, int degree, double x, int order);

// Derivatives 0..max_order into out[0..max_order].
void eval_derivatives(std::span<const double> knots, int degree, double x, int max_order, double* out);

struct NonzeroValues {
    int first = 0;               // index of the first non-vanishing function
    std::vector<double> values;  // degree + 1 entries
};

NonzeroValues eval_all_nonzero(const KnotVector& kv, double x);

// Maps coarse coefficients to fine coefficients of the same function. Built by
// repeated single-knot insertion.
Eigen::SparseMatrix<double> knot_insertion_matrix(const KnotVector& coarse, const KnotVector& fine);

// Coefficients of one local B-spline after inserting `inserted` knots (sorted,
// strictly inside the support). Result has inserted.size() + 1 entries.
std::vector<double> refine_local(std::span<const double> knots, int degree, std::span<const double> inserted);

// De Boor-Fix functional at the support midpoint: lambda(f) = sum_r w[r] f^(r)(tau).
struct DualFunctional {
    double tau = 0.0;
    std::vector<double> weights;  // degree + 1 entries

    double apply(const std::function<double(double, int)>& derivative) const;
};

DualFunctional dual_functional(std::span<const double> knots, int degree);

// Spline sum_i c_i B_i on a global knot vector, with right-sided derivatives.
struct Spline1D {
    KnotVector kv;
    std::vector<double> coefs;

    double derivative(double x, int order) const;
};

}  // namespace asts::bspline
