#include "asts/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asts::bspline {

namespace {

constexpr int kMaxDegree = 9;

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

int find_span(const KnotVector& kv, double x) {
    const auto& t = kv.knots;
    int n = kv.size();
    int p = kv.degree;
    if (x >= t[n]) return n - 1;
    if (x <= t[p]) {
        int i = p;
        while (i < n - 1 && t[i + 1] <= x) ++i;
        return i;
    }
    auto it = std::upper_bound(t.begin() + p, t.begin() + n + 1, x);
    return static_cast<int>(it - t.begin()) - 1;
}

}  // namespace

KnotVector KnotVector::open_uniform(int degree, int elements) {
    KnotVector kv;
    kv.degree = degree;
    for (int i = 0; i < degree; ++i) kv.knots.push_back(0.0);
    for (int i = 0; i <= elements; ++i) kv.knots.push_back(static_cast<double>(i) / elements);
    for (int i = 0; i < degree; ++i) kv.knots.push_back(1.0);
    return kv;
}

void eval_derivatives(std::span<const double> xi, int p, double x, int max_order, double* out) {
    if (p > kMaxDegree) throw std::invalid_argument("degree too large");
    if (static_cast<int>(xi.size()) != p + 2) throw std::invalid_argument("local knot vector must have p+2 knots");
    for (int r = 0; r <= max_order; ++r) out[r] = 0.0;
    if (x < xi[0] || x > xi[p + 1]) return;
    const bool left = x >= 1.0;
    // tab[r][q][j]: r-th derivative of the degree-q B-spline on xi[j..j+q+1]
    double tab[kMaxDegree + 1][kMaxDegree + 1][kMaxDegree + 2] = {};
    for (int j = 0; j <= p; ++j) {
        bool in = left ? (xi[j] < x && x <= xi[j + 1]) : (xi[j] <= x && x < xi[j + 1]);
        tab[0][0][j] = in ? 1.0 : 0.0;
    }
    for (int q = 1; q <= p; ++q) {
        for (int j = 0; j + q <= p; ++j) {
            double a = safe_ratio(x - xi[j], xi[j + q] - xi[j]);
            double b = safe_ratio(xi[j + q + 1] - x, xi[j + q + 1] - xi[j + 1]);
            tab[0][q][j] = a * tab[0][q - 1][j] + b * tab[0][q - 1][j + 1];
        }
    }
    int top = std::min(max_order, p);
    for (int r = 1; r <= top; ++r) {
        for (int q = r; q <= p; ++q) {
            for (int j = 0; j + q <= p; ++j) {
                double a = safe_ratio(q, xi[j + q] - xi[j]);
                double b = safe_ratio(q, xi[j + q + 1] - xi[j + 1]);
                tab[r][q][j] = a * tab[r - 1][q - 1][j] - b * tab[r - 1][q - 1][j + 1];
            }
        }
    }
    for (int r = 0; r <= top; ++r) out[r] = tab[r][p][0];
}

double eval_local(std::span<const double> knots, int degree, double x) {
    double v;
    eval_derivatives(knots, degree, x, 0, &v);
    return v;
}

double eval_derivative(std::span<const double> knots, int degree, double x, int order) {
    if (order > degree) return 0.0;
    double d[kMaxDegree + 1];
    eval_derivatives(knots, degree, x, order, d);
    return d[order];
}

NonzeroValues eval_all_nonzero(const KnotVector& kv, double x) {
    const int p = kv.degree;
    const auto& t = kv.knots;
    int i = find_span(kv, x);
    NonzeroValues out;
    out.first = i - p;
    out.values.assign(p + 1, 0.0);
    std::vector<double> left(p + 1), right(p + 1);
    out.values[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - t[i + 1 - j];
        right[j] = t[i + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            double tmp = out.values[r] / (right[r + 1] + left[j - r]);
            out.values[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out.values[j] = saved;
    }
    return out;
}

Eigen::SparseMatrix<double> knot_insertion_matrix(const KnotVector& coarse, const KnotVector& fine) {
    if (coarse.degree != fine.degree) throw std::invalid_argument("degree mismatch");
    const int p = coarse.degree;
    // multiset difference fine \ coarse
    std::vector<double> extra;
    {
        std::size_t i = 0;
        for (double f : fine.knots) {
            if (i < coarse.knots.size() && coarse.knots[i] == f) {
                ++i;
            } else {
                extra.push_back(f);
            }
        }
        if (i != coarse.knots.size()) throw std::invalid_argument("knot vectors are not nested");
    }
    std::vector<double> K = coarse.knots;
    const int nc = coarse.size();
    // rows: current basis, cols: coarse basis (dense; insertion matrices are small)
    std::vector<std::vector<double>> M(nc, std::vector<double>(nc, 0.0));
    for (int i = 0; i < nc; ++i) M[i][i] = 1.0;
    for (double t : extra) {
        int n = static_cast<int>(K.size()) - p - 1;
        int k = static_cast<int>(std::upper_bound(K.begin(), K.end(), t) - K.begin()) - 1;
        if (k >= static_cast<int>(K.size()) - 1) k = static_cast<int>(K.size()) - 2;
        std::vector<std::vector<double>> Q(n + 1, std::vector<double>(nc, 0.0));
        for (int i = 0; i <= n; ++i) {
            double alpha;
            if (i <= k - p) alpha = 1.0;
            else if (i >= k + 1) alpha = 0.0;
            else alpha = safe_ratio(t - K[i], K[i + p] - K[i]);
            for (int c = 0; c < nc; ++c) {
                double a = i < n ? M[i][c] : 0.0;
                double b = i > 0 ? M[i - 1][c] : 0.0;
                Q[i][c] = alpha * a + (1.0 - alpha) * b;
            }
        }
        M.swap(Q);
        K.insert(K.begin() + k + 1, t);
    }
    Eigen::SparseMatrix<double> S(static_cast<int>(M.size()), nc);
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < static_cast<int>(M.size()); ++i)
        for (int c = 0; c < nc; ++c)
            if (M[i][c] != 0.0) trip.emplace_back(i, c, M[i][c]);
    S.setFromTriplets(trip.begin(), trip.end());
    return S;
}

std::vector<double> refine_local(std::span<const double> knots, int p, std::span<const double> inserted) {
    std::vector<double> K(knots.begin(), knots.end());
    std::vector<double> P{1.0};
    for (double t : inserted) {
        int n = static_cast<int>(P.size());
        int k = static_cast<int>(std::upper_bound(K.begin(), K.end(), t) - K.begin()) - 1;
        std::vector<double> Q(n + 1, 0.0);
        for (int i = 0; i <= n; ++i) {
            double alpha;
            if (i <= k - p) alpha = 1.0;
            else if (i >= k + 1) alpha = 0.0;
            else alpha = safe_ratio(t - K[i], K[i + p] - K[i]);
            double a = i < n ? P[i] : 0.0;
            double b = i > 0 ? P[i - 1] : 0.0;
            Q[i] = alpha * a + (1.0 - alpha) * b;
        }
        P.swap(Q);
        K.insert(K.begin() + k + 1, t);
    }
    return P;
}

DualFunctional dual_functional(std::span<const double> xi, int p) {
    if (static_cast<int>(xi.size()) != p + 2) throw std::invalid_argument("local knot vector must have p+2 knots");
    if (!(xi[p + 1] > xi[0])) throw std::invalid_argument("dual functional on zero-length support");
    DualFunctional df;
    df.tau = 0.5 * (xi[0] + xi[p + 1]);
    // psi(tau + s) = prod_{j=1..p} (c_j - s), c_j = xi_j - tau; a[m] = coefficient of s^m
    std::vector<double> a{1.0};
    for (int j = 1; j <= p; ++j) {
        double c = xi[j] - df.tau;
        std::vector<double> b(a.size() + 1, 0.0);
        for (std::size_t m = 0; m < a.size(); ++m) {
            b[m] += c * a[m];
            b[m + 1] -= a[m];
        }
        a.swap(b);
    }
    double pfact = std::tgamma(p + 1.0);
    df.weights.assign(p + 1, 0.0);
    for (int r = 0; r <= p; ++r) {
        int m = p - r;
        double sign = (m % 2 == 0) ? 1.0 : -1.0;
        df.weights[r] = sign * std::tgamma(m + 1.0) * a[m] / pfact;
    }
    return df;
}

double DualFunctional::apply(const std::function<double(double, int)>& derivative) const {
    double s = 0.0;
    for (std::size_t r = 0; r < weights.size(); ++r) s += weights[r] * derivative(tau, static_cast<int>(r));
    return s;
}

double Spline1D::derivative(double x, int order) const {
    const int p = kv.degree;
    int i = find_span(kv, x);
    double s = 0.0;
    for (int j = i - p; j <= i; ++j) {
        if (j < 0 || j >= static_cast<int>(coefs.size())) continue;
        s += coefs[j] * eval_derivative(std::span<const double>(kv.knots.data() + j, p + 2), p, x, order);
    }
    return s;
}

}  // namespace asts::bspline
