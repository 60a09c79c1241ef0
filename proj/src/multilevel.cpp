#include "asts/multilevel.hpp"

#include "asts/kernels.hpp"
#include "asts/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace asts {

const char* to_string(DecompositionKind k) {
    switch (k) {
        case DecompositionKind::micro: return "micro";
        case DecompositionKind::aligned: return "aligned";
        case DecompositionKind::macro: return "macro";
    }
    return "?";
}

const char* to_string(SmootherKind k) { return k == SmootherKind::jacobi ? "jacobi" : "sgs"; }

DecompositionKind parse_decomposition(const std::string& s) {
    if (s == "micro") return DecompositionKind::micro;
    if (s == "aligned") return DecompositionKind::aligned;
    if (s == "macro") return DecompositionKind::macro;
    throw std::invalid_argument("unknown decomposition '" + s + "'");
}

SmootherKind parse_smoother(const std::string& s) {
    if (s == "jacobi") return SmootherKind::jacobi;
    if (s == "sgs") return SmootherKind::sgs;
    throw std::invalid_argument("unknown smoother '" + s + "'");
}

// ---------------------------------------------------------------- smoother

Smoother::Smoother(SmootherKind kind, const Eigen::SparseMatrix<double>& A) : kind_(kind), A_(A) {
    A_.makeCompressed();
    const auto n = A_.rows();
    diag_.assign(n, 0.0);
    inv_diag_.assign(n, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        diag_[i] = A_.coeff(i, i);
        if (diag_[i] == 0.0) throw std::invalid_argument("smoother: zero diagonal entry");
        inv_diag_[i] = 1.0 / diag_[i];
    }
}

void Smoother::apply(const double* r, double* z) const {
    const auto n = static_cast<std::ptrdiff_t>(diag_.size());
    if (kind_ == SmootherKind::jacobi) {
        kernels::scale_mul(inv_diag_.data(), r, z, n);
        return;
    }
    const int* ptr = A_.outerIndexPtr();
    const int* col = A_.innerIndexPtr();
    const double* val = A_.valuePtr();
    // forward sweep (D+L) y = r, then w = D y, then backward (D+U) z = w
    std::vector<double> y(n);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double s = r[i];
        for (int k = ptr[i]; k < ptr[i + 1] && col[k] < i; ++k) s -= val[k] * y[col[k]];
        y[i] = s * inv_diag_[i];
    }
    for (std::ptrdiff_t i = 0; i < n; ++i) y[i] *= diag_[i];
    for (std::ptrdiff_t i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = ptr[i + 1] - 1; k >= ptr[i] && col[k] > i; --k) s -= val[k] * z[col[k]];
        z[i] = s * inv_diag_[i];
    }
}

Eigen::VectorXd Smoother::apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd z(r.size());
    apply(r.data(), z.data());
    return z;
}

// ---------------------------------------------------------------- grouping

std::vector<StepGroup> group_steps(const LevelSets& ls, DecompositionKind kind) {
    std::vector<StepGroup> out{{0, 0, 0}};
    const std::size_t n = ls.steps.size();
    if (kind == DecompositionKind::micro) {
        for (std::size_t k = 1; k <= n; ++k) out.push_back({k, k, ls.steps[k - 1].generation});
        return out;
    }
    if (kind == DecompositionKind::macro) {
        for (std::size_t k = 1; k <= n; ++k) {
            const int g = ls.steps[k - 1].generation;
            if (out.size() > 1 && out.back().generation == g)
                out.back().last = k;
            else
                out.push_back({k, k, g});
        }
        return out;
    }
    // aligned: collinear, contiguous new edges of one generation
    struct Line {
        bool set = false, vertical = false;
        Dyadic fixed, a, b;
    } line;
    for (std::size_t k = 1; k <= n; ++k) {
        const auto& st = ls.steps[k - 1];
        const auto& e = st.new_edge;
        const bool vertical = e.x0 == e.x1;
        const Dyadic fixed = vertical ? e.x0 : e.y0;
        const Dyadic a = vertical ? e.y0 : e.x0, b = vertical ? e.y1 : e.x1;
        bool extend = out.size() > 1 && out.back().generation == st.generation;
        if (extend && st.geometric && line.set)
            extend = line.vertical == vertical && line.fixed == fixed && a <= line.b && line.a <= b;
        if (extend) {
            out.back().last = k;
        } else {
            out.push_back({k, k, st.generation});
            line = {};
        }
        if (st.geometric) {
            if (!line.set) {
                line = {true, vertical, fixed, a, b};
            } else {
                line.a = std::min(line.a, a);
                line.b = std::max(line.b, b);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- decomposition

namespace {

bool touches_edge(const TSplineFunction& f, DegreePair p, Edge e) {
    switch (e) {
        case kBottom: return f.ky[p[1]] == 0.0;
        case kTop: return f.ky[1] == 1.0;
        case kLeft: return f.kx[p[0]] == 0.0;
        case kRight: return f.kx[1] == 1.0;
    }
    return false;
}

const std::vector<double>& trace_knots(const TSplineFunction& f, Edge e) {
    return (e == kBottom || e == kTop) ? f.kx : f.ky;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

Decomposition Decomposition::build(const Discretization& disc, const std::vector<const LevelSets*>& level_sets,
                                   const Eigen::SparseMatrix<double>& A, DecompositionKind kind,
                                   SmootherKind smoother) {
    const auto& patches = disc.patches();
    if (level_sets.size() != patches.size()) throw std::invalid_argument("one level-set history per patch required");
    Decomposition d;
    d.kind_ = kind;
    d.smoother_ = smoother;
    d.n_ = static_cast<std::size_t>(disc.num_dofs());
    if (A.rows() != disc.num_dofs()) throw std::invalid_argument("matrix size does not match the reduced dofs");

    const auto groups = group_steps(*level_sets[0], kind);
    for (std::size_t p = 1; p < level_sets.size(); ++p)
        if (level_sets[p]->steps.size() != level_sets[0]->steps.size())
            throw std::invalid_argument("patch histories differ in length");

    for (const auto& grp : groups) {
        // per patch coarse functions and their coefficients in the patch basis
        std::vector<std::vector<TSplineFunction>> coarse(patches.size());
        std::vector<Eigen::SparseMatrix<double>> psi(patches.size());
        std::map<std::pair<const LevelSets*, const TSplineSpace*>, std::size_t> cache;
        std::vector<int> offset;
        int total = 0;
        for (std::size_t p = 0; p < patches.size(); ++p) {
            auto key = std::make_pair(level_sets[p], patches[p].space);
            auto it = cache.find(key);
            if (it != cache.end()) {
                coarse[p] = coarse[it->second];
                psi[p] = psi[it->second];
            } else {
                coarse[p] = grp.first == 0 ? level_sets[p]->phi0 : net_added(*level_sets[p], grp.first, grp.last);
                psi[p] = change_of_basis(coarse[p], *patches[p].space);
                cache.emplace(key, p);
            }
            offset.push_back(total);
            total += static_cast<int>(coarse[p].size());
        }
        UnionFind uf(total);
        for (const auto& itf : disc.interfaces()) {
            const auto pa = patches[itf.patch_a].space->degree();
            const auto pb = patches[itf.patch_b].space->degree();
            std::map<std::vector<double>, int> side_b;
            for (int j = 0; j < static_cast<int>(coarse[itf.patch_b].size()); ++j)
                if (touches_edge(coarse[itf.patch_b][j], pb, itf.edge_b))
                    side_b.emplace(trace_knots(coarse[itf.patch_b][j], itf.edge_b), j);
            for (int i = 0; i < static_cast<int>(coarse[itf.patch_a].size()); ++i) {
                const auto& f = coarse[itf.patch_a][i];
                if (!touches_edge(f, pa, itf.edge_a)) continue;
                auto it = side_b.find(trace_knots(f, itf.edge_a));
                if (it == side_b.end()) throw std::runtime_error("coarse function has no interface partner");
                uf.unite(offset[itf.patch_a] + i, offset[itf.patch_b] + it->second);
            }
        }
        std::vector<std::vector<std::pair<int, int>>> members(total);
        for (std::size_t p = 0; p < patches.size(); ++p)
            for (int j = 0; j < static_cast<int>(coarse[p].size()); ++j)
                members[uf.find(offset[p] + j)].emplace_back(static_cast<int>(p), j);

        Subspace sub;
        sub.steps = grp;
        std::vector<Eigen::Triplet<double>> trip;
        int col = 0;
        for (int root = 0; root < total; ++root) {
            if (members[root].empty()) continue;
            bool dirichlet = false;
            for (auto [p, j] : members[root])
                for (Edge e : {kBottom, kRight, kTop, kLeft})
                    if (disc.dirichlet_edge(p, e) && touches_edge(coarse[p][j], patches[p].space->degree(), e))
                        dirichlet = true;
            if (dirichlet) continue;
            std::map<int, double> entries;
            for (auto [p, j] : members[root]) {
                for (Eigen::SparseMatrix<double>::InnerIterator it(psi[p], j); it; ++it) {
                    const int dof = disc.dof(patches[p].global[it.row()]);
                    if (dof < 0) continue;
                    auto [pos, fresh] = entries.emplace(dof, it.value());
                    if (!fresh && std::abs(pos->second - it.value()) > 1e-8 * std::max(1.0, std::abs(it.value())))
                        throw std::runtime_error("inconsistent interface coefficients");
                }
            }
            for (auto [dof, v] : entries) trip.emplace_back(dof, col, v);
            const auto [p0, j0] = members[root].front();
            sub.basis.push_back(coarse[p0][j0]);
            sub.patch.push_back(p0);
            ++col;
        }
        if (col == 0) {
            ++d.dropped_;
            continue;
        }
        sub.psi.resize(static_cast<Eigen::Index>(d.n_), col);
        sub.psi.setFromTriplets(trip.begin(), trip.end());
        sub.psi.makeCompressed();
        const Eigen::SparseMatrix<double> Apsi = A * sub.psi;
        sub.A = Eigen::SparseMatrix<double>(sub.psi.transpose() * Apsi);
        sub.A.makeCompressed();
        sub.smoother = Smoother(smoother, sub.A);
        d.subspaces_.push_back(std::move(sub));
    }
    return d;
}

void Decomposition::apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
    const std::size_t m = subspaces_.size();
    std::vector<Eigen::VectorXd> corr(m);
    auto work = [&](int, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Eigen::VectorXd ri = subspaces_[i].psi.transpose() * r;
            corr[i].resize(ri.size());
            subspaces_[i].smoother.apply(ri.data(), corr[i].data());
        }
    };
    parallel_chunks(m, thread_count(), work);
    z.setZero(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < m; ++i) z.noalias() += subspaces_[i].psi * corr[i];
}

Eigen::VectorXd Decomposition::apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd z;
    apply(r, z);
    return z;
}

Preconditioner identity_preconditioner() {
    return [](const Eigen::VectorXd& r, Eigen::VectorXd& z) { z = r; };
}

Preconditioner bpx_preconditioner(const Decomposition& d) {
    return [&d](const Eigen::VectorXd& r, Eigen::VectorXd& z) { d.apply(r, z); };
}

void spmv(const RowMatrix& A, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    y.resize(A.rows());
    kernels::CsrView v{A.rows(), A.outerIndexPtr(), A.innerIndexPtr(), A.valuePtr()};
    kernels::spmv(v, x.data(), y.data());
}

// ---------------------------------------------------------------- Lanczos

namespace {

double vdot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return kernels::dot(a.data(), b.data(), static_cast<std::size_t>(a.size()));
}

void vaxpy(double a, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    kernels::axpy(a, x.data(), y.data(), static_cast<std::size_t>(x.size()));
}

std::pair<double, double> tridiagonal_extremes(const std::vector<double>& diag, const std::vector<double>& off) {
    const auto n = static_cast<Eigen::Index>(diag.size());
    if (n == 1) return {diag[0], diag[0]};
    Eigen::VectorXd dg = Eigen::Map<const Eigen::VectorXd>(diag.data(), n);
    Eigen::VectorXd sd = Eigen::Map<const Eigen::VectorXd>(off.data(), n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(dg, sd, Eigen::EigenvaluesOnly);
    return {es.eigenvalues()[0], es.eigenvalues()[n - 1]};
}

// Largest relative residual bound |beta e_j^T s| / |theta| of the two extreme Ritz pairs.
double extreme_ritz_residual(const std::vector<double>& diag, const std::vector<double>& off, double beta_next) {
    const auto n = static_cast<Eigen::Index>(diag.size());
    if (n == 1) return std::abs(beta_next / diag[0]);
    Eigen::VectorXd dg = Eigen::Map<const Eigen::VectorXd>(diag.data(), n);
    Eigen::VectorXd sd = Eigen::Map<const Eigen::VectorXd>(off.data(), n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(dg, sd, Eigen::ComputeEigenvectors);
    const auto& v = es.eigenvectors();
    const double rmin = std::abs(beta_next * v(n - 1, 0)) / std::abs(es.eigenvalues()[0]);
    const double rmax = std::abs(beta_next * v(n - 1, n - 1)) / std::abs(es.eigenvalues()[n - 1]);
    return std::max(rmin, rmax);
}

RowMatrix compressed_rows(const Eigen::SparseMatrix<double>& A) {
    RowMatrix R(A);
    R.makeCompressed();
    return R;
}

}  // namespace

ConditionEstimate estimate_condition(const Eigen::SparseMatrix<double>& A, const Preconditioner& B,
                                     const LanczosOptions& opt) {
    const Eigen::Index n = A.rows();
    ConditionEstimate est;
    if (n == 0) throw std::invalid_argument("empty system");
    const RowMatrix Ar = compressed_rows(A);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXd r(n), z, w, r_prev = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = uni(rng);
    B(r, z);
    double nrm = std::sqrt(vdot(r, z));
    r /= nrm;
    z /= nrm;
    const int cap = static_cast<int>(std::min<Eigen::Index>(opt.max_iterations, n));
    const bool reorth = static_cast<std::size_t>(n) * static_cast<std::size_t>(cap) * 2 * sizeof(double) <=
                        opt.reorth_budget_bytes;
    std::vector<Eigen::VectorXd> rs, zs;
    std::vector<double> alpha, beta;
    double beta_prev = 0.0, last_min = 0.0, last_max = 0.0;
    int stable = 0;
    for (int j = 0; j < cap; ++j) {
        if (reorth) {
            rs.push_back(r);
            zs.push_back(z);
        }
        spmv(Ar, z, w);
        const double a = vdot(z, w);
        alpha.push_back(a);
        vaxpy(-a, r, w);
        vaxpy(-beta_prev, r_prev, w);
        if (reorth) {
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t i = 0; i < rs.size(); ++i) vaxpy(-vdot(zs[i], w), rs[i], w);
        }
        Eigen::VectorXd zw;
        B(w, zw);
        const double bb = vdot(w, zw);
        auto [lmin, lmax] = tridiagonal_extremes(alpha, beta);
        est.lambda_min = lmin;
        est.lambda_max = lmax;
        est.iterations = j + 1;
        if (j > 0 && std::abs(lmin - last_min) <= opt.rel_change * std::abs(lmin) &&
            std::abs(lmax - last_max) <= opt.rel_change * std::abs(lmax))
            ++stable;
        else
            stable = 0;
        last_min = lmin;
        last_max = lmax;
        const bool exhausted = !(bb > 1e-28 * std::max(1.0, a * a));
        if (stable >= opt.stable_steps && !exhausted &&
            extreme_ritz_residual(alpha, beta, std::sqrt(bb)) > opt.ritz_residual)
            stable = 0;
        if (stable >= opt.stable_steps || exhausted || j + 1 == n) {
            est.converged = true;
            break;
        }
        const double b = std::sqrt(bb);
        beta.push_back(b);
        r_prev = std::move(r);
        r = w / b;
        z = zw / b;
        beta_prev = b;
    }
    if (!(est.lambda_min > 0)) throw std::runtime_error("Lanczos: non-positive Ritz value, operator not SPD");
    est.kappa = est.lambda_max / est.lambda_min;
    return est;
}

Eigen::MatrixXd dense_operator(const Preconditioner& B, Eigen::Index n) {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n), col;
    for (Eigen::Index j = 0; j < n; ++j) {
        e[j] = 1.0;
        B(e, col);
        M.col(j) = col;
        e[j] = 0.0;
    }
    return M;
}

ConditionEstimate dense_condition(const Eigen::SparseMatrix<double>& A, const Preconditioner& B) {
    const Eigen::Index n = A.rows();
    Eigen::MatrixXd Bd = dense_operator(B, n);
    Bd = 0.5 * (Bd + Bd.transpose()).eval();
    const Eigen::MatrixXd Ad(A);
    Eigen::LLT<Eigen::MatrixXd> llt(Ad);
    if (llt.info() != Eigen::Success) throw std::runtime_error("dense oracle: matrix not SPD");
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd M = L.transpose() * Bd * L;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    ConditionEstimate est;
    est.lambda_min = es.eigenvalues()[0];
    est.lambda_max = es.eigenvalues()[n - 1];
    est.kappa = est.lambda_max / est.lambda_min;
    est.iterations = static_cast<int>(n);
    est.converged = true;
    return est;
}

// ---------------------------------------------------------------- PCG

nlohmann::json to_json(const SolveReport& r) {
    return {{"iterations", r.iterations},       {"converged", r.converged},
            {"residuals", r.residuals},         {"lambda_min", r.lambda_min},
            {"lambda_max", r.lambda_max},       {"kappa", r.kappa},
            {"setup_seconds", r.setup_seconds}, {"solve_seconds", r.solve_seconds}};
}

SolveReport pcg_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b, const Preconditioner& B,
                      Eigen::VectorXd& x, double tol, int max_iterations) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    SolveReport rep;
    const Eigen::Index n = A.rows();
    const RowMatrix Ar = compressed_rows(A);
    if (x.size() != n) x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r(n), z, p, q;
    spmv(Ar, x, q);
    r = b - q;
    B(r, z);
    double rz = vdot(r, z);
    if (rz < 0) throw std::runtime_error("PCG: preconditioner not positive");
    const double r0 = std::sqrt(rz);
    rep.residuals.push_back(1.0);
    rep.setup_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (r0 == 0.0) {
        rep.converged = true;
        return rep;
    }
    p = z;
    std::vector<double> diag, off;
    double alpha_prev = 0.0, beta_prev = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
        spmv(Ar, p, q);
        const double pq = vdot(p, q);
        if (!(pq > 0)) throw std::runtime_error("PCG breakdown: non-positive curvature, matrix not SPD");
        const double alpha = rz / pq;
        vaxpy(alpha, p, x);
        vaxpy(-alpha, q, r);
        B(r, z);
        const double rz_new = vdot(r, z);
        if (rz_new < 0) throw std::runtime_error("PCG: preconditioner not positive");
        const double beta = rz_new / rz;
        diag.push_back(1.0 / alpha + (it > 0 ? beta_prev / alpha_prev : 0.0));
        rep.iterations = it + 1;
        rep.residuals.push_back(std::sqrt(rz_new) / r0);
        if (rep.residuals.back() < tol) {
            rep.converged = true;
            break;
        }
        off.push_back(std::sqrt(beta) / alpha);
        kernels::xpay(z.data(), beta, p.data(), static_cast<std::size_t>(n));
        rz = rz_new;
        alpha_prev = alpha;
        beta_prev = beta;
    }
    if (!diag.empty()) {
        off.resize(diag.size() - 1);
        auto [lmin, lmax] = tridiagonal_extremes(diag, off);
        rep.lambda_min = lmin;
        rep.lambda_max = lmax;
        rep.kappa = lmax / lmin;
    }
    rep.solve_seconds = std::chrono::duration<double>(clock::now() - t0).count() - rep.setup_seconds;
    return rep;
}

}  // namespace asts
