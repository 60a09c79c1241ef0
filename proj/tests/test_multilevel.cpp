#include "asts/drivers.hpp"
#include "asts/multilevel.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <cstdlib>
#include <map>
#include <random>

using namespace asts;

namespace {

struct Setup {
    TSplineSpace space;
    Discretization disc;
    LinearSystem sys;
    LevelSets ls;

    explicit Setup(const TMesh& mesh)
        : space(TSplineSpace::build(mesh)),
          disc(Discretization::single(space, std::make_shared<IdentityMap>())),
          sys(apply_dirichlet(assemble(disc, [](double, double) { return 1.0; }), disc)),
          ls(level_sets(mesh)) {}

    Decomposition decompose(DecompositionKind k, SmootherKind s) const {
        return Decomposition::build(disc, {&ls}, sys.A, k, s);
    }
};

Eigen::SparseMatrix<double> sparse(const Eigen::MatrixXd& M) { return M.sparseView(); }

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

Eigen::MatrixXd stacked_columns(const Decomposition& d, int generation = -1) {
    Eigen::Index cols = 0;
    for (const auto& s : d.subspaces())
        if (generation < 0 || s.steps.generation == generation) cols += s.psi.cols();
    Eigen::MatrixXd M(d.num_dofs(), cols);
    Eigen::Index c = 0;
    for (const auto& s : d.subspaces()) {
        if (generation >= 0 && s.steps.generation != generation) continue;
        M.middleCols(c, s.psi.cols()) = Eigen::MatrixXd(s.psi);
        c += s.psi.cols();
    }
    return M;
}

double ls_residual(const Eigen::MatrixXd& basis, const Eigen::VectorXd& v) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(basis);
    return (basis * cod.solve(v) - v).norm() / v.norm();
}

}  // namespace

TEST_CASE("smoothers on a 2x2 system") {
    Eigen::MatrixXd A(2, 2);
    A << 2, 1, 1, 2;
    Eigen::VectorXd r(2);
    r << 1, 0;
    const Smoother jac(SmootherKind::jacobi, sparse(A));
    const auto zj = jac.apply(r);
    CHECK(zj[0] == doctest::Approx(0.5));
    CHECK(zj[1] == 0.0);

    const Eigen::MatrixXd L = A.triangularView<Eigen::Lower>();
    const Eigen::MatrixXd U = A.triangularView<Eigen::Upper>();
    const Eigen::MatrixXd D = A.diagonal().asDiagonal();
    const Eigen::MatrixXd S = U.inverse() * D * L.inverse();
    const Smoother sgs(SmootherKind::sgs, sparse(A));
    const Eigen::VectorXd zs = sgs.apply(r);
    CHECK((zs - S * r).norm() < 1e-15);
    CHECK((S - S.transpose()).norm() < 1e-15);

    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd r3(3);
    r3 << 1, -2, 3;
    CHECK((Smoother(SmootherKind::jacobi, sparse(I)).apply(r3) - r3).norm() == 0.0);
    CHECK((Smoother(SmootherKind::sgs, sparse(I)).apply(r3) - r3).norm() == 0.0);

    Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(2, 2);
    Z(1, 1) = 0;
    CHECK_THROWS(Smoother(SmootherKind::jacobi, sparse(Z)));
}

TEST_CASE("symmetric Gauss-Seidel matches the dense formula on a random SPD matrix") {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd G(12, 12);
    for (int i = 0; i < 12; ++i) G.col(i) = random_vector(12, rng);
    const Eigen::MatrixXd A = G * G.transpose() + 12 * Eigen::MatrixXd::Identity(12, 12);
    const Eigen::MatrixXd L = A.triangularView<Eigen::Lower>();
    const Eigen::MatrixXd U = A.triangularView<Eigen::Upper>();
    const Eigen::MatrixXd S = U.inverse() * Eigen::MatrixXd(A.diagonal().asDiagonal()) * L.inverse();
    const Smoother sgs(SmootherKind::sgs, sparse(A));
    for (int t = 0; t < 5; ++t) {
        const auto r = random_vector(12, rng);
        CHECK((sgs.apply(r) - S * r).norm() < 1e-12 * (S * r).norm());
    }
}

TEST_CASE("uniform mesh: one subspace and plain Jacobi") {
    Setup s(TMesh({2, 2}, {9, 9}));
    for (auto kind : {DecompositionKind::micro, DecompositionKind::aligned, DecompositionKind::macro}) {
        const auto d = s.decompose(kind, SmootherKind::jacobi);
        REQUIRE(d.subspaces().size() == 1);
        std::mt19937_64 rng(1);
        const auto r = random_vector(s.sys.A.rows(), rng);
        const Eigen::VectorXd expect = r.cwiseQuotient(Eigen::VectorXd(s.sys.A.diagonal()));
        CHECK((d.apply(r) - expect).norm() < 1e-14 * expect.norm());
    }
}

TEST_CASE("BPX is symmetric and positive for every decomposition and smoother") {
    Setup s(corner_mesh({2, 2}, 7, 4));
    std::mt19937_64 rng(5);
    for (auto kind : {DecompositionKind::micro, DecompositionKind::aligned, DecompositionKind::macro}) {
        for (auto sm : {SmootherKind::jacobi, SmootherKind::sgs}) {
            const auto d = s.decompose(kind, sm);
            const double bnorm = dense_operator(bpx_preconditioner(d), d.num_dofs()).norm();
            for (int t = 0; t < 20; ++t) {
                const auto x = random_vector(d.num_dofs(), rng), y = random_vector(d.num_dofs(), rng);
                const double lhs = d.apply(x).dot(y), rhs = x.dot(d.apply(y));
                CHECK(std::abs(lhs - rhs) / (x.norm() * y.norm() * bnorm) < 1e-12);
                CHECK(d.apply(x).dot(x) > 0.0);
            }
        }
    }
}

TEST_CASE("subspaces cover the reduced space") {
    Setup s(corner_mesh({2, 2}, 7, 3));
    std::mt19937_64 rng(7);
    for (auto kind : {DecompositionKind::micro, DecompositionKind::aligned, DecompositionKind::macro}) {
        const auto d = s.decompose(kind, SmootherKind::jacobi);
        const auto M = stacked_columns(d);
        for (int t = 0; t < 10; ++t) CHECK(ls_residual(M, random_vector(d.num_dofs(), rng)) < 1e-10);
    }
}

TEST_CASE("each macro subspace equals the sum of its micro subspaces") {
    Setup s(corner_mesh({2, 2}, 7, 4));
    const auto macro = s.decompose(DecompositionKind::macro, SmootherKind::jacobi);
    const auto micro = s.decompose(DecompositionKind::micro, SmootherKind::jacobi);
    for (const auto& w : macro.subspaces()) {
        if (w.steps.first == 0) continue;
        const int g = w.steps.generation;
        const Eigen::MatrixXd W(w.psi);
        const auto V = stacked_columns(micro, g);
        REQUIRE(V.cols() > 0);
        for (Eigen::Index c = 0; c < W.cols(); ++c) CHECK(ls_residual(V, W.col(c)) < 1e-10);
        for (Eigen::Index c = 0; c < V.cols(); ++c) CHECK(ls_residual(W, V.col(c)) < 1e-10);
    }
}

TEST_CASE("step grouping") {
    const auto mesh = corner_mesh({2, 2}, 7, 4);
    const auto ls = level_sets(mesh);
    const auto micro = group_steps(ls, DecompositionKind::micro);
    const auto aligned = group_steps(ls, DecompositionKind::aligned);
    const auto macro = group_steps(ls, DecompositionKind::macro);
    CHECK(micro.size() == ls.steps.size() + 1);
    CHECK(macro.size() == 4);
    std::map<int, int> nm, na;
    for (const auto& g : micro) ++nm[g.generation];
    for (const auto& g : aligned) ++na[g.generation];
    for (auto [gen, count] : na) {
        CHECK(count <= nm[gen]);
        CHECK(count >= 1);
    }
    for (const auto& g : macro) CHECK(g.first <= g.last);
}

TEST_CASE("aligned subspaces per generation") {
    auto per_generation = [](const Decomposition& d) {
        std::map<int, int> n;
        for (const auto& s : d.subspaces())
            if (s.steps.first != 0) ++n[s.steps.generation];
        return n;
    };
    Setup cubic(corner_mesh({3, 3}, 8, 4));
    const auto n3 = per_generation(cubic.decompose(DecompositionKind::aligned, SmootherKind::jacobi));
    CHECK(n3.at(1) == 7);
    CHECK(n3.at(2) == 6);
    CHECK(n3.at(3) == 10);

    const std::size_t totals[] = {7, 12, 21, 29, 44};
    for (int level = 2; level <= 6; ++level) {
        Setup q(corner_mesh({2, 2}, 7, level));
        CHECK(q.decompose(DecompositionKind::aligned, SmootherKind::jacobi).subspaces().size() == totals[level - 2]);
    }
}

TEST_CASE("PCG and condition estimates on known spectra") {
    const int n = 10;
    Eigen::SparseMatrix<double> I(n, n), D(n, n);
    I.setIdentity();
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, i + 1.0);
    D.setFromTriplets(t.begin(), t.end());

    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, 1, 2), x;
    const auto rep = pcg_solve(I, b, identity_preconditioner(), x);
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK((x - b).norm() < 1e-14);

    const auto e = estimate_condition(D, identity_preconditioner());
    CHECK(e.kappa == doctest::Approx(10.0).epsilon(1e-8));
    CHECK(e.lambda_min == doctest::Approx(1.0).epsilon(1e-8));

    Setup s(TMesh({2, 2}, {6, 6}));
    const Eigen::MatrixXd Ainv = Eigen::MatrixXd(s.sys.A).inverse();
    const Preconditioner exact = [&](const Eigen::VectorXd& r, Eigen::VectorXd& z) { z = Ainv * r; };
    CHECK(estimate_condition(s.sys.A, exact).kappa == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(dense_condition(s.sys.A, exact).kappa == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("PCG error decreases monotonically in the energy norm") {
    Setup s(corner_mesh({2, 2}, 7, 3));
    const auto d = s.decompose(DecompositionKind::macro, SmootherKind::jacobi);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(s.sys.A);
    const Eigen::VectorXd exact = ldlt.solve(s.sys.b);
    double prev = std::sqrt(exact.dot(s.sys.A * exact));
    for (int k = 1; k <= 25; ++k) {
        Eigen::VectorXd x;
        pcg_solve(s.sys.A, s.sys.b, bpx_preconditioner(d), x, 1e-14, k);
        const Eigen::VectorXd e = x - exact;
        const double err = std::sqrt(e.dot(s.sys.A * e));
        CHECK(err <= prev * (1 + 1e-12));
        prev = err;
    }
    Eigen::VectorXd x0, x1;
    const auto plain = pcg_solve(s.sys.A, s.sys.b, identity_preconditioner(), x0);
    const auto bpx = pcg_solve(s.sys.A, s.sys.b, bpx_preconditioner(d), x1);
    CHECK(bpx.iterations <= plain.iterations);
}

TEST_CASE("Lanczos agrees with the dense generalized eigenproblem") {
    for (int p = 2; p <= 3; ++p) {
        Setup s(corner_mesh({p, p}, default_elements(p), 3));
        const double np_l = estimate_condition(s.sys.A, identity_preconditioner()).kappa;
        const double np_d = dense_condition(s.sys.A, identity_preconditioner()).kappa;
        CHECK(std::abs(np_l - np_d) / np_d < 0.05);
        for (auto kind : {DecompositionKind::micro, DecompositionKind::aligned, DecompositionKind::macro}) {
            for (auto sm : {SmootherKind::jacobi, SmootherKind::sgs}) {
                const auto d = s.decompose(kind, sm);
                const double kl = estimate_condition(s.sys.A, bpx_preconditioner(d)).kappa;
                const double kd = dense_condition(s.sys.A, bpx_preconditioner(d)).kappa;
                CHECK(std::abs(kl - kd) / kd < 0.05);
            }
        }
    }
}

TEST_CASE("macro condition number does not exceed the aligned one") {
    Setup s(corner_mesh({2, 2}, 7, 5));
    for (auto sm : {SmootherKind::jacobi, SmootherKind::sgs}) {
        const double macro = estimate_condition(s.sys.A, bpx_preconditioner(s.decompose(DecompositionKind::macro, sm))).kappa;
        const double aligned = estimate_condition(s.sys.A, bpx_preconditioner(s.decompose(DecompositionKind::aligned, sm))).kappa;
        CHECK(macro <= aligned * (1 + 1e-9));
    }
}

TEST_CASE("preconditioner and estimates are deterministic across thread counts") {
    Setup s(corner_mesh({3, 3}, 8, 4));
    std::mt19937_64 rng(2);
    const auto r = random_vector(s.sys.A.rows(), rng);
    setenv("ASTS_THREADS", "1", 1);
    const auto d1 = s.decompose(DecompositionKind::aligned, SmootherKind::sgs);
    const Eigen::VectorXd z1 = d1.apply(r);
    const auto k1 = estimate_condition(s.sys.A, bpx_preconditioner(d1));
    setenv("ASTS_THREADS", "4", 1);
    const auto d4 = s.decompose(DecompositionKind::aligned, SmootherKind::sgs);
    const Eigen::VectorXd z4 = d4.apply(r);
    const auto k4 = estimate_condition(s.sys.A, bpx_preconditioner(d4));
    unsetenv("ASTS_THREADS");
    CHECK((z1 - z4).norm() == 0.0);
    CHECK(k1.kappa == k4.kappa);
    CHECK(k1.iterations == k4.iterations);
}

TEST_CASE("names round trip") {
    for (auto k : {DecompositionKind::micro, DecompositionKind::aligned, DecompositionKind::macro})
        CHECK(parse_decomposition(to_string(k)) == k);
    for (auto k : {SmootherKind::jacobi, SmootherKind::sgs}) CHECK(parse_smoother(to_string(k)) == k);
    CHECK_THROWS(parse_smoother("chebyshev"));
}
