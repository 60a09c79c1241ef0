#include "asts/bspline.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

namespace bs = asts::bspline;

namespace {

// Cox-de Boor recursion on p+2 local knots, right-continuous.
double cox_de_boor(const std::vector<double>& t, int p, double x) {
    if (p == 0) return (t[0] <= x && x < t[1]) ? 1.0 : 0.0;
    std::vector<double> left(t.begin(), t.end() - 1), right(t.begin() + 1, t.end());
    double v = 0.0;
    if (t[p] > t[0]) v += (x - t[0]) / (t[p] - t[0]) * cox_de_boor(left, p - 1, x);
    if (t[p + 1] > t[1]) v += (t[p + 1] - x) / (t[p + 1] - t[1]) * cox_de_boor(right, p - 1, x);
    return v;
}

std::vector<std::vector<double>> sample_knot_vectors() {
    return {{0, 0, 0, 0.25},       {0, 0.25, 0.5, 0.75},   {0, 0.5, 0.5, 1},          {0.25, 1, 1, 1},
            {0, 0, 0, 0, 0.5},     {0, 0.125, 0.5, 0.75, 1}, {0, 0, 0.25, 0.25, 0.75}, {0.5, 0.75, 1, 1, 1},
            {0, 0, 0, 0.5, 1, 1}, {0, 0.25, 0.375, 0.5, 0.625, 1}};
}

}  // namespace

TEST_CASE("local B-spline values agree with the Cox-de Boor recursion") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& t : sample_knot_vectors()) {
        const int p = static_cast<int>(t.size()) - 2;
        for (int i = 0; i < 200; ++i) {
            const double x = u(rng);
            CHECK(bs::eval_local(t, p, x) == doctest::Approx(cox_de_boor(t, p, x)).epsilon(1e-13));
        }
    }
}

TEST_CASE("value at the right end of the unit interval uses the left limit") {
    const std::vector<double> t{0.5, 1, 1, 1};
    CHECK(bs::eval_local(t, 2, 1.0) == doctest::Approx(1.0));
    CHECK(bs::eval_local(std::vector<double>{0, 0.5, 1, 1}, 2, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("derivatives agree with central differences of the recursion") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    const double h = 1e-6;
    for (const auto& t : sample_knot_vectors()) {
        const int p = static_cast<int>(t.size()) - 2;
        for (int i = 0; i < 50; ++i) {
            const double x = u(rng);
            bool near_knot = false;
            for (double k : t) near_knot = near_knot || std::abs(x - k) < 1e-4;
            if (near_knot) continue;
            const double fd = (cox_de_boor(t, p, x + h) - cox_de_boor(t, p, x - h)) / (2 * h);
            CHECK(bs::eval_derivative(t, p, x, 1) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
            double d[8];
            bs::eval_derivatives(t, p, x, p + 1, d);
            CHECK(d[0] == doctest::Approx(cox_de_boor(t, p, x)).epsilon(1e-13));
            CHECK(d[1] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
            CHECK(d[p + 1] == 0.0);
        }
    }
}

TEST_CASE("open uniform basis is a partition of unity") {
    for (int p = 1; p <= 4; ++p) {
        const auto kv = bs::KnotVector::open_uniform(p, 7);
        CHECK(kv.size() == 7 + p);
        for (double x : {0.0, 0.1, 0.33, 0.5, 0.999, 1.0}) {
            const auto nz = bs::eval_all_nonzero(kv, x);
            double s = 0;
            for (double v : nz.values) s += v;
            CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(nz.values.size() == static_cast<std::size_t>(p + 1));
        }
    }
}

TEST_CASE("knot insertion matrix preserves the spline") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int p = 1; p <= 4; ++p) {
        const auto coarse = bs::KnotVector::open_uniform(p, 3);
        const auto fine = bs::KnotVector::open_uniform(p, 12);
        const auto T = bs::knot_insertion_matrix(coarse, fine);
        REQUIRE(T.rows() == fine.size());
        REQUIRE(T.cols() == coarse.size());
        Eigen::VectorXd c(coarse.size());
        for (int i = 0; i < c.size(); ++i) c[i] = u(rng);
        Eigen::VectorXd f = T * c;
        bs::Spline1D sc{coarse, std::vector<double>(c.data(), c.data() + c.size())};
        bs::Spline1D sf{fine, std::vector<double>(f.data(), f.data() + f.size())};
        for (double x = 0.0; x <= 1.0; x += 0.0371) CHECK(sc.derivative(x, 0) == doctest::Approx(sf.derivative(x, 0)).epsilon(1e-13));
        // rows of the refinement matrix are convex combinations
        Eigen::VectorXd ones = T * Eigen::VectorXd::Ones(coarse.size());
        for (int i = 0; i < ones.size(); ++i) CHECK(ones[i] == doctest::Approx(1.0));
    }
}

TEST_CASE("local refinement expresses one B-spline in the finer local basis") {
    const std::vector<double> t{0, 0.25, 0.5, 1.0};
    const std::vector<double> ins{0.125, 0.375, 0.75};
    const auto c = bs::refine_local(t, 2, ins);
    REQUIRE(c.size() == 4);
    std::vector<double> all{0, 0.125, 0.25, 0.375, 0.5, 0.75, 1.0};
    for (double x = 0.0; x < 1.0; x += 0.01) {
        double s = 0;
        for (std::size_t j = 0; j < c.size(); ++j) s += c[j] * cox_de_boor({all.begin() + j, all.begin() + j + 4}, 2, x);
        CHECK(s == doctest::Approx(cox_de_boor(t, 2, x)).epsilon(1e-13).scale(1.0));
    }
}

TEST_CASE("dual functionals are biorthogonal to the B-spline basis") {
    for (int p = 1; p <= 4; ++p) {
        auto kv = bs::KnotVector::open_uniform(p, 5);
        kv.knots.insert(kv.knots.begin() + p + 2, 0.3);  // a non-uniform interior knot
        const int n = kv.size();
        for (int i = 0; i < n; ++i) {
            const auto lam = bs::dual_functional({kv.knots.data() + i, static_cast<std::size_t>(p + 2)}, p);
            for (int j = 0; j < n; ++j) {
                std::vector<double> c(n, 0.0);
                c[j] = 1.0;
                bs::Spline1D s{kv, c};
                const double v = lam.apply([&](double x, int r) { return s.derivative(x, r); });
                CHECK(v == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
            }
        }
    }
}

TEST_CASE("small closed-form values") {
    CHECK(bs::eval_local(std::vector<double>{0, 0, 0, 1}, 2, 0.5) == doctest::Approx(0.25));
    CHECK(bs::eval_local(std::vector<double>{0, 0.5, 1}, 1, 0.5) == doctest::Approx(1.0));
    CHECK(bs::eval_derivative(std::vector<double>{0, 0.5, 1}, 1, 0.25, 1) == doctest::Approx(2.0));
    CHECK(bs::eval_derivative(std::vector<double>{0, 0.25, 0.5, 0.75, 1}, 3, 0.5, 1) == doctest::Approx(0.0).scale(1.0));
    const std::vector<double> t{0, 0.25, 0.5, 0.75, 1};
    CHECK(bs::eval_local(t, 3, 0.5) == doctest::Approx(cox_de_boor(t, 3, 0.5)).epsilon(1e-14));
    for (double x : {-0.5, 1.25}) CHECK(bs::eval_local(t, 3, x) == 0.0);

    const auto one = bs::eval_all_nonzero(bs::KnotVector::open_uniform(2, 1), 0.0);
    REQUIRE(one.values.size() == 3);
    CHECK(one.values[0] == doctest::Approx(1.0));
    CHECK(one.values[1] == 0.0);
    CHECK(one.values[2] == 0.0);

    bs::KnotVector kv{{0, 0, 0, 0.5, 1, 1, 1}, 2};
    const auto nz = bs::eval_all_nonzero(kv, 0.25);
    for (std::size_t j = 0; j < nz.values.size(); ++j) {
        const int i = nz.first + static_cast<int>(j);
        CHECK(nz.values[j] == doctest::Approx(bs::eval_local({kv.knots.data() + i, 4}, 2, 0.25)).epsilon(1e-14));
    }
}

TEST_CASE("knot insertion edge cases") {
    const auto kv = bs::KnotVector::open_uniform(3, 4);
    const Eigen::MatrixXd I = Eigen::MatrixXd(bs::knot_insertion_matrix(kv, kv));
    CHECK((I - Eigen::MatrixXd::Identity(kv.size(), kv.size())).norm() == 0.0);

    bs::KnotVector c{{0, 0, 1, 1}, 1}, f{{0, 0, 0.5, 1, 1}, 1};
    const Eigen::MatrixXd M = Eigen::MatrixXd(bs::knot_insertion_matrix(c, f));
    CHECK(M(1, 0) == doctest::Approx(0.5));
    CHECK(M(1, 1) == doctest::Approx(0.5));
    for (int s = 0; s <= 100; ++s) {
        const double x = s / 100.0;
        bs::Spline1D sc{c, {1.0, 0.0}};
        bs::Spline1D sf{f, {M(0, 0), M(1, 0), M(2, 0)}};
        CHECK(std::abs(sc.derivative(x, 0) - sf.derivative(x, 0)) < 1e-14);
    }
}

TEST_CASE("dual functional reproduces constants") {
    const std::vector<double> t{0, 0.125, 0.5, 0.625, 1.0};
    const auto lam = bs::dual_functional(t, 3);
    CHECK(lam.apply([](double, int r) { return r == 0 ? 1.0 : 0.0; }) == doctest::Approx(1.0));
    CHECK(lam.tau > t.front());
    CHECK(lam.tau < t.back());
}
