#include "asts/kernels.hpp"

#include <doctest.h>

#include <Eigen/SparseCore>

#include <cmath>
#include <random>
#include <vector>

namespace k = asts::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("vector kernels: AVX2 matches the scalar reference") {
    if (k::detected_isa() != k::Isa::avx2) {
        MESSAGE("AVX2 not available; equivalence not exercised");
        return;
    }
    std::mt19937_64 rng(11);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 31u, 64u, 1000u, 1027u}) {
        auto x = random_vector(n, rng), y = random_vector(n, rng), d = random_vector(n, rng);
        const double ds = k::scalar::dot(x.data(), y.data(), n);
        const double dv = k::avx2::dot(x.data(), y.data(), n);
        double mag = 0;
        for (std::size_t i = 0; i < n; ++i) mag += std::abs(x[i] * y[i]);
        CHECK(std::abs(ds - dv) <= 1e-14 * (1 + mag));

        auto y1 = y, y2 = y;
        k::scalar::axpy(0.37, x.data(), y1.data(), n);
        k::avx2::axpy(0.37, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

        y1 = y;
        y2 = y;
        k::scalar::xpay(x.data(), -1.25, y1.data(), n);
        k::avx2::xpay(x.data(), -1.25, y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

        k::scalar::scale_mul(d.data(), x.data(), y1.data(), n);
        k::avx2::scale_mul(d.data(), x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == y2[i]);
    }
}

TEST_CASE("CSR product: AVX2 matches the scalar reference and Eigen") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> col(0, 299);
    std::uniform_int_distribution<int> len(0, 13);
    std::vector<Eigen::Triplet<double>> t;
    for (int r = 0; r < 257; ++r)
        for (int j = len(rng); j > 0; --j) t.emplace_back(r, col(rng), u(rng));
    Eigen::SparseMatrix<double, Eigen::RowMajor> A(257, 300);
    A.setFromTriplets(t.begin(), t.end());
    A.makeCompressed();
    Eigen::VectorXd x = Eigen::VectorXd::Random(300);
    Eigen::VectorXd ref = A * x;
    k::CsrView v{A.rows(), A.outerIndexPtr(), A.innerIndexPtr(), A.valuePtr()};
    Eigen::VectorXd ys(257), yv(257);
    k::scalar::spmv(v, x.data(), ys.data());
    CHECK((ys - ref).norm() <= 1e-13 * ref.norm());
    if (k::detected_isa() == k::Isa::avx2) {
        k::avx2::spmv(v, x.data(), yv.data());
        CHECK((yv - ys).norm() <= 1e-13 * ys.norm());
    }
}

TEST_CASE("dispatch can be forced to the scalar path") {
    const auto before = k::active_isa();
    k::set_isa(k::Isa::scalar);
    CHECK(k::active_isa() == k::Isa::scalar);
    double x[3] = {1, 2, 3}, y[3] = {4, 5, 6};
    CHECK(k::dot(x, y, 3) == 32.0);
    k::set_isa(before);
    CHECK(k::active_isa() == before);
    CHECK(std::string(k::to_string(k::Isa::avx2)) == "avx2");
}
