#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "hta/linalg.hpp"

using namespace hta;

namespace {

Matrix triple_loop(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

}  // namespace

TEST_SUITE("linalg") {
    TEST_CASE("identity times M is M") {
        const Matrix m{{1.5, -2.0}, {0.25, 7.0}};
        CHECK(matmul(Matrix::identity(2), m) == m);
    }

    TEST_CASE("hand product") {
        const Matrix c = matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{1}, {1}});
        REQUIRE(c.rows() == 2);
        REQUIRE(c.cols() == 1);
        CHECK(c(0, 0) == 3.0);
        CHECK(c(1, 0) == 7.0);
    }

    TEST_CASE("matmul matches triple loop") {
        Rng rng(11);
        const Matrix a = uniform_init(rng, 3, 4, -1, 1);
        const Matrix b = uniform_init(rng, 4, 2, -1, 1);
        const Matrix c = matmul(a, b);
        const Matrix ref = triple_loop(a, b);
        CHECK(max_abs_diff(c.values(), ref.values()) <= 1e-15);
    }

    TEST_CASE("dimension mismatch names both shapes") {
        try {
            matmul(Matrix(2, 3), Matrix(2, 3));
            FAIL("expected an error");
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            CHECK(msg.find("2x3") != std::string::npos);
        }
    }

    TEST_CASE("matmul is associative on random 5x5") {
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix a = uniform_init(rng, 5, 5, -1, 1);
            const Matrix b = uniform_init(rng, 5, 5, -1, 1);
            const Matrix c = uniform_init(rng, 5, 5, -1, 1);
            const Matrix l = matmul(matmul(a, b), c);
            const Matrix r = matmul(a, matmul(b, c));
            for (std::size_t i = 0; i < l.size(); ++i) {
                CHECK(std::abs(l.values()[i] - r.values()[i]) <= 1e-12 * std::max(1.0, std::abs(l.values()[i])));
            }
        }
    }

    TEST_CASE("transpose and matvec") {
        const Matrix a{{1, 2, 3}, {4, 5, 6}};
        const Matrix t = transpose(a);
        CHECK(t.rows() == 3);
        CHECK(t(2, 1) == 6.0);
        const Vector y = matvec(a, Vector{1, 0, -1});
        CHECK(y == Vector{-2, -2});
        CHECK_THROWS(matvec(a, Vector{1, 2}));
        CHECK(dot(Vector{1, 2}, Vector{3, 4}) == 11.0);
        CHECK(squared_norm(Vector{3, 4}) == 25.0);
    }

    TEST_CASE("uniform_init range and determinism") {
        Rng a(42), b(42);
        const Matrix m1 = uniform_init(a, 50, 40, 0.0, 1.0);
        const Matrix m2 = uniform_init(b, 50, 40, 0.0, 1.0);
        CHECK(m1 == m2);
        for (double v : m1.values()) {
            CHECK(v >= 0.0);
            CHECK(v < 1.0);
        }
        CHECK_THROWS_AS(uniform_init(a, 1, 1, 1.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(uniform_init(a, 1, 1, 2.0, 1.0), std::invalid_argument);
    }

    TEST_CASE("uniform mean over 1e6 draws") {
        Rng rng(2024);
        double sum = 0.0;
        for (int i = 0; i < 1'000'000; ++i) sum += rng.uniform();
        CHECK(std::abs(sum / 1e6 - 0.5) < 0.01);
    }

    TEST_CASE("rng is a fixed sequence") {
        // splitmix64 reference values for seed 0
        Rng rng(0);
        CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
        CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
        CHECK(rng.next_u64() == 0x06c45d188009454fULL);
    }

    TEST_CASE("below stays in range and shuffle permutes") {
        Rng rng(3);
        for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
        std::vector<std::size_t> v(100);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
        rng.shuffle(std::span<std::size_t>(v));
        std::vector<std::size_t> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(sorted[i] == i);
    }

    TEST_CASE("derived seeds differ") {
        CHECK(derive_seed(0, 0) != derive_seed(0, 1));
        CHECK(derive_seed(0, 0) != derive_seed(1, 0));
        CHECK(derive_seed(9, 4) == derive_seed(9, 4));
    }

    TEST_CASE("all_finite") {
        CHECK(all_finite(Vector{1, 2}));
        CHECK_FALSE(all_finite(Vector{1, std::nan("")}));
        CHECK_FALSE(all_finite(Vector{INFINITY}));
    }
}
