#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "hta/data.hpp"

using namespace hta;

namespace {

std::set<std::vector<double>> row_set(const Matrix& m) {
    std::set<std::vector<double>> out;
    for (std::size_t r = 0; r < m.rows(); ++r) out.insert({m.row(r).begin(), m.row(r).end()});
    return out;
}

}  // namespace

TEST_SUITE("data") {
    TEST_CASE("sin target") {
        CHECK(sin_target(Vector{0, 0, 0}) == 0.0);
        CHECK(sin_target(Vector{std::numbers::pi / 4, std::numbers::pi / 4}) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(sin_target(Vector{1, 1, 1}) == doctest::Approx(0.141120008059867).epsilon(1e-12));
    }

    TEST_CASE("uniform grid sizes and endpoints") {
        const double pi = std::numbers::pi;
        CHECK(uniform_grid_dataset(1, 100, -pi, pi).size() == 100);
        const Dataset two = uniform_grid_dataset(2, 100, -pi, pi);
        CHECK(two.size() == 10'000);
        CHECK(row_set(two.inputs).size() == 10'000);
        const Dataset ends = uniform_grid_dataset(1, 2, 0.0, 1.0);
        CHECK(ends.inputs(0, 0) == 0.0);
        CHECK(ends.inputs(1, 0) == 1.0);
        CHECK_THROWS(uniform_grid_dataset(1, 1, 0.0, 1.0));
        CHECK_THROWS(uniform_grid_dataset(8, 100, 0.0, 1.0));
        for (std::size_t r = 0; r < two.size(); ++r) CHECK(two.targets(r, 0) == sin_target(two.inputs.row(r)));
    }

    TEST_CASE("sparse grid in one dimension is the 1-d rule") {
        const Matrix g = sparse_grid({1, 6}, 0.0, 1.0);
        REQUIRE(g.rows() == 63);
        for (std::size_t i = 0; i < 63; ++i) CHECK(g(i, 0) == double(i + 1) / 64.0);
    }

    TEST_CASE("sparse grid counts") {
        // level 6 counts of the nested interior rule
        const std::size_t expected[] = {63, 321, 1023, 2561, 5503, 10625, 18943, 31745};
        for (std::size_t n = 1; n <= 8; ++n) {
            CHECK(sparse_grid_size({n, 6}) == expected[n - 1]);
            if (n <= 5) CHECK(sparse_grid({n, 6}, -1, 1).rows() == expected[n - 1]);
        }
    }

    TEST_CASE("sparse grid rows are distinct and nested in the level") {
        for (std::size_t n = 1; n <= 3; ++n) {
            for (std::size_t level = 1; level < 6; ++level) {
                const auto coarse = row_set(sparse_grid({n, level}, 0, 1));
                const Matrix fine_m = sparse_grid({n, level + 1}, 0, 1);
                const auto fine = row_set(fine_m);
                CHECK(fine.size() == fine_m.rows());
                for (const auto& p : coarse) CHECK(fine.count(p) == 1);
            }
        }
    }

    TEST_CASE("split partitions") {
        const Dataset ds = uniform_grid_dataset(1, 100, 0, 1);
        const auto [a, b] = split(ds, 0.9, 5);
        CHECK(a.size() == 90);
        CHECK(b.size() == 10);
        auto rows = row_set(a.inputs);
        for (std::size_t r = 0; r < b.size(); ++r) rows.insert({b.inputs(r, 0)});
        CHECK(rows.size() == 100);
        const auto [a2, b2] = split(ds, 0.9, 5);
        CHECK(a2.inputs == a.inputs);
        CHECK(b2.inputs == b.inputs);
        const auto [c, d] = split(uniform_grid_dataset(1, 2, 0, 1), 0.5, 1);
        CHECK(c.size() == 1);
        CHECK(d.size() == 1);
        CHECK_THROWS(split(ds, 0.0, 1));
        CHECK_THROWS(split(ds, 1.0, 1));
        CHECK_THROWS(split(uniform_grid_dataset(1, 2, 0, 1), 0.9, 1));
    }

    TEST_CASE("van der pol at mu = 0 is the harmonic oscillator") {
        const VdpState s = vdp_integrate({.mu = 0.0, .k = 3.0});
        CHECK(std::abs(s.y - 2.0 * std::cos(1.0)) < 1e-8);
        CHECK(std::abs(s.v + 2.0 * std::sin(1.0)) < 1e-8);
        CHECK(vdp_solve({.mu = 0.0, .k = 0.0}) == doctest::Approx(1.0806046).epsilon(1e-7));
    }

    TEST_CASE("van der pol step halving") {
        // values from an independent double-precision RK4
        const double a = vdp_solve({.mu = 5.0, .k = 5.0, .step = 1e-3});
        const double b = vdp_solve({.mu = 5.0, .k = 5.0, .step = 5e-4});
        CHECK(a == doctest::Approx(-4.4488642756240955).epsilon(1e-13));
        CHECK(b == doctest::Approx(-4.448864257737599).epsilon(1e-13));
        CHECK(std::abs(a - b) < 2e-8);
        // fourth order: halving h removes 15/16 of the error
        const double ref = vdp_solve({.mu = 5.0, .k = 5.0, .step = 1e-5});
        CHECK(std::abs(a - b) / std::abs(a - ref) == doctest::Approx(15.0 / 16.0).epsilon(0.01));
    }

    TEST_CASE("van der pol global error is fourth order") {
        const double ref = vdp_solve({.mu = 2.0, .k = 2.0, .step = 1e-6});
        const double e1 = std::abs(vdp_solve({.mu = 2.0, .k = 2.0, .step = 0.05}) - ref);
        const double e2 = std::abs(vdp_solve({.mu = 2.0, .k = 2.0, .step = 0.025}) - ref);
        CHECK(e1 / e2 >= 12.0);
        CHECK(e1 / e2 <= 20.0);
    }

    TEST_CASE("van der pol configuration errors") {
        CHECK_THROWS(vdp_solve({.mu = 1.0, .k = 1.0, .step = 0.3}));
        CHECK_THROWS(vdp_solve({.mu = 1.0, .k = 1.0, .step = 0.0}));
        CHECK_THROWS(vdp_solve({.mu = 1e6, .k = 1e6, .step = 0.1}));
    }

    TEST_CASE("van der pol grids") {
        CHECK(vdp_dataset(11, 14, 11, 14).size() == 961);
        const Dataset one = vdp_dataset(1, 1, 1, 1);
        REQUIRE(one.size() == 1);
        CHECK(one.inputs(0, 0) == 1.0);
        CHECK(one.inputs(0, 1) == 1.0);
        const Dataset small = vdp_dataset(1, 1.2, 2, 2.1, 0.1);
        CHECK(small.size() == 6);
        CHECK(small.inputs(5, 0) == 1.2);
        CHECK(small.inputs(5, 1) == 2.1);
        CHECK(small.targets(5, 0) == vdp_solve({.mu = 1.2, .k = 2.1}));
    }

    TEST_CASE("csv round trip is bit exact") {
        Dataset ds = uniform_grid_dataset(2, 7, -std::numbers::pi, std::numbers::pi);
        ds.provenance = "grid test";
        std::stringstream ss;
        save_dataset(ss, ds);
        const Dataset back = load_dataset(ss);
        CHECK(back.inputs == ds.inputs);
        CHECK(back.targets == ds.targets);
        CHECK(back.provenance == ds.provenance);
    }

    TEST_CASE("csv errors") {
        std::stringstream empty("");
        CHECK_THROWS(load_dataset(empty));
        std::stringstream mismatch("# dims=2,1 provenance=x\n1,2\n");
        try {
            load_dataset(mismatch);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
        std::stringstream garbage("# dims=1,1 provenance=x\n1,abc\n");
        CHECK_THROWS(load_dataset(garbage));
    }

    TEST_CASE("validate") {
        Dataset ds = uniform_grid_dataset(1, 3, 0, 1);
        CHECK_NOTHROW(ds.validate());
        ds.inputs(0, 0) = 2.0;
        CHECK_THROWS(ds.validate());
        ds.inputs(0, 0) = std::nan("");
        CHECK_THROWS(ds.validate());
    }
}
