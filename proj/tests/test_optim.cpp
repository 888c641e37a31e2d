#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "hta/optim.hpp"

using namespace hta;

namespace {

// f(theta) = sum_i (theta_i - c)^2 with every sample contributing the same term.
BatchOracle quadratic_oracle(double c) {
    return [c](std::span<const double> theta, std::span<const std::size_t>, std::span<double> grad) {
        double loss = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            loss += (theta[i] - c) * (theta[i] - c);
            grad[i] = 2.0 * (theta[i] - c);
        }
        return loss;
    };
}

// Mean over the batch of (theta - x_j)^2 for data x_j; gives distinct traces for distinct shuffles.
BatchOracle data_oracle(const std::vector<double>& xs) {
    return [&xs](std::span<const double> theta, std::span<const std::size_t> batch, std::span<double> grad) {
        double loss = 0.0;
        for (std::size_t j : batch) {
            loss += (theta[0] - xs[j]) * (theta[0] - xs[j]);
            grad[0] += 2.0 * (theta[0] - xs[j]);
        }
        grad[0] /= static_cast<double>(batch.size());
        return loss / static_cast<double>(batch.size());
    };
}

}  // namespace

TEST_SUITE("optim") {
    TEST_CASE("sgd_step examples") {
        const ParamVector theta{1.0};
        CHECK(sgd_step(theta, ParamVector{0.0}, 0, StepSchedule::constant(0.05)) == theta);
        CHECK(sgd_step(theta, ParamVector{2.0}, 0, StepSchedule::constant(0.05))[0] == doctest::Approx(0.9).epsilon(1e-15));
        CHECK_THROWS(sgd_step(theta, ParamVector{1.0, 2.0}, 0, StepSchedule::constant(0.05)));
    }

    TEST_CASE("diminishing schedule formula") {
        const StepSchedule s = StepSchedule::diminishing(1.0);
        CHECK(s.step_size(0) == 1.0);
        CHECK(s.step_size(9) == doctest::Approx(0.1).epsilon(1e-15));
        for (std::uint64_t k = 0; k < 1000; ++k) CHECK(s.step_size(k + 1) < s.step_size(k));
        CHECK_THROWS(StepSchedule::constant(0.0));
        CHECK_THROWS(StepSchedule::diminishing(-1.0));
    }

    TEST_CASE("diminishing partial sums diverge and squared sums converge") {
        const double g0 = 0.5;
        const StepSchedule s = StepSchedule::diminishing(g0);
        double a = 0.0, b = 0.0;
        for (std::uint64_t k = 0; k < 1'000'000; ++k) {
            a += s.step_size(k);
            b += s.step_size(k) * s.step_size(k);
            if (k + 1 == 1000) CHECK(a >= g0 * std::log(1000.0));
        }
        CHECK(a >= g0 * std::log(1e6));
        // tail of sum g0^2/(k+1)^2 beyond K is below g0^2/K
        double tail = 0.0;
        for (std::uint64_t k = 1'000'000; k < 50'000'000; ++k) tail += s.step_size(k) * s.step_size(k);
        CHECK(tail < 1e-5 * g0 * g0);
        CHECK(b < g0 * g0 * std::numbers::pi * std::numbers::pi / 6.0);
    }

    TEST_CASE("quadratic converges at the contraction rate") {
        TrainConfig cfg;
        cfg.schedule = StepSchedule::constant(0.1);
        cfg.batch_size = 1;
        cfg.epochs = 200;
        const TrainResult r = train(quadratic_oracle(3.0), 1, cfg, ParamVector{0.0});
        CHECK(std::abs(r.theta[0] - 3.0) < 1e-6);
        // closed form: theta_k - 3 = (1 - 2 gamma)^k (theta_0 - 3)
        CHECK(r.theta[0] - 3.0 == doctest::Approx(-3.0 * std::pow(0.8, 200)).epsilon(1e-9));
        CHECK(r.trace.steps.size() == 200);
        CHECK(r.next_k == 200);
    }

    TEST_CASE("zero epochs returns the initial parameters") {
        TrainConfig cfg;
        cfg.epochs = 0;
        const TrainResult r = train(quadratic_oracle(3.0), 5, cfg, ParamVector{1.5, -2.0});
        CHECK(r.theta == ParamVector{1.5, -2.0});
        CHECK(r.trace.steps.empty());
    }

    TEST_CASE("step count and batch clamping") {
        std::vector<double> xs(300);
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::sin(double(i));
        TrainConfig cfg;
        cfg.batch_size = 128;
        cfg.epochs = 4;
        const TrainResult r = train(data_oracle(xs), xs.size(), cfg, ParamVector{0.0});
        CHECK(r.trace.steps.size() == 4 * 3);
        CHECK(r.trace.epochs.size() == 4);
        cfg.batch_size = 1000;
        CHECK(train(data_oracle(xs), xs.size(), cfg, ParamVector{0.0}).trace.steps.size() == 4);
        cfg.max_steps = 3;
        CHECK(train(data_oracle(xs), xs.size(), cfg, ParamVector{0.0}).trace.steps.size() == 3);
    }

    TEST_CASE("same seed gives bit-identical traces") {
        std::vector<double> xs(257);
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::cos(3.0 * double(i));
        TrainConfig cfg;
        cfg.batch_size = 16;
        cfg.epochs = 3;
        cfg.seed = 99;
        const TrainResult a = train(data_oracle(xs), xs.size(), cfg, ParamVector{0.5});
        const TrainResult b = train(data_oracle(xs), xs.size(), cfg, ParamVector{0.5});
        REQUIRE(a.trace.steps.size() == b.trace.steps.size());
        for (std::size_t i = 0; i < a.trace.steps.size(); ++i) CHECK(a.trace.steps[i].batch_loss == b.trace.steps[i].batch_loss);
        CHECK(a.theta == b.theta);
        cfg.seed = 100;
        CHECK(train(data_oracle(xs), xs.size(), cfg, ParamVector{0.5}).theta != a.theta);
    }

    TEST_CASE("k is global and gamma never increases under the diminishing schedule") {
        std::vector<double> xs(40, 1.0);
        TrainConfig cfg;
        cfg.schedule = StepSchedule::diminishing(0.3);
        cfg.batch_size = 8;
        cfg.epochs = 5;
        Rng rng(1);
        const TrainResult r = train(data_oracle(xs), xs.size(), cfg, ParamVector{0.0}, rng, {}, 17, 0.5);
        CHECK(r.trace.steps.front().k == 17);
        for (std::size_t i = 1; i < r.trace.steps.size(); ++i) {
            CHECK(r.trace.steps[i].k == r.trace.steps[i - 1].k + 1);
            CHECK(r.trace.steps[i].gamma <= r.trace.steps[i - 1].gamma);
        }
        CHECK(r.trace.steps.front().gamma == doctest::Approx(0.3 / 18.0));
        CHECK(r.trace.step_size_sum() > 0.0);
    }

    TEST_CASE("non-finite loss aborts with the trace so far") {
        int calls = 0;
        BatchOracle oracle = [&](std::span<const double>, std::span<const std::size_t>, std::span<double> g) {
            g[0] = 1.0;
            return ++calls < 4 ? 1.0 : std::nan("");
        };
        TrainConfig cfg;
        cfg.batch_size = 1;
        cfg.epochs = 10;
        try {
            train(oracle, 1, cfg, ParamVector{0.0});
            FAIL("expected divergence");
        } catch (const DivergenceError& e) {
            CHECK(e.trace().steps.size() == 3);
        }
    }

    TEST_CASE("trace csv header") {
        std::vector<double> xs(4, 2.0);
        TrainConfig cfg;
        cfg.batch_size = 2;
        cfg.epochs = 1;
        TrainHooks hooks;
        hooks.full_loss = [](std::span<const double> th) { return th[0]; };
        const TrainResult r = train(data_oracle(xs), xs.size(), cfg, ParamVector{0.0}, hooks);
        std::ostringstream os;
        write_trace_csv(os, r.trace);
        const std::string csv = os.str();
        CHECK(csv.rfind("step,k,t,gamma,batch_loss,full_loss\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    }

    TEST_CASE("restart sweep keeps the minimum") {
        auto run = [](std::uint64_t seed, std::size_t r) {
            struct R {
                double train_loss, test_loss;
                std::uint64_t seed;
            };
            Rng rng(seed);
            return R{rng.uniform(), r == 3 ? std::nan("") : rng.uniform(), seed};
        };
        const auto sweep = restart_sweep(run, 15, 7);
        CHECK(sweep.runs.size() == 15);
        for (const auto& s : sweep.runs)
            if (!std::isnan(s.test_loss)) CHECK(sweep.best_test_loss() <= s.test_loss);
        const auto one = restart_sweep(run, 1, 7);
        CHECK(one.best.seed == derive_seed(7, 0));
        const auto par = restart_sweep(run, 15, 7, 4);
        CHECK(par.best_index == sweep.best_index);
        CHECK(par.best.test_loss == sweep.best.test_loss);
        CHECK_THROWS(restart_sweep(run, 0, 7));
    }

    TEST_CASE("weighted gradient metric simple cases") {
        DiagnosticsTrace trace;
        for (std::uint64_t k = 0; k < 5; ++k) trace.theta_samples.push_back({k, 1.0 / double(k + 1), 0.0, ParamVector{double(k)}});
        const auto zero = theorem1_metric(trace, [](std::span<const double>) { return ParamVector{0.0, 0.0}; });
        for (const auto& p : zero) CHECK(p.value == 0.0);
        const auto constant = theorem1_metric(trace, [](std::span<const double>) { return ParamVector{3.0, 4.0}; });
        for (const auto& p : constant) CHECK(p.value == doctest::Approx(25.0).epsilon(1e-14));
    }

    TEST_CASE("weighted gradient metric on a toy quadratic decreases") {
        // f(theta) = theta^2 / 2 with additive gradient noise, gamma_k = 1/(k+1)
        Rng noise(3);
        BatchOracle oracle = [&](std::span<const double> th, std::span<const std::size_t>, std::span<double> g) {
            g[0] = th[0] + 0.1 * (noise.uniform() - 0.5);
            return 0.5 * th[0] * th[0];
        };
        TrainConfig cfg;
        cfg.schedule = StepSchedule::diminishing(1.0);
        cfg.batch_size = 1;
        cfg.epochs = 10'000;
        cfg.theta_every = 1;
        const TrainResult r = train(oracle, 1, cfg, ParamVector{5.0});
        const auto metric = theorem1_metric(r.trace, [](std::span<const double> th) { return ParamVector{th[0]}; });
        REQUIRE(metric.size() == 10'000);
        for (const auto& p : metric) CHECK(p.value >= 0.0);
        CHECK(metric[9'999].value < metric[99].value);
        // A gamma-weighted running mean can shrink by at most A_100 / A_10000 over this window.
        double a100 = 0.0, a10000 = 0.0;
        for (std::uint64_t k = 0; k < 10'000; ++k) (k < 100 ? a100 : a10000) += 1.0 / double(k + 1);
        a10000 += a100;
        CHECK(metric[9'999].value >= metric[99].value * a100 / a10000 * (1.0 - 1e-12));
    }

    TEST_CASE("averaged iterates") {
        DiagnosticsTrace constant;
        for (std::uint64_t k = 0; k < 4; ++k) constant.theta_samples.push_back({k, 0.5 / double(k + 1), 0.25, ParamVector{2.0, -1.0}});
        const AveragedIterate c = averaged_iterates(constant);
        CHECK(c.theta[0] == doctest::Approx(2.0));
        CHECK(c.theta[1] == doctest::Approx(-1.0));
        CHECK(c.t == doctest::Approx(0.25));
        DiagnosticsTrace two;
        two.theta_samples.push_back({0, 1.0, 0.0, ParamVector{0.0}});
        two.theta_samples.push_back({1, 1.0, 0.0, ParamVector{2.0}});
        CHECK(averaged_iterates(two).theta[0] == 1.0);
        CHECK_THROWS(averaged_iterates(DiagnosticsTrace{}));
    }

    TEST_CASE("averaged iterate of a homotopy quadratic approaches the minimum") {
        // f(theta; t) = (theta - t)^2 with t stepping from 0 to 1 and theta starting at the t = 0 minimizer.
        TrainConfig cfg;
        cfg.schedule = StepSchedule::diminishing(5.0);
        cfg.batch_size = 1;
        cfg.theta_every = 1;
        cfg.epochs = 2000;
        DiagnosticsTrace all;
        ParamVector theta{0.0};
        std::uint64_t k = 0;
        Rng rng(1);
        const int phases = 4;
        for (int i = 0; i <= phases; ++i) {
            const double t = double(i) / phases;
            const TrainResult r = train(quadratic_oracle(t), 1, cfg, theta, rng, {}, k, t);
            theta = r.theta;
            k = r.next_k;
            all.append(r.trace);
        }
        REQUIRE(k == 10'000);
        const AveragedIterate avg = averaged_iterates(all);
        const double f = (avg.theta[0] - avg.t) * (avg.theta[0] - avg.t);
        CHECK(f == doctest::Approx(9.855300114132228e-05).epsilon(1e-9));
        CHECK(f < 1e-3);
    }
}
