#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hta/linalg.hpp"
#include "hta/network.hpp"

namespace hta {

/// Step sizes gamma_k: constant, or gamma0 / (k + 1).
struct StepSchedule {
    enum class Kind { Constant, Diminishing };

    Kind kind = Kind::Constant;
    double gamma = 0.05;

    static StepSchedule constant(double gamma);
    static StepSchedule diminishing(double gamma0);

    double step_size(std::uint64_t k) const noexcept {
        return kind == Kind::Constant ? gamma : gamma / static_cast<double>(k + 1);
    }
};

struct TrainConfig {
    StepSchedule schedule = StepSchedule::constant(0.05);
    std::size_t batch_size = 128;
    std::size_t epochs = 380;
    std::uint64_t seed = 0;
    std::size_t restarts = 15;
    /// Stop after this many SGD steps in one call (0: no cap, epochs decide).
    std::size_t max_steps = 0;
    /// Keep theta_k every `theta_every` steps for convergence diagnostics (0: off).
    std::size_t theta_every = 0;
    /// Evaluate the test hook every this many steps in addition to epoch ends (0: epochs only).
    std::size_t eval_every_steps = 0;
};

struct StepRecord {
    std::uint64_t step = 0;
    std::uint64_t k = 0;
    double t = 0.0;
    double gamma = 0.0;
    double batch_loss = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    std::uint64_t k_end = 0;
    double t = 0.0;
    double full_loss = std::numeric_limits<double>::quiet_NaN();
    double test_loss = std::numeric_limits<double>::quiet_NaN();
};

struct EvalRecord {
    std::uint64_t k = 0;
    double t = 0.0;
    double test_loss = 0.0;
};

struct ThetaSample {
    std::uint64_t k = 0;
    double gamma = 0.0;
    double t = 0.0;
    ParamVector theta;
};

struct DiagnosticsTrace {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    std::vector<EvalRecord> evals;
    std::vector<ThetaSample> theta_samples;

    void append(const DiagnosticsTrace& other);
    /// A_K = sum of gamma over recorded steps.
    double step_size_sum() const;
};

/// CSV with columns step,k,t,gamma,batch_loss,full_loss (full_loss only on epoch-closing rows).
void write_trace_csv(std::ostream& os, const DiagnosticsTrace& trace);

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, DiagnosticsTrace trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const DiagnosticsTrace& trace() const noexcept { return trace_; }

private:
    DiagnosticsTrace trace_;
};

/// Mini-batch loss oracle. `grad` arrives zeroed and receives the gradient of the
/// returned mean batch loss with respect to theta.
using BatchOracle =
    std::function<double(std::span<const double> theta, std::span<const std::size_t> batch, std::span<double> grad)>;
using ParamEvaluator = std::function<double(std::span<const double> theta)>;

struct TrainHooks {
    ParamEvaluator full_loss;
    ParamEvaluator test_loss;
};

struct TrainResult {
    ParamVector theta;
    DiagnosticsTrace trace;
    std::uint64_t next_k = 0;
};

/// theta - gamma_k * grad.
ParamVector sgd_step(std::span<const double> theta, std::span<const double> grad, std::uint64_t k,
                     const StepSchedule& schedule);
void sgd_update(std::span<double> theta, std::span<const double> grad, double gamma);

/// Shuffle-each-epoch mini-batch SGD. `k0` is the global schedule index of the first step
/// and `t` tags every record (homotopy parameter, 0 for plain training).
/// Returns the final iterate. Throws DivergenceError on a non-finite batch loss.
TrainResult train(const BatchOracle& oracle, std::size_t num_samples, const TrainConfig& cfg,
                  ParamVector theta0, Rng& rng, const TrainHooks& hooks = {}, std::uint64_t k0 = 0,
                  double t = 0.0);
TrainResult train(const BatchOracle& oracle, std::size_t num_samples, const TrainConfig& cfg,
                  ParamVector theta0, const TrainHooks& hooks = {});

struct MetricPoint {
    std::uint64_t k = 0;
    double value = 0.0;
};

/// Running (1/A_K) sum gamma_k ||grad f(theta_k)||^2 over the retained theta samples.
std::vector<MetricPoint> theorem1_metric(const DiagnosticsTrace& trace,
                                         const std::function<ParamVector(std::span<const double>)>& full_gradient);

struct AveragedIterate {
    ParamVector theta;
    double t = 0.0;
};

/// Gamma-weighted averages of the retained theta_k and t_k.
AveragedIterate averaged_iterates(const DiagnosticsTrace& trace);

struct RestartSummary {
    std::size_t restart = 0;
    std::uint64_t seed = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
};

template <class Result>
struct SweepResult {
    std::size_t best_index = 0;
    Result best;
    std::vector<RestartSummary> runs;

    double best_test_loss() const { return runs.at(best_index).test_loss; }
};

/// Runs `run(seed, restart)` for R derived seeds and keeps the lowest test loss.
/// Result must expose `double train_loss` and `double test_loss`. With parallel > 1 the
/// restarts run on worker threads; each restart is sequential so results do not change.
template <class Fn>
auto restart_sweep(Fn&& run, std::size_t restarts, std::uint64_t base_seed, std::size_t parallel = 1)
    -> SweepResult<decltype(run(std::uint64_t{}, std::size_t{}))> {
    using Result = decltype(run(std::uint64_t{}, std::size_t{}));
    if (restarts == 0) throw std::invalid_argument("restart_sweep: restarts must be >= 1");
    std::vector<Result> results(restarts);
    std::vector<std::uint64_t> seeds(restarts);
    for (std::size_t r = 0; r < restarts; ++r) seeds[r] = derive_seed(base_seed, r);

    if (parallel <= 1) {
        for (std::size_t r = 0; r < restarts; ++r) results[r] = run(seeds[r], r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(restarts);
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < std::min(parallel, restarts); ++w) {
            workers.emplace_back([&] {
                for (std::size_t r; (r = next++) < restarts;) {
                    try {
                        results[r] = run(seeds[r], r);
                    } catch (...) {
                        errors[r] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : workers) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    SweepResult<Result> out;
    auto rank = [](double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; };
    for (std::size_t r = 0; r < restarts; ++r) {
        out.runs.push_back({r, seeds[r], results[r].train_loss, results[r].test_loss});
        if (rank(results[r].test_loss) < rank(results[out.best_index].test_loss)) out.best_index = r;
    }
    out.best = std::move(results[out.best_index]);
    return out;
}

}  // namespace hta
