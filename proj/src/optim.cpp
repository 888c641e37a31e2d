#include "hta/optim.hpp"

#include <numeric>
#include <ostream>

#include "hta/text_io.hpp"

namespace hta {

StepSchedule StepSchedule::constant(double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("StepSchedule: gamma must be positive");
    return {Kind::Constant, gamma};
}

StepSchedule StepSchedule::diminishing(double gamma0) {
    if (!(gamma0 > 0.0)) throw std::invalid_argument("StepSchedule: gamma0 must be positive");
    return {Kind::Diminishing, gamma0};
}

void DiagnosticsTrace::append(const DiagnosticsTrace& other) {
    const std::uint64_t offset = steps.empty() ? 0 : steps.back().step + 1;
    for (auto s : other.steps) {
        s.step += offset;
        steps.push_back(s);
    }
    const std::size_t epoch_offset = epochs.empty() ? 0 : epochs.back().epoch + 1;
    for (auto e : other.epochs) {
        e.epoch += epoch_offset;
        epochs.push_back(e);
    }
    evals.insert(evals.end(), other.evals.begin(), other.evals.end());
    theta_samples.insert(theta_samples.end(), other.theta_samples.begin(), other.theta_samples.end());
}

double DiagnosticsTrace::step_size_sum() const {
    double a = 0.0;
    for (const auto& s : steps) a += s.gamma;
    return a;
}

void write_trace_csv(std::ostream& os, const DiagnosticsTrace& trace) {
    os << "step,k,t,gamma,batch_loss,full_loss\n";
    std::size_t e = 0;
    for (const auto& s : trace.steps) {
        os << s.step << ',' << s.k << ',' << format_double(s.t) << ',' << format_double(s.gamma) << ','
           << format_double(s.batch_loss) << ',';
        while (e < trace.epochs.size() && trace.epochs[e].k_end < s.k + 1) ++e;
        if (e < trace.epochs.size() && trace.epochs[e].k_end == s.k + 1 && !std::isnan(trace.epochs[e].full_loss)) {
            os << format_double(trace.epochs[e].full_loss);
        }
        os << '\n';
    }
}

ParamVector sgd_step(std::span<const double> theta, std::span<const double> grad, std::uint64_t k,
                     const StepSchedule& schedule) {
    ParamVector out(theta.begin(), theta.end());
    sgd_update(out, grad, schedule.step_size(k));
    return out;
}

void sgd_update(std::span<double> theta, std::span<const double> grad, double gamma) {
    if (theta.size() != grad.size()) {
        throw std::invalid_argument("sgd_update: theta has " + std::to_string(theta.size()) +
                                    " entries, gradient has " + std::to_string(grad.size()));
    }
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= gamma * grad[i];
}

TrainResult train(const BatchOracle& oracle, std::size_t num_samples, const TrainConfig& cfg,
                  ParamVector theta0, Rng& rng, const TrainHooks& hooks, std::uint64_t k0, double t) {
    if (num_samples == 0) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch size must be positive");

    TrainResult result;
    result.theta = std::move(theta0);
    result.next_k = k0;
    auto& trace = result.trace;

    const std::size_t batch = std::min(cfg.batch_size, num_samples);
    std::vector<std::size_t> order(num_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    ParamVector grad(result.theta.size());
    std::uint64_t step = 0;
    std::uint64_t k = k0;

    auto maybe_sample_theta = [&](std::uint64_t kk, double gamma) {
        if (cfg.theta_every > 0 && (kk - k0) % cfg.theta_every == 0) {
            trace.theta_samples.push_back({kk, gamma, t, result.theta});
        }
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < num_samples; start += batch) {
            if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
            const std::size_t len = std::min(batch, num_samples - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            const double loss =
                oracle(result.theta, std::span<const std::size_t>(order).subspan(start, len), grad);
            const double gamma = cfg.schedule.step_size(k);
            if (!std::isfinite(loss)) {
                result.next_k = k;
                throw DivergenceError("train: non-finite batch loss at step " + std::to_string(k), trace);
            }
            maybe_sample_theta(k, gamma);
            trace.steps.push_back({step, k, t, gamma, loss});
            sgd_update(result.theta, grad, gamma);
            ++step;
            ++k;
            if (cfg.eval_every_steps > 0 && hooks.test_loss && k % cfg.eval_every_steps == 0) {
                trace.evals.push_back({k, t, hooks.test_loss(result.theta)});
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.k_end = k;
        rec.t = t;
        if (hooks.full_loss) rec.full_loss = hooks.full_loss(result.theta);
        if (hooks.test_loss) rec.test_loss = hooks.test_loss(result.theta);
        trace.epochs.push_back(rec);
    }
    result.next_k = k;
    return result;
}

TrainResult train(const BatchOracle& oracle, std::size_t num_samples, const TrainConfig& cfg,
                  ParamVector theta0, const TrainHooks& hooks) {
    Rng rng(cfg.seed);
    return train(oracle, num_samples, cfg, std::move(theta0), rng, hooks);
}

std::vector<MetricPoint> theorem1_metric(const DiagnosticsTrace& trace,
                                         const std::function<ParamVector(std::span<const double>)>& full_gradient) {
    std::vector<MetricPoint> out;
    double weighted = 0.0;
    double a = 0.0;
    for (const auto& s : trace.theta_samples) {
        const ParamVector g = full_gradient(s.theta);
        weighted += s.gamma * squared_norm(g);
        a += s.gamma;
        out.push_back({s.k, a > 0.0 ? weighted / a : 0.0});
    }
    return out;
}

AveragedIterate averaged_iterates(const DiagnosticsTrace& trace) {
    if (trace.theta_samples.empty()) throw std::invalid_argument("averaged_iterates: no retained iterates");
    AveragedIterate avg;
    avg.theta.assign(trace.theta_samples.front().theta.size(), 0.0);
    double a = 0.0;
    for (const auto& s : trace.theta_samples) {
        axpy(s.gamma, s.theta, avg.theta);
        avg.t += s.gamma * s.t;
        a += s.gamma;
    }
    for (double& v : avg.theta) v /= a;
    avg.t /= a;
    return avg;
}

}  // namespace hta
