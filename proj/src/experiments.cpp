#include "hta/experiments.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hta {

std::string_view to_string(Method m) noexcept { return m == Method::Hta ? "hta" : "traditional"; }

nlohmann::json to_json(const TrainConfig& cfg) {
    return {
        {"schedule", cfg.schedule.kind == StepSchedule::Kind::Constant ? "constant" : "diminishing"},
        {"lr", cfg.schedule.gamma},
        {"batch", cfg.batch_size},
        {"epochs", cfg.epochs},
        {"max_steps", cfg.max_steps},
        {"restarts", cfg.restarts},
        {"seed", cfg.seed},
    };
}

BudgetSplit split_budget(std::size_t total, const std::vector<Stage>& stages) {
    BudgetSplit b;
    for (const auto& s : stages) b.phases += s.schedule.steps();
    b.per_phase = total / b.phases;
    b.base = total - b.per_phase * (b.phases - 1);
    return b;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

nlohmann::json widths_json(const Architecture& a) { return a.hidden_widths(); }

MethodRun diverged_run() {
    MethodRun r;
    r.diverged = true;
    r.train_loss = r.test_loss = std::numeric_limits<double>::infinity();
    return r;
}

}  // namespace

PairedReport run_paired(const std::string& name, const Dataset& train_set, const Dataset& test_set,
                        const Architecture& traditional, const Architecture& hta_base,
                        const std::vector<Stage>& stages, const ExperimentConfig& cfg, LossKind loss) {
    const bool step_budget = cfg.train.max_steps > 0;
    const BudgetSplit split = split_budget(step_budget ? cfg.train.max_steps : cfg.train.epochs, stages);

    HtaOptions opts;
    opts.loss = loss;
    if (cfg.record_curves) opts.test = &test_set;

    nlohmann::json shared = {
        {"experiment", name},
        {"data",
         {{"train_size", train_set.size()},
          {"test_size", test_set.size()},
          {"train_provenance", train_set.provenance},
          {"test_provenance", test_set.provenance},
          {"data_seed", cfg.data_seed}}},
        {"loss", std::string(to_string(loss))},
        {"optimizer", to_json(cfg.train)},
        {"budget", step_budget ? "steps" : "epochs"},
    };

    PairedReport out;
    out.experiment = name;
    out.train_size = train_set.size();
    out.test_size = test_set.size();
    out.provenance = train_set.provenance;

    // Traditional: full network from random initialization.
    {
        const auto start = std::chrono::steady_clock::now();
        auto run = [&](std::uint64_t seed, std::size_t) {
            Rng rng(seed);
            MethodRun r;
            r.net = Mlp::random(traditional, rng);
            TrainConfig c = cfg.train;
            if (step_budget) c.epochs = std::max(c.epochs, c.max_steps);
            try {
                TrainResult tr = train_mlp(r.net, train_set, c, opts, rng);
                r.trace = std::move(tr.trace);
            } catch (const DivergenceError&) {
                return diverged_run();
            }
            r.widths.push_back(traditional.hidden_widths());
            r.phases.push_back({0, 1.0, r.trace.epochs.size(), r.trace.steps.size()});
            r.train_loss = dataset_loss(r.net, train_set, loss);
            r.test_loss = dataset_loss(r.net, test_set, loss);
            return r;
        };
        auto sweep = restart_sweep(run, cfg.train.restarts, cfg.train.seed, cfg.parallel);
        auto& rep = out.traditional;
        rep.experiment = name;
        rep.method = Method::Traditional;
        rep.runs = sweep.runs;
        rep.best_index = sweep.best_index;
        rep.best = std::move(sweep.best);
        rep.config = shared;
        rep.config["method"] = "traditional";
        rep.config["method_details"] = {{"widths", widths_json(traditional)},
                                        {"activation", std::string(to_string(traditional.layer(0).activation))}};
        rep.wall_seconds = seconds_since(start);
    }

    // HTA: base network, then homotopy growth through the stages.
    {
        std::vector<Stage> budgeted = stages;
        for (auto& s : budgeted) {
            if (step_budget) {
                s.schedule.max_steps_per_phase = split.per_phase;
                s.schedule.epochs_per_step = split.per_phase;
            } else {
                s.schedule.epochs_per_step = split.per_phase;
            }
            s.schedule.presolve_epochs = 0;
        }
        TrainConfig base_cfg = cfg.train;
        if (step_budget) {
            base_cfg.max_steps = split.base;
            base_cfg.epochs = split.base;
        } else {
            base_cfg.epochs = split.base;
        }
        const auto start = std::chrono::steady_clock::now();
        auto run = [&](std::uint64_t seed, std::size_t) {
            Rng rng(seed);
            MethodRun r;
            Mlp base = Mlp::random(hta_base, rng);
            try {
                MultiStageResult ms = multi_stage_train(budgeted, std::move(base), train_set, base_cfg, opts, rng);
                r.net = std::move(ms.net);
                r.trace = std::move(ms.trace);
                r.phases = std::move(ms.phases);
                r.widths = std::move(ms.widths);
            } catch (const DivergenceError&) {
                return diverged_run();
            }
            r.train_loss = dataset_loss(r.net, train_set, loss);
            r.test_loss = dataset_loss(r.net, test_set, loss);
            return r;
        };
        auto sweep = restart_sweep(run, cfg.train.restarts, cfg.train.seed, cfg.parallel);
        auto& rep = out.hta;
        rep.experiment = name;
        rep.method = Method::Hta;
        rep.runs = sweep.runs;
        rep.best_index = sweep.best_index;
        rep.best = std::move(sweep.best);
        rep.config = shared;
        rep.config["method"] = "hta";
        nlohmann::json st = nlohmann::json::array();
        for (const auto& s : budgeted) {
            nlohmann::json op;
            if (const auto* w = std::get_if<Widen>(&s.op)) {
                op = {{"op", "widen"}, {"layer", w->layer}, {"added", w->added}};
            } else {
                const auto& a = std::get<AddLayer>(s.op);
                op = {{"op", "add_layer"},
                      {"position", a.position},
                      {"width", a.width},
                      {"activation", std::string(to_string(a.activation))}};
            }
            op["delta_t"] = s.schedule.delta_t;
            st.push_back(op);
        }
        rep.config["method_details"] = {{"base_widths", widths_json(hta_base)},
                                        {"stages", st},
                                        {"base_budget", split.base},
                                        {"per_phase_budget", split.per_phase},
                                        {"phases", split.phases}};
        rep.wall_seconds = seconds_since(start);
    }
    return out;
}

Dataset sin_dataset(std::size_t dim, const ExperimentConfig& cfg) {
    if (dim <= 3) return uniform_grid_dataset(dim, cfg.points_per_dim, cfg.domain_lo, cfg.domain_hi);
    return sparse_grid_dataset({dim, cfg.sparse_level}, cfg.domain_lo, cfg.domain_hi);
}

namespace {

std::vector<Stage> widen_stages(std::vector<std::size_t> layers, std::size_t added, double delta_t) {
    std::vector<Stage> stages;
    for (std::size_t l : layers) stages.push_back({Widen{l, added}, HtaSchedule{delta_t, 1, 0, 0}});
    return stages;
}

}  // namespace

PairedReport example1(std::size_t dim, const ExperimentConfig& cfg) {
    const Dataset all = sin_dataset(dim, cfg);
    const auto [train_set, test_set] = split(all, 0.9, cfg.data_seed);
    const std::size_t w20[] = {20};
    const std::size_t w10[] = {10};
    return run_paired("example1_n" + std::to_string(dim), train_set, test_set,
                      Architecture::from_widths(dim, w20, 1, Activation::ReLU),
                      Architecture::from_widths(dim, w10, 1, Activation::ReLU), widen_stages({0}, 10, cfg.delta_t),
                      cfg);
}

PairedReport example2(std::size_t dim, const ExperimentConfig& cfg) {
    const Dataset all = sin_dataset(dim, cfg);
    const auto [train_set, test_set] = split(all, 0.9, cfg.data_seed);
    const std::size_t w20[] = {20, 20};
    const std::size_t w10[] = {10, 10};
    const std::vector<std::size_t> order =
        cfg.widen_first_layer_first ? std::vector<std::size_t>{0, 1} : std::vector<std::size_t>{1, 0};
    return run_paired("example2_n" + std::to_string(dim), train_set, test_set,
                      Architecture::from_widths(dim, w20, 1, Activation::ReLU),
                      Architecture::from_widths(dim, w10, 1, Activation::ReLU),
                      widen_stages(order, 10, cfg.delta_t), cfg);
}

PairedReport vdp_surrogate(const VdpExperimentConfig& cfg) {
    const Dataset train_set = vdp_dataset(1.0, 10.0, 1.0, 10.0, cfg.mesh, cfg.rk4_step);
    const Dataset test_set = vdp_dataset(11.0, 14.0, 11.0, 14.0, cfg.mesh, cfg.rk4_step);
    return vdp_surrogate(cfg, train_set, test_set);
}

PairedReport vdp_surrogate(const VdpExperimentConfig& cfg, const Dataset& train_set, const Dataset& test_set) {
    ExperimentConfig ec = cfg.base;
    ec.train.max_steps = cfg.total_steps;
    ec.train.epochs = cfg.total_steps;
    if (ec.record_curves) ec.train.eval_every_steps = cfg.eval_every;
    const std::size_t w20[] = {20};
    const std::size_t w10[] = {10};
    return run_paired("vdp_surrogate", train_set, test_set, Architecture::from_widths(2, w20, 1, Activation::ReLU),
                      Architecture::from_widths(2, w10, 1, Activation::ReLU), widen_stages({0}, 10, ec.delta_t), ec);
}

// ---------------------------------------------------------------------------
// Parameter estimation

Estimate param_estimate(const Mlp& surrogate, double y_tilde, const EstimationConfig& cfg) {
    if (surrogate.input_dim() != 2 || surrogate.output_dim() != 1) {
        throw std::invalid_argument("param_estimate: surrogate must map (mu, k) to a scalar");
    }
    if (!std::isfinite(y_tilde)) throw std::invalid_argument("param_estimate: y_tilde must be finite");
    double x[2] = {cfg.init_mu, cfg.init_k};
    double residual = 0.0;
    for (std::size_t step = 0; step <= cfg.steps; ++step) {
        const ForwardCache cache = forward_cached(surrogate, x);
        residual = cache.output()(0, 0) - y_tilde;
        if (step == cfg.steps) break;
        const double d_out[1] = {2.0 * residual};
        const BackwardResult g = backward(surrogate, cache, d_out);
        x[0] -= cfg.lr * g.d_input[0];
        x[1] -= cfg.lr * g.d_input[1];
        if (!std::isfinite(x[0]) || !std::isfinite(x[1])) {
            throw std::runtime_error("param_estimate: diverged at step " + std::to_string(step) +
                                     " for y_tilde=" + std::to_string(y_tilde));
        }
    }
    return {x[0], x[1], residual * residual};
}

double err_pe(std::span<const EstimationEntry> entries) {
    if (entries.empty()) return 0.0;
    double total = 0.0;
    for (const auto& e : entries) total += std::hypot(e.mu_star - e.mu, e.k_star - e.k);
    return total / static_cast<double>(entries.size());
}

Matrix estimation_samples(double lo, double hi, double mesh, std::size_t per_axis) {
    if (!(lo <= hi) || !(mesh > 0.0)) throw std::invalid_argument("estimation_samples: bad range or mesh");
    const auto count = static_cast<std::size_t>(std::llround((hi - lo) / mesh)) + 1;
    if (per_axis == 1) throw std::invalid_argument("estimation_samples: per_axis must be 0 or at least 2");
    const std::size_t m = per_axis == 0 || per_axis >= count ? count : per_axis;
    Vector axis(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t g = m == count ? i
                                         : static_cast<std::size_t>(std::llround(
                                               static_cast<double>(i * (count - 1)) / static_cast<double>(m - 1)));
        axis[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(count - 1);
    }
    Matrix out(m * m, 2);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            out(i * m + j, 0) = axis[i];
            out(i * m + j, 1) = axis[j];
        }
    }
    return out;
}

EstimationResult estimate_all(const Mlp& surrogate, const Matrix& samples, const EstimationConfig& cfg,
                              double rk4_step) {
    if (samples.cols() != 2) throw std::invalid_argument("estimate_all: samples must have two columns (mu, k)");
    EstimationResult out;
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        EstimationEntry e;
        e.mu = samples(r, 0);
        e.k = samples(r, 1);
        e.y_tilde = vdp_solve({.mu = e.mu, .k = e.k, .step = rk4_step});
        const Estimate est = param_estimate(surrogate, e.y_tilde, cfg);
        e.mu_star = est.mu;
        e.k_star = est.k;
        out.entries.push_back(e);
    }
    out.err_pe = err_pe(out.entries);
    return out;
}

}  // namespace hta
