#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "hta/experiments.hpp"

namespace hta {

// ---------------------------------------------------------------------------
// Synthetic data

Dataset teacher_dataset(const Mlp& teacher, std::size_t samples, double lo, double hi, Rng& rng) {
    Dataset ds;
    ds.inputs = uniform_init(rng, samples, teacher.input_dim(), lo, hi);
    ds.targets = predict(teacher, ds.inputs);
    ds.lower.assign(teacher.input_dim(), lo);
    ds.upper.assign(teacher.input_dim(), hi);
    ds.provenance = "teacher " + teacher.arch().describe();
    return ds;
}

namespace {

double standard_normal(Rng& rng) {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

Dataset synthetic_features(std::size_t samples, std::size_t dim, std::size_t classes, double noise, Rng& rng,
                           std::uint64_t centers_seed) {
    if (classes < 2 || dim == 0 || samples == 0) throw std::invalid_argument("synthetic_features: bad shape");
    Rng center_rng(centers_seed);
    Matrix centers(classes, dim);
    for (double& v : centers.values()) v = standard_normal(center_rng);
    Dataset ds;
    ds.inputs = Matrix(samples, dim);
    ds.targets = Matrix(samples, 1);
    for (std::size_t r = 0; r < samples; ++r) {
        const std::size_t c = r % classes;
        ds.targets(r, 0) = static_cast<double>(c);
        for (std::size_t j = 0; j < dim; ++j) ds.inputs(r, j) = centers(c, j) + noise * standard_normal(rng);
    }
    ds.lower.assign(dim, -std::numeric_limits<double>::infinity());
    ds.upper.assign(dim, std::numeric_limits<double>::infinity());
    ds.provenance = "synthetic-features dim=" + std::to_string(dim) + " classes=" + std::to_string(classes) +
                    " noise=" + std::to_string(noise) + " centers_seed=" + std::to_string(centers_seed);
    return ds;
}

// ---------------------------------------------------------------------------
// Three-state head

double classification_error(const Mlp& net, const Dataset& ds) {
    const Matrix out = predict(net, ds.inputs);
    std::size_t wrong = 0;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const auto row = out.row(r);
        const auto arg = static_cast<std::size_t>(std::distance(row.begin(), std::max_element(row.begin(), row.end())));
        if (static_cast<double>(arg) != ds.targets(r, 0)) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(out.rows());
}

HeadReport fc_head_three_state(const Dataset& train_set, const Dataset& test_set, const HeadConfig& cfg) {
    if (cfg.w1 > cfg.full_width || cfg.w2 > cfg.full_width) {
        throw std::invalid_argument("fc_head_three_state: state-1 widths must not exceed the full width");
    }
    Rng rng(cfg.train.seed);
    const std::size_t widths[] = {cfg.w1, cfg.w2};
    Mlp base = Mlp::random(Architecture::from_widths(train_set.input_dim(), widths, cfg.classes, Activation::ReLU), rng);
    std::vector<Stage> stages;
    if (cfg.w1 < cfg.full_width) stages.push_back({Widen{0, cfg.full_width - cfg.w1}, cfg.schedule});
    if (cfg.w2 < cfg.full_width) stages.push_back({Widen{1, cfg.full_width - cfg.w2}, cfg.schedule});
    TrainConfig tc = cfg.train;
    tc.epochs = cfg.state1_epochs;
    HtaOptions opts;
    opts.loss = LossKind::CrossEntropy;
    HeadReport rep;
    rep.result = multi_stage_train(stages, std::move(base), train_set, tc, opts, rng);
    for (const auto& net : rep.result.snapshots) {
        rep.states.push_back({net.arch().hidden_widths(), dataset_loss(net, train_set, LossKind::CrossEntropy),
                              dataset_loss(net, test_set, LossKind::CrossEntropy), classification_error(net, test_set)});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Reports

double rate_of_improvement(double err_traditional, double err_hta) {
    if (!(err_traditional > 0.0)) throw std::invalid_argument("rate_of_improvement: baseline error must be positive");
    return (err_traditional - err_hta) / err_traditional;
}

nlohmann::json ComparisonTable::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"name", r.name}, {"traditional", r.traditional}, {"hta", r.hta}, {"roi", r.roi}});
    return {{"rows", rows_json}};
}

std::string ComparisonTable::to_csv() const {
    std::string out = "name,traditional,hta,roi\n";
    for (const auto& r : rows) {
        out += r.name + ',' + nlohmann::json(r.traditional).dump() + ',' + nlohmann::json(r.hta).dump() + ',' +
               nlohmann::json(r.roi).dump() + '\n';
    }
    return out;
}

ComparisonTable compare_report(std::span<const std::pair<std::string, std::pair<double, double>>> pairs) {
    ComparisonTable t;
    for (const auto& [name, errs] : pairs)
        t.rows.push_back({name, errs.first, errs.second, rate_of_improvement(errs.first, errs.second)});
    return t;
}

ComparisonTable compare_report(std::span<const PairedReport> reports) {
    std::vector<std::pair<std::string, std::pair<double, double>>> pairs;
    for (const auto& r : reports)
        pairs.push_back({r.experiment, {r.traditional.best_test_loss(), r.hta.best_test_loss()}});
    return compare_report(pairs);
}

nlohmann::json to_json(const ExperimentReport& r) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& s : r.runs)
        runs.push_back({{"restart", s.restart}, {"seed", s.seed}, {"train_loss", s.train_loss}, {"test_loss", s.test_loss}});
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : r.best.phases)
        phases.push_back({{"stage", p.stage}, {"t", p.t}, {"epochs", p.epochs}, {"steps", p.steps}});
    nlohmann::json j = {
        {"method", std::string(to_string(r.method))},
        {"best_restart", r.best_index},
        {"best_test_loss", r.best_test_loss()},
        {"best_train_loss", r.runs.at(r.best_index).train_loss},
        {"runs", runs},
        {"widths", r.best.widths},
        {"phases", phases},
        {"total_steps", r.best.trace.steps.size()},
        {"config", r.config},
        {"wall_seconds", r.wall_seconds},
    };
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& e : r.best.trace.epochs)
        if (!std::isnan(e.test_loss)) curve.push_back({{"k", e.k_end}, {"t", e.t}, {"test_loss", e.test_loss}});
    if (!curve.empty()) j["epoch_curve"] = curve;
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& e : r.best.trace.evals) evals.push_back({{"k", e.k}, {"t", e.t}, {"test_loss", e.test_loss}});
    if (!evals.empty()) j["step_curve"] = evals;
    return j;
}

nlohmann::json to_json(const PairedReport& r) {
    nlohmann::json j = {
        {"experiment", r.experiment},
        {"train_size", r.train_size},
        {"test_size", r.test_size},
        {"provenance", r.provenance},
        {"methods", {{"hta", to_json(r.hta)}, {"traditional", to_json(r.traditional)}}},
    };
    const double trad = r.traditional.best_test_loss();
    if (trad > 0.0 && std::isfinite(trad)) j["roi"] = rate_of_improvement(trad, r.hta.best_test_loss());
    return j;
}

nlohmann::json to_json(const StructureResult& r) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : r.history) {
        hist.push_back({{"layer", e.layer},
                        {"width_before", e.width_before},
                        {"width_after", e.width_after},
                        {"new_rms", e.new_rms},
                        {"existing_rms", e.existing_rms},
                        {"accepted", e.accepted},
                        {"train_loss", e.train_loss}});
    }
    return {{"widths", r.widths},
            {"history", hist},
            {"stop_reason", r.stop_reason},
            {"train_loss", r.train_loss},
            {"test_loss", r.test_loss}};
}

nlohmann::json to_json(const EstimationResult& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"mu", e.mu}, {"k", e.k}, {"y_tilde", e.y_tilde}, {"mu_star", e.mu_star}, {"k_star", e.k_star}});
    }
    return {{"err_pe", r.err_pe}, {"entries", entries}};
}

}  // namespace hta
