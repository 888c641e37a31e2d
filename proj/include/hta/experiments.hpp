#pragma once

#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "hta/data.hpp"
#include "hta/homotopy.hpp"
#include "hta/network.hpp"
#include "hta/optim.hpp"

namespace hta {

enum class Method { Hta, Traditional };
std::string_view to_string(Method m) noexcept;

/// Shared settings for the HTA-vs-traditional comparisons. The train config is the total
/// budget each method receives.
struct ExperimentConfig {
    TrainConfig train;
    std::uint64_t data_seed = 1;
    double delta_t = 0.5;
    double domain_lo = -std::numbers::pi;
    double domain_hi = std::numbers::pi;
    std::size_t points_per_dim = 100;
    std::size_t sparse_level = 6;
    std::size_t parallel = 1;
    /// Keep per-epoch test losses (and step-interval evaluations) for the best run.
    bool record_curves = false;
    /// Two-layer growth order: widen hidden layer 1 first, then layer 2.
    bool widen_first_layer_first = true;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct MethodRun {
    double train_loss = 0.0;
    double test_loss = 0.0;
    bool diverged = false;
    Mlp net;
    DiagnosticsTrace trace;
    std::vector<PhaseRecord> phases;
    std::vector<std::vector<std::size_t>> widths;
};

struct ExperimentReport {
    std::string experiment;
    Method method = Method::Traditional;
    std::vector<RestartSummary> runs;
    std::size_t best_index = 0;
    MethodRun best;
    /// Everything needed to re-run; equal across methods except "method" and "method_details".
    nlohmann::json config;
    double wall_seconds = 0.0;

    double best_test_loss() const { return runs.at(best_index).test_loss; }
};

struct PairedReport {
    std::string experiment;
    ExperimentReport hta;
    ExperimentReport traditional;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::string provenance;
};

/// Splits a total epoch budget between the base solve and every homotopy phase.
/// Each phase gets floor(total / phases); the base solve takes the remainder.
struct BudgetSplit {
    std::size_t base = 0;
    std::size_t per_phase = 0;
    std::size_t phases = 1;
};
BudgetSplit split_budget(std::size_t total, const std::vector<Stage>& stages);

/// Trains `traditional` directly and grows `hta_base` through `stages`, both with the
/// same data, loss and total budget, best-of-restarts by test loss.
PairedReport run_paired(const std::string& name, const Dataset& train_set, const Dataset& test_set,
                        const Architecture& traditional, const Architecture& hta_base,
                        const std::vector<Stage>& stages, const ExperimentConfig& cfg,
                        LossKind loss = LossKind::SquaredError);

/// Sampling used for sin(x_1 + ... + x_n): uniform grid for n <= 3, sparse grid otherwise.
Dataset sin_dataset(std::size_t dim, const ExperimentConfig& cfg);

/// One hidden layer: width 20 directly vs width 10 widened to 20.
PairedReport example1(std::size_t dim, const ExperimentConfig& cfg);
/// Two hidden layers: (20,20) directly vs (10,10) grown one layer at a time.
PairedReport example2(std::size_t dim, const ExperimentConfig& cfg);

struct VdpExperimentConfig {
    ExperimentConfig base;
    double mesh = 0.1;
    double rk4_step = 1e-3;
    std::size_t total_steps = 50000;
    std::size_t eval_every = 1000;
};

/// Surrogate y(1; mu, k) trained on [1,10]^2 and tested on [11,14]^2.
PairedReport vdp_surrogate(const VdpExperimentConfig& cfg);
PairedReport vdp_surrogate(const VdpExperimentConfig& cfg, const Dataset& train_set, const Dataset& test_set);

struct EstimationConfig {
    double lr = 0.05;
    std::size_t steps = 2000;
    double init_mu = 11.0;
    double init_k = 11.0;
};

struct Estimate {
    double mu = 0.0;
    double k = 0.0;
    double residual = 0.0;
};

/// Gradient descent on (S(mu, k) - y_tilde)^2 over the inputs of a frozen surrogate.
Estimate param_estimate(const Mlp& surrogate, double y_tilde, const EstimationConfig& cfg);

struct EstimationEntry {
    double mu = 0.0;
    double k = 0.0;
    double y_tilde = 0.0;
    double mu_star = 0.0;
    double k_star = 0.0;
};

struct EstimationResult {
    std::vector<EstimationEntry> entries;
    double err_pe = 0.0;
};

/// Mean Euclidean distance between true and estimated (mu, k).
double err_pe(std::span<const EstimationEntry> entries);

/// (mu, k) pairs on the square [lo, hi]^2 with the given mesh. per_axis > 0 keeps that many
/// evenly spaced grid lines per axis (endpoints included); 0 keeps all of them.
Matrix estimation_samples(double lo, double hi, double mesh, std::size_t per_axis = 0);

/// Estimates every (mu, k) row of `samples` from y_tilde = vdp_solve(mu, k).
EstimationResult estimate_all(const Mlp& surrogate, const Matrix& samples, const EstimationConfig& cfg,
                              double rk4_step = 1e-3);

/// Structure search: grow one hidden layer at a time by `quantum` units until the
/// newly added units optimize to near zero.
struct OsfConfig {
    std::vector<std::size_t> base_widths{10, 10};
    std::size_t quantum = 10;
    /// A batch counts as zero when rms(new) < zero_ratio * rms(existing) (see new_unit_rms).
    double zero_ratio = 1e-3;
    std::size_t base_epochs = 100;
    HtaSchedule growth_schedule{0.5, 50, 0, 0};
    std::size_t max_growth_steps = 40;
    std::size_t max_width = 512;
    TrainConfig train;
    LossKind loss = LossKind::SquaredError;
};

struct GrowthEvent {
    std::size_t layer = 0;
    std::size_t width_before = 0;
    std::size_t width_after = 0;
    double new_rms = 0.0;
    double existing_rms = 0.0;
    bool accepted = false;
    double train_loss = 0.0;
};

struct StructureResult {
    std::vector<std::size_t> widths;
    std::vector<GrowthEvent> history;
    std::string stop_reason;
    Mlp net;
    double train_loss = 0.0;
    double test_loss = 0.0;
};

/// RMS of the outgoing weights of units [first, end) of hidden layer `layer`, and RMS of the
/// outgoing weights of units [0, first).
std::pair<double, double> new_unit_rms(const Mlp& net, std::size_t layer, std::size_t first);

StructureResult osf_search(const Dataset& train_set, const Dataset* test_set, const OsfConfig& cfg,
                           std::uint64_t seed);

/// Inputs uniform in [lo, hi]^n, targets from a teacher network.
Dataset teacher_dataset(const Mlp& teacher, std::size_t samples, double lo, double hi, Rng& rng);

/// Gaussian class clusters in R^dim; targets hold class labels.
Dataset synthetic_features(std::size_t samples, std::size_t dim, std::size_t classes, double noise, Rng& rng,
                           std::uint64_t centers_seed);

struct HeadConfig {
    std::size_t w1 = 64;
    std::size_t w2 = 32;
    std::size_t full_width = 512;
    std::size_t classes = 10;
    std::size_t state1_epochs = 5;
    HtaSchedule schedule{0.5, 3, 0, 0};
    TrainConfig train;
};

struct StateSummary {
    std::vector<std::size_t> widths;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double test_error = 0.0;
};

struct HeadReport {
    std::vector<StateSummary> states;
    MultiStageResult result;
};

/// States (w1, w2) -> (512, w2) -> (512, 512) joined by two homotopy paths, cross-entropy loss.
HeadReport fc_head_three_state(const Dataset& train_set, const Dataset& test_set, const HeadConfig& cfg);
double classification_error(const Mlp& net, const Dataset& ds);

/// (err_traditional - err_hta) / err_traditional
double rate_of_improvement(double err_traditional, double err_hta);

struct ComparisonRow {
    std::string name;
    double traditional = 0.0;
    double hta = 0.0;
    double roi = 0.0;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

ComparisonTable compare_report(std::span<const std::pair<std::string, std::pair<double, double>>> pairs);
ComparisonTable compare_report(std::span<const PairedReport> reports);

nlohmann::json to_json(const ExperimentReport& r);
nlohmann::json to_json(const PairedReport& r);
nlohmann::json to_json(const StructureResult& r);
nlohmann::json to_json(const EstimationResult& r);

}  // namespace hta
