#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "hta/data.hpp"
#include "hta/network.hpp"
#include "hta/optim.hpp"

namespace hta {

/// Rows and columns of one large-net layer that make up one small-net layer.
struct LayerSelection {
    std::size_t large_layer = 0;
    std::vector<std::size_t> rows;
    std::vector<std::size_t> cols;
};

/// A smaller network expressed as sub-blocks of a larger network's parameters.
/// The large net's flat theta stays the only copy; the view is a gather map
/// from every small-net offset to a large-net offset.
class SubnetView {
public:
    SubnetView() = default;
    SubnetView(Architecture small, const Architecture& large, std::vector<LayerSelection> selections);

    /// The view that selects an entire network.
    static SubnetView whole(const Architecture& arch);

    const Architecture& small_arch() const noexcept { return small_; }
    const Architecture& large_arch() const noexcept { return large_; }
    const std::vector<LayerSelection>& selections() const noexcept { return selections_; }
    /// small offset -> large offset
    const std::vector<std::size_t>& index() const noexcept { return index_; }

    ParamVector extract(std::span<const double> large_theta) const;
    void extract_into(std::span<const double> large_theta, std::span<double> small_theta) const;
    Mlp extract_mlp(const Mlp& large) const;
    /// large_grad[index[i]] += scale * small_grad[i]
    void scatter_add(std::span<const double> small_grad, std::span<double> large_grad, double scale = 1.0) const;
    /// true for large-net parameters that belong to the small net
    std::vector<bool> shared_mask() const;

private:
    Architecture small_;
    Architecture large_;
    std::vector<LayerSelection> selections_;
    std::vector<std::size_t> index_;
};

/// H(x; theta, t) = (1 - t) small(x; theta) + t large(x; theta).
struct HomotopyBlend {
    Mlp large;
    SubnetView view;
    double t = 0.0;

    HomotopyBlend() = default;
    HomotopyBlend(Mlp large_net, SubnetView small_view, double t0 = 0.0);

    void set_t(double value);
    Mlp small() const { return view.extract_mlp(large); }
};

Vector blend_forward(const HomotopyBlend& b, std::span<const double> x);
/// Gradient over the large net's parameters of the loss of the blended output.
ParamVector blend_backward(const HomotopyBlend& b, std::span<const double> x, LossKind kind,
                           std::span<const double> target);

/// Batched blend evaluation with reusable buffers.
class BlendEvaluator {
public:
    BlendEvaluator(const Architecture& large, const SubnetView& view);

    /// Blended outputs for each input row at parameter vector theta and homotopy value t.
    Matrix predict(std::span<const double> theta, double t, const Matrix& inputs);
    /// Mean batch loss; when grad is non-empty, adds its gradient with respect to theta.
    double loss_and_grad(std::span<const double> theta, double t, const Matrix& inputs, const Matrix& targets,
                         LossKind kind, std::span<double> grad);

private:
    const Architecture& large_;
    const SubnetView& view_;
    ParamVector small_theta_;
    ParamVector small_grad_;
    ForwardCache small_cache_;
    ForwardCache large_cache_;
    Matrix out_;
    Matrix d_out_;
};

/// Mean per-sample loss of a network or blend over a dataset (evaluated in chunks).
double dataset_loss(const Mlp& net, const Dataset& ds, LossKind kind);
double dataset_loss(const HomotopyBlend& b, const Dataset& ds, LossKind kind);
double dataset_loss(const Architecture& arch, std::span<const double> theta, const Dataset& ds, LossKind kind);
Matrix predict(const Mlp& net, const Matrix& inputs);

/// Mini-batch oracle for plain training of `arch` on `ds`.
BatchOracle make_mlp_oracle(const Architecture& arch, const Dataset& ds, LossKind kind);
/// Mini-batch oracle for the blend at fixed t, over the large net's parameters.
BatchOracle make_blend_oracle(const Architecture& large, const SubnetView& view, double t, const Dataset& ds,
                              LossKind kind);

struct Widen {
    std::size_t layer = 0;
    std::size_t added = 0;
};

struct AddLayer {
    std::size_t position = 0;
    std::size_t width = 0;
    Activation activation = Activation::ReLU;
};

using GrowthOp = std::variant<Widen, AddLayer>;

struct Grown {
    Mlp large;
    SubnetView view;
};

/// Appends `added` units to hidden layer `layer`. New incoming rows and biases are
/// uniform in +-1/sqrt(fan_in); new outgoing columns are zero, so the output is unchanged.
Grown widen(const Mlp& net, std::size_t layer, std::size_t added, Rng& rng);

/// Inserts a hidden layer after layer `position`. That layer is padded to `width` rows
/// (new rows zero) and takes `activation`; the inserted successor is [I 0] with zero bias
/// and the old activation of layer `position`. The view selects the original network.
Grown add_layer(const Mlp& net, std::size_t position, std::size_t width, Activation activation, Rng& rng);

Grown apply_growth(const Mlp& net, const GrowthOp& op, Rng& rng);

struct HtaSchedule {
    double delta_t = 0.5;
    std::size_t epochs_per_step = 1;
    /// Epochs for the t = 0 solve; defaults to epochs_per_step.
    std::optional<std::size_t> presolve_epochs;
    /// Cap on SGD steps within each phase (0: none).
    std::size_t max_steps_per_phase = 0;

    /// N = round(1 / delta_t); throws unless N * delta_t = 1 within 1e-12.
    std::size_t steps() const;
    std::size_t presolve() const { return presolve_epochs.value_or(epochs_per_step); }
};

struct HtaOptions {
    LossKind loss = LossKind::SquaredError;
    /// Evaluated at every epoch end (and every cfg.eval_every_steps steps) when set.
    const Dataset* test = nullptr;
    bool track_train_loss = false;
};

struct PhaseRecord {
    std::size_t stage = 0;
    double t = 0.0;
    std::size_t epochs = 0;
    std::size_t steps = 0;
};

struct HtaResult {
    ParamVector theta;
    DiagnosticsTrace trace;
    std::vector<PhaseRecord> phases;
    std::uint64_t next_k = 0;
};

/// Continuation training: optional t = 0 solve, then t = i * delta_t for i = 1..N,
/// each warm-started from the previous phase. Leaves b.large at the final theta and b.t = 1.
HtaResult hta_train(HomotopyBlend& b, const Dataset& train_set, const HtaSchedule& sched,
                    const TrainConfig& cfg, const HtaOptions& opts, Rng& rng, std::uint64_t k0 = 0);
HtaResult hta_train(HomotopyBlend& b, const Dataset& train_set, const HtaSchedule& sched,
                    const TrainConfig& cfg, const HtaOptions& opts = {});

/// Plain SGD on a single network.
TrainResult train_mlp(Mlp& net, const Dataset& train_set, const TrainConfig& cfg, const HtaOptions& opts,
                      Rng& rng, std::uint64_t k0 = 0);

struct Stage {
    GrowthOp op;
    HtaSchedule schedule;
};

struct MultiStageResult {
    Mlp net;
    DiagnosticsTrace trace;
    std::vector<PhaseRecord> phases;
    /// Hidden widths after the base solve and after every stage.
    std::vector<std::vector<std::size_t>> widths;
    /// Network after the base solve and after every stage.
    std::vector<Mlp> snapshots;
};

/// Trains `base` for cfg.epochs (the t = 0 solve), then grows and continues through each
/// stage in order. The base solve already provides each stage's t = 0 optimum, so stage
/// presolve_epochs are not used here.
MultiStageResult multi_stage_train(const std::vector<Stage>& stages, Mlp base, const Dataset& train_set,
                                   const TrainConfig& cfg, const HtaOptions& opts, Rng& rng);

}  // namespace hta
