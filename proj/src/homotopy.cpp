#include "hta/homotopy.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>

namespace hta {

// ---------------------------------------------------------------------------
// SubnetView

SubnetView::SubnetView(Architecture small, const Architecture& large, std::vector<LayerSelection> selections)
    : small_(std::move(small)), large_(large), selections_(std::move(selections)) {
    if (selections_.size() != small_.num_layers()) {
        throw std::invalid_argument("SubnetView: need one selection per small-net layer");
    }
    if (small_.input_dim() != large_.input_dim() || small_.output_dim() != large_.output_dim()) {
        throw std::invalid_argument("SubnetView: small and large nets must share input and output dims");
    }
    index_.resize(small_.num_params());
    for (std::size_t l = 0; l < small_.num_layers(); ++l) {
        const auto& sel = selections_[l];
        const auto& s = small_.layer(l);
        if (sel.large_layer >= large_.num_layers()) throw std::invalid_argument("SubnetView: large layer out of range");
        const auto& big = large_.layer(sel.large_layer);
        if (sel.rows.size() != s.out || sel.cols.size() != s.in) {
            throw std::invalid_argument("SubnetView: selection for layer " + std::to_string(l) +
                                        " does not match the small layer's shape");
        }
        for (std::size_t r : sel.rows)
            if (r >= big.out) throw std::invalid_argument("SubnetView: row index out of range");
        for (std::size_t c : sel.cols)
            if (c >= big.in) throw std::invalid_argument("SubnetView: column index out of range");
        for (std::size_t r = 0; r < s.out; ++r) {
            for (std::size_t c = 0; c < s.in; ++c) {
                index_[small_.offset_of({l, ParamKind::Weight, r, c})] =
                    large_.offset_of({sel.large_layer, ParamKind::Weight, sel.rows[r], sel.cols[c]});
            }
            index_[small_.offset_of({l, ParamKind::Bias, r, 0})] =
                large_.offset_of({sel.large_layer, ParamKind::Bias, sel.rows[r], 0});
        }
    }
    std::vector<std::size_t> sorted = index_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("SubnetView: two small-net parameters map to the same large parameter");
    }
}

SubnetView SubnetView::whole(const Architecture& arch) {
    std::vector<LayerSelection> sel;
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        LayerSelection s{l, std::vector<std::size_t>(arch.layer(l).out), std::vector<std::size_t>(arch.layer(l).in)};
        std::iota(s.rows.begin(), s.rows.end(), std::size_t{0});
        std::iota(s.cols.begin(), s.cols.end(), std::size_t{0});
        sel.push_back(std::move(s));
    }
    return SubnetView(arch, arch, std::move(sel));
}

ParamVector SubnetView::extract(std::span<const double> large_theta) const {
    ParamVector out(index_.size());
    extract_into(large_theta, out);
    return out;
}

void SubnetView::extract_into(std::span<const double> large_theta, std::span<double> small_theta) const {
    if (large_theta.size() != large_.num_params() || small_theta.size() != index_.size()) {
        throw std::invalid_argument("SubnetView::extract: parameter count mismatch");
    }
    for (std::size_t i = 0; i < index_.size(); ++i) small_theta[i] = large_theta[index_[i]];
}

Mlp SubnetView::extract_mlp(const Mlp& large) const {
    if (!(large.arch() == large_)) throw std::invalid_argument("SubnetView: network does not match view");
    return Mlp(small_, extract(large.params()));
}

void SubnetView::scatter_add(std::span<const double> small_grad, std::span<double> large_grad, double scale) const {
    if (small_grad.size() != index_.size() || large_grad.size() != large_.num_params()) {
        throw std::invalid_argument("SubnetView::scatter_add: size mismatch");
    }
    for (std::size_t i = 0; i < index_.size(); ++i) large_grad[index_[i]] += scale * small_grad[i];
}

std::vector<bool> SubnetView::shared_mask() const {
    std::vector<bool> mask(large_.num_params(), false);
    for (std::size_t i : index_) mask[i] = true;
    return mask;
}

// ---------------------------------------------------------------------------
// Blend

HomotopyBlend::HomotopyBlend(Mlp large_net, SubnetView small_view, double t0)
    : large(std::move(large_net)), view(std::move(small_view)) {
    if (!(large.arch() == view.large_arch())) {
        throw std::invalid_argument("HomotopyBlend: view was built for a different architecture");
    }
    set_t(t0);
}

void HomotopyBlend::set_t(double value) {
    if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("HomotopyBlend: t must lie in [0, 1]");
    t = value;
}

BlendEvaluator::BlendEvaluator(const Architecture& large, const SubnetView& view)
    : large_(large), view_(view), small_theta_(view.small_arch().num_params()),
      small_grad_(view.small_arch().num_params()) {}

Matrix BlendEvaluator::predict(std::span<const double> theta, double t, const Matrix& inputs) {
    if (t < 1.0) {
        view_.extract_into(theta, small_theta_);
        forward_batch(view_.small_arch(), small_theta_, inputs, small_cache_);
    }
    if (t > 0.0) forward_batch(large_, theta, inputs, large_cache_);
    if (t == 0.0) return small_cache_.output();
    if (t == 1.0) return large_cache_.output();
    Matrix out = small_cache_.output();
    const auto ys = small_cache_.output().values();
    const auto yl = large_cache_.output().values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = (1.0 - t) * ys[i] + t * yl[i];
    return out;
}

double BlendEvaluator::loss_and_grad(std::span<const double> theta, double t, const Matrix& inputs,
                                     const Matrix& targets, LossKind kind, std::span<double> grad) {
    out_ = predict(theta, t, inputs);
    const bool want_grad = !grad.empty();
    const double loss = batch_loss(kind, out_, targets, want_grad ? &d_out_ : nullptr);
    if (!want_grad) return loss;
    if (t < 1.0) {
        std::fill(small_grad_.begin(), small_grad_.end(), 0.0);
        backward_batch(view_.small_arch(), small_theta_, small_cache_, d_out_, small_grad_, 1.0);
        view_.scatter_add(small_grad_, grad, 1.0 - t);
    }
    if (t > 0.0) backward_batch(large_, theta, large_cache_, d_out_, grad, t);
    return loss;
}

Vector blend_forward(const HomotopyBlend& b, std::span<const double> x) {
    if (x.size() != b.large.input_dim()) {
        throw std::invalid_argument("blend_forward: input length " + std::to_string(x.size()) +
                                    " but blend expects " + std::to_string(b.large.input_dim()));
    }
    BlendEvaluator ev(b.large.arch(), b.view);
    const Matrix out = ev.predict(b.large.params(), b.t, Matrix(1, x.size(), Vector(x.begin(), x.end())));
    return Vector(out.values().begin(), out.values().end());
}

ParamVector blend_backward(const HomotopyBlend& b, std::span<const double> x, LossKind kind,
                           std::span<const double> target) {
    if (x.size() != b.large.input_dim()) throw std::invalid_argument("blend_backward: input dim mismatch");
    BlendEvaluator ev(b.large.arch(), b.view);
    ParamVector grad(b.large.arch().num_params(), 0.0);
    ev.loss_and_grad(b.large.params(), b.t, Matrix(1, x.size(), Vector(x.begin(), x.end())),
                     Matrix(1, target.size(), Vector(target.begin(), target.end())), kind, grad);
    return grad;
}

// ---------------------------------------------------------------------------
// Dataset-level evaluation and oracles

namespace {

constexpr std::size_t kEvalChunk = 512;

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) std::ranges::copy(m.row(rows[i]), out.row(i).begin());
    return out;
}

Matrix row_block(const Matrix& m, std::size_t start, std::size_t len) {
    const auto v = m.values().subspan(start * m.cols(), len * m.cols());
    return Matrix(len, m.cols(), std::vector<double>(v.begin(), v.end()));
}

double chunked_loss(const Dataset& ds, const std::function<double(const Matrix&, const Matrix&)>& chunk_loss) {
    double total = 0.0;
    for (std::size_t start = 0; start < ds.size(); start += kEvalChunk) {
        const std::size_t len = std::min(kEvalChunk, ds.size() - start);
        total += chunk_loss(row_block(ds.inputs, start, len), row_block(ds.targets, start, len)) *
                 static_cast<double>(len);
    }
    return total / static_cast<double>(ds.size());
}

}  // namespace

double dataset_loss(const Architecture& arch, std::span<const double> theta, const Dataset& ds, LossKind kind) {
    ForwardCache cache;
    return chunked_loss(ds, [&](const Matrix& in, const Matrix& tgt) {
        forward_batch(arch, theta, in, cache);
        return batch_loss(kind, cache.output(), tgt, nullptr);
    });
}

double dataset_loss(const Mlp& net, const Dataset& ds, LossKind kind) {
    return dataset_loss(net.arch(), net.params(), ds, kind);
}

double dataset_loss(const HomotopyBlend& b, const Dataset& ds, LossKind kind) {
    BlendEvaluator ev(b.large.arch(), b.view);
    return chunked_loss(ds, [&](const Matrix& in, const Matrix& tgt) {
        return ev.loss_and_grad(b.large.params(), b.t, in, tgt, kind, {});
    });
}

Matrix predict(const Mlp& net, const Matrix& inputs) {
    return forward_batch(net.arch(), net.params(), inputs).output();
}

BatchOracle make_mlp_oracle(const Architecture& arch, const Dataset& ds, LossKind kind) {
    struct State {
        Architecture arch;
        const Dataset* ds;
        LossKind kind;
        ForwardCache cache;
        Matrix d_out;
    };
    auto st = std::make_shared<State>(State{arch, &ds, kind, {}, {}});
    return [st](std::span<const double> theta, std::span<const std::size_t> batch, std::span<double> grad) {
        const Matrix in = gather_rows(st->ds->inputs, batch);
        const Matrix tgt = gather_rows(st->ds->targets, batch);
        forward_batch(st->arch, theta, in, st->cache);
        const double loss = batch_loss(st->kind, st->cache.output(), tgt, &st->d_out);
        backward_batch(st->arch, theta, st->cache, st->d_out, grad);
        return loss;
    };
}

BatchOracle make_blend_oracle(const Architecture& large, const SubnetView& view, double t, const Dataset& ds,
                              LossKind kind) {
    struct State {
        Architecture large;
        SubnetView view;
        std::unique_ptr<BlendEvaluator> ev;
    };
    auto st = std::make_shared<State>(State{large, view, nullptr});
    st->ev = std::make_unique<BlendEvaluator>(st->large, st->view);
    return [st, t, &ds, kind](std::span<const double> theta, std::span<const std::size_t> batch,
                              std::span<double> grad) {
        return st->ev->loss_and_grad(theta, t, gather_rows(ds.inputs, batch), gather_rows(ds.targets, batch),
                                     kind, grad);
    };
}

// ---------------------------------------------------------------------------
// Growth

namespace {

std::vector<std::size_t> iota_vec(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

SubnetView full_selection_view(const Architecture& small, const Architecture& large,
                               const std::vector<std::size_t>& large_layer_of) {
    std::vector<LayerSelection> sel;
    for (std::size_t l = 0; l < small.num_layers(); ++l)
        sel.push_back({large_layer_of[l], iota_vec(small.layer(l).out), iota_vec(small.layer(l).in)});
    return SubnetView(small, large, std::move(sel));
}

}  // namespace

Grown widen(const Mlp& net, std::size_t layer, std::size_t added, Rng& rng) {
    const auto& arch = net.arch();
    if (layer + 1 >= arch.num_layers()) {
        throw std::invalid_argument("widen: layer " + std::to_string(layer) + " is not a hidden layer of " +
                                    arch.describe());
    }
    if (added == 0) throw std::invalid_argument("widen: must add at least one unit");

    std::vector<LayerShape> shapes = arch.layers();
    const std::size_t old_width = shapes[layer].out;
    shapes[layer].out += added;
    shapes[layer + 1].in += added;
    Mlp large(Architecture(arch.input_dim(), shapes));

    const auto old_layers = net.layers();
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        const auto& s = arch.layer(l);
        for (std::size_t r = 0; r < s.out; ++r) {
            for (std::size_t c = 0; c < s.in; ++c) large.weight(l, r, c) = old_layers[l].weights(r, c);
            large.bias(l, r) = old_layers[l].bias[r];
        }
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(shapes[layer].in));
    for (std::size_t r = old_width; r < shapes[layer].out; ++r) {
        for (std::size_t c = 0; c < shapes[layer].in; ++c) large.weight(layer, r, c) = rng.uniform(-bound, bound);
        large.bias(layer, r) = rng.uniform(-bound, bound);
    }
    // outgoing columns for the new units stay zero

    SubnetView view = full_selection_view(arch, large.arch(), iota_vec(arch.num_layers()));
    return {std::move(large), std::move(view)};
}

Grown add_layer(const Mlp& net, std::size_t position, std::size_t width, Activation activation, Rng& /*rng*/) {
    const auto& arch = net.arch();
    if (position >= arch.num_layers()) {
        throw std::invalid_argument("add_layer: position " + std::to_string(position) + " invalid for " +
                                    arch.describe());
    }
    const std::size_t carried = arch.layer(position).out;
    if (width < carried) {
        throw std::invalid_argument("add_layer: width " + std::to_string(width) + " cannot carry the " +
                                    std::to_string(carried) + " signals of layer " + std::to_string(position));
    }
    std::vector<LayerShape> shapes;
    std::vector<std::size_t> large_layer_of;
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        const auto& s = arch.layer(l);
        large_layer_of.push_back(shapes.size());
        if (l == position) {
            shapes.push_back({s.in, width, activation});
            shapes.push_back({width, s.out, s.activation});
        } else {
            shapes.push_back(s);
        }
    }
    Mlp large(Architecture(arch.input_dim(), shapes));
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        const auto& s = arch.layer(l);
        const std::size_t L = large_layer_of[l];
        for (std::size_t r = 0; r < s.out; ++r) {
            for (std::size_t c = 0; c < s.in; ++c) large.weight(L, r, c) = net.weight(l, r, c);
            large.bias(L, r) = net.bias(l, r);
        }
    }
    // pass-through successor: [I 0], zero bias
    for (std::size_t r = 0; r < carried; ++r) large.weight(position + 1, r, r) = 1.0;

    SubnetView view = full_selection_view(arch, large.arch(), large_layer_of);
    return {std::move(large), std::move(view)};
}

Grown apply_growth(const Mlp& net, const GrowthOp& op, Rng& rng) {
    return std::visit(
        [&](const auto& g) -> Grown {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Widen>) return widen(net, g.layer, g.added, rng);
            else return add_layer(net, g.position, g.width, g.activation, rng);
        },
        op);
}

// ---------------------------------------------------------------------------
// Training loops

std::size_t HtaSchedule::steps() const {
    if (!(delta_t > 0.0 && delta_t <= 1.0)) throw std::invalid_argument("HtaSchedule: delta_t must lie in (0, 1]");
    const auto n = static_cast<std::size_t>(std::llround(1.0 / delta_t));
    if (n == 0 || std::abs(static_cast<double>(n) * delta_t - 1.0) > 1e-12) {
        throw std::invalid_argument("HtaSchedule: 1 / delta_t must be an integer");
    }
    return n;
}

namespace {

TrainConfig phase_config(const TrainConfig& cfg, std::size_t epochs, std::size_t max_steps) {
    TrainConfig c = cfg;
    c.epochs = epochs;
    c.max_steps = max_steps;
    return c;
}

}  // namespace

HtaResult hta_train(HomotopyBlend& b, const Dataset& train_set, const HtaSchedule& sched, const TrainConfig& cfg,
                    const HtaOptions& opts, Rng& rng, std::uint64_t k0) {
    if (train_set.size() == 0) throw std::invalid_argument("hta_train: empty dataset");
    const std::size_t n = sched.steps();
    HtaResult result;
    result.next_k = k0;

    auto run_phase = [&](double t, std::size_t epochs) {
        b.set_t(t);
        TrainHooks hooks;
        if (opts.track_train_loss) {
            hooks.full_loss = [&](std::span<const double> theta) {
                return dataset_loss(HomotopyBlend(Mlp(b.large.arch(), ParamVector(theta.begin(), theta.end())),
                                                  b.view, t),
                                    train_set, opts.loss);
            };
        }
        if (opts.test) {
            hooks.test_loss = [&](std::span<const double> theta) {
                return dataset_loss(HomotopyBlend(Mlp(b.large.arch(), ParamVector(theta.begin(), theta.end())),
                                                  b.view, t),
                                    *opts.test, opts.loss);
            };
        }
        const BatchOracle oracle = make_blend_oracle(b.large.arch(), b.view, t, train_set, opts.loss);
        TrainResult r = train(oracle, train_set.size(), phase_config(cfg, epochs, sched.max_steps_per_phase),
                              b.large.theta(), rng, hooks, result.next_k, t);
        b.large.set_params(r.theta);
        result.phases.push_back({0, t, r.trace.epochs.size(), r.trace.steps.size()});
        result.trace.append(r.trace);
        result.next_k = r.next_k;
    };

    if (sched.presolve() > 0) run_phase(0.0, sched.presolve());
    for (std::size_t i = 1; i <= n; ++i) {
        const double t = i == n ? 1.0 : static_cast<double>(i) * sched.delta_t;
        run_phase(t, sched.epochs_per_step);
    }
    result.theta = b.large.theta();
    return result;
}

HtaResult hta_train(HomotopyBlend& b, const Dataset& train_set, const HtaSchedule& sched, const TrainConfig& cfg,
                    const HtaOptions& opts) {
    Rng rng(cfg.seed);
    return hta_train(b, train_set, sched, cfg, opts, rng);
}

TrainResult train_mlp(Mlp& net, const Dataset& train_set, const TrainConfig& cfg, const HtaOptions& opts, Rng& rng,
                      std::uint64_t k0) {
    TrainHooks hooks;
    const Architecture arch = net.arch();
    if (opts.track_train_loss) {
        hooks.full_loss = [&](std::span<const double> theta) {
            return dataset_loss(arch, theta, train_set, opts.loss);
        };
    }
    if (opts.test) {
        hooks.test_loss = [&](std::span<const double> theta) {
            return dataset_loss(arch, theta, *opts.test, opts.loss);
        };
    }
    TrainResult r = train(make_mlp_oracle(arch, train_set, opts.loss), train_set.size(), cfg, net.theta(), rng,
                          hooks, k0, 1.0);
    net.set_params(r.theta);
    return r;
}

MultiStageResult multi_stage_train(const std::vector<Stage>& stages, Mlp base, const Dataset& train_set,
                                   const TrainConfig& cfg, const HtaOptions& opts, Rng& rng) {
    MultiStageResult out;
    Rng growth_rng = rng.split();
    Rng batch_rng = rng.split();

    TrainResult base_run = train_mlp(base, train_set, cfg, opts, batch_rng);
    for (auto& s : base_run.trace.steps) s.t = 0.0;
    for (auto& e : base_run.trace.epochs) e.t = 0.0;
    for (auto& e : base_run.trace.evals) e.t = 0.0;
    out.trace.append(base_run.trace);
    out.phases.push_back({0, 0.0, base_run.trace.epochs.size(), base_run.trace.steps.size()});
    out.widths.push_back(base.arch().hidden_widths());
    out.snapshots.push_back(base);
    std::uint64_t k = base_run.next_k;

    Mlp current = std::move(base);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        Grown g = apply_growth(current, stages[i].op, growth_rng);
        HomotopyBlend blend(std::move(g.large), std::move(g.view), 0.0);
        HtaSchedule sched = stages[i].schedule;
        sched.presolve_epochs = 0;
        HtaResult r = hta_train(blend, train_set, sched, cfg, opts, batch_rng, k);
        for (auto p : r.phases) {
            p.stage = i + 1;
            out.phases.push_back(p);
        }
        out.trace.append(r.trace);
        k = r.next_k;
        current = std::move(blend.large);
        out.widths.push_back(current.arch().hidden_widths());
        out.snapshots.push_back(current);
    }
    out.net = std::move(current);
    return out;
}

}  // namespace hta
