#include <cmath>
#include <stdexcept>

#include "hta/experiments.hpp"

namespace hta {

std::pair<double, double> new_unit_rms(const Mlp& net, std::size_t layer, std::size_t first) {
    const auto& arch = net.arch();
    if (layer + 1 >= arch.num_layers()) throw std::invalid_argument("new_unit_rms: not a hidden layer");
    const auto& next = arch.layer(layer + 1);
    if (first == 0 || first >= next.in) throw std::invalid_argument("new_unit_rms: split point out of range");
    double fresh = 0.0, existing = 0.0;
    for (std::size_t r = 0; r < next.out; ++r) {
        for (std::size_t c = 0; c < next.in; ++c) {
            const double w = net.weight(layer + 1, r, c);
            (c < first ? existing : fresh) += w * w;
        }
    }
    return {std::sqrt(fresh / static_cast<double>(next.out * (next.in - first))),
            std::sqrt(existing / static_cast<double>(next.out * first))};
}

StructureResult osf_search(const Dataset& train_set, const Dataset* test_set, const OsfConfig& cfg,
                           std::uint64_t seed) {
    if (cfg.base_widths.empty()) throw std::invalid_argument("osf_search: need at least one hidden layer");
    if (cfg.quantum == 0) throw std::invalid_argument("osf_search: quantum must be positive");
    for (std::size_t w : cfg.base_widths) {
        if (w < train_set.target_dim()) {
            throw std::invalid_argument("osf_search: base widths must be at least the output dimension");
        }
    }
    Rng rng(seed);
    const std::size_t out_dim = cfg.loss == LossKind::CrossEntropy
                                    ? static_cast<std::size_t>(*std::max_element(train_set.targets.values().begin(),
                                                                                 train_set.targets.values().end())) + 1
                                    : train_set.target_dim();
    Mlp net = Mlp::random(Architecture::from_widths(train_set.input_dim(), cfg.base_widths, out_dim, Activation::ReLU), rng);

    HtaOptions opts;
    opts.loss = cfg.loss;
    TrainConfig base_cfg = cfg.train;
    base_cfg.epochs = cfg.base_epochs;
    train_mlp(net, train_set, base_cfg, opts, rng);

    StructureResult res;
    HtaSchedule sched = cfg.growth_schedule;
    sched.presolve_epochs = 0;
    std::size_t layer = 0;
    const std::size_t hidden = cfg.base_widths.size();
    std::size_t growth_steps = 0;
    res.stop_reason = "converged";

    while (layer < hidden) {
        if (growth_steps >= cfg.max_growth_steps) {
            res.stop_reason = "budget";
            break;
        }
        const std::size_t width = net.arch().layer(layer).out;
        if (width + cfg.quantum > cfg.max_width) {
            ++layer;
            if (layer == hidden) res.stop_reason = "max_width";
            continue;
        }
        Grown g = widen(net, layer, cfg.quantum, rng);
        HomotopyBlend blend(std::move(g.large), std::move(g.view), 0.0);
        try {
            hta_train(blend, train_set, sched, cfg.train, opts, rng);
        } catch (const DivergenceError&) {
            res.stop_reason = "diverged";
            break;
        }
        ++growth_steps;
        const auto [fresh, existing] = new_unit_rms(blend.large, layer, width);
        GrowthEvent ev;
        ev.layer = layer;
        ev.width_before = width;
        ev.width_after = width + cfg.quantum;
        ev.new_rms = fresh;
        ev.existing_rms = existing;
        ev.accepted = !(fresh < cfg.zero_ratio * existing);
        ev.train_loss = dataset_loss(blend.large, train_set, cfg.loss);
        res.history.push_back(ev);
        if (ev.accepted) {
            net = std::move(blend.large);
        } else {
            ++layer;  // revert: keep the network from before this batch
        }
    }
    res.widths = net.arch().hidden_widths();
    res.train_loss = dataset_loss(net, train_set, cfg.loss);
    if (test_set) res.test_loss = dataset_loss(net, *test_set, cfg.loss);
    res.net = std::move(net);
    return res;
}

}  // namespace hta
