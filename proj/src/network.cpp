#include "hta/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace hta {

double activate(Activation a, double x) noexcept {
    switch (a) {
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Identity: return x;
    }
    return x;
}

double activate_derivative(Activation a, double pre) noexcept {
    switch (a) {
        case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-pre));
            return s * (1.0 - s);
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

std::string_view to_string(Activation a) noexcept {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Architecture

Architecture::Architecture(std::size_t input_dim, std::vector<LayerShape> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
    if (input_dim_ == 0) throw std::invalid_argument("Architecture: input dim must be positive");
    if (layers_.empty()) throw std::invalid_argument("Architecture: need at least one layer");
    std::size_t prev = input_dim_;
    weight_offsets_.reserve(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& s = layers_[l];
        if (s.in != prev) {
            throw std::invalid_argument("Architecture: layer " + std::to_string(l) + " expects " +
                                        std::to_string(s.in) + " inputs but previous layer has " +
                                        std::to_string(prev));
        }
        if (s.out == 0) throw std::invalid_argument("Architecture: zero-width layer");
        weight_offsets_.push_back(num_params_);
        num_params_ += s.out * s.in + s.out;
        prev = s.out;
    }
    if (layers_.back().activation != Activation::Identity) {
        throw std::invalid_argument("Architecture: last layer must be identity");
    }
}

Architecture Architecture::from_widths(std::size_t input_dim, std::span<const std::size_t> widths,
                                       std::size_t output_dim, Activation hidden) {
    std::vector<LayerShape> layers;
    std::size_t prev = input_dim;
    for (std::size_t w : widths) {
        layers.push_back({prev, w, hidden});
        prev = w;
    }
    layers.push_back({prev, output_dim, Activation::Identity});
    return Architecture(input_dim, std::move(layers));
}

std::vector<std::size_t> Architecture::hidden_widths() const {
    std::vector<std::size_t> w;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) w.push_back(layers_[l].out);
    return w;
}

std::size_t Architecture::offset_of(const ParamIndex& idx) const {
    const auto& s = layer(idx.layer);
    if (idx.row >= s.out || (idx.kind == ParamKind::Weight && idx.col >= s.in)) {
        throw std::out_of_range("Architecture::offset_of: index outside layer " +
                                std::to_string(idx.layer));
    }
    if (idx.kind == ParamKind::Weight) return weight_offsets_[idx.layer] + idx.row * s.in + idx.col;
    return bias_offset(idx.layer) + idx.row;
}

ParamIndex Architecture::index_of(std::size_t offset) const {
    if (offset >= num_params_) throw std::out_of_range("Architecture::index_of: offset too large");
    const auto it = std::upper_bound(weight_offsets_.begin(), weight_offsets_.end(), offset);
    const auto l = static_cast<std::size_t>(std::distance(weight_offsets_.begin(), it)) - 1;
    const auto& s = layers_[l];
    const std::size_t local = offset - weight_offsets_[l];
    if (local < s.out * s.in) return {l, ParamKind::Weight, local / s.in, local % s.in};
    return {l, ParamKind::Bias, local - s.out * s.in, 0};
}

std::string Architecture::describe() const {
    std::ostringstream os;
    os << input_dim_;
    for (const auto& s : layers_) os << '-' << s.out;
    os << " [";
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (l) os << ',';
        os << to_string(layers_[l].activation);
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// Packing

ParamVector pack(std::span<const Layer> layers) {
    ParamVector theta;
    for (const auto& layer : layers) {
        if (layer.bias.size() != layer.weights.rows()) {
            throw std::invalid_argument("pack: bias length does not match weight rows");
        }
        theta.insert(theta.end(), layer.weights.values().begin(), layer.weights.values().end());
        theta.insert(theta.end(), layer.bias.begin(), layer.bias.end());
    }
    return theta;
}

std::vector<Layer> unpack(const Architecture& arch, std::span<const double> theta) {
    if (theta.size() != arch.num_params()) {
        throw std::invalid_argument("unpack: " + std::to_string(theta.size()) +
                                    " values for architecture with " +
                                    std::to_string(arch.num_params()) + " parameters");
    }
    std::vector<Layer> layers;
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        const auto& s = arch.layer(l);
        const auto w = theta.subspan(arch.weight_offset(l), s.out * s.in);
        const auto b = theta.subspan(arch.bias_offset(l), s.out);
        layers.push_back({Matrix(s.out, s.in, std::vector<double>(w.begin(), w.end())),
                          Vector(b.begin(), b.end()), s.activation});
    }
    return layers;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(Architecture arch) : arch_(std::move(arch)), theta_(arch_.num_params(), 0.0) {}

Mlp::Mlp(Architecture arch, ParamVector theta) : arch_(std::move(arch)), theta_(std::move(theta)) {
    if (theta_.size() != arch_.num_params()) {
        throw std::invalid_argument("Mlp: parameter count " + std::to_string(theta_.size()) +
                                    " does not match " + arch_.describe());
    }
}

Mlp Mlp::from_layers(std::size_t input_dim, std::span<const Layer> layers) {
    std::vector<LayerShape> shapes;
    for (const auto& layer : layers)
        shapes.push_back({layer.weights.cols(), layer.weights.rows(), layer.activation});
    return Mlp(Architecture(input_dim, std::move(shapes)), pack(layers));
}

Mlp Mlp::random(Architecture arch, Rng& rng) {
    Mlp net(std::move(arch));
    for (std::size_t l = 0; l < net.arch_.num_layers(); ++l) {
        const auto& s = net.arch_.layer(l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
        const auto block = net.params().subspan(net.arch_.weight_offset(l), s.out * s.in + s.out);
        for (double& v : block) v = rng.uniform(-bound, bound);
    }
    return net;
}

void Mlp::set_params(std::span<const double> theta) {
    if (theta.size() != theta_.size()) throw std::invalid_argument("Mlp::set_params: size mismatch");
    std::copy(theta.begin(), theta.end(), theta_.begin());
}

double& Mlp::weight(std::size_t l, std::size_t r, std::size_t c) {
    return theta_[arch_.offset_of({l, ParamKind::Weight, r, c})];
}
double Mlp::weight(std::size_t l, std::size_t r, std::size_t c) const {
    return theta_[arch_.offset_of({l, ParamKind::Weight, r, c})];
}
double& Mlp::bias(std::size_t l, std::size_t r) { return theta_[arch_.offset_of({l, ParamKind::Bias, r, 0})]; }
double Mlp::bias(std::size_t l, std::size_t r) const {
    return theta_[arch_.offset_of({l, ParamKind::Bias, r, 0})];
}

Matrix Mlp::weight_matrix(std::size_t l) const {
    const auto& s = arch_.layer(l);
    const auto w = params().subspan(arch_.weight_offset(l), s.out * s.in);
    return Matrix(s.out, s.in, std::vector<double>(w.begin(), w.end()));
}

Vector Mlp::bias_vector(std::size_t l) const {
    const auto b = params().subspan(arch_.bias_offset(l), arch_.layer(l).out);
    return Vector(b.begin(), b.end());
}

// ---------------------------------------------------------------------------
// Forward / backward

std::uint64_t fingerprint(std::span<const double> theta) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : theta) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = (h ^ bits) * 0x100000001b3ULL;
    }
    return h ^ theta.size();
}

namespace {

void resize_if_needed(Matrix& m, std::size_t rows, std::size_t cols) {
    if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

}  // namespace

void forward_batch(const Architecture& arch, std::span<const double> theta, const Matrix& inputs,
                   ForwardCache& cache) {
    if (theta.size() != arch.num_params()) {
        throw std::invalid_argument("forward: parameter count mismatch for " + arch.describe());
    }
    if (inputs.cols() != arch.input_dim()) {
        throw std::invalid_argument("forward: input dim " + std::to_string(inputs.cols()) +
                                    " but network expects " + std::to_string(arch.input_dim()));
    }
    const std::size_t batch = inputs.rows();
    if (!(cache.arch == arch)) {
        cache.arch = arch;
        cache.pre.assign(arch.num_layers(), Matrix());
        cache.post.assign(arch.num_layers(), Matrix());
    }
    cache.theta_fingerprint = fingerprint(theta);
    cache.input = inputs;

    const Matrix* a_prev = &cache.input;
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        const auto& s = arch.layer(l);
        const double* w = theta.data() + arch.weight_offset(l);
        const double* b = theta.data() + arch.bias_offset(l);
        Matrix& z = cache.pre[l];
        Matrix& a = cache.post[l];
        resize_if_needed(z, batch, s.out);
        resize_if_needed(a, batch, s.out);
        for (std::size_t n = 0; n < batch; ++n) {
            const double* x = a_prev->row(n).data();
            double* zr = z.row(n).data();
            double* ar = a.row(n).data();
            for (std::size_t o = 0; o < s.out; ++o) {
                const double* wr = w + o * s.in;
                double acc = b[o];
                for (std::size_t i = 0; i < s.in; ++i) acc += wr[i] * x[i];
                zr[o] = acc;
                ar[o] = activate(s.activation, acc);
            }
        }
        a_prev = &a;
    }
}

ForwardCache forward_batch(const Architecture& arch, std::span<const double> theta,
                           const Matrix& inputs) {
    ForwardCache cache;
    forward_batch(arch, theta, inputs, cache);
    return cache;
}

Matrix backward_batch(const Architecture& arch, std::span<const double> theta,
                      const ForwardCache& cache, const Matrix& d_output, std::span<double> grad,
                      double scale) {
    if (!(cache.arch == arch) || cache.pre.size() != arch.num_layers()) {
        throw std::invalid_argument("backward: cache was produced by a different architecture");
    }
    if (cache.theta_fingerprint != fingerprint(theta)) {
        throw std::invalid_argument("backward: stale cache (parameters changed since forward)");
    }
    if (grad.size() != arch.num_params()) throw std::invalid_argument("backward: gradient size mismatch");
    const std::size_t batch = cache.batch_size();
    if (d_output.rows() != batch || d_output.cols() != arch.output_dim()) {
        throw std::invalid_argument("backward: output gradient has shape " + d_output.shape_string());
    }

    Matrix delta = d_output;
    Matrix d_prev;
    for (std::size_t l = arch.num_layers(); l-- > 0;) {
        const auto& s = arch.layer(l);
        const Matrix& z = cache.pre[l];
        const Matrix& a_in = l == 0 ? cache.input : cache.post[l - 1];
        const double* w = theta.data() + arch.weight_offset(l);
        double* gw = grad.data() + arch.weight_offset(l);
        double* gb = grad.data() + arch.bias_offset(l);

        if (s.activation != Activation::Identity) {
            for (std::size_t n = 0; n < batch; ++n) {
                auto dr = delta.row(n);
                const auto zr = z.row(n);
                for (std::size_t o = 0; o < s.out; ++o) dr[o] *= activate_derivative(s.activation, zr[o]);
            }
        }
        d_prev = Matrix(batch, s.in);
        for (std::size_t n = 0; n < batch; ++n) {
            const double* dr = delta.row(n).data();
            const double* x = a_in.row(n).data();
            double* dp = d_prev.row(n).data();
            for (std::size_t o = 0; o < s.out; ++o) {
                const double d = dr[o];
                if (d == 0.0) continue;
                const double sd = scale * d;
                double* gwr = gw + o * s.in;
                const double* wr = w + o * s.in;
                for (std::size_t i = 0; i < s.in; ++i) {
                    gwr[i] += sd * x[i];
                    dp[i] += d * wr[i];
                }
                gb[o] += sd;
            }
        }
        delta = std::move(d_prev);
    }
    return delta;
}

Vector forward(const Mlp& net, std::span<const double> x) {
    const ForwardCache cache = forward_cached(net, x);
    const auto out = cache.output().row(0);
    return Vector(out.begin(), out.end());
}

ForwardCache forward_cached(const Mlp& net, std::span<const double> x) {
    if (x.size() != net.input_dim()) {
        throw std::invalid_argument("forward: input length " + std::to_string(x.size()) +
                                    " but network expects " + std::to_string(net.input_dim()));
    }
    return forward_batch(net.arch(), net.params(),
                         Matrix(1, x.size(), std::vector<double>(x.begin(), x.end())));
}

BackwardResult backward(const Mlp& net, const ForwardCache& cache, std::span<const double> d_output) {
    if (cache.batch_size() != 1) throw std::invalid_argument("backward: expected single-sample cache");
    BackwardResult r;
    r.grads.assign(net.arch().num_params(), 0.0);
    const Matrix dout(1, d_output.size(), std::vector<double>(d_output.begin(), d_output.end()));
    const Matrix din = backward_batch(net.arch(), net.params(), cache, dout, r.grads);
    r.d_input.assign(din.values().begin(), din.values().end());
    return r;
}

// ---------------------------------------------------------------------------
// Losses

std::string_view to_string(LossKind k) noexcept {
    return k == LossKind::SquaredError ? "mse" : "xent";
}

LossKind loss_from_string(std::string_view name) {
    if (name == "mse" || name == "squared") return LossKind::SquaredError;
    if (name == "xent" || name == "cross_entropy") return LossKind::CrossEntropy;
    throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

LossGrad squared_error(std::span<const double> output, std::span<const double> target) {
    if (output.size() != target.size()) {
        throw std::invalid_argument("squared_error: output length " + std::to_string(output.size()) +
                                    " vs target length " + std::to_string(target.size()));
    }
    LossGrad r;
    r.grad.resize(output.size());
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double d = output[i] - target[i];
        r.loss += d * d;
        r.grad[i] = 2.0 * d;
    }
    return r;
}

LossGrad cross_entropy(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size()) {
        throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                    " out of range for " + std::to_string(logits.size()) + " classes");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    LossGrad r;
    r.loss = -(logits[label] - mx) + std::log(sum);
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - mx) / sum;
    r.grad[label] -= 1.0;
    return r;
}

namespace {

std::size_t label_of(double v, std::size_t classes) {
    if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(classes)) {
        throw std::invalid_argument("cross_entropy: label " + std::to_string(v) +
                                    " is not a class index in [0, " + std::to_string(classes) + ")");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

LossGrad loss_and_grad(LossKind kind, std::span<const double> output, std::span<const double> target) {
    if (kind == LossKind::SquaredError) return squared_error(output, target);
    if (target.size() != 1) throw std::invalid_argument("cross_entropy: target must be a single label");
    return cross_entropy(output, label_of(target[0], output.size()));
}

double batch_loss(LossKind kind, const Matrix& outputs, const Matrix& targets, Matrix* d_output) {
    const std::size_t batch = outputs.rows();
    if (batch == 0) throw std::invalid_argument("batch_loss: empty batch");
    if (targets.rows() != batch) throw std::invalid_argument("batch_loss: target row count mismatch");
    if (d_output) resize_if_needed(*d_output, batch, outputs.cols());
    const double inv = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    const std::size_t m = outputs.cols();
    for (std::size_t n = 0; n < batch; ++n) {
        const auto out = outputs.row(n);
        const auto tgt = targets.row(n);
        if (kind == LossKind::SquaredError) {
            if (tgt.size() != m) throw std::invalid_argument("batch_loss: target width mismatch");
            double* dr = d_output ? d_output->row(n).data() : nullptr;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = out[i] - tgt[i];
                total += d * d;
                if (dr) dr[i] = 2.0 * d * inv;
            }
        } else {
            const LossGrad lg = loss_and_grad(kind, out, tgt);
            total += lg.loss;
            if (d_output) {
                auto dr = d_output->row(n);
                for (std::size_t i = 0; i < m; ++i) dr[i] = lg.grad[i] * inv;
            }
        }
    }
    return total * inv;
}

double grad_check(const Mlp& net, LossKind kind, std::span<const double> x,
                  std::span<const double> target, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
    const auto cache = forward_cached(net, x);
    const auto out = cache.output().row(0);
    const LossGrad lg = loss_and_grad(kind, out, target);
    const BackwardResult analytic = backward(net, cache, lg.grad);

    Mlp probe = net;
    auto loss_at = [&](std::size_t i, double v) {
        const double saved = probe.params()[i];
        probe.params()[i] = v;
        const Vector o = forward(probe, x);
        probe.params()[i] = saved;
        return loss_and_grad(kind, o, target).loss;
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.params().size(); ++i) {
        const double v = probe.params()[i];
        const double numeric = (loss_at(i, v + eps) - loss_at(i, v - eps)) / (2.0 * eps);
        const double a = analytic.grads[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace hta
