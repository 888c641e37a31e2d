#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hta/linalg.hpp"

namespace hta {

enum class Activation { ReLU, Sigmoid, Identity };

double activate(Activation a, double x) noexcept;
/// Derivative expressed through the pre-activation. ReLU'(0) is taken as 0.
double activate_derivative(Activation a, double pre) noexcept;
std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::Identity;

    bool operator==(const LayerShape&) const = default;
};

enum class ParamKind { Weight, Bias };

/// Position of one scalar parameter: weight (layer,row,col) or bias (layer,row).
struct ParamIndex {
    std::size_t layer = 0;
    ParamKind kind = ParamKind::Weight;
    std::size_t row = 0;
    std::size_t col = 0;

    bool operator==(const ParamIndex&) const = default;
};

/// Layer dimensions and the flat-offset map for every weight and bias.
/// Layer l stores a d_l x d_{l-1} weight block followed by a d_l bias block.
class Architecture {
public:
    Architecture() = default;
    Architecture(std::size_t input_dim, std::vector<LayerShape> layers);

    /// n -> widths[0] -> ... -> output, hidden layers share `hidden`, output is Identity.
    static Architecture from_widths(std::size_t input_dim, std::span<const std::size_t> widths,
                                    std::size_t output_dim, Activation hidden);

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return layers_.empty() ? input_dim_ : layers_.back().out; }
    std::size_t num_layers() const noexcept { return layers_.size(); }
    std::size_t num_params() const noexcept { return num_params_; }
    const LayerShape& layer(std::size_t l) const { return layers_.at(l); }
    const std::vector<LayerShape>& layers() const noexcept { return layers_; }
    std::vector<std::size_t> hidden_widths() const;

    std::size_t weight_offset(std::size_t l) const { return weight_offsets_.at(l); }
    std::size_t bias_offset(std::size_t l) const { return weight_offsets_.at(l) + layers_[l].out * layers_[l].in; }

    std::size_t offset_of(const ParamIndex& idx) const;
    ParamIndex index_of(std::size_t offset) const;

    /// e.g. "2-4-3 [sigmoid,identity]"
    std::string describe() const;

    bool operator==(const Architecture& o) const {
        return input_dim_ == o.input_dim_ && layers_ == o.layers_;
    }

private:
    std::size_t input_dim_ = 0;
    std::vector<LayerShape> layers_;
    std::vector<std::size_t> weight_offsets_;
    std::size_t num_params_ = 0;
};

/// Flat parameter vector; its index map is the owning Architecture.
using ParamVector = std::vector<double>;

struct Layer {
    Matrix weights;
    Vector bias;
    Activation activation = Activation::Identity;
};

ParamVector pack(std::span<const Layer> layers);
std::vector<Layer> unpack(const Architecture& arch, std::span<const double> theta);

/// Fully connected network: an Architecture plus its flat parameters.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(Architecture arch);
    Mlp(Architecture arch, ParamVector theta);

    static Mlp from_layers(std::size_t input_dim, std::span<const Layer> layers);
    /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static Mlp random(Architecture arch, Rng& rng);

    const Architecture& arch() const noexcept { return arch_; }
    std::size_t input_dim() const noexcept { return arch_.input_dim(); }
    std::size_t output_dim() const noexcept { return arch_.output_dim(); }

    std::span<double> params() noexcept { return theta_; }
    std::span<const double> params() const noexcept { return theta_; }
    const ParamVector& theta() const noexcept { return theta_; }
    void set_params(std::span<const double> theta);

    double& weight(std::size_t l, std::size_t r, std::size_t c);
    double weight(std::size_t l, std::size_t r, std::size_t c) const;
    double& bias(std::size_t l, std::size_t r);
    double bias(std::size_t l, std::size_t r) const;

    Matrix weight_matrix(std::size_t l) const;
    Vector bias_vector(std::size_t l) const;
    std::vector<Layer> layers() const { return unpack(arch_, theta_); }

private:
    Architecture arch_;
    ParamVector theta_;
};

/// Per-layer pre/post activations for a batch (one row per sample).
struct ForwardCache {
    Architecture arch;
    std::uint64_t theta_fingerprint = 0;
    Matrix input;
    std::vector<Matrix> pre;
    std::vector<Matrix> post;

    const Matrix& output() const { return post.back(); }
    std::size_t batch_size() const noexcept { return input.rows(); }
};

std::uint64_t fingerprint(std::span<const double> theta) noexcept;

/// Batched forward pass; rows of `inputs` are samples. Reuses `cache` buffers.
void forward_batch(const Architecture& arch, std::span<const double> theta, const Matrix& inputs,
                   ForwardCache& cache);
ForwardCache forward_batch(const Architecture& arch, std::span<const double> theta,
                           const Matrix& inputs);

/// Batched reverse pass. Adds scale * dL/dtheta into `grad` and returns dL/dinput.
/// Throws if the cache was produced by a different architecture or parameter state.
Matrix backward_batch(const Architecture& arch, std::span<const double> theta,
                      const ForwardCache& cache, const Matrix& d_output, std::span<double> grad,
                      double scale = 1.0);

Vector forward(const Mlp& net, std::span<const double> x);
ForwardCache forward_cached(const Mlp& net, std::span<const double> x);

struct BackwardResult {
    ParamVector grads;
    Vector d_input;
};
BackwardResult backward(const Mlp& net, const ForwardCache& cache, std::span<const double> d_output);

enum class LossKind { SquaredError, CrossEntropy };

std::string_view to_string(LossKind k) noexcept;
LossKind loss_from_string(std::string_view name);

struct LossGrad {
    double loss = 0.0;
    Vector grad;
};

/// Squared error sum_i (out_i - tgt_i)^2 with gradient 2(out - tgt).
LossGrad squared_error(std::span<const double> output, std::span<const double> target);
/// -x[y] + log sum_j exp(x[j]), evaluated with a max shift.
LossGrad cross_entropy(std::span<const double> logits, std::size_t label);
/// For CrossEntropy the target holds a single entry: the class label.
LossGrad loss_and_grad(LossKind kind, std::span<const double> output, std::span<const double> target);

/// Mean per-sample loss over a batch; fills d_output with the gradient of that mean.
double batch_loss(LossKind kind, const Matrix& outputs, const Matrix& targets, Matrix* d_output);

/// Worst relative error between backward() and central differences over all parameters.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
double grad_check(const Mlp& net, LossKind kind, std::span<const double> x,
                  std::span<const double> target, double eps);

/// Plain-text checkpoint: header with dims and activations, then full-precision values.
void save_mlp(std::ostream& os, const Mlp& net);
Mlp load_mlp(std::istream& is);
void save_mlp(const std::string& path, const Mlp& net);
Mlp load_mlp(const std::string& path);

}  // namespace hta
