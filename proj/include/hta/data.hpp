#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>

#include "hta/linalg.hpp"

namespace hta {

/// Samples as rows: inputs N x n, targets N x m, plus where they came from.
struct Dataset {
    Matrix inputs;
    Matrix targets;
    std::string provenance;
    Vector lower;  ///< per-input-dimension domain bounds
    Vector upper;

    std::size_t size() const noexcept { return inputs.rows(); }
    std::size_t input_dim() const noexcept { return inputs.cols(); }
    std::size_t target_dim() const noexcept { return targets.cols(); }

    /// Throws unless dims agree, N >= 1, every value is finite and inputs lie in bounds.
    void validate() const;
    Dataset subset(std::span<const std::size_t> rows) const;
};

using TargetFn = std::function<double(std::span<const double>)>;

/// sin(x_1 + ... + x_n)
double sin_target(std::span<const double> x);

/// Cartesian grid with `points_per_dim` equispaced points per axis, endpoints included.
Dataset uniform_grid_dataset(std::size_t dim, std::size_t points_per_dim, double lo, double hi,
                             const TargetFn& target = sin_target);

struct SparseGridSpec {
    std::size_t dim = 1;
    std::size_t level = 6;
};

/// Smolyak sparse grid over [lo, hi]^n from the nested interior dyadic rule
/// (1-d level l holds the 2^l - 1 points i / 2^l) with |l|_1 <= L + n - 1.
/// Rows are distinct and sorted lexicographically.
Matrix sparse_grid(const SparseGridSpec& spec, double lo, double hi);
std::size_t sparse_grid_size(const SparseGridSpec& spec);

Dataset sparse_grid_dataset(const SparseGridSpec& spec, double lo, double hi,
                            const TargetFn& target = sin_target);

/// Seeded random partition; the first round(fraction * N) shuffled rows go to train.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

struct VdpConfig {
    double mu = 1.0;
    double k = 1.0;
    double t_end = 1.0;
    double step = 1e-3;
    double y0 = 2.0;
    double v0 = 0.0;
};

struct VdpState {
    double y = 0.0;
    double v = 0.0;
};

/// Classical RK4 on y' = v, v' = mu (k - y^2) v - y from 0 to t_end.
VdpState vdp_integrate(const VdpConfig& cfg);
double vdp_solve(const VdpConfig& cfg);

/// Inclusive (mu, k) grid with spacing `mesh`; target y(1).
Dataset vdp_dataset(double mu_lo, double mu_hi, double k_lo, double k_hi, double mesh = 0.1,
                    double rk4_step = 1e-3);

/// CSV: `# dims=<n>,<m> provenance=<text>` header, then one row per sample,
/// inputs followed by targets, shortest round-trip decimals.
void save_dataset(std::ostream& os, const Dataset& ds);
Dataset load_dataset(std::istream& is);
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

}  // namespace hta
