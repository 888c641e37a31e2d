#include "hta/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hta/text_io.hpp"

namespace hta {

void Dataset::validate() const {
    if (inputs.rows() == 0) throw std::invalid_argument("Dataset: no samples");
    if (targets.rows() != inputs.rows()) throw std::invalid_argument("Dataset: input/target row mismatch");
    if (!all_finite(inputs.values()) || !all_finite(targets.values())) {
        throw std::invalid_argument("Dataset: non-finite value");
    }
    if (lower.size() != inputs.cols() || upper.size() != inputs.cols()) {
        throw std::invalid_argument("Dataset: bounds do not match input dim");
    }
    for (std::size_t r = 0; r < inputs.rows(); ++r)
        for (std::size_t c = 0; c < inputs.cols(); ++c)
            if (inputs(r, c) < lower[c] || inputs(r, c) > upper[c]) {
                throw std::invalid_argument("Dataset: row " + std::to_string(r) + " outside domain");
            }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.inputs = Matrix(rows.size(), input_dim());
    out.targets = Matrix(rows.size(), target_dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= size()) throw std::out_of_range("Dataset::subset: row index out of range");
        std::ranges::copy(inputs.row(rows[i]), out.inputs.row(i).begin());
        std::ranges::copy(targets.row(rows[i]), out.targets.row(i).begin());
    }
    out.provenance = provenance;
    out.lower = lower;
    out.upper = upper;
    return out;
}

double sin_target(std::span<const double> x) {
    return std::sin(std::accumulate(x.begin(), x.end(), 0.0));
}

namespace {

std::string domain_string(double lo, double hi, std::size_t dim) {
    return "domain=[" + format_double(lo) + ";" + format_double(hi) + "]^" + std::to_string(dim);
}

Dataset from_points(Matrix points, const TargetFn& target, double lo, double hi, std::string provenance) {
    Dataset ds;
    ds.targets = Matrix(points.rows(), 1);
    for (std::size_t r = 0; r < points.rows(); ++r) ds.targets(r, 0) = target(points.row(r));
    ds.lower.assign(points.cols(), lo);
    ds.upper.assign(points.cols(), hi);
    ds.inputs = std::move(points);
    ds.provenance = std::move(provenance);
    return ds;
}

}  // namespace

Dataset uniform_grid_dataset(std::size_t dim, std::size_t points_per_dim, double lo, double hi,
                             const TargetFn& target) {
    if (dim == 0) throw std::invalid_argument("uniform_grid_dataset: dim must be >= 1");
    if (points_per_dim < 2) throw std::invalid_argument("uniform_grid_dataset: need >= 2 points per dim");
    if (!(lo < hi)) throw std::invalid_argument("uniform_grid_dataset: need lo < hi");
    constexpr std::size_t kMaxPoints = std::size_t{1} << 27;
    std::size_t total = 1;
    for (std::size_t d = 0; d < dim; ++d) {
        if (total > kMaxPoints / points_per_dim) {
            throw std::invalid_argument("uniform_grid_dataset: " + std::to_string(points_per_dim) + "^" +
                                        std::to_string(dim) + " points is too many; use a sparse grid");
        }
        total *= points_per_dim;
    }
    Vector axis(points_per_dim);
    for (std::size_t i = 0; i < points_per_dim; ++i)
        axis[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points_per_dim - 1);

    Matrix pts(total, dim);
    for (std::size_t r = 0; r < total; ++r) {
        std::size_t rem = r;
        for (std::size_t d = dim; d-- > 0;) {
            pts(r, d) = axis[rem % points_per_dim];
            rem /= points_per_dim;
        }
    }
    return from_points(std::move(pts), target, lo, hi,
                       "uniform-grid n=" + std::to_string(dim) + " ppd=" + std::to_string(points_per_dim) +
                           " " + domain_string(lo, hi, dim));
}

// ---------------------------------------------------------------------------
// Sparse grid

namespace {

/// Visits every multi-index l (l_j >= 1) with sum(l) <= budget.
template <class Fn>
void for_each_level(std::size_t dim, std::size_t budget, std::vector<std::size_t>& levels, Fn&& fn) {
    const std::size_t d = levels.size();
    if (d == dim) {
        fn(levels);
        return;
    }
    const std::size_t used = std::accumulate(levels.begin(), levels.end(), std::size_t{0});
    const std::size_t remaining_dims = dim - d - 1;
    for (std::size_t l = 1; used + l + remaining_dims <= budget; ++l) {
        levels.push_back(l);
        for_each_level(dim, budget, levels, fn);
        levels.pop_back();
    }
}

void check_spec(const SparseGridSpec& spec) {
    if (spec.dim == 0 || spec.level == 0) throw std::invalid_argument("sparse_grid: dim and level must be >= 1");
    if (spec.level > 30) throw std::invalid_argument("sparse_grid: level too large");
}

}  // namespace

std::size_t sparse_grid_size(const SparseGridSpec& spec) {
    check_spec(spec);
    std::size_t count = 0;
    std::vector<std::size_t> levels;
    for_each_level(spec.dim, spec.level + spec.dim - 1, levels, [&](const std::vector<std::size_t>& ls) {
        std::size_t c = 1;
        for (std::size_t l : ls) c *= std::size_t{1} << (l - 1);
        count += c;
    });
    return count;
}

Matrix sparse_grid(const SparseGridSpec& spec, double lo, double hi) {
    check_spec(spec);
    const std::size_t n = spec.dim;
    const std::size_t finest = spec.level;  // no axis can exceed level L
    // Hierarchical increments are disjoint across multi-indices, so no dedup pass is needed.
    // Coordinates are kept as integers i / 2^finest for exact ordering.
    std::vector<std::vector<std::uint32_t>> pts;
    pts.reserve(sparse_grid_size(spec));
    std::vector<std::size_t> levels;
    for_each_level(n, spec.level + n - 1, levels, [&](const std::vector<std::size_t>& ls) {
        std::vector<std::uint32_t> counter(n, 0);
        while (true) {
            std::vector<std::uint32_t> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = static_cast<std::uint32_t>((2 * counter[j] + 1) << (finest - ls[j]));
            pts.push_back(std::move(p));
            std::size_t j = 0;
            for (; j < n; ++j) {
                if (++counter[j] < (std::uint32_t{1} << (ls[j] - 1))) break;
                counter[j] = 0;
            }
            if (j == n) break;
        }
    });
    std::sort(pts.begin(), pts.end());
    const double scale = (hi - lo) / static_cast<double>(std::uint64_t{1} << finest);
    Matrix out(pts.size(), n);
    for (std::size_t r = 0; r < pts.size(); ++r)
        for (std::size_t j = 0; j < n; ++j) out(r, j) = lo + scale * static_cast<double>(pts[r][j]);
    return out;
}

Dataset sparse_grid_dataset(const SparseGridSpec& spec, double lo, double hi, const TargetFn& target) {
    return from_points(sparse_grid(spec, lo, hi), target, lo, hi,
                       "sparse-grid n=" + std::to_string(spec.dim) + " level=" + std::to_string(spec.level) +
                           " rule=interior-dyadic " + domain_string(lo, hi, spec.dim));
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: fraction must lie in (0, 1)");
    }
    const std::size_t n = ds.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) {
        throw std::invalid_argument("split: fraction " + format_double(train_fraction) + " of " +
                                    std::to_string(n) + " samples leaves one side empty");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {ds.subset(train_rows), ds.subset(test_rows)};
}

// ---------------------------------------------------------------------------
// Van der Pol

VdpState vdp_integrate(const VdpConfig& cfg) {
    if (!(cfg.step > 0.0)) throw std::invalid_argument("vdp: step must be positive");
    const double ratio = cfg.t_end / cfg.step;
    const auto steps = static_cast<std::size_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
        throw std::invalid_argument("vdp: t_end / step must be an integer");
    }
    const double mu = cfg.mu, kk = cfg.k, h = cfg.step;
    auto accel = [&](double y, double v) { return mu * (kk - y * y) * v - y; };
    double y = cfg.y0, v = cfg.v0;
    for (std::size_t i = 0; i < steps; ++i) {
        const double k1y = v, k1v = accel(y, v);
        const double y2 = y + 0.5 * h * k1y, v2 = v + 0.5 * h * k1v;
        const double k2y = v2, k2v = accel(y2, v2);
        const double y3 = y + 0.5 * h * k2y, v3 = v + 0.5 * h * k2v;
        const double k3y = v3, k3v = accel(y3, v3);
        const double y4 = y + h * k3y, v4 = v + h * k3v;
        const double k4y = v4, k4v = accel(y4, v4);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if (!std::isfinite(y) || !std::isfinite(v)) {
            throw std::runtime_error("vdp: non-finite state at step " + std::to_string(i) + " (mu=" +
                                     format_double(mu) + ", k=" + format_double(kk) + ")");
        }
    }
    return {y, v};
}

double vdp_solve(const VdpConfig& cfg) { return vdp_integrate(cfg).y; }

Dataset vdp_dataset(double mu_lo, double mu_hi, double k_lo, double k_hi, double mesh, double rk4_step) {
    if (!(mu_lo <= mu_hi) || !(k_lo <= k_hi)) throw std::invalid_argument("vdp_dataset: ranges must be ordered");
    if (!(mesh > 0.0)) throw std::invalid_argument("vdp_dataset: mesh must be positive");
    auto axis = [mesh](double lo, double hi) {
        const auto count = static_cast<std::size_t>(std::llround((hi - lo) / mesh)) + 1;
        Vector a(count);
        for (std::size_t i = 0; i < count; ++i)
            a[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        return a;
    };
    const Vector mus = axis(mu_lo, mu_hi);
    const Vector ks = axis(k_lo, k_hi);
    Dataset ds;
    ds.inputs = Matrix(mus.size() * ks.size(), 2);
    ds.targets = Matrix(mus.size() * ks.size(), 1);
    std::size_t r = 0;
    for (double mu : mus) {
        for (double k : ks) {
            ds.inputs(r, 0) = mu;
            ds.inputs(r, 1) = k;
            ds.targets(r, 0) = vdp_solve({.mu = mu, .k = k, .step = rk4_step});
            ++r;
        }
    }
    ds.lower = {mu_lo, k_lo};
    ds.upper = {mu_hi, k_hi};
    ds.provenance = "vdp y(1) mu=[" + format_double(mu_lo) + ";" + format_double(mu_hi) + "] k=[" +
                    format_double(k_lo) + ";" + format_double(k_hi) + "] mesh=" + format_double(mesh) +
                    " rk4_step=" + format_double(rk4_step) + " y0=2 v0=0";
    return ds;
}

// ---------------------------------------------------------------------------
// CSV

void save_dataset(std::ostream& os, const Dataset& ds) {
    os << "# dims=" << ds.input_dim() << ',' << ds.target_dim() << " provenance=" << ds.provenance << '\n';
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t c = 0; c < ds.input_dim(); ++c) os << (c ? "," : "") << format_double(ds.inputs(r, c));
        for (std::size_t c = 0; c < ds.target_dim(); ++c) os << ',' << format_double(ds.targets(r, c));
        os << '\n';
    }
}

Dataset load_dataset(std::istream& is) {
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> std::runtime_error {
        return std::runtime_error("load_dataset: line " + std::to_string(line_no) + ": " + what);
    };
    if (!std::getline(is, line)) {
        line_no = 1;
        throw fail("empty file");
    }
    line_no = 1;
    const std::string_view header = trim(line);
    constexpr std::string_view kPrefix = "# dims=";
    if (!header.starts_with(kPrefix)) throw fail("missing '# dims=' header");
    const auto space = header.find(' ', kPrefix.size());
    const auto dims = split(header.substr(kPrefix.size(), space - kPrefix.size()), ',');
    if (dims.size() != 2) throw fail("dims must be '<n>,<m>'");
    std::size_t n = 0, m = 0;
    try {
        n = parse_size(dims[0]);
        m = parse_size(dims[1]);
    } catch (const std::invalid_argument& e) {
        throw fail(e.what());
    }
    if (n == 0 || m == 0) throw fail("dims must be positive");
    std::string provenance;
    if (space != std::string_view::npos) {
        constexpr std::string_view kProv = "provenance=";
        const auto rest = trim(header.substr(space));
        if (!rest.starts_with(kProv)) throw fail("expected provenance=");
        provenance = std::string(rest.substr(kProv.size()));
    }

    std::vector<double> in_vals, tgt_vals;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != n + m) {
            throw fail("expected " + std::to_string(n + m) + " fields, found " + std::to_string(fields.size()));
        }
        try {
            for (std::size_t i = 0; i < n; ++i) in_vals.push_back(parse_double(fields[i]));
            for (std::size_t i = n; i < n + m; ++i) tgt_vals.push_back(parse_double(fields[i]));
        } catch (const std::invalid_argument& e) {
            throw fail(e.what());
        }
        ++rows;
    }
    if (rows == 0) throw fail("no data rows");
    Dataset ds;
    ds.inputs = Matrix(rows, n, std::move(in_vals));
    ds.targets = Matrix(rows, m, std::move(tgt_vals));
    ds.provenance = std::move(provenance);
    ds.lower.assign(n, 0.0);
    ds.upper.assign(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        ds.lower[c] = ds.upper[c] = ds.inputs(0, c);
        for (std::size_t r = 1; r < rows; ++r) {
            ds.lower[c] = std::min(ds.lower[c], ds.inputs(r, c));
            ds.upper[c] = std::max(ds.upper[c], ds.inputs(r, c));
        }
    }
    return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
    save_dataset(os, ds);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
    return load_dataset(is);
}

}  // namespace hta
