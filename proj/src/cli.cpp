#include "hta/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

#include "hta/experiments.hpp"
#include "hta/text_io.hpp"

namespace hta {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonFlags {
    double dt = 0.5;
    double lr = 0.05;
    std::string schedule = "constant";
    std::size_t epochs = 380;
    std::size_t batch = 128;
    std::uint64_t seed = 0;
    std::size_t restarts = 15;
    std::size_t parallel = 1;
    std::string out_dir;
    std::string format = "json";
};

struct ApproxFlags {
    std::size_t layers = 1;
    std::size_t dim = 1;
    std::uint64_t data_seed = 1;
    std::size_t ppd = 100;
    std::size_t level = 6;
    bool second_layer_first = false;
    bool curves = false;
};

struct VdpFlags {
    double mesh = 0.1;
    double rk4_step = 1e-3;
    std::size_t steps = 50000;
    std::size_t eval_every = 1000;
};

struct EstimateFlags {
    std::string init = "11,11";
    double lr = 0.05;
    std::size_t steps = 2000;
    std::size_t per_axis = 0;
    std::string hta_model;
    std::string traditional_model;
};

struct GrowFlags {
    std::string base = "10,10";
    std::size_t quantum = 10;
    double zero_ratio = 1e-3;
    std::size_t base_epochs = 100;
    std::size_t growth_epochs = 50;
    std::size_t max_growth_steps = 40;
    std::size_t max_width = 512;
    std::string teacher = "10,10";
    std::size_t dim = 2;
    std::size_t samples = 2000;
    std::string data;
};

struct HeadFlags {
    std::size_t w1 = 64;
    std::size_t w2 = 32;
    std::size_t full_width = 512;
    std::size_t classes = 10;
    std::size_t features = 512;
    std::size_t samples = 2000;
    double noise = 6.0;
    std::size_t state1_epochs = 5;
    std::size_t phase_epochs = 3;
};

struct DataFlags {
    bool sparse = false;
    bool grid = false;
    bool vdp = false;
    std::size_t dim = 1;
    std::size_t level = 6;
    std::size_t ppd = 100;
    double mesh = 0.1;
    double rk4_step = 1e-3;
    std::string range = "train";
    std::string output;
    bool count_only = false;
};

std::vector<std::size_t> parse_sizes(const std::string& text, const char* flag) {
    std::vector<std::size_t> out;
    try {
        for (const auto& part : split(text, ',')) out.push_back(parse_size(trim(part)));
    } catch (const std::exception&) {
        throw UsageError(std::string(flag) + ": expected comma-separated integers, got '" + text + "'");
    }
    if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
    return out;
}

std::pair<double, double> parse_pair(const std::string& text, const char* flag) {
    const auto parts = split(text, ',');
    if (parts.size() != 2) throw UsageError(std::string(flag) + ": expected two comma-separated numbers");
    try {
        return {parse_double(trim(parts[0])), parse_double(trim(parts[1]))};
    } catch (const std::exception&) {
        throw UsageError(std::string(flag) + ": expected two comma-separated numbers, got '" + text + "'");
    }
}

void add_common(CLI::App* sub, CommonFlags& c, bool budget) {
    sub->add_option("--dt", c.dt, "Homotopy step delta t (1/dt must be an integer)");
    sub->add_option("--lr", c.lr, "SGD step size");
    sub->add_option("--schedule", c.schedule, "Step size schedule")
        ->check(CLI::IsMember({"constant", "diminishing"}));
    if (budget) sub->add_option("--epochs", c.epochs, "Total epoch budget per method");
    sub->add_option("--batch", c.batch, "Mini-batch size");
    sub->add_option("--seed", c.seed, "Base seed for initialization and shuffling");
    sub->add_option("--restarts", c.restarts, "Random restarts per method (best by test loss)");
    sub->add_option("--parallel-restarts", c.parallel, "Worker threads for restarts (1: sequential)");
    sub->add_option("--out-dir", c.out_dir, std::string("Output directory (default $") + kOutDirEnv + " or ./hta_out)");
    sub->add_option("--format", c.format, "Summary table format")->check(CLI::IsMember({"json", "csv"}));
}

void validate_common(const CommonFlags& c) {
    if (!(c.lr > 0.0)) throw UsageError("--lr must be positive");
    if (!(c.dt > 0.0 && c.dt <= 1.0)) throw UsageError("--dt must lie in (0, 1]");
    const double n = std::round(1.0 / c.dt);
    if (std::abs(n * c.dt - 1.0) > 1e-12) throw UsageError("--dt: 1/dt must be an integer");
    if (c.epochs == 0) throw UsageError("--epochs must be at least 1");
    if (c.batch == 0) throw UsageError("--batch must be at least 1");
    if (c.restarts == 0) throw UsageError("--restarts must be at least 1");
    if (c.parallel == 0) throw UsageError("--parallel-restarts must be at least 1");
}

TrainConfig train_config(const CommonFlags& c) {
    TrainConfig t;
    t.schedule = c.schedule == "constant" ? StepSchedule::constant(c.lr) : StepSchedule::diminishing(c.lr);
    t.epochs = c.epochs;
    t.batch_size = c.batch;
    t.seed = c.seed;
    t.restarts = c.restarts;
    return t;
}

ExperimentConfig experiment_config(const CommonFlags& c) {
    ExperimentConfig e;
    e.train = train_config(c);
    e.delta_t = c.dt;
    e.parallel = c.parallel;
    return e;
}

/// Every option of the subcommand with its effective value, enough to re-run it.
json resolved_options(const CLI::App& sub) {
    json opts = json::object();
    json positionals = json::array();
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name.empty()) continue;
        if (opt->get_positional() && opt->get_lnames().empty()) {
            for (const auto& v : opt->results()) positionals.push_back(v);
            continue;
        }
        if (opt->get_expected_min() == 0) {
            opts[name] = opt->count() > 0;
            continue;
        }
        std::string value;
        if (opt->count() > 0) {
            for (const auto& v : opt->results()) value += (value.empty() ? "" : ",") + v;
        } else {
            value = opt->get_default_str();
        }
        opts[name] = value;
    }
    return {{"subcommand", sub.get_name()}, {"options", opts}, {"positionals", positionals}};
}

std::vector<std::string> argv_from_resolved(const json& cli, const std::string& out_dir) {
    std::vector<std::string> args{cli.at("subcommand").get<std::string>()};
    if (!out_dir.empty()) {
        args.push_back("--out-dir");
        args.push_back(out_dir);
    }
    for (const auto& [name, value] : cli.at("options").items()) {
        if (name == "out-dir" && !out_dir.empty()) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + name);
            continue;
        }
        const std::string v = value.get<std::string>();
        if (v.empty()) continue;
        args.push_back("--" + name);
        args.push_back(v);
    }
    for (const auto& p : cli.value("positionals", json::array())) args.push_back(p.get<std::string>());
    return args;
}

std::string resolve_out_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return "hta_out";
}

class Output {
public:
    explicit Output(const std::string& dir) : dir_(dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw std::runtime_error("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    std::ofstream open(const std::string& name) const {
        const fs::path p = dir_ / name;
        fs::create_directories(p.parent_path());
        std::ofstream os(p);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        return os;
    }

    void write(const std::string& name, const std::string& text) const { open(name) << text; }
    void write_json(const std::string& name, const json& j) const { open(name) << j.dump(2) << '\n'; }

private:
    fs::path dir_;
};

void write_method_artifacts(const Output& out, const ExperimentReport& r) {
    const std::string dir(to_string(r.method));
    {
        auto os = out.open(dir + "/loss_trace.csv");
        write_trace_csv(os, r.best.trace);
    }
    if (!r.best.net.params().empty()) {
        save_mlp(out.path(dir + "/model.mlp").string(), r.best.net);
        json sidecar = {{"model", "model.mlp"}, {"stage", 0}, {"t", 1.0}, {"epoch", r.best.trace.epochs.size()}};
        if (!r.best.phases.empty()) {
            const PhaseRecord& last = r.best.phases.back();
            sidecar["stage"] = last.stage;
            sidecar["t"] = last.t;
            sidecar["epoch"] = last.epochs;
        }
        out.write_json(dir + "/checkpoint.json", sidecar);
    }
    if (!r.best.trace.evals.empty() || !r.best.trace.epochs.empty()) {
        std::string curve = "k,t,test_loss\n";
        bool any = false;
        for (const auto& e : r.best.trace.evals) {
            curve += std::to_string(e.k) + ',' + format_double(e.t) + ',' + format_double(e.test_loss) + '\n';
            any = true;
        }
        if (!any) {
            for (const auto& e : r.best.trace.epochs) {
                if (std::isnan(e.test_loss)) continue;
                curve += std::to_string(e.k_end) + ',' + format_double(e.t) + ',' + format_double(e.test_loss) + '\n';
                any = true;
            }
        }
        if (any) out.write(dir + "/test_curve.csv", curve);
    }
}

void write_summary(const Output& out, const ComparisonTable& table, const std::string& format) {
    if (format == "csv") {
        out.write("summary.csv", table.to_csv());
    } else {
        out.write_json("summary.json", table.to_json());
    }
}

json comparison_entry(const std::string& name, double traditional, double hta) {
    json j = {{"name", name}, {"traditional", traditional}, {"hta", hta}};
    if (traditional > 0.0 && std::isfinite(traditional)) j["roi"] = rate_of_improvement(traditional, hta);
    return j;
}

int finish_paired(const Output& out, const json& cli, const PairedReport& rep, const std::string& format,
                  const std::string& label) {
    json metrics = {{"cli", cli}, {"report", to_json(rep)},
                    {"comparison", comparison_entry(rep.experiment, rep.traditional.best_test_loss(),
                                                    rep.hta.best_test_loss())}};
    out.write_json("metrics.json", metrics);
    write_method_artifacts(out, rep.traditional);
    write_method_artifacts(out, rep.hta);
    const std::pair<std::string, std::pair<double, double>> row{
        rep.experiment, {rep.traditional.best_test_loss(), rep.hta.best_test_loss()}};
    if (rep.traditional.best_test_loss() > 0.0) write_summary(out, compare_report(std::span(&row, 1)), format);
    std::cout << label << " train=" << rep.train_size << " test=" << rep.test_size
              << " traditional=" << format_double(rep.traditional.best_test_loss())
              << " hta=" << format_double(rep.hta.best_test_loss()) << '\n';
    return 0;
}

VdpExperimentConfig vdp_config(const CommonFlags& c, const VdpFlags& v) {
    VdpExperimentConfig cfg;
    cfg.base = experiment_config(c);
    cfg.mesh = v.mesh;
    cfg.rk4_step = v.rk4_step;
    cfg.total_steps = v.steps;
    cfg.eval_every = v.eval_every;
    cfg.base.record_curves = v.eval_every > 0;
    return cfg;
}

void validate_vdp(const VdpFlags& v) {
    if (!(v.mesh > 0.0)) throw UsageError("--mesh must be positive");
    if (!(v.rk4_step > 0.0)) throw UsageError("--rk4-step must be positive");
    if (v.steps == 0) throw UsageError("--steps must be at least 1");
}

void add_vdp_options(CLI::App* sub, VdpFlags& v) {
    sub->add_option("--mesh", v.mesh, "Grid spacing in mu and k");
    sub->add_option("--rk4-step", v.rk4_step, "RK4 step size for y(1)");
    sub->add_option("--steps", v.steps, "Total SGD steps per method");
    sub->add_option("--eval-every", v.eval_every, "Test-loss evaluation interval in steps (0: off)");
}

int run_parsed(CLI::App& app, CLI::App* sub, const CommonFlags& c, const ApproxFlags& a, const VdpFlags& v,
               const EstimateFlags& e, const GrowFlags& g, const HeadFlags& h, const DataFlags& d,
               const std::vector<std::string>& report_files, const std::string& rerun_file) {
    const std::string name = sub->get_name();
    const json cli = resolved_options(*sub);
    (void)app;

    if (name == "approx") {
        validate_common(c);
        if (a.layers != 1 && a.layers != 2) throw UsageError("--layers must be 1 or 2");
        if (a.dim == 0) throw UsageError("--dim must be at least 1");
        if (a.ppd < 2) throw UsageError("--ppd must be at least 2");
        if (a.level == 0) throw UsageError("--level must be at least 1");
        ExperimentConfig cfg = experiment_config(c);
        cfg.data_seed = a.data_seed;
        cfg.points_per_dim = a.ppd;
        cfg.sparse_level = a.level;
        cfg.widen_first_layer_first = !a.second_layer_first;
        cfg.record_curves = a.curves;
        const Output out(resolve_out_dir(c.out_dir));
        const PairedReport rep = a.layers == 1 ? example1(a.dim, cfg) : example2(a.dim, cfg);
        return finish_paired(out, cli, rep, c.format, rep.experiment);
    }
    if (name == "vdp") {
        validate_common(c);
        validate_vdp(v);
        const Output out(resolve_out_dir(c.out_dir));
        const PairedReport rep = vdp_surrogate(vdp_config(c, v));
        return finish_paired(out, cli, rep, c.format, "vdp");
    }
    if (name == "estimate") {
        validate_common(c);
        validate_vdp(v);
        const auto [mu0, k0] = parse_pair(e.init, "--init");
        if (!(e.lr > 0.0)) throw UsageError("--est-lr must be positive");
        if (e.per_axis == 1) throw UsageError("--per-axis must be 0 or at least 2");
        if (e.hta_model.empty() != e.traditional_model.empty()) {
            throw UsageError("--hta-model and --traditional-model must be given together");
        }
        const Output out(resolve_out_dir(c.out_dir));
        Mlp hta_net, trad_net;
        json metrics = {{"cli", cli}};
        if (e.hta_model.empty()) {
            const PairedReport rep = vdp_surrogate(vdp_config(c, v));
            hta_net = rep.hta.best.net;
            trad_net = rep.traditional.best.net;
            metrics["surrogates"] = to_json(rep);
            write_method_artifacts(out, rep.traditional);
            write_method_artifacts(out, rep.hta);
        } else {
            hta_net = load_mlp(e.hta_model);
            trad_net = load_mlp(e.traditional_model);
        }
        EstimationConfig ec{e.lr, e.steps, mu0, k0};
        const Matrix samples = estimation_samples(11.0, 14.0, v.mesh, e.per_axis);
        const EstimationResult rh = estimate_all(hta_net, samples, ec, v.rk4_step);
        const EstimationResult rt = estimate_all(trad_net, samples, ec, v.rk4_step);
        metrics["estimation"] = {{"samples", samples.rows()}, {"hta", to_json(rh)}, {"traditional", to_json(rt)}};
        metrics["comparison"] = comparison_entry("err_pe", rt.err_pe, rh.err_pe);
        out.write_json("metrics.json", metrics);
        std::string csv = "mu,k,y_tilde,method,mu_star,k_star\n";
        for (const auto* r : {&rt, &rh}) {
            const char* m = r == &rh ? "hta" : "traditional";
            for (const auto& en : r->entries) {
                csv += format_double(en.mu) + ',' + format_double(en.k) + ',' + format_double(en.y_tilde) + ',' + m +
                       ',' + format_double(en.mu_star) + ',' + format_double(en.k_star) + '\n';
            }
        }
        out.write("estimates.csv", csv);
        std::cout << "estimate samples=" << samples.rows() << " err_pe_traditional=" << format_double(rt.err_pe)
                  << " err_pe_hta=" << format_double(rh.err_pe) << '\n';
        return 0;
    }
    if (name == "grow") {
        validate_common(c);
        const auto base = parse_sizes(g.base, "--base");
        const auto teacher = parse_sizes(g.teacher, "--teacher");
        if (g.quantum == 0) throw UsageError("--quantum must be at least 1");
        if (!(g.zero_ratio > 0.0)) throw UsageError("--zero-ratio must be positive");
        if (g.dim == 0 || g.samples < 2) throw UsageError("--dim and --samples must be positive");
        const Output out(resolve_out_dir(c.out_dir));
        Dataset all;
        if (!g.data.empty()) {
            all = load_dataset(g.data);
        } else {
            Rng trng(derive_seed(c.seed, 1000));
            const Mlp t = Mlp::random(Architecture::from_widths(g.dim, teacher, 1, Activation::ReLU), trng);
            all = teacher_dataset(t, g.samples, -1.0, 1.0, trng);
        }
        const auto [train_set, test_set] = split(all, 0.9, c.seed);
        OsfConfig oc;
        oc.base_widths = base;
        oc.quantum = g.quantum;
        oc.zero_ratio = g.zero_ratio;
        oc.base_epochs = g.base_epochs;
        oc.growth_schedule = {c.dt, g.growth_epochs, 0, 0};
        oc.max_growth_steps = g.max_growth_steps;
        oc.max_width = g.max_width;
        oc.train = train_config(c);
        const StructureResult res = osf_search(train_set, &test_set, oc, c.seed);
        out.write_json("structure.json", to_json(res));
        out.write_json("metrics.json", {{"cli", cli}, {"structure", to_json(res)}, {"data", all.provenance}});
        save_mlp(out.path("model.mlp").string(), res.net);
        std::string widths;
        for (std::size_t w : res.widths) widths += (widths.empty() ? "" : ",") + std::to_string(w);
        std::cout << "grow widths=" << widths << " stop=" << res.stop_reason
                  << " test=" << format_double(res.test_loss) << '\n';
        return 0;
    }
    if (name == "head") {
        validate_common(c);
        if (h.w1 == 0 || h.w2 == 0 || h.w1 > h.full_width || h.w2 > h.full_width) {
            throw UsageError("--w1 and --w2 must lie in [1, --full-width]");
        }
        if (h.classes < 2 || h.features == 0 || h.samples < 2) throw UsageError("bad --classes/--features/--samples");
        const Output out(resolve_out_dir(c.out_dir));
        Rng drng(derive_seed(c.seed, 2000));
        const Dataset all = synthetic_features(h.samples, h.features, h.classes, h.noise, drng, derive_seed(c.seed, 2001));
        const auto [train_set, test_set] = split(all, 0.9, c.seed);
        HeadConfig hc;
        hc.w1 = h.w1;
        hc.w2 = h.w2;
        hc.full_width = h.full_width;
        hc.classes = h.classes;
        hc.state1_epochs = h.state1_epochs;
        hc.schedule = {c.dt, h.phase_epochs, 0, 0};
        hc.train = train_config(c);
        const HeadReport rep = fc_head_three_state(train_set, test_set, hc);
        json states = json::array();
        for (const auto& s : rep.states) {
            states.push_back({{"widths", s.widths},
                              {"train_loss", s.train_loss},
                              {"test_loss", s.test_loss},
                              {"test_error", s.test_error}});
        }
        out.write_json("metrics.json", {{"cli", cli}, {"states", states}, {"data", all.provenance}});
        {
            auto os = out.open("loss_trace.csv");
            write_trace_csv(os, rep.result.trace);
        }
        std::cout << "head states=" << rep.states.size()
                  << " final_test_error=" << format_double(rep.states.back().test_error) << '\n';
        return 0;
    }
    if (name == "data") {
        if (int(d.sparse) + int(d.grid) + int(d.vdp) != 1) throw UsageError("choose exactly one of --sparse, --grid, --vdp");
        if (d.dim == 0) throw UsageError("--dim must be at least 1");
        if (d.vdp && d.range != "train" && d.range != "test") throw UsageError("--range must be train or test");
        if (d.sparse) {
            const std::size_t n = sparse_grid_size({d.dim, d.level});
            if (d.count_only) {
                std::cout << "sparse dim=" << d.dim << " level=" << d.level << " points=" << n << '\n';
                return 0;
            }
        }
        if (d.grid && d.count_only) {
            std::cout << "grid dim=" << d.dim << " ppd=" << d.ppd << " points=" << static_cast<std::size_t>(std::llround(std::pow(d.ppd, d.dim))) << '\n';
            return 0;
        }
        const double pi = std::numbers::pi;
        Dataset ds;
        if (d.sparse) ds = sparse_grid_dataset({d.dim, d.level}, -pi, pi);
        if (d.grid) ds = uniform_grid_dataset(d.dim, d.ppd, -pi, pi);
        if (d.vdp) {
            const double lo = d.range == "train" ? 1.0 : 11.0;
            const double hi = d.range == "train" ? 10.0 : 14.0;
            ds = vdp_dataset(lo, hi, lo, hi, d.mesh, d.rk4_step);
        }
        if (d.count_only) {
            std::cout << "points=" << ds.size() << '\n';
            return 0;
        }
        const std::string path = d.output.empty() ? (fs::path(resolve_out_dir(c.out_dir)) / "data.csv").string() : d.output;
        if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
        save_dataset(path, ds);
        std::cout << "data points=" << ds.size() << " path=" << path << '\n';
        return 0;
    }
    if (name == "report") {
        if (report_files.empty()) throw UsageError("report: at least one metrics.json is required");
        std::vector<std::pair<std::string, std::pair<double, double>>> rows;
        for (const auto& file : report_files) {
            std::ifstream is(file);
            if (!is) throw std::runtime_error("cannot open " + file);
            const json j = json::parse(is);
            if (!j.contains("comparison")) throw std::runtime_error(file + ": no comparison entry");
            const auto& cmp = j.at("comparison");
            rows.push_back({cmp.at("name").get<std::string>(),
                            {cmp.at("traditional").get<double>(), cmp.at("hta").get<double>()}});
        }
        const ComparisonTable table = compare_report(rows);
        const Output out(resolve_out_dir(c.out_dir));
        if (c.format == "csv") {
            out.write("comparison.csv", table.to_csv());
        } else {
            out.write_json("comparison.json", table.to_json());
        }
        std::cout << table.to_csv();
        return 0;
    }
    if (name == "rerun") {
        std::ifstream is(rerun_file);
        if (!is) throw std::runtime_error("cannot open " + rerun_file);
        const json j = json::parse(is);
        return run_cli(argv_from_resolved(j.at("cli"), c.out_dir));
    }
    throw UsageError("unknown subcommand " + name);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Homotopy training for fully connected networks", "hta"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    CommonFlags common;
    ApproxFlags approx;
    VdpFlags vdp;
    EstimateFlags est;
    GrowFlags grow;
    HeadFlags head;
    DataFlags data;
    std::vector<std::string> report_files;
    std::string rerun_file;

    auto* a = app.add_subcommand("approx", "sin(x_1 + ... + x_n): HTA vs traditional training");
    add_common(a, common, true);
    a->add_option("--layers", approx.layers, "Hidden layers: 1 (widen 10->20) or 2 ((10,10)->(20,20))");
    a->add_option("--dim", approx.dim, "Input dimension n");
    a->add_option("--data-seed", approx.data_seed, "Seed of the 90/10 train/test split");
    a->add_option("--ppd", approx.ppd, "Uniform grid points per dimension (n <= 3)");
    a->add_option("--level", approx.level, "Sparse grid level (n >= 4)");
    a->add_flag("--second-layer-first", approx.second_layer_first, "Two layers: widen hidden layer 2 first");
    a->add_flag("--curves", approx.curves, "Record per-epoch test loss of the best runs");

    auto* v = app.add_subcommand("vdp", "Van der Pol surrogate y(1; mu, k): HTA vs traditional");
    add_common(v, common, false);
    add_vdp_options(v, vdp);

    auto* e = app.add_subcommand("estimate", "Parameter estimation through trained surrogates and Err_PE");
    add_common(e, common, false);
    add_vdp_options(e, vdp);
    e->add_option("--init", est.init, "Initial guess mu,k");
    e->add_option("--est-lr", est.lr, "Gradient descent step on (mu, k)");
    e->add_option("--est-steps", est.steps, "Gradient descent steps per sample");
    e->add_option("--per-axis", est.per_axis, "Test sub-grid lines per axis (0: full 31x31 grid)");
    e->add_option("--hta-model", est.hta_model, "Use this HTA surrogate instead of training one");
    e->add_option("--traditional-model", est.traditional_model, "Use this traditional surrogate");

    auto* g = app.add_subcommand("grow", "Structure search by layer-wise homotopy growth");
    add_common(g, common, false);
    g->add_option("--base", grow.base, "Base hidden widths");
    g->add_option("--quantum", grow.quantum, "Units added per growth step");
    g->add_option("--zero-ratio", grow.zero_ratio, "New units count as zero below this RMS ratio");
    g->add_option("--base-epochs", grow.base_epochs, "Epochs for the base network");
    g->add_option("--growth-epochs", grow.growth_epochs, "Epochs per homotopy phase");
    g->add_option("--max-growth-steps", grow.max_growth_steps, "Growth step budget");
    g->add_option("--max-width", grow.max_width, "Width cap per layer");
    g->add_option("--teacher", grow.teacher, "Teacher widths for generated data");
    g->add_option("--dim", grow.dim, "Teacher input dimension");
    g->add_option("--samples", grow.samples, "Teacher samples");
    g->add_option("--data", grow.data, "Use this dataset CSV instead of a teacher");

    auto* h = app.add_subcommand("head", "Three-state growth of a classification head on synthetic features");
    add_common(h, common, false);
    h->add_option("--w1", head.w1, "State-1 width of hidden layer 1");
    h->add_option("--w2", head.w2, "State-1 width of hidden layer 2");
    h->add_option("--full-width", head.full_width, "Final width of both hidden layers");
    h->add_option("--classes", head.classes, "Number of classes");
    h->add_option("--features", head.features, "Feature dimension");
    h->add_option("--samples", head.samples, "Synthetic samples");
    h->add_option("--noise", head.noise, "Cluster noise level");
    h->add_option("--state1-epochs", head.state1_epochs, "Epochs for state 1");
    h->add_option("--phase-epochs", head.phase_epochs, "Epochs per homotopy phase");

    auto* d = app.add_subcommand("data", "Write grid or ODE datasets to CSV");
    d->add_flag("--sparse", data.sparse, "Sparse grid on [-pi, pi]^n");
    d->add_flag("--grid", data.grid, "Uniform grid on [-pi, pi]^n");
    d->add_flag("--vdp", data.vdp, "Van der Pol y(1) on a (mu, k) grid");
    d->add_option("--dim", data.dim, "Dimension n");
    d->add_option("--level", data.level, "Sparse grid level");
    d->add_option("--ppd", data.ppd, "Uniform grid points per dimension");
    d->add_option("--mesh", data.mesh, "Van der Pol grid spacing");
    d->add_option("--rk4-step", data.rk4_step, "RK4 step size");
    d->add_option("--range", data.range, "Van der Pol grid: train ([1,10]^2) or test ([11,14]^2)");
    d->add_option("--output", data.output, "CSV path (default <out-dir>/data.csv)");
    d->add_flag("--count-only", data.count_only, "Print the point count without writing");
    d->add_option("--out-dir", common.out_dir, "Output directory");

    auto* r = app.add_subcommand("report", "Merge metrics.json files into a comparison table");
    r->add_option("files", report_files, "metrics.json files")->required();
    r->add_option("--out-dir", common.out_dir, "Output directory");
    r->add_option("--format", common.format, "Table format")->check(CLI::IsMember({"json", "csv"}));

    auto* rr = app.add_subcommand("rerun", "Re-run the command recorded in a metrics.json");
    rr->add_option("metrics", rerun_file, "metrics.json")->required();
    rr->add_option("--out-dir", common.out_dir, "Output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        return run_parsed(app, sub, common, approx, vdp, est, grow, head, data, report_files, rerun_file);
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << '\n' << sub->help();
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace hta
