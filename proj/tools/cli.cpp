#include "cli.hpp"

#include "config.hpp"

#include "compcg/companion.hpp"
#include "compcg/errors.hpp"
#include "compcg/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace compcg::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config_path;
    std::string out_dir = "compcg-out";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string values;
    std::string methods;
    std::string inject_fault;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "key=value configuration file");
    cmd->add_option("--out", o.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--set", o.overrides, "override a configuration key (key=value, repeatable)");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--jobs", o.jobs, "number of runs solved in parallel");
}

Settings build_settings(const Options& o) {
    Settings s;
    if (!o.config_path.empty()) {
        for (const auto& [k, v] : read_config_file(o.config_path)) apply_setting(s, k, v);
    }
    for (const auto& text : o.overrides) {
        const auto [k, v] = split_assignment(text);
        apply_setting(s, k, v);
    }
    if (o.seed) s.sim.seed = *o.seed;
    if (o.jobs) apply_setting(s, "jobs", std::to_string(*o.jobs));
    if (!o.values.empty()) apply_setting(s, "values", o.values);
    if (!o.methods.empty()) apply_setting(s, "methods", o.methods);
    return s;
}

void validate(const SimConfig& cfg) {
    try {
        cfg.validate();
    } catch (const InputError& e) {
        throw ConfigError("", e.what());
    }
}

void prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

int simulate(const Settings& s, const Options& o, std::ostream& out) {
    validate(s.sim);
    prepare_out_dir(o.out_dir);
    const auto runs = run_experiment(s.sim, s.jobs);
    std::ostringstream runs_csv, aggregate_csv;
    aggregate_and_emit(method_name(s.sim.method), runs, {&runs_csv, &aggregate_csv, &out});
    write_file_atomic(join(o.out_dir, "runs.csv"), runs_csv.str());
    write_file_atomic(join(o.out_dir, "aggregate.csv"), aggregate_csv.str());
    return kExitOk;
}

enum class Axis { Lengthscale, Directions };

int sweep(const Settings& s, const Options& o, Axis axis, std::ostream& out) {
    if (s.values.empty()) throw ConfigError("values", "sweep needs at least one value");
    std::vector<SimConfig> configs;
    for (const double v : s.values) {
        SimConfig cfg = s.sim;
        if (axis == Axis::Lengthscale) {
            if (!(v > 0.0)) throw ConfigError("values", "lengthscale must be positive, got " + format_number(v));
            // The solutions keep the base lengthscale; only the regression model changes.
            if (!cfg.data_lengthscale) cfg.data_lengthscale = s.sim.kernel.lengthscale;
            cfg.kernel.lengthscale = v;
        } else {
            if (!(v >= 1.0) || v != std::floor(v)) {
                throw ConfigError("values", "direction count must be a positive integer, got " + format_number(v));
            }
            cfg.m = static_cast<Index>(v);
        }
        validate(cfg);
        configs.push_back(cfg);
    }
    prepare_out_dir(o.out_dir);
    const char* label = axis == Axis::Lengthscale ? "lengthscale" : "m";
    std::ostringstream runs_csv, aggregate_csv;
    runs_csv << "sweep_value," << kRunsCsvHeader << '\n';
    aggregate_csv << "sweep_value," << kAggregateCsvHeader << '\n';
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const std::string name = method_name(configs[i].method);
        const std::string prefix = format_number(s.values[i]) + ",";
        const auto runs = run_experiment(configs[i], s.jobs);
        const Summary summary = aggregate(name, runs);
        write_runs_csv(runs_csv, name, runs, prefix);
        write_aggregate_csv(aggregate_csv, summary, prefix);
        out << label << " = " << format_number(s.values[i]) << '\n';
        write_summary_table(out, summary);
        out << '\n';
    }
    write_file_atomic(join(o.out_dir, "runs.csv"), runs_csv.str());
    write_file_atomic(join(o.out_dir, "aggregate.csv"), aggregate_csv.str());
    return kExitOk;
}

int compare(const Settings& s, const Options& o, std::ostream& out) {
    if (s.methods.size() < 2) throw ConfigError("methods", "compare needs at least two methods");
    std::vector<SimConfig> configs;
    for (const auto& m : s.methods) {
        SimConfig cfg = s.sim;
        try {
            cfg.method = parse_method(m);
        } catch (const InputError& e) {
            throw ConfigError("methods", e.what());
        }
        validate(cfg);
        configs.push_back(cfg);
    }
    prepare_out_dir(o.out_dir);
    std::ostringstream runs_csv, aggregate_csv, totals_csv;
    runs_csv << kRunsCsvHeader << '\n';
    aggregate_csv << kAggregateCsvHeader << '\n';
    totals_csv << "method,total_iterations\n";
    std::vector<Summary> summaries;
    for (const auto& cfg : configs) {
        const std::string name = method_name(cfg.method);
        const auto runs = run_experiment(cfg, s.jobs);
        summaries.push_back(aggregate(name, runs));
        write_runs_csv(runs_csv, name, runs);
        write_aggregate_csv(aggregate_csv, summaries.back());
        totals_csv << name << ',' << format_number(summaries.back().total_mean) << '\n';
    }
    std::size_t width = 6;
    for (const auto& sm : summaries) width = std::max(width, sm.method.size());
    out << std::left << std::setw(static_cast<int>(width) + 2) << "method" << "total iterations (mean over runs)\n";
    for (const auto& sm : summaries) {
        out << std::left << std::setw(static_cast<int>(width) + 2) << sm.method << format_number(sm.total_mean) << '\n';
    }
    out << std::right;
    write_file_atomic(join(o.out_dir, "runs.csv"), runs_csv.str());
    write_file_atomic(join(o.out_dir, "aggregate.csv"), aggregate_csv.str());
    write_file_atomic(join(o.out_dir, "totals.csv"), totals_csv.str());
    return kExitOk;
}

struct FaultGuard {
    explicit FaultGuard(bool on) { testing::set_cholesky_sign_fault(on); }
    ~FaultGuard() { testing::set_cholesky_sign_fault(false); }
    FaultGuard(const FaultGuard&) = delete;
    FaultGuard& operator=(const FaultGuard&) = delete;
};

int verify(const Options& o, std::ostream& out) {
    if (!o.inject_fault.empty() && o.inject_fault != "cholesky") {
        throw ConfigError("inject-fault", "unknown fault '" + o.inject_fault + "'");
    }
    FaultGuard guard(o.inject_fault == "cholesky");
    const auto results = run_verification();
    std::vector<std::string> failed;
    for (const auto& r : results) {
        out << (r.passed ? "PASS  " : "FAIL  ") << r.name << "\n      " << r.detail << '\n';
        if (!r.passed) failed.push_back(r.name);
    }
    out << results.size() - failed.size() << '/' << results.size() << " checks passed\n";
    if (failed.empty()) return kExitOk;
    out << "failed checks:\n";
    for (const auto& name : failed) out << "  " << name << '\n';
    return kExitFailure;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp + " for writing");
        f << content;
        f.flush();
        if (!f) throw IoError("failed writing " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move " + tmp + " to " + path);
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Companion-regression preconditioned CG experiments", "compcg"};
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "run one method over n_runs sequences");
    add_common(sim, o);
    auto* sweep_l = app.add_subcommand("sweep-lengthscale", "repeat simulate for each kernel lengthscale");
    add_common(sweep_l, o);
    sweep_l->add_option("--values", o.values, "comma-separated lengthscales");
    auto* sweep_m = app.add_subcommand("sweep-directions", "repeat simulate for each direction count m");
    add_common(sweep_m, o);
    sweep_m->add_option("--values", o.values, "comma-separated direction counts");
    auto* cmp = app.add_subcommand("compare", "run several methods on the same sequences");
    add_common(cmp, o);
    cmp->add_option("--methods", o.methods, "comma-separated methods, e.g. plain,jacobi,compcg-subset");
    auto* ver = app.add_subcommand("verify", "check the structural properties of the solver");
    ver->add_option("--inject-fault", o.inject_fault)->group("");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (ver->parsed()) return verify(o, out);
        const Settings s = build_settings(o);
        if (sim->parsed()) return simulate(s, o, out);
        if (sweep_l->parsed()) return sweep(s, o, Axis::Lengthscale, out);
        if (sweep_m->parsed()) return sweep(s, o, Axis::Directions, out);
        return compare(s, o, out);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace compcg::cli
