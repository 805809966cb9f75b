#include "decomp/decomp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Options shared by gen and bench.
struct DataFlags {
    long long n = 100, p = 10, m = 10, s = 2;
    double sigma = 0.6;
    std::uint64_t seed = 0;
};

struct SolveFlags {
    std::string method;
    std::string input;
    double threshold = -1.0;
    double lambda = -1.0;
    double nu = 1.0;
    long long m = 0;
    std::uint64_t seed = 0;
    // Convex solver.
    double eps = 0.0, eps_rel = 1e-4, grad_tol = 1e-9, eig_tol = 1e-6;
    int max_iter = 5000;
    long long m_init = 1, m_max = 0;
    // Rounding.
    int iters_per_stage = 200, final_stage_iters = 5000;
    // NoConv.
    int restarts = 5, max_sweeps = 500, inner_iters = 10;
    double tol = 1e-7;
};

struct BenchFlags {
    std::vector<int> rows;
    int replications = 10;
    /// Empty means all four.
    std::vector<std::string> methods;
    int workers = 0;
    int lambda_patience = 4;
    bool print_table = false;
};

void ensure_dir(const std::string &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw decomp::IoError("cannot create directory '" + dir + "'");
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream os(path);
    if (!os || !(os << text))
        throw decomp::IoError("failed writing '" + path.string() + "'");
}

void write_json(const fs::path &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

/// Every option of `app` that was given, with its resolved value.
json resolved_options(const CLI::App &app) {
    json out = json::object();
    for (const CLI::Option *opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config")
            continue;
        const auto results = opt->reduced_results();
        if (opt->get_expected_max() > 1)
            out[name] = results;
        else if (opt->get_type_size() == 0)
            out[name] = opt->count() > 0;
        else if (!results.empty())
            out[name] = results.front();
        else if (!opt->get_default_str().empty())
            out[name] = opt->get_default_str();
    }
    return out;
}

std::string json_to_arg(const json &v) {
    if (v.is_string())
        return v.get<std::string>();
    return v.dump();
}

/// Expands `--config file.json` into flags placed before the command-line
/// ones, skipping keys the command line sets itself. Keys are long flag names.
std::vector<std::string> merge_config(CLI::App &app, std::vector<std::string> args) {
    std::string config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
            args.erase(args.begin() + i);
            break;
        }
    }
    if (config.empty() || args.empty())
        return args;
    std::ifstream is(config);
    if (!is)
        throw decomp::IoError("cannot open config '" + config + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception &e) {
        throw decomp::IoError("config '" + config + "': " + e.what());
    }
    if (!j.is_object())
        throw std::invalid_argument("config '" + config + "' must be a JSON object");

    CLI::App *sub = app.get_subcommand_no_throw(args.front());
    if (!sub)
        return args;
    std::set<std::string> given;
    for (const std::string &a : args)
        if (a.rfind("--", 0) == 0)
            given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos
                                                                       : a.find('=') - 2));
    std::vector<std::string> out{args.front()};
    for (const auto &[key, value] : j.items()) {
        const CLI::Option *opt = sub->get_option_no_throw("--" + key);
        if (!opt)
            throw std::invalid_argument("config '" + config + "': unknown key '" + key + "'");
        if (given.count(key))
            continue;
        if (opt->get_type_size() == 0) {
            if (value.get<bool>())
                out.push_back("--" + key);
            continue;
        }
        if (value.is_array() && value.empty())
            continue;
        out.push_back("--" + key);
        if (value.is_array())
            for (const json &v : value)
                out.push_back(json_to_arg(v));
        else
            out.push_back(json_to_arg(value));
    }
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

void add_data_flags(CLI::App *cmd, DataFlags &d) {
    cmd->add_option("--n", d.n, "Rows (data points)")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--p", d.p, "Columns (dimension)")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--m", d.m, "Dictionary size")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--s", d.s, "Nonzeros per code")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--sigma", d.sigma, "Relative noise level")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", d.seed, "Random seed")->capture_default_str();
}

decomp::ExperimentSpec spec_from(const DataFlags &d) {
    decomp::ExperimentSpec spec;
    spec.N = d.n;
    spec.P = d.p;
    spec.M_true = d.m;
    spec.S = d.s;
    spec.sigma = d.sigma;
    spec.seed = d.seed;
    return spec;
}

int cmd_gen(const CLI::App &cmd, const DataFlags &d, int trial, const std::string &out_dir) {
    decomp::ExperimentSpec spec = spec_from(d);
    spec.validate();
    const decomp::SyntheticData data = decomp::generate_synthetic(spec, trial);
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    decomp::save_matrix(dir / "Y.txt", data.Y);
    decomp::save_matrix(dir / "Y0.txt", data.Y0);
    decomp::save_matrix(dir / "U_true.txt", data.U_true);
    decomp::save_matrix(dir / "V_true.txt", data.V_true);
    write_json(dir / "manifest.json", {{"command", "gen"},
                                       {"version", decomp::version},
                                       {"parameters", resolved_options(cmd)}});
    return 0;
}

int cmd_solve(const CLI::App &cmd, const SolveFlags &f, const std::string &out_dir) {
    using namespace decomp;
    const Matrix y = load_matrix(f.input);
    const double np = static_cast<double>(y.rows() * y.cols());
    const bool closed = f.method == "svt" || f.method == "row" || f.method == "entrywise";
    if (closed && f.threshold < 0)
        throw std::invalid_argument("--threshold (>= 0) is required for method " + f.method);
    if (!closed && !(f.lambda > 0))
        throw std::invalid_argument("--lambda (> 0) is required for method " + f.method);
    if (f.method == "noconv" && f.m < 1)
        throw std::invalid_argument("--m (>= 1) is required for method noconv");
    require_nu(f.nu);

    SolverConfig cfg;
    if (f.eps > 0)
        cfg.eps = f.eps;
    cfg.eps_rel = f.eps_rel;
    cfg.grad_tol = f.grad_tol;
    cfg.eig_tol = f.eig_tol;
    cfg.max_iter = f.max_iter;
    cfg.m_init = f.m_init;
    cfg.m_max = f.m_max;
    cfg.seed = f.seed;

    json summary{{"command", "solve"}, {"version", version}, {"method", f.method}};
    std::optional<Matrix> u, v;
    Matrix x;
    const auto start = std::chrono::steady_clock::now();
    if (closed) {
        const NormSpec spec = f.method == "svt"   ? NormSpec::trace()
                              : f.method == "row" ? NormSpec::row_l2()
                                                  : NormSpec::entrywise();
        x = closed_form_solve(y, spec, f.threshold);
        summary["objective"] = (y - x).squaredNorm() / (2 * np) +
                               f.threshold / np * decomposition_norm_closed(x, spec);
        summary["certified_global"] = true;
        summary["rank_estimate"] = numerical_rank(x, f.eig_tol);
    } else if (f.method == "conv" || f.method == "conv-r") {
        const ConvexSolution s = grow_and_solve(y, f.lambda, f.nu, cfg);
        summary["certified_global"] = s.certified_global;
        summary["rank_estimate"] = s.rank_estimate;
        summary["iterations"] = s.iterations;
        summary["growth_steps"] = s.growth_steps;
        summary["eps"] = s.eps;
        if (f.method == "conv") {
            summary["objective"] = s.objective;
            x = s.X;
            u = s.U;
            v = s.V;
        } else {
            HomotopySchedule sched;
            sched.iters_per_stage = f.iters_per_stage;
            sched.final_stage_iters = f.final_stage_iters;
            const RoundedEstimate r = round_estimation(y, f.lambda, f.nu, s.U, s.eps, sched);
            summary["objective_convex"] = s.objective;
            summary["objective_before_rounding"] = r.objective_start;
            summary["objective"] = r.objective;
            summary["columns"] = r.U.cols();
            x = r.X;
            u = r.U;
            v = r.V;
        }
    } else if (f.method == "noconv") {
        AltMinConfig cfg_nc;
        cfg_nc.restarts = f.restarts;
        cfg_nc.max_sweeps = f.max_sweeps;
        cfg_nc.inner_iters = f.inner_iters;
        cfg_nc.tol = f.tol;
        cfg_nc.seed = f.seed;
        const NoConvResult r = noconv_solve(y, f.lambda, f.m, cfg_nc);
        summary["objective"] = r.objective;
        summary["certified_global"] = false;
        summary["rank_estimate"] = numerical_rank(r.X, f.eig_tol);
        summary["sweeps"] = r.sweeps;
        summary["best_restart"] = r.best_restart;
        x = r.X;
        u = r.U;
        v = r.V;
    } else {
        throw std::invalid_argument("unknown method '" + f.method + "'");
    }
    summary["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    summary["parameters"] = resolved_options(cmd);

    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    save_matrix(dir / "X.txt", x);
    if (u)
        save_matrix(dir / "U.txt", *u);
    if (v)
        save_matrix(dir / "V.txt", *v);
    write_json(dir / "summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_bench(const CLI::App &cmd, const DataFlags &d, const BenchFlags &b,
              const std::string &out_dir) {
    using namespace decomp;
    std::vector<Method> methods;
    for (const std::string &m : b.methods)
        methods.push_back(parse_method(m));
    if (methods.empty())
        methods = {Method::NoConv, Method::Conv, Method::ConvR, Method::SvdBaseline};
    std::vector<ExperimentSpec> specs;
    if (b.rows.empty()) {
        ExperimentSpec s = spec_from(d);
        s.config_id = "custom-N" + std::to_string(d.n);
        specs.push_back(s);
    } else {
        for (int row : b.rows) {
            ExperimentSpec s = table1_row(row, d.n);
            s.sigma = d.sigma;
            s.seed = d.seed;
            specs.push_back(s);
        }
    }
    BenchmarkOptions opt;
    opt.workers = b.workers > 0 ? b.workers
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    opt.lambda_patience = b.lambda_patience;
    for (ExperimentSpec &s : specs) {
        s.replications = b.replications;
        s.validate();
    }

    std::vector<TrialRecord> records;
    std::vector<std::string> failures;
    for (const ExperimentSpec &s : specs) {
        std::cerr << "running " << s.config_id << " (" << s.replications << " replications)\n";
        const auto recs = run_config(s, methods, opt, &failures);
        records.insert(records.end(), recs.begin(), recs.end());
    }
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    std::ostringstream trials, summary;
    write_trials_csv(trials, records);
    write_text(dir / "trials.csv", trials.str());
    std::string table;
    if (!records.empty()) {
        const auto rows = summarize(records);
        write_summary_csv(summary, rows);
        write_text(dir / "summary.csv", summary.str());
        table = format_table(rows);
        write_text(dir / "table.txt", table);
    }
    write_json(dir / "manifest.json", {{"command", "bench"},
                                       {"version", version},
                                       {"parameters", resolved_options(cmd)},
                                       {"failures", failures}});
    if (b.print_table)
        std::cout << table;
    for (const std::string &f : failures)
        std::cerr << "failed: " << f << '\n';
    return failures.empty() ? 0 : 1;
}

int cmd_report(const std::string &trials_path, const std::string &summary_path) {
    std::ifstream is(trials_path);
    if (!is)
        throw decomp::IoError("cannot open '" + trials_path + "' for reading");
    const auto rows = decomp::summarize(decomp::read_trials_csv(is));
    if (!summary_path.empty()) {
        std::ostringstream os;
        decomp::write_summary_csv(os, rows);
        write_text(summary_path, os.str());
    }
    std::cout << decomp::format_table(rows);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Sparse matrix factorization with decomposition norms"};
    app.set_version_flag("--version", decomp::version);
    app.require_subcommand(1);
    std::string config_path;

    DataFlags data;
    int gen_trial = 0;
    std::string gen_dir = ".";
    CLI::App *gen = app.add_subcommand("gen", "Generate a synthetic denoising instance");
    add_data_flags(gen, data);
    gen->add_option("--trial", gen_trial, "Replication index")->capture_default_str()->check(CLI::NonNegativeNumber);
    gen->add_option("--out-dir", gen_dir, "Output directory")->capture_default_str();

    SolveFlags sf;
    std::string solve_dir = ".";
    CLI::App *solve = app.add_subcommand("solve", "Run one solver on a matrix");
    solve->add_option("--method", sf.method, "svt, row, entrywise, conv, conv-r or noconv")
        ->required()
        ->check(CLI::IsMember({"svt", "row", "entrywise", "conv", "conv-r", "noconv"}));
    solve->add_option("--input", sf.input, "Input matrix (text format)")->required()->check(CLI::ExistingFile);
    solve->add_option("--out-dir", solve_dir, "Output directory")->capture_default_str();
    solve->add_option("--threshold", sf.threshold, "Shrinkage threshold of the closed-form methods")->check(CLI::NonNegativeNumber);
    solve->add_option("--lambda", sf.lambda, "Regularization weight")->check(CLI::PositiveNumber);
    solve->add_option("--nu", sf.nu, "Mixed-norm weight in [0, 1]")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    solve->add_option("--m", sf.m, "NoConv dictionary size")->check(CLI::PositiveNumber);
    solve->add_option("--seed", sf.seed, "Random seed")->capture_default_str();
    solve->add_option("--eps", sf.eps, "Absolute smoothing (overrides --eps-rel)")->check(CLI::PositiveNumber);
    solve->add_option("--eps-rel", sf.eps_rel, "Smoothing relative to max|Y|")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--grad-tol", sf.grad_tol, "Relative stationarity tolerance")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--eig-tol", sf.eig_tol, "Relative rank and PSD tolerance")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--max-iter", sf.max_iter, "Descent iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--m-init", sf.m_init, "Initial column count")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--m-max", sf.m_max, "Column cap (0 means N)")->capture_default_str()->check(CLI::NonNegativeNumber);
    solve->add_option("--iters-per-stage", sf.iters_per_stage, "Rounding iterations per stage")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--final-stage-iters", sf.final_stage_iters, "Rounding iterations at the last stage")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--restarts", sf.restarts, "NoConv restarts")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--max-sweeps", sf.max_sweeps, "NoConv sweeps per restart")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--inner-iters", sf.inner_iters, "NoConv proximal steps per U update")->capture_default_str()->check(CLI::PositiveNumber);
    solve->add_option("--tol", sf.tol, "NoConv relative objective tolerance")->capture_default_str()->check(CLI::PositiveNumber);

    DataFlags bench_data;
    BenchFlags bf;
    std::string bench_dir = ".";
    CLI::App *bench = app.add_subcommand("bench", "Run the synthetic denoising benchmark");
    add_data_flags(bench, bench_data);
    bench->add_option("--table1-row", bf.rows, "Reference table rows 1-18 (repeatable); sets P, M, S")->check(CLI::Range(1, 18));
    bench->add_option("--replications", bf.replications, "Replications per configuration")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--methods", bf.methods, "Subset of NoConv, Conv, ConvR, SVD (default all)")->check(CLI::IsMember({"NoConv", "Conv", "ConvR", "SVD"}));
    bench->add_option("--workers", bf.workers, "Worker threads (0 means all cores)")->capture_default_str()->check(CLI::NonNegativeNumber);
    bench->add_option("--lambda-patience", bf.lambda_patience, "Stop a lambda path after this many non-improving points (0 runs the full grid)")->capture_default_str()->check(CLI::NonNegativeNumber);
    bench->add_flag("--print-table", bf.print_table, "Print the summary table");
    bench->add_option("--out-dir", bench_dir, "Output directory")->capture_default_str();

    std::string report_trials, report_summary;
    CLI::App *report = app.add_subcommand("report", "Summarize a trials CSV");
    report->add_option("--trials", report_trials, "Trials CSV")->required()->check(CLI::ExistingFile);
    report->add_option("--summary-csv", report_summary, "Also write the summary CSV here");

    for (CLI::App *sub : {gen, solve, bench, report})
        sub->add_option("--config", config_path,
                        "JSON file of flag values; command-line flags take precedence");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = merge_config(app, std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*gen)
            return cmd_gen(*gen, data, gen_trial, gen_dir);
        if (*solve)
            return cmd_solve(*solve, sf, solve_dir);
        if (*bench)
            return cmd_bench(*bench, bench_data, bf, bench_dir);
        if (*report)
            return cmd_report(report_trials, report_summary);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
