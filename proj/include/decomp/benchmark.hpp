#pragma once

#include "decomp/closed_form.hpp"
#include "decomp/convex_solver.hpp"
#include "decomp/linalg.hpp"
#include "decomp/noconv.hpp"
#include "decomp/rng.hpp"
#include "decomp/rounding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

// Synthetic denoising experiment: sparse codes on a random dictionary plus
// Gaussian noise, with every method's parameters picked by the oracle
// ‖X - Y0‖² and scored against thresholded-SVD denoising.

namespace decomp {

enum class Method { NoConv, Conv, ConvR, SvdBaseline };

inline const char *to_string(Method m) {
    switch (m) {
    case Method::NoConv:
        return "NoConv";
    case Method::Conv:
        return "Conv";
    case Method::ConvR:
        return "ConvR";
    case Method::SvdBaseline:
        return "SVD";
    }
    return "unknown";
}

inline Method parse_method(const std::string &s) {
    for (Method m : {Method::NoConv, Method::Conv, Method::ConvR, Method::SvdBaseline})
        if (s == to_string(m))
            return m;
    throw std::invalid_argument("unknown method '" + s + "' (NoConv, Conv, ConvR, SVD)");
}

/// λNP = σ_max(Y) · 10^(-3k/29), k = 0..29: the SVD baseline's threshold
/// grid, so the trace-norm case can reproduce the baseline exactly.
inline std::vector<double> default_lambda_multipliers() {
    std::vector<double> out;
    for (int k = 0; k < 30; ++k)
        out.push_back(std::pow(10.0, -3.0 * k / 29.0));
    return out;
}

struct ExperimentSpec {
    std::string config_id = "custom";
    Index N = 100, P = 10, M_true = 10, S = 2;
    double sigma = 0.6;
    int replications = 10;
    std::uint64_t seed = 0;
    /// λ = multiplier · σ_max(Y) / (NP), sorted internally from large to small.
    std::vector<double> lambda_grid = default_lambda_multipliers();
    std::vector<double> nu_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    /// NoConv dictionary sizes; empty means {M/2, M, 2M} ∩ [1, N].
    std::vector<Index> m_grid;

    std::vector<Index> resolved_m_grid() const {
        if (!m_grid.empty())
            return m_grid;
        std::vector<Index> out;
        for (Index m : {M_true / 2, M_true, 2 * M_true})
            if (m >= 1 && m <= N && std::find(out.begin(), out.end(), m) == out.end())
                out.push_back(m);
        return out;
    }

    void validate() const {
        if (N < 1 || P < 1 || M_true < 1 || S < 1)
            throw std::invalid_argument("ExperimentSpec: N, P, M, S must be positive");
        if (S > M_true)
            throw std::invalid_argument("ExperimentSpec: S = " + std::to_string(S) +
                                        " exceeds M = " + std::to_string(M_true));
        if (!(sigma >= 0) || !std::isfinite(sigma))
            throw std::invalid_argument("ExperimentSpec: sigma must be >= 0");
        if (replications < 1)
            throw std::invalid_argument("ExperimentSpec: replications must be positive");
        if (lambda_grid.empty() || nu_grid.empty())
            throw std::invalid_argument("ExperimentSpec: grids must be nonempty");
        for (double l : lambda_grid)
            if (!(l > 0) || !std::isfinite(l))
                throw std::invalid_argument("ExperimentSpec: lambda multipliers must be positive");
        for (double nu : nu_grid)
            require_nu(nu);
        const auto ms = resolved_m_grid();
        if (ms.empty())
            throw std::invalid_argument("ExperimentSpec: empty M grid");
        for (Index m : ms)
            if (m < 1 || m > N)
                throw std::invalid_argument("ExperimentSpec: M grid entries must lie in [1, N]");
    }
};

/// Rows 1-18 of the reference table: S = 2, 4, 8 in blocks of six, each block
/// running (P, M) over (10,10) (20,10) (10,20) (20,20) (10,40) (20,40).
inline ExperimentSpec table1_row(int row, Index n = 100) {
    if (row < 1 || row > 18)
        throw std::invalid_argument("table1_row: row must be in 1..18");
    if (n < 1)
        throw std::invalid_argument("table1_row: N must be positive");
    static const Index pm[6][2] = {{10, 10}, {20, 10}, {10, 20}, {20, 20}, {10, 40}, {20, 40}};
    static const Index sparsity[3] = {2, 4, 8};
    ExperimentSpec spec;
    const int i = (row - 1) % 6;
    spec.P = pm[i][0];
    spec.M_true = pm[i][1];
    spec.S = sparsity[(row - 1) / 6];
    spec.N = n;
    char id[32];
    std::snprintf(id, sizeof id, "row%02d-N%lld", row, static_cast<long long>(n));
    spec.config_id = id;
    return spec;
}

struct SyntheticData {
    Matrix Y0, Y, U_true, V_true;
};

/// Y0 = U Vᵀ with unit-norm Gaussian atoms and S-sparse Gaussian codes;
/// Y = Y0 + ‖Y0‖_F σ ε / √(NP). Deterministic in (seed, trial).
inline SyntheticData generate_synthetic(const ExperimentSpec &spec, int trial) {
    spec.validate();
    if (trial < 0)
        throw std::invalid_argument("generate_synthetic: trial must be >= 0");
    RngStream rng = RngStream(spec.seed).substream(static_cast<std::uint64_t>(trial));
    SyntheticData d;
    d.V_true = standard_normal_matrix(rng, spec.P, spec.M_true);
    for (Index m = 0; m < spec.M_true; ++m) {
        const double norm = d.V_true.col(m).norm();
        if (norm == 0.0)
            throw Error("generate_synthetic: degenerate dictionary draw");
        d.V_true.col(m) /= norm;
    }
    d.U_true = Matrix::Zero(spec.N, spec.M_true);
    for (Index n = 0; n < spec.N; ++n)
        for (Index m : rng.sample_without_replacement(spec.M_true, spec.S))
            d.U_true(n, m) = rng.normal();
    d.Y0 = d.U_true * d.V_true.transpose();
    const double scale = d.Y0.norm() * spec.sigma / std::sqrt(static_cast<double>(spec.N * spec.P));
    d.Y = d.Y0 + scale * standard_normal_matrix(rng, spec.N, spec.P);
    return d;
}

struct BaselineResult {
    Matrix X;
    double error = 0.0;
    double threshold = 0.0;
};

/// Oracle-thresholded SVD: svt(Y, t) over t = σ_max(Y) 10^(-3k/29),
/// k = 0..29, keeping the t with the smallest ‖X - Y0‖².
inline BaselineResult svd_baseline(const Matrix &y, const Matrix &y0) {
    if (y.rows() != y0.rows() || y.cols() != y0.cols())
        throw std::invalid_argument("svd_baseline: shapes " + shape_string(y) + " and " +
                                    shape_string(y0) + " differ");
    const SvdResult s = svd(y);
    BaselineResult best;
    best.error = std::numeric_limits<double>::infinity();
    const double top = s.singular_values.size() ? s.singular_values(0) : 0.0;
    for (int k = 0; k < 30; ++k) {
        const double t = top * std::pow(10.0, -3.0 * k / 29.0);
        const Vector shrunk = (s.singular_values.array() - t).max(0.0).matrix();
        Matrix x = s.left_vectors * shrunk.asDiagonal() * s.right_vectors.transpose();
        const double err = (x - y0).squaredNorm();
        if (err < best.error) {
            best.error = err;
            best.threshold = t;
            best.X = std::move(x);
        }
    }
    return best;
}

struct TrialRecord {
    std::string config_id;
    Index N = 0, P = 0, M_true = 0, S = 0;
    Method method = Method::SvdBaseline;
    double lambda = 0.0;
    std::optional<double> nu;
    Index m = 0;
    int trial = 0;
    double error = 0.0;
    double improvement_pct = 0.0;
};

/// Looser than the library defaults: the oracle error moves far less than the
/// smoothing bias these settings allow.
inline SolverConfig benchmark_solver_config() {
    SolverConfig cfg;
    cfg.eps_rel = 1e-3;
    cfg.grad_tol = 1e-7;
    cfg.eig_tol = 1e-4;
    cfg.max_iter = 2000;
    return cfg;
}

struct BenchmarkOptions {
    SolverConfig solver = benchmark_solver_config();
    HomotopySchedule schedule;
    AltMinConfig altmin;
    /// A decreasing-λ path stops after this many consecutive points without a
    /// new best error; 0 runs the whole grid.
    int lambda_patience = 4;
    /// Worker threads over replications; results do not depend on it.
    int workers = 1;
};

namespace detail {

inline double improvement(double err, double err_svd) {
    return err_svd > 0 ? 100.0 * (err - err_svd) / err_svd : 0.0;
}

inline bool has(const std::vector<Method> &methods, Method m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
}

struct Candidate {
    double error = std::numeric_limits<double>::infinity();
    double lambda = 0.0;
    std::optional<double> nu;
    Index m = 0;

    void offer(double err, double l, std::optional<double> n, Index size) {
        if (err < error) {
            error = err;
            lambda = l;
            nu = n;
            m = size;
        }
    }
};

/// Counts consecutive non-improving points along one λ path.
struct PathStop {
    int patience;
    int stale = 0;
    double best = std::numeric_limits<double>::infinity();

    /// Returns true once the path should stop.
    bool update(double err) {
        if (err < best) {
            best = err;
            stale = 0;
        } else {
            ++stale;
        }
        return patience > 0 && stale >= patience;
    }
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return RngStream(a).substream(b).next_u64();
}

inline std::vector<TrialRecord> run_trial(const ExperimentSpec &spec,
                                          const std::vector<Method> &methods, int trial,
                                          const BenchmarkOptions &opt) {
    const SyntheticData d = generate_synthetic(spec, trial);
    const double np = static_cast<double>(spec.N * spec.P);
    const double top = singular_values(d.Y)(0);
    std::vector<double> lambdas;
    for (double mult : spec.lambda_grid)
        lambdas.push_back(mult * top / np);
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());

    auto tagged = [&](Method m, auto &&body) {
        try {
            body();
        } catch (const std::exception &e) {
            throw Error(spec.config_id + " trial " + std::to_string(trial) + " method " +
                        to_string(m) + ": " + e.what());
        }
    };

    const BaselineResult base = svd_baseline(d.Y, d.Y0);
    Candidate conv, conv_r, noconv;
    const bool want_conv = has(methods, Method::Conv), want_round = has(methods, Method::ConvR);
    if (want_conv || want_round) {
        for (double nu : spec.nu_grid) {
            std::optional<Matrix> warm;
            PathStop stop{opt.lambda_patience};
            for (double lambda : lambdas) {
                ConvexSolution s;
                tagged(Method::Conv, [&] {
                    SolverConfig cfg = opt.solver;
                    cfg.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(trial));
                    s = grow_and_solve(d.Y, lambda, nu, cfg, warm);
                });
                warm = s.U;
                const double err = (s.X - d.Y0).squaredNorm();
                conv.offer(err, lambda, nu, s.size());
                double path_err = want_conv ? err : std::numeric_limits<double>::infinity();
                if (want_round)
                    tagged(Method::ConvR, [&] {
                        const RoundedEstimate r =
                            round_estimation(d.Y, lambda, nu, s.U, s.eps, opt.schedule);
                        const double e = (r.X - d.Y0).squaredNorm();
                        conv_r.offer(e, lambda, nu, r.U.cols());
                        path_err = std::min(path_err, e);
                    });
                if (stop.update(path_err))
                    break;
            }
        }
    }
    if (has(methods, Method::NoConv)) {
        for (Index m : spec.resolved_m_grid()) {
            PathStop stop{opt.lambda_patience};
            for (double lambda : lambdas) {
                double err = 0.0;
                tagged(Method::NoConv, [&] {
                    AltMinConfig cfg = opt.altmin;
                    cfg.seed = mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(trial)),
                                        static_cast<std::uint64_t>(m));
                    const NoConvResult r = noconv_solve(d.Y, lambda, m, cfg);
                    err = (r.X - d.Y0).squaredNorm();
                });
                noconv.offer(err, lambda, std::nullopt, m);
                if (stop.update(err))
                    break;
            }
        }
    }

    std::vector<TrialRecord> out;
    auto emit = [&](Method method, const Candidate &c) {
        TrialRecord r;
        r.config_id = spec.config_id;
        r.N = spec.N;
        r.P = spec.P;
        r.M_true = spec.M_true;
        r.S = spec.S;
        r.method = method;
        r.lambda = c.lambda;
        r.nu = c.nu;
        r.m = c.m;
        r.trial = trial;
        r.error = c.error;
        r.improvement_pct = method == Method::SvdBaseline ? 0.0 : improvement(c.error, base.error);
        out.push_back(std::move(r));
    };
    if (has(methods, Method::NoConv))
        emit(Method::NoConv, noconv);
    if (want_conv)
        emit(Method::Conv, conv);
    if (want_round)
        emit(Method::ConvR, conv_r);
    if (has(methods, Method::SvdBaseline)) {
        Candidate c;
        c.offer(base.error, base.threshold / np, 1.0,
                numerical_rank(base.X, 1e-12));
        emit(Method::SvdBaseline, c);
    }
    return out;
}

} // namespace detail

inline bool record_less(const TrialRecord &a, const TrialRecord &b) {
    if (a.config_id != b.config_id)
        return a.config_id < b.config_id;
    if (a.method != b.method)
        return a.method < b.method;
    return a.trial < b.trial;
}

/// Runs every replication of `spec` for the requested methods. Records are
/// sorted by (config, method, trial); the output does not depend on workers.
/// A failing replication throws, unless `failures` is given: its message is
/// then appended there and the replication contributes no records.
inline std::vector<TrialRecord> run_config(const ExperimentSpec &spec,
                                           const std::vector<Method> &methods,
                                           const BenchmarkOptions &opt = {},
                                           std::vector<std::string> *failures = nullptr) {
    spec.validate();
    if (methods.empty())
        throw std::invalid_argument("run_config: no methods requested");
    const int reps = spec.replications;
    std::vector<std::vector<TrialRecord>> per_trial(static_cast<std::size_t>(reps));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next++; t < reps; t = next++) {
            try {
                per_trial[static_cast<std::size_t>(t)] = detail::run_trial(spec, methods, t, opt);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        }
    };
    const int workers = std::clamp(opt.workers, 1, reps);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto &th : pool)
            th.join();
    }
    for (const auto &e : errors) {
        if (!e)
            continue;
        if (!failures)
            std::rethrow_exception(e);
        try {
            std::rethrow_exception(e);
        } catch (const std::exception &ex) {
            failures->push_back(ex.what());
        }
    }
    std::vector<TrialRecord> out;
    for (auto &v : per_trial)
        out.insert(out.end(), v.begin(), v.end());
    std::sort(out.begin(), out.end(), record_less);
    return out;
}

// ---------------------------------------------------------------------------
// Reporting

namespace detail {

inline std::string format_double(double v, int digits = 17) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

inline double parse_double(const std::string &s, const char *what) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used != s.size() || s.empty())
        throw std::invalid_argument(std::string("trials csv: bad ") + what + " '" + s + "'");
    return v;
}

inline long long parse_int(const std::string &s, const char *what) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used != s.size() || s.empty())
        throw std::invalid_argument(std::string("trials csv: bad ") + what + " '" + s + "'");
    return v;
}

} // namespace detail

inline const char *trials_csv_header() {
    return "config_id,N,P,M_true,S,method,lambda,nu,m,trial,error,improvement_pct";
}

inline void write_trials_csv(std::ostream &os, const std::vector<TrialRecord> &records) {
    os << trials_csv_header() << '\n';
    for (const TrialRecord &r : records) {
        os << r.config_id << ',' << r.N << ',' << r.P << ',' << r.M_true << ',' << r.S << ','
           << to_string(r.method) << ',' << detail::format_double(r.lambda) << ','
           << (r.nu ? detail::format_double(*r.nu) : std::string()) << ',' << r.m << ','
           << r.trial << ',' << detail::format_double(r.error) << ','
           << detail::format_double(r.improvement_pct) << '\n';
    }
}

inline std::vector<TrialRecord> read_trials_csv(std::istream &is) {
    std::string line;
    if (!std::getline(is, line) || line != trials_csv_header())
        throw std::invalid_argument("trials csv: missing or unexpected header");
    std::vector<TrialRecord> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 12)
            throw std::invalid_argument("trials csv: line " + std::to_string(lineno) + " has " +
                                        std::to_string(f.size()) + " fields, expected 12");
        TrialRecord r;
        r.config_id = f[0];
        r.N = detail::parse_int(f[1], "N");
        r.P = detail::parse_int(f[2], "P");
        r.M_true = detail::parse_int(f[3], "M_true");
        r.S = detail::parse_int(f[4], "S");
        r.method = parse_method(f[5]);
        r.lambda = detail::parse_double(f[6], "lambda");
        if (!f[7].empty())
            r.nu = detail::parse_double(f[7], "nu");
        r.m = detail::parse_int(f[8], "m");
        r.trial = static_cast<int>(detail::parse_int(f[9], "trial"));
        r.error = detail::parse_double(f[10], "error");
        r.improvement_pct = detail::parse_double(f[11], "improvement_pct");
        out.push_back(std::move(r));
    }
    return out;
}

struct SummaryRow {
    std::string config_id;
    Index N = 0, P = 0, M_true = 0, S = 0;
    Method method = Method::SvdBaseline;
    double mean = 0.0;
    /// Sample standard deviation; 0 for a single replication.
    double std = 0.0;
    int n_trials = 0;
};

/// Mean and sample standard deviation of the per-replication improvements,
/// per (config, method).
inline std::vector<SummaryRow> summarize(const std::vector<TrialRecord> &records) {
    if (records.empty())
        throw std::invalid_argument("summarize: no records");
    std::map<std::pair<std::string, Method>, std::vector<const TrialRecord *>> groups;
    for (const TrialRecord &r : records)
        groups[{r.config_id, r.method}].push_back(&r);
    std::vector<SummaryRow> out;
    for (const auto &[key, recs] : groups) {
        SummaryRow s;
        s.config_id = key.first;
        s.method = key.second;
        s.N = recs.front()->N;
        s.P = recs.front()->P;
        s.M_true = recs.front()->M_true;
        s.S = recs.front()->S;
        s.n_trials = static_cast<int>(recs.size());
        double sum = 0.0;
        for (const TrialRecord *r : recs)
            sum += r->improvement_pct;
        s.mean = sum / s.n_trials;
        if (s.n_trials > 1) {
            double ss = 0.0;
            for (const TrialRecord *r : recs)
                ss += (r->improvement_pct - s.mean) * (r->improvement_pct - s.mean);
            s.std = std::sqrt(ss / (s.n_trials - 1));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_summary_csv(std::ostream &os, const std::vector<SummaryRow> &rows) {
    os << "config_id,method,mean_improvement,std_improvement,n_trials\n";
    for (const SummaryRow &s : rows)
        os << s.config_id << ',' << to_string(s.method) << ',' << detail::format_double(s.mean)
           << ',' << detail::format_double(s.std) << ',' << s.n_trials << '\n';
}

/// Reference-table layout: one line per (P, M, S), one column block per N
/// holding "mean ± std" for each method; '*' marks the lowest mean among the
/// non-baseline methods of a block.
inline std::string format_table(const std::vector<SummaryRow> &rows) {
    using Shape = std::tuple<Index, Index, Index>;
    std::vector<Shape> shapes;
    std::vector<Index> ns;
    std::vector<Method> methods;
    auto add = [](auto &v, const auto &x) {
        if (std::find(v.begin(), v.end(), x) == v.end())
            v.push_back(x);
    };
    for (const SummaryRow &s : rows) {
        add(shapes, Shape{s.P, s.M_true, s.S});
        add(ns, s.N);
        add(methods, s.method);
    }
    std::sort(ns.begin(), ns.end());
    std::sort(methods.begin(), methods.end());
    auto find = [&](const Shape &sh, Index n, Method m) -> const SummaryRow * {
        for (const SummaryRow &s : rows)
            if (Shape{s.P, s.M_true, s.S} == sh && s.N == n && s.method == m)
                return &s;
        return nullptr;
    };

    constexpr int width = 16;
    std::ostringstream os;
    os << std::right << std::setw(4) << "P" << std::setw(5) << "M" << std::setw(4) << "S";
    for (Index n : ns)
        for (Method m : methods)
            os << std::setw(width) << (std::string(to_string(m)) + " N=" + std::to_string(n));
    os << '\n';
    for (const Shape &sh : shapes) {
        os << std::setw(4) << std::get<0>(sh) << std::setw(5) << std::get<1>(sh) << std::setw(4)
           << std::get<2>(sh);
        for (Index n : ns) {
            const SummaryRow *best = nullptr;
            for (Method m : methods)
                if (const SummaryRow *c = find(sh, n, m);
                    c && m != Method::SvdBaseline && (!best || c->mean < best->mean))
                    best = c;
            for (Method m : methods) {
                const SummaryRow *c = find(sh, n, m);
                if (!c) {
                    os << std::setw(width) << "-";
                    continue;
                }
                char buf[48];
                std::snprintf(buf, sizeof buf, "%s%.1f +- %.1f", c == best ? "*" : "", c->mean,
                              c->std);
                os << std::setw(width) << buf;
            }
        }
        os << '\n';
    }
    return os.str();
}

} // namespace decomp
