#pragma once

// Monte Carlo experiment driver behind the command-line tool: configuration,
// data generation, identification, evaluation and aggregation.
//
// Output layout under the output directory:
//   run_0000/model.json, id.csv, test.csv, result_<EST>.json
//   metrics.csv   one row per (run, estimator), TRUE rows included
//   summary.csv   quartiles and whiskers per (estimator, metric)

#include "slnet/io.hpp"
#include "slnet/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace slnet {

/// Invalid or inconsistent experiment configuration (exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    int p = 6;
    int N_id = 500;
    int N_test = 1000;
    int T = 50;
    int runs = 100;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds; // explicit per-run seeds; overrides seed + run
    std::vector<std::string> estimators{"SL-I", "SL-II", "L-I", "L-II", "S", "SS"};
    ModelKind kind = ModelKind::SparseLowRank;
    int s = 7;
    int n = 1;
    SimulationConfig simulation;
    SLRConfig identification;
    int workers = 1;
    std::uint64_t seed_offset = 0;
    std::string output_dir = "slnet_out";

    std::uint64_t run_seed(int run) const
    {
        const std::uint64_t base = seeds.empty() ? seed + std::uint64_t(run) : seeds[size_t(run)];
        return base + seed_offset;
    }

    std::filesystem::path run_dir(int run) const
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "run_%04d", run);
        return std::filesystem::path(output_dir) / buf;
    }

    void validate() const
    {
        auto check = [](bool c, const std::string& m) {
            if (!c)
                throw ConfigError(m);
        };
        check(p >= 1, "p must be >= 1");
        check(N_id >= 2 && N_test >= 2, "N_id and N_test must be >= 2");
        check(T >= 1, "T must be >= 1");
        check(runs >= 1, "runs must be >= 1");
        check(seeds.empty() || int(seeds.size()) == runs, "seeds must list one seed per run");
        check(!estimators.empty(), "estimators must not be empty");
        std::set<std::string> seen;
        for (const auto& e : estimators) {
            try {
                kernel_type_from_string(e);
            } catch (const std::invalid_argument&) {
                throw ConfigError("unknown estimator '" + e + "' (expected SL-I, SL-II, L-I, L-II, S or SS)");
            }
            check(seen.insert(e).second, "estimator listed twice: " + e);
        }
        check(n >= 0 && n <= p, "model.n must lie in [0, p]");
        check(s >= 0 && s <= p * p, "model.s must lie in [0, p^2]");
        check(workers >= 1, "workers must be >= 1");
        check(!output_dir.empty(), "output_dir must not be empty");
        check(identification.max_inner >= 0, "max_inner must be >= 0");
        check(identification.tol_rel >= 0.0 && identification.tol_abs >= 0.0, "tolerances must be >= 0");
        try {
            simulation.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
    }
};

namespace detail {

/// Reads fields of one JSON object and rejects keys nobody asked for.
class StrictObject {
public:
    StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j.is_object())
            throw ConfigError(where_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        used_.insert(key);
        if (!j_.contains(key))
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + " has the wrong type");
        }
    }

    const json* sub(const char* key)
    {
        used_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key()))
                throw ConfigError("unknown key '" + it.key() + "' in " + where_);
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

} // namespace detail

/// Parse a configuration document. Every key is optional; unknown keys are
/// errors.
inline ExperimentConfig parse_config(const json& j)
{
    ExperimentConfig cfg;
    detail::StrictObject top(j, "config");
    top.get("p", cfg.p);
    top.get("N_id", cfg.N_id);
    top.get("N_test", cfg.N_test);
    top.get("T", cfg.T);
    top.get("runs", cfg.runs);
    top.get("seed", cfg.seed);
    top.get("seeds", cfg.seeds);
    top.get("estimators", cfg.estimators);
    top.get("workers", cfg.workers);
    top.get("output_dir", cfg.output_dir);

    if (const json* m = top.sub("model")) {
        detail::StrictObject o(*m, "model");
        std::string kind = to_string(cfg.kind);
        o.get("kind", kind);
        try {
            cfg.kind = model_kind_from_string(kind);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        o.get("s", cfg.s);
        o.get("n", cfg.n);
        auto& sc = cfg.simulation;
        o.get("T_true", sc.T_true);
        o.get("max_order", sc.max_order);
        o.get("pole_max", sc.pole_max);
        o.get("radius_cap", sc.radius_cap);
        o.get("max_attempts", sc.max_attempts);
        o.get("burn_in", sc.burn_in);
        o.get("noise_var", sc.noise_var);
        o.get("sparse_gain", sc.sparse_gain);
        o.get("factor_gain", sc.factor_gain);
        o.get("generic_gain", sc.generic_gain);
        o.finish();
    }
    if (const json* m = top.sub("identification")) {
        detail::StrictObject o(*m, "identification");
        auto& ic = cfg.identification;
        o.get("arx_order", ic.arx_order);
        o.get("tol_rel", ic.tol_rel);
        o.get("tol_abs", ic.tol_abs);
        o.get("max_inner", ic.max_inner);
        o.get("max_rank", ic.max_rank);
        o.get("edge_threshold", ic.edge_threshold);
        o.get("max_iter", ic.optimizer.max_iter);
        o.get("rel_tol", ic.optimizer.rel_tol);
        o.get("pg_tol", ic.optimizer.pg_tol);
        std::string family = to_string(ic.tau_search.family);
        o.get("kernel_family", family);
        try {
            ic.tau_search.family = kernel_family_from_string(family);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        o.finish();
    }
    top.finish();
    cfg.identification.T = cfg.T;
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

/// Runs fn(0..count-1) on up to `workers` threads. Exceptions are collected
/// per index; the returned list is ordered by index.
inline std::vector<std::pair<int, std::string>> parallel_for(int count, int workers, const std::function<void(int)>& fn)
{
    std::atomic<int> next{0};
    std::mutex mu;
    std::vector<std::pair<int, std::string>> failures;
    auto worker = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                failures.emplace_back(i, e.what());
            }
        }
    };
    const int nt = std::max(1, std::min(workers, count));
    std::vector<std::thread> threads;
    for (int t = 1; t < nt; ++t)
        threads.emplace_back(worker);
    worker();
    for (auto& t : threads)
        t.join();
    std::sort(failures.begin(), failures.end());
    return failures;
}

struct CommandStatus {
    int processed = 0;
    std::vector<std::pair<int, std::string>> failures; // (run, message)
    bool ok() const { return failures.empty(); }
};

inline void report_failures(const CommandStatus& st, const char* what, std::ostream& log)
{
    for (const auto& [run, msg] : st.failures)
        log << what << ": run " << run << " failed: " << msg << '\n';
}

/// Ground-truth model, identification and test data for every run.
inline CommandStatus cmd_simulate(const ExperimentConfig& cfg, std::ostream& log = std::cerr)
{
    CommandStatus st;
    st.failures = parallel_for(cfg.runs, cfg.workers, [&](int run) {
        const std::uint64_t seed = cfg.run_seed(run);
        SimulationConfig sc = cfg.simulation;
        const GroundTruthModel model = cfg.kind == ModelKind::SparseLowRank
                                           ? gen_sl_model(cfg.p, cfg.n, cfg.s, Rng::derive(seed, 0), sc)
                                           : gen_generic_model(cfg.p, Rng::derive(seed, 0), sc);
        const TimeSeries id = simulate(model, cfg.N_id, Rng::derive(seed, 1), sc.burn_in);
        const TimeSeries test = simulate(model, cfg.N_test, Rng::derive(seed, 2), sc.burn_in);
        const auto dir = cfg.run_dir(run);
        write_file_atomic(dir / "model.json", to_json(model).dump(1) + "\n");
        write_time_series(dir / "id.csv", id);
        write_time_series(dir / "test.csv", test);
    });
    st.processed = cfg.runs;
    report_failures(st, "simulate", log);
    return st;
}

/// Every configured estimator on every run's identification data. Estimators
/// of one run share the noise covariance, kernel shape and cached fits.
inline CommandStatus cmd_identify(const ExperimentConfig& cfg, std::ostream& log = std::cerr)
{
    CommandStatus st;
    st.failures = parallel_for(cfg.runs, cfg.workers, [&](int run) {
        const auto dir = cfg.run_dir(run);
        const TimeSeries Y = read_time_series(dir / "id.csv");
        if (Y.channels() != cfg.p)
            throw std::runtime_error("id.csv has " + std::to_string(Y.channels()) + " channels, config says p = " +
                                     std::to_string(cfg.p));
        Identifier ident(Y, cfg.identification);
        std::string errors;
        for (const auto& name : cfg.estimators) {
            try {
                const IdentResult r = ident.identify(kernel_type_from_string(name));
                json j = to_json(r, name);
                j["run"] = run;
                j["seed"] = cfg.run_seed(run);
                write_file_atomic(dir / ("result_" + name + ".json"), j.dump(1) + "\n");
            } catch (const std::exception& e) {
                errors += (errors.empty() ? "" : "; ") + name + ": " + e.what();
            }
        }
        if (!errors.empty())
            throw std::runtime_error(errors);
    });
    st.processed = cfg.runs;
    report_failures(st, "identify", log);
    return st;
}

/// Quartiles by linear interpolation between order statistics, whiskers at
/// the most extreme points within 1.5 IQR of the box.
struct BoxStats {
    int count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, whisker_lo = 0, whisker_hi = 0;
};

inline double quantile_sorted(const std::vector<double>& v, double q)
{
    const double pos = q * double(v.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

inline BoxStats box_stats(std::vector<double> v)
{
    BoxStats b;
    b.count = int(v.size());
    if (v.empty())
        return b;
    std::sort(v.begin(), v.end());
    b.min = v.front();
    b.max = v.back();
    b.q1 = quantile_sorted(v, 0.25);
    b.median = quantile_sorted(v, 0.5);
    b.q3 = quantile_sorted(v, 0.75);
    const double iqr = b.q3 - b.q1;
    b.whisker_lo = b.max;
    b.whisker_hi = b.min;
    for (double x : v) {
        if (x >= b.q1 - 1.5 * iqr)
            b.whisker_lo = std::min(b.whisker_lo, x);
        if (x <= b.q3 + 1.5 * iqr)
            b.whisker_hi = std::max(b.whisker_hi, x);
    }
    return b;
}

/// Metrics of one stored estimate against the run's ground truth.
inline EvalReport evaluate_result(const StoredResult& r, const GroundTruthModel& model, const TimeSeries& test)
{
    EvalReport rep;
    rep.estimator = r.estimator;
    const int p = model.p;
    const KernelType type = kernel_type_from_string(r.estimator);
    rep.n = r.n;
    rep.support = r.support_size;
    if (type == KernelType::Unstructured)
        rep.complexity_C = 1.0;
    else
        rep.complexity_C = complexity(r.support_size, r.effective_rank, p);
    rep.cod1 = cod1(test, predict_one_step(r.G_hat, test));
    rep.airf = airf(model.G(), r.G_hat.resized(model.T_true));
    return rep;
}

inline EvalReport evaluate_true_model(const GroundTruthModel& model, const TimeSeries& test)
{
    EvalReport rep;
    rep.estimator = "TRUE";
    rep.n = model.n();
    rep.support = int(model.support.size());
    rep.complexity_C = model.kind == ModelKind::Generic ? 1.0 : complexity(rep.support, rep.n, model.p);
    const CoefficientTensor G = model.G();
    rep.cod1 = cod1(test, predict_one_step(G, test));
    rep.airf = airf(G, G);
    return rep;
}

inline std::string metrics_csv(const std::vector<EvalReport>& rows)
{
    std::string out = "run,seed,estimator,n,support,C,COD1,AIRF\n";
    for (const auto& r : rows)
        out += std::to_string(r.run) + "," + std::to_string(r.seed) + "," + r.estimator + "," + std::to_string(r.n) + "," +
               std::to_string(r.support) + "," + format_double(r.complexity_C) + "," + format_double(r.cod1) + "," +
               format_double(r.airf) + "\n";
    return out;
}

inline std::string summary_csv(const std::vector<EvalReport>& rows, const std::vector<std::string>& order)
{
    std::string out = "estimator,metric,count,min,q1,median,q3,max,whisker_lo,whisker_hi\n";
    const std::pair<const char*, double EvalReport::*> metrics[] = {
        {"C", &EvalReport::complexity_C}, {"COD1", &EvalReport::cod1}, {"AIRF", &EvalReport::airf}};
    for (const auto& est : order)
        for (const auto& [name, field] : metrics) {
            std::vector<double> v;
            for (const auto& r : rows)
                if (r.estimator == est)
                    v.push_back(r.*field);
            if (v.empty())
                continue;
            const BoxStats b = box_stats(v);
            out += est + "," + name + "," + std::to_string(b.count);
            for (double x : {b.min, b.q1, b.median, b.q3, b.max, b.whisker_lo, b.whisker_hi})
                out += "," + format_double(x);
            out += "\n";
        }
    return out;
}

struct EvaluationOutput {
    CommandStatus status;
    std::vector<EvalReport> rows; // run-major, TRUE first, then config order
};

/// Metrics per (run, estimator) and boxplot summaries per estimator.
inline EvaluationOutput cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log = std::cerr)
{
    EvaluationOutput out;
    std::vector<std::vector<EvalReport>> per_run(size_t(cfg.runs));
    out.status.failures = parallel_for(cfg.runs, cfg.workers, [&](int run) {
        const auto dir = cfg.run_dir(run);
        const GroundTruthModel model = model_from_json(json::parse(read_file(dir / "model.json")));
        const TimeSeries test = read_time_series(dir / "test.csv");
        std::vector<EvalReport> rows;
        rows.push_back(evaluate_true_model(model, test));
        for (const auto& name : cfg.estimators) {
            const auto path = dir / ("result_" + name + ".json");
            if (!std::filesystem::exists(path))
                throw std::runtime_error("missing result file " + path.string());
            rows.push_back(evaluate_result(stored_result_from_json(json::parse(read_file(path))), model, test));
        }
        for (auto& r : rows) {
            r.run = run;
            r.seed = cfg.run_seed(run);
        }
        per_run[size_t(run)] = std::move(rows);
    });
    for (auto& rows : per_run)
        for (auto& r : rows)
            out.rows.push_back(std::move(r));
    std::vector<std::string> order{"TRUE"};
    order.insert(order.end(), cfg.estimators.begin(), cfg.estimators.end());
    const std::filesystem::path root(cfg.output_dir);
    write_file_atomic(root / "metrics.csv", metrics_csv(out.rows));
    write_file_atomic(root / "summary.csv", summary_csv(out.rows, order));
    out.status.processed = cfg.runs;
    report_failures(out.status, "evaluate", log);
    return out;
}

inline EvaluationOutput cmd_run_all(const ExperimentConfig& cfg, std::ostream& log = std::cerr)
{
    EvaluationOutput out;
    out.status = cmd_simulate(cfg, log);
    if (!out.status.ok())
        return out;
    out.status = cmd_identify(cfg, log);
    if (!out.status.ok())
        return out;
    return cmd_evaluate(cfg, log);
}

} // namespace slnet
