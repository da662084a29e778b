// Acceptance checks. Criteria 1-5 run in-process against independent
// reference computations; 6-8 drive the command-line tool end to end.
//
// usage: acceptance --cli PATH --work DIR [--only N]

#include "slnet/experiment.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

using namespace slnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 3)
{
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

BaseKernelParams random_tau(std::mt19937_64& rng, int T)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BaseKernelParams t;
    t.T = T;
    t.beta_ss = 0.3 + 0.65 * u(rng);
    t.rho = 0.9 * u(rng);
    t.omega = std::numbers::pi * u(rng);
    t.family = u(rng) < 0.5 ? KernelFamily::TC : KernelFamily::SS2;
    return t;
}

Vector random_gamma(std::mt19937_64& rng, int q, double zero_prob)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector g(q);
    for (int i = 0; i < q; ++i)
        g[i] = u(rng) < zero_prob ? 0.0 : 0.1 + 2.0 * u(rng);
    return g;
}

// ---- 1 ---------------------------------------------------------------------

Outcome closed_form()
{
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> pd(1, 3), Nd(2, 10), Td(1, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int p = pd(rng), N = Nd(rng), T = Td(rng);
        const Matrix Yv = oracle::random_matrix(rng, N, p);
        const Matrix Sigma = oracle::random_spd(rng, p, 0.3);
        const RegressionProblem prob = make_problem(TimeSeries(Yv), T, Sigma);
        const Matrix P = build_base_kernel(random_tau(rng, T));
        const Matrix KS = build_KS(random_gamma(rng, p * p, 0.3), P);
        const int n = std::uniform_int_distribution<int>(0, p)(rng);
        const LambdaStructure L(p, u(rng) < 0.5 ? 0.0 : u(rng), oracle::random_matrix(rng, n, 1).cwiseAbs(),
                                oracle::random_orthonormal(rng, p, n));
        const Matrix KL = u(rng) < 0.5 ? build_KL_type1(0.2 + u(rng), L, P) : build_KL_type2(L, P);
        const PosteriorEstimate est = posterior_estimate(prob, KS, KL);
        const auto [ts, tl] =
            oracle::quadratic_minimizer(oracle::phi(Yv, T), oracle::stack(Yv), oracle::kron(Sigma, oracle::eye(N)), KS, KL);
        const Vector ref(ts + tl);
        worst = std::max(worst, oracle::rel_diff(est.theta().data, ref));
        if (ts.norm() > 0)
            worst = std::max(worst, oracle::rel_diff(est.theta_s.data, ts));
        if (tl.norm() > 0)
            worst = std::max(worst, oracle::rel_diff(est.theta_l.data, tl));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-8 && secs < 5.0, "max rel diff " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// ---- 2 ---------------------------------------------------------------------

Outcome kernel_equivalence()
{
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> pd(1, 3), Td(1, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int psd_fail = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int p = pd(rng), T = Td(rng);
        const int n = std::uniform_int_distribution<int>(0, p)(rng);
        const Matrix P = build_base_kernel(random_tau(rng, T));
        const LambdaStructure L(p, 0.2 + u(rng), (oracle::random_matrix(rng, n, 1).cwiseAbs().array() + 0.1).matrix(),
                                oracle::random_orthonormal(rng, p, n));
        const double lambda = 0.1 + 3.0 * u(rng);
        const Matrix K1 = build_KL_type1(lambda, L, P);
        const Matrix Lam = L.assemble();
        const Matrix inv_form =
            (lambda * oracle::kron(oracle::eye(p * p), P.inverse()) + oracle::kron(Lam.inverse(), oracle::eye(p * T)))
                .inverse();
        worst = std::max(worst, oracle::rel_diff(K1, inv_form));
        for (const Matrix& K : {P, build_KS(random_gamma(rng, p * p, 0.3), P), K1, build_KL_type2(L, P)})
            psd_fail += !is_symmetric_psd(K);
    }
    return {worst <= 1e-8 && psd_fail == 0,
            "max rel diff " + fmt(worst) + ", PSD failures " + std::to_string(psd_fail)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome structural_consequences()
{
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int zero_ok = 0, rank_ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int p = 2 + trial % 3, T = 2 + trial % 4, N = 12 + trial % 7;
        const RegressionProblem prob =
            make_problem(TimeSeries(oracle::random_matrix(rng, N, p)), T, oracle::random_spd(rng, p, 0.3));
        const Matrix P = build_base_kernel(random_tau(rng, T));
        Vector g = random_gamma(rng, p * p, 0.0);
        const int zi = int(rng() % unsigned(p)), zj = int(rng() % unsigned(p));
        g[zi * p + zj] = 0.0;
        const int n1 = 1 + int(rng() % unsigned(p));
        const LambdaStructure L1(p, u(rng), oracle::random_matrix(rng, n1, 1).cwiseAbs(), oracle::random_orthonormal(rng, p, n1));
        const Matrix KL1 = trial % 2 ? build_KL_type1(0.5 + u(rng), L1, P) : build_KL_type2(L1, P);
        const PosteriorEstimate e1 = posterior_estimate(prob, build_KS(g, P), KL1);
        zero_ok += e1.theta_s.block(zi, zj).cwiseAbs().maxCoeff() == 0.0;

        const int n = 1 + int(rng() % unsigned(p - 1));
        const LambdaStructure L2(p, 0.0, (oracle::random_matrix(rng, n, 1).cwiseAbs().array() + 0.2).matrix(),
                                 oracle::random_orthonormal(rng, p, n));
        const PosteriorEstimate e2 = posterior_estimate(prob, build_KS(random_gamma(rng, p * p, 0.3), P), build_KL_type2(L2, P));
        Eigen::JacobiSVD<Matrix> svd(stacked_coefficients(e2.low_rank_part()));
        const Vector s = svd.singularValues();
        rank_ok += s[n] <= 1e-8 * s[0];
    }
    return {zero_ok == 100 && rank_ok == 100,
            "zero blocks " + std::to_string(zero_ok) + "/100, rank " + std::to_string(rank_ok) + "/100"};
}

// ---- 4 ---------------------------------------------------------------------

Outcome evidence_gradient()
{
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(0.2, 1.5);
    const KernelType types[] = {KernelType::TypeI, KernelType::TypeII, KernelType::SparseOnly, KernelType::LowRankOnlyI,
                                KernelType::LowRankOnlyII, KernelType::Unstructured};
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        const KernelType type = types[c % 6];
        const int p = 2 + c % 2, T = 3 + c % 3, N = 15;
        const int n = has_low_rank_part(type) ? 1 + int(rng() % unsigned(p)) : 0;
        const Matrix Yv = oracle::random_matrix(rng, N, p);
        const RegressionProblem prob = make_problem(TimeSeries(Yv), T, oracle::random_spd(rng, p, 0.3));
        HyperParams hp;
        hp.type = type;
        hp.tau = random_tau(rng, T);
        hp.gamma = Vector::NullaryExpr(p * p, [&] { return u(rng); });
        hp.alpha = u(rng);
        hp.beta = Vector::NullaryExpr(n, [&] { return u(rng); });
        hp.U = oracle::random_orthonormal(rng, p, n);
        hp.lambda = u(rng);
        hp.scale = u(rng);
        const Evidence ev(prob, hp.tau);
        const ParamLayout lay(hp, p);
        const Vector x = lay.pack(hp);
        const Vector g = ev.evaluate(hp).grad;
        const Index i = Index(rng() % std::uint64_t(x.size()));
        // five-point stencil
        const double h = 1e-3 * std::abs(x[i]);
        auto f = [&](double d) {
            Vector xd = x;
            xd[i] += d;
            return ev.nll(lay.unpack(hp, xd));
        };
        const double fd = (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h);
        worst = std::max(worst, std::abs(g[i] - fd) / std::max(std::abs(fd), 1e-6));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-4 && secs < 30.0, "max rel diff " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// ---- 5 ---------------------------------------------------------------------

Outcome metric_values()
{
    bool ok = complexity(7, 1, 6, 50) == 13.0 / 36.0;
    const TimeSeries y(Matrix((Matrix(2, 1) << 1, 3).finished()));
    ok = ok && cod1(y, y) == 1.0 && cod1(y, TimeSeries(Matrix::Constant(2, 1, 2.0))) == 0.0 &&
         cod1(y, TimeSeries(Matrix::Ones(2, 1))) == -1.0;
    CoefficientTensor G(1, 2), Z(1, 2);
    G[0](0, 0) = 1.0;
    ok = ok && std::abs(airf(G, Z) - 100.0 * (1.0 - std::sqrt(2.0))) < 1e-12 && airf(G, G) == 100.0;
    const GroundTruthModel m = gen_sl_model(4, 1, 4, 5);
    const EvalReport r = evaluate_true_model(m, simulate(m, 200, 6));
    ok = ok && r.airf == 100.0;
    return {ok, "C = 13/36, COD1 = {1, 0, -1}, AIRF = {" + fmt(airf(G, Z), 6) + ", 100}, TRUE AIRF = " + fmt(r.airf)};
}

// ---- CLI-driven ------------------------------------------------------------

struct Cli {
    std::string exe;
    fs::path work;

    int run(const std::string& sub, const fs::path& config, const fs::path& out) const
    {
        const std::string cmd = "\"" + exe + "\" " + sub + " --config \"" + config.string() + "\" --out \"" + out.string() +
                                "\" --workers 1 2>>\"" + (work / "cli_stderr.log").string() + "\"";
        const int rc = std::system(cmd.c_str());
        return rc;
    }

    fs::path write_config(const std::string& name, const json& j) const
    {
        const fs::path path = work / (name + ".json");
        write_file_atomic(path, j.dump(2) + "\n");
        return path;
    }
};

json experiment1(int runs, std::uint64_t seed, int n, const std::vector<std::string>& estimators)
{
    return json{{"p", 4},       {"N_id", 300},   {"N_test", 1000},         {"T", 30},
                {"runs", runs}, {"seed", seed},  {"estimators", estimators}, {"model", {{"kind", "SparseLowRank"}, {"s", 4}, {"n", n}}}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ','))
            cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

double median(std::vector<double> v) { return box_stats(std::move(v)).median; }

Outcome rank_selection(const Cli& cli)
{
    const auto t0 = Clock::now();
    int correct[2] = {0, 0};
    for (int n : {1, 0}) {
        const fs::path out = cli.work / ("c6_n" + std::to_string(n));
        fs::remove_all(out);
        const int rc = cli.run("run-all", cli.write_config("c6_n" + std::to_string(n), experiment1(10, 600 + 100 * n, n, {"SL-II"})), out);
        if (rc != 0)
            return {false, "run-all exited with " + std::to_string(rc)};
        for (int run = 0; run < 10; ++run) {
            char dir[32];
            std::snprintf(dir, sizeof dir, "run_%04d", run);
            const json r = json::parse(read_file(out / dir / "result_SL-II.json"));
            correct[n] += r.at("n").get<int>() == n;
        }
    }
    const double secs = seconds_since(t0);
    return {correct[1] >= 7 && correct[0] >= 7 && secs < 600.0,
            "n = 1 selected " + std::to_string(correct[1]) + "/10, n = 0 selected " + std::to_string(correct[0]) +
                "/10, " + fmt(secs) + " s"};
}

Outcome qualitative_ordering(const Cli& cli)
{
    const auto t0 = Clock::now();
    const fs::path out = cli.work / "c7";
    fs::remove_all(out);
    const int rc = cli.run("run-all", cli.write_config("c7", experiment1(20, 700, 1, {"SL-II", "S", "SS"})), out);
    if (rc != 0)
        return {false, "run-all exited with " + std::to_string(rc)};
    std::map<std::string, std::vector<double>> airf_by, c_by;
    const auto rows = read_csv(out / "metrics.csv");
    for (size_t r = 1; r < rows.size(); ++r) {
        airf_by[rows[r][2]].push_back(std::stod(rows[r][7]));
        c_by[rows[r][2]].push_back(std::stod(rows[r][5]));
    }
    const double a_sl = median(airf_by["SL-II"]), a_s = median(airf_by["S"]), a_ss = median(airf_by["SS"]);
    const double c_sl = median(c_by["SL-II"]);
    const double secs = seconds_since(t0);
    return {a_sl > a_s && a_sl > a_ss && c_sl < 1.0 && secs < 1800.0,
            "median AIRF SL-II " + fmt(a_sl) + ", S " + fmt(a_s) + ", SS " + fmt(a_ss) + "; median C SL-II " + fmt(c_sl) +
                ", " + fmt(secs) + " s"};
}

Outcome determinism(const Cli& cli)
{
    json j = {{"p", 3},  {"N_id", 150}, {"N_test", 300}, {"T", 12}, {"runs", 3}, {"seed", 800},
              {"model", {{"kind", "SparseLowRank"}, {"s", 3}, {"n", 1}}}};
    const fs::path config = cli.write_config("c8", j);
    std::string csv[2];
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path out = cli.work / ("c8_" + std::to_string(rep));
        fs::remove_all(out);
        if (const int rc = cli.run("run-all", config, out); rc != 0)
            return {false, "run-all exited with " + std::to_string(rc)};
        csv[rep] = read_file(out / "metrics.csv") + read_file(out / "summary.csv");
    }
    return {csv[0] == csv[1] && !csv[0].empty(), csv[0] == csv[1] ? "metric CSVs byte-identical" : "metric CSVs differ"};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance checks"};
    std::string cli_path, work = "acceptance_work";
    std::vector<int> only;
    app.add_option("--cli", cli_path, "path to the slnet executable")->required()->check(CLI::ExistingFile);
    app.add_option("--work", work, "scratch directory");
    app.add_option("--only", only, "run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const Cli cli{cli_path, fs::absolute(work)};
    fs::create_directories(cli.work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"closed-form posterior vs dense oracle", closed_form},
        {"type-I kernel vs inverse form, PSD", kernel_equivalence},
        {"zero-gamma blocks and low-rank structure", structural_consequences},
        {"evidence gradient vs finite differences", evidence_gradient},
        {"metric hand values", metric_values},
        {"rank selection", [&] { return rank_selection(cli); }},
        {"qualitative ordering", [&] { return qualitative_ordering(cli); }},
        {"run-all determinism", [&] { return determinism(cli); }},
    };

    int failed = 0;
    for (size_t c = 0; c < criteria.size(); ++c) {
        const int id = int(c) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end())
            continue;
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[c].first << " (" << o.detail
                  << ")" << std::endl;
    }
    return failed ? 1 : 0;
}
