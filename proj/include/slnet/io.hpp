#pragma once

// CSV time series and JSON (de)serialization of models and identification
// results. Needs the single-header nlohmann/json (json.hpp) on the include path.

#include "slnet/simulation.hpp"
#include "slnet/slr.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace slnet {

using json = nlohmann::json;

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Write to a sibling temporary and rename, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out)
            throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- CSV -------------------------------------------------------------------

inline std::string time_series_to_csv(const TimeSeries& Y)
{
    std::string out;
    const auto names = Y.channel_names();
    for (size_t j = 0; j < names.size(); ++j)
        out += (j ? "," : "") + names[j];
    out += '\n';
    for (Index t = 0; t < Y.samples(); ++t) {
        for (Index j = 0; j < Y.channels(); ++j) {
            if (j)
                out += ',';
            out += format_double(Y.values(t, j));
        }
        out += '\n';
    }
    return out;
}

inline TimeSeries time_series_from_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("CSV: missing header");
    std::vector<std::string> names;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ','))
            names.push_back(cell);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size())
                    throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw std::runtime_error("CSV: bad number '" + cell + "' on data row " + std::to_string(rows.size() + 1));
            }
        }
        if (row.size() != names.size())
            throw std::runtime_error("CSV: row " + std::to_string(rows.size() + 1) + " has the wrong column count");
        rows.push_back(std::move(row));
    }
    Matrix V(Index(rows.size()), Index(names.size()));
    for (size_t t = 0; t < rows.size(); ++t)
        for (size_t j = 0; j < names.size(); ++j)
            V(Index(t), Index(j)) = rows[t][j];
    return TimeSeries(V, names);
}

inline void write_time_series(const std::filesystem::path& path, const TimeSeries& Y)
{
    write_file_atomic(path, time_series_to_csv(Y));
}

inline TimeSeries read_time_series(const std::filesystem::path& path) { return time_series_from_csv(read_file(path)); }

// ---- JSON helpers ----------------------------------------------------------

inline json to_json(const Matrix& M)
{
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < M.cols(); ++j)
            r.push_back(M(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, Index cols_if_empty = 0)
{
    if (!j.is_array())
        throw std::runtime_error("expected a matrix (array of rows)");
    const Index rows = Index(j.size());
    const Index cols = rows ? Index(j[0].size()) : cols_if_empty;
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (Index(j[size_t(i)].size()) != cols)
            throw std::runtime_error("ragged matrix");
        for (Index c = 0; c < cols; ++c)
            M(i, c) = j[size_t(i)][size_t(c)].get<double>();
    }
    return M;
}

inline json to_json(const Vector& v)
{
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

inline Vector vector_from_json(const json& j)
{
    Vector v(Index(j.size()));
    for (size_t i = 0; i < j.size(); ++i)
        v[Index(i)] = j[i].get<double>();
    return v;
}

inline json to_json(const CoefficientTensor& G)
{
    json lags = json::array();
    for (int k = 0; k < G.T(); ++k)
        lags.push_back(to_json(G[k]));
    return json{{"p", G.p}, {"lags", lags}};
}

inline CoefficientTensor tensor_from_json(const json& j)
{
    CoefficientTensor G;
    G.p = j.at("p").get<int>();
    for (const auto& m : j.at("lags"))
        G.lags.push_back(matrix_from_json(m, G.p));
    return G;
}

/// Non-finite values are written as null and read back as +inf.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double number_or_inf(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

// ---- models ----------------------------------------------------------------

inline json to_json(const GroundTruthModel& m)
{
    json support = json::array();
    for (auto [i, j] : m.support)
        support.push_back({i, j});
    json H = json::array();
    for (const auto& h : m.H_coeffs)
        H.push_back(to_json(h));
    return json{{"p", m.p},
                {"kind", to_string(m.kind)},
                {"seed", m.seed},
                {"T_true", m.T_true},
                {"n", m.n()},
                {"support", support},
                {"Sigma_true", to_json(m.Sigma_true)},
                {"F", to_json(m.F)},
                {"S_coeffs", to_json(m.S_coeffs)},
                {"H_coeffs", H}};
}

inline GroundTruthModel model_from_json(const json& j)
{
    GroundTruthModel m;
    m.p = j.at("p").get<int>();
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.T_true = j.at("T_true").get<int>();
    const int n = j.at("n").get<int>();
    for (const auto& s : j.at("support"))
        m.support.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
    m.Sigma_true = matrix_from_json(j.at("Sigma_true"));
    m.F = n > 0 ? matrix_from_json(j.at("F")) : Matrix(m.p, 0);
    m.S_coeffs = tensor_from_json(j.at("S_coeffs"));
    for (const auto& h : j.at("H_coeffs"))
        m.H_coeffs.push_back(n > 0 ? matrix_from_json(h) : Matrix(0, m.p));
    return m;
}

// ---- identification results ------------------------------------------------

inline json to_json(const BaseKernelParams& t)
{
    return json{{"T", t.T}, {"beta_ss", t.beta_ss}, {"rho", t.rho}, {"omega", t.omega}, {"family", to_string(t.family)}};
}

inline BaseKernelParams tau_from_json(const json& j)
{
    BaseKernelParams t;
    t.T = j.at("T").get<int>();
    t.beta_ss = j.at("beta_ss").get<double>();
    t.rho = j.at("rho").get<double>();
    t.omega = j.at("omega").get<double>();
    t.family = kernel_family_from_string(j.at("family").get<std::string>());
    return t;
}

inline json to_json(const HyperParams& hp)
{
    return json{{"kernel_type", to_string(hp.type)},
                {"gamma", to_json(hp.gamma)},
                {"lambda", hp.lambda},
                {"alpha", hp.alpha},
                {"beta", to_json(hp.beta)},
                {"U", to_json(hp.U)},
                {"scale", hp.scale},
                {"tau", to_json(hp.tau)}};
}

inline HyperParams hyperparams_from_json(const json& j, int p)
{
    HyperParams hp;
    hp.type = kernel_type_from_string(j.at("kernel_type").get<std::string>());
    hp.gamma = vector_from_json(j.at("gamma"));
    hp.lambda = j.at("lambda").get<double>();
    hp.alpha = j.at("alpha").get<double>();
    hp.beta = vector_from_json(j.at("beta"));
    hp.U = hp.beta.size() ? matrix_from_json(j.at("U")) : Matrix(p, 0);
    hp.scale = j.at("scale").get<double>();
    hp.tau = tau_from_json(j.at("tau"));
    return hp;
}

inline json to_json(const IdentResult& r, const std::string& estimator)
{
    json trace = json::array();
    for (const auto& t : r.nll_trace)
        trace.push_back({{"k", t.k}, {"n", t.n}, {"nll", finite_or_null(t.nll)}, {"accepted", t.accepted}});
    json edges = json::array();
    for (auto [j, i] : r.network.sparse_edges)
        edges.push_back({{"from", j}, {"to", i}});
    json loading = json::array();
    for (Index i = 0; i < r.network.factor_loading_support.rows(); ++i) {
        json row = json::array();
        for (Index c = 0; c < r.network.factor_loading_support.cols(); ++c)
            row.push_back(bool(r.network.factor_loading_support(i, c)));
        loading.push_back(row);
    }
    return json{{"estimator", estimator},
                {"n", r.n},
                {"effective_rank", r.effective_rank()},
                {"support_size", r.support_size()},
                {"nll", r.nll},
                {"U", to_json(r.U)},
                {"sigma", to_json(r.sigma)},
                {"hyperparameters", to_json(r.hp)},
                {"nll_trace", trace},
                {"network", {{"sparse_edges", edges}, {"n_factors", r.network.n_factors}, {"factor_loading_support", loading}}},
                {"G_hat", to_json(r.estimate.predictor())},
                {"S_hat", to_json(r.estimate.sparse_part())},
                {"L_hat", to_json(r.estimate.low_rank_part())}};
}

/// The parts of a stored result that evaluation needs.
struct StoredResult {
    std::string estimator;
    int n = 0;
    int effective_rank = 0;
    int support_size = 0;
    double nll = 0.0;
    CoefficientTensor G_hat;
};

inline StoredResult stored_result_from_json(const json& j)
{
    StoredResult r;
    r.estimator = j.at("estimator").get<std::string>();
    r.n = j.at("n").get<int>();
    r.effective_rank = j.at("effective_rank").get<int>();
    r.support_size = j.at("support_size").get<int>();
    r.nll = j.at("nll").get<double>();
    r.G_hat = tensor_from_json(j.at("G_hat"));
    return r;
}

} // namespace slnet
