#pragma once

// Random stable innovation models y(t) = G(z) y(t) + e(t) and their
// simulation. G is either S + F H (sparse plus rank-n factor) or dense.

#include "slnet/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace slnet {

/// Seeded generator with platform-independent uniform and normal draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, n).
    int below(int n) { return std::min(n - 1, static_cast<int>(uniform() * n)); }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Independent seed for a labelled sub-stream.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream)
    {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

enum class ModelKind { SparseLowRank, Generic };

inline std::string to_string(ModelKind k) { return k == ModelKind::SparseLowRank ? "SparseLowRank" : "Generic"; }

inline ModelKind model_kind_from_string(const std::string& s)
{
    if (s == "SparseLowRank")
        return ModelKind::SparseLowRank;
    if (s == "Generic")
        return ModelKind::Generic;
    throw std::invalid_argument("unknown model kind: " + s);
}

struct SimulationConfig {
    int T_true = 50;
    int max_order = 2;
    double pole_max = 0.8;
    double radius_cap = 0.95;
    int max_attempts = 100;
    int burn_in = 200;
    double noise_var = 1.0;     // Sigma_true = noise_var * I
    double sparse_gain = 0.6;   // l2 norm of each sparse impulse response
    double factor_gain = 0.6;   // l2 norm of each entry of H
    double generic_gain = 0.3;  // l2 norm of each entry of a generic G

    void validate() const
    {
        require(T_true >= 1, "T_true must be >= 1");
        require(max_order >= 1, "max_order must be >= 1");
        require(pole_max >= 0.0 && pole_max < 1.0, "pole_max must lie in [0, 1)");
        require(radius_cap > 0.0 && radius_cap < 1.0, "radius_cap must lie in (0, 1)");
        require(max_attempts >= 1, "max_attempts must be >= 1");
        require(burn_in >= 0, "burn_in must be >= 0");
        require(noise_var >= 0.0, "noise_var must be >= 0");
    }
};

struct GroundTruthModel {
    int p = 0;
    ModelKind kind = ModelKind::SparseLowRank;
    CoefficientTensor S_coeffs;          // p x p x T_true
    Matrix F;                            // p x n
    std::vector<Matrix> H_coeffs;        // T_true matrices, n x p
    Matrix Sigma_true;
    int T_true = 0;
    std::vector<std::pair<int, int>> support; // (i, j) of the nonnull S entries
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(F.cols()); }

    CoefficientTensor L_coeffs() const
    {
        CoefficientTensor L(p, T_true);
        if (n() > 0)
            for (int k = 0; k < T_true; ++k)
                L[k] = F * H_coeffs[k];
        return L;
    }

    /// G_k = S_k + F H_k.
    CoefficientTensor G() const { return S_coeffs + L_coeffs(); }

    void scale(double c)
    {
        for (int k = 0; k < T_true; ++k) {
            S_coeffs[k] *= c;
            if (n() > 0)
                H_coeffs[k] *= c;
        }
    }
};

/// Spectral radius of the companion matrix of y(t) = sum_k G_k y(t - k).
inline double companion_spectral_radius(const CoefficientTensor& G)
{
    const int p = G.p;
    const int T = G.T();
    if (T == 0)
        return 0.0;
    Matrix C = Matrix::Zero(Index(p) * T, Index(p) * T);
    for (int k = 0; k < T; ++k)
        C.block(0, Index(k) * p, p, p) = G[k];
    if (T > 1)
        C.bottomLeftCorner(Index(p) * (T - 1), Index(p) * (T - 1)).setIdentity();
    Eigen::EigenSolver<Matrix> es(C, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Impulse response h_1..h_T of a strictly causal rational transfer function
/// of order <= max_order with poles of modulus <= pole_max, scaled to unit
/// l2 norm.
inline Vector random_rational_response(Rng& rng, const SimulationConfig& cfg, int T)
{
    const int order = 1 + rng.below(cfg.max_order);
    double a1 = 0.0, a2 = 0.0; // denominator 1 - a1 z^-1 - a2 z^-2
    if (order == 1) {
        a1 = rng.uniform(-cfg.pole_max, cfg.pole_max);
    } else if (rng.uniform() < 0.5) {
        const double r = cfg.pole_max * std::sqrt(rng.uniform());
        const double w = rng.uniform(0.0, std::numbers::pi);
        a1 = 2.0 * r * std::cos(w);
        a2 = -r * r;
    } else {
        const double r1 = rng.uniform(-cfg.pole_max, cfg.pole_max);
        const double r2 = rng.uniform(-cfg.pole_max, cfg.pole_max);
        a1 = r1 + r2;
        a2 = -r1 * r2;
    }
    Vector b(order);
    for (int i = 0; i < order; ++i)
        b[i] = rng.normal();

    Vector h = Vector::Zero(T);
    for (int k = 0; k < T; ++k) {
        double v = k < order ? b[k] : 0.0;
        if (k >= 1)
            v += a1 * h[k - 1];
        if (k >= 2)
            v += a2 * h[k - 2];
        h[k] = v;
    }
    const double nrm = h.norm();
    if (nrm > 0.0)
        h /= nrm;
    return h;
}

namespace detail {

inline void stabilize(GroundTruthModel& m, const SimulationConfig& cfg)
{
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        if (companion_spectral_radius(m.G()) <= cfg.radius_cap)
            return;
        m.scale(0.9);
    }
    if (companion_spectral_radius(m.G()) <= cfg.radius_cap)
        return;
    throw NumericalError("model generation: could not stabilize within the attempt budget");
}

} // namespace detail

inline GroundTruthModel gen_sl_model(int p, int n, int s, std::uint64_t seed, const SimulationConfig& cfg = {})
{
    cfg.validate();
    require(p >= 1, "p must be >= 1");
    require(n >= 0 && n <= p, "n must lie in [0, p]");
    require(s >= 0 && s <= p * p, "s must lie in [0, p^2]");

    Rng rng(seed);
    GroundTruthModel m;
    m.p = p;
    m.kind = ModelKind::SparseLowRank;
    m.T_true = cfg.T_true;
    m.seed = seed;
    m.Sigma_true = cfg.noise_var * Matrix::Identity(p, p);
    m.S_coeffs = CoefficientTensor(p, cfg.T_true);

    // partial Fisher-Yates over the p^2 positions
    std::vector<int> cells(static_cast<size_t>(p * p));
    for (int c = 0; c < p * p; ++c)
        cells[static_cast<size_t>(c)] = c;
    for (int c = 0; c < s; ++c)
        std::swap(cells[static_cast<size_t>(c)], cells[static_cast<size_t>(c + rng.below(p * p - c))]);
    std::vector<int> chosen(cells.begin(), cells.begin() + s);
    std::sort(chosen.begin(), chosen.end());
    for (int c : chosen) {
        const int i = c / p, j = c % p;
        m.support.emplace_back(i, j);
        const Vector h = cfg.sparse_gain * random_rational_response(rng, cfg, cfg.T_true);
        for (int k = 0; k < cfg.T_true; ++k)
            m.S_coeffs[k](i, j) = h[k];
    }

    m.F = Matrix(p, n);
    for (int t = 0; t < n; ++t) {
        for (int i = 0; i < p; ++i)
            m.F(i, t) = rng.normal();
        m.F.col(t).normalize();
    }
    m.H_coeffs.assign(static_cast<size_t>(cfg.T_true), Matrix::Zero(n, p));
    for (int t = 0; t < n; ++t)
        for (int j = 0; j < p; ++j) {
            const Vector h = cfg.factor_gain * random_rational_response(rng, cfg, cfg.T_true);
            for (int k = 0; k < cfg.T_true; ++k)
                m.H_coeffs[static_cast<size_t>(k)](t, j) = h[k];
        }

    detail::stabilize(m, cfg);
    return m;
}

inline GroundTruthModel gen_generic_model(int p, std::uint64_t seed, const SimulationConfig& cfg = {})
{
    cfg.validate();
    require(p >= 1, "p must be >= 1");
    Rng rng(seed);
    GroundTruthModel m;
    m.p = p;
    m.kind = ModelKind::Generic;
    m.T_true = cfg.T_true;
    m.seed = seed;
    m.Sigma_true = cfg.noise_var * Matrix::Identity(p, p);
    m.S_coeffs = CoefficientTensor(p, cfg.T_true);
    m.F = Matrix(p, 0);
    m.H_coeffs.assign(static_cast<size_t>(cfg.T_true), Matrix(0, p));
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            m.support.emplace_back(i, j);
            const Vector h = cfg.generic_gain * random_rational_response(rng, cfg, cfg.T_true);
            for (int k = 0; k < cfg.T_true; ++k)
                m.S_coeffs[k](i, j) = h[k];
        }
    detail::stabilize(m, cfg);
    return m;
}

/// Innovation recursion from a zero state; the first burn_in samples are
/// dropped.
inline TimeSeries simulate(const GroundTruthModel& model, int N, std::uint64_t seed, int burn_in = 200)
{
    require(N >= 1, "N must be >= 1");
    require(burn_in >= 0, "burn_in must be >= 0");
    const int p = model.p;
    const CoefficientTensor G = model.G();
    const int T = G.T();

    Eigen::SelfAdjointEigenSolver<Matrix> es(model.Sigma_true);
    const Matrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    Rng rng(seed);
    const int total = N + burn_in;
    Matrix y = Matrix::Zero(total, p);
    Vector w(p);
    for (int t = 0; t < total; ++t) {
        for (int i = 0; i < p; ++i)
            w[i] = rng.normal();
        Vector v = root * w;
        for (int k = 1; k <= T && k <= t; ++k)
            v.noalias() += G[k - 1] * y.row(t - k).transpose();
        y.row(t) = v.transpose();
    }
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e12)
        throw NumericalError("simulation diverged");
    return TimeSeries(y.bottomRows(N));
}

} // namespace slnet
