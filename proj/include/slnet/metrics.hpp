#pragma once

// Relative complexity, one-step coefficient of determination and average
// impulse-response fit.

#include "slnet/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace slnet {

/// Limit of (#parameters) / (m^2 T) as T grows: (s + m n) / m^2.
inline double complexity(int s, int n, int m)
{
    require(m > 0, "output dimension must be positive");
    require(s >= 0 && n >= 0, "support size and rank must be nonnegative");
    return (static_cast<double>(s) + static_cast<double>(m) * n) / (static_cast<double>(m) * m);
}

/// The lag count does not enter the limit; kept for call sites that carry it.
inline double complexity(int s, int n, int m, int /*T*/) { return complexity(s, n, m); }

inline double cod1(const TimeSeries& y_test, const TimeSeries& y_pred)
{
    require(y_test.samples() == y_pred.samples() && y_test.channels() == y_pred.channels(),
            "test and predicted series must have matching shapes");
    const Matrix centered = y_test.values.rowwise() - y_test.values.colwise().mean();
    const double den = centered.squaredNorm();
    if (!(den > 0.0))
        throw std::domain_error("COD1: test set has zero variance");
    return 1.0 - (y_test.values - y_pred.values).squaredNorm() / den;
}

inline double airf(const CoefficientTensor& G_true, const CoefficientTensor& G_hat)
{
    require(G_true.p == G_hat.p && G_true.T() == G_hat.T(), "impulse responses must have matching shapes");
    const int T = G_true.T();
    require(T >= 1, "impulse responses must have at least one lag");
    Matrix mean = Matrix::Zero(G_true.p, G_true.p);
    for (int k = 0; k < T; ++k)
        mean += G_true[k];
    mean /= static_cast<double>(T);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < T; ++k) {
        num += (G_true[k] - G_hat[k]).squaredNorm();
        den += (G_true[k] - mean).squaredNorm();
    }
    if (!(den > 0.0))
        throw std::domain_error("AIRF: true impulse response is constant over lags");
    return 100.0 * (1.0 - std::sqrt(num / den));
}

struct EvalReport {
    std::string estimator;
    int run = 0;
    std::uint64_t seed = 0;
    int n = 0;
    int support = 0;
    double complexity_C = 0.0;
    double cod1 = 0.0;
    double airf = 0.0;
};

} // namespace slnet
