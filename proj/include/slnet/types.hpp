#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace slnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when a factorization that must succeed (SPD covariance, stable
/// recursion) fails numerically.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond)
        throw std::invalid_argument(what);
}

/// Multichannel time series, one sample per row.
struct TimeSeries {
    Matrix values; // N x p
    std::vector<std::string> names;

    TimeSeries() = default;
    explicit TimeSeries(Matrix v, std::vector<std::string> n = {})
        : values(std::move(v)), names(std::move(n))
    {
    }

    Index samples() const { return values.rows(); }
    Index channels() const { return values.cols(); }

    std::vector<std::string> channel_names() const
    {
        if (static_cast<Index>(names.size()) == channels())
            return names;
        std::vector<std::string> out;
        for (Index j = 0; j < channels(); ++j)
            out.push_back("y" + std::to_string(j + 1));
        return out;
    }

    void validate() const
    {
        require(samples() >= 1, "time series must contain at least one sample");
        require(channels() >= 1, "time series must contain at least one channel");
        require(values.allFinite(), "time series contains NaN or Inf");
    }
};

/// Flattened impulse-response coefficients. Entry (i, j, k) is the lag-(k+1)
/// coefficient from input j to output i, stored at ((i * p) + j) * T + k
/// (all indices zero-based).
struct ThetaVector {
    int p = 0;
    int T = 0;
    Vector data;

    ThetaVector() = default;
    ThetaVector(int p_, int T_) : p(p_), T(T_), data(Vector::Zero(Index(p_) * p_ * T_)) {}
    ThetaVector(int p_, int T_, Vector d) : p(p_), T(T_), data(std::move(d))
    {
        require(data.size() == Index(p) * p * T, "theta length must equal p*p*T");
    }

    static Index index(int p, int T, int i, int j, int k) { return (Index(i) * p + j) * T + k; }
    double& operator()(int i, int j, int k) { return data[index(p, T, i, j, k)]; }
    double operator()(int i, int j, int k) const { return data[index(p, T, i, j, k)]; }

    /// Impulse response s^[ij] (length T).
    Vector block(int i, int j) const { return data.segment(index(p, T, i, j, 0), T); }
};

/// Lag-indexed p x p coefficient matrices G_1 .. G_T.
struct CoefficientTensor {
    int p = 0;
    std::vector<Matrix> lags;

    CoefficientTensor() = default;
    CoefficientTensor(int p_, int T) : p(p_), lags(static_cast<size_t>(T), Matrix::Zero(p_, p_)) {}

    int T() const { return static_cast<int>(lags.size()); }
    Matrix& operator[](int k) { return lags[static_cast<size_t>(k)]; }
    const Matrix& operator[](int k) const { return lags[static_cast<size_t>(k)]; }

    /// Zero-extend or truncate to a new lag count.
    CoefficientTensor resized(int T_new) const
    {
        CoefficientTensor out(p, T_new);
        for (int k = 0; k < std::min(T_new, T()); ++k)
            out[k] = lags[static_cast<size_t>(k)];
        return out;
    }

    CoefficientTensor operator+(const CoefficientTensor& o) const
    {
        require(o.p == p && o.T() == T(), "coefficient tensor shape mismatch");
        CoefficientTensor out(p, T());
        for (int k = 0; k < T(); ++k)
            out[k] = lags[static_cast<size_t>(k)] + o[k];
        return out;
    }

    bool allFinite() const
    {
        for (const auto& m : lags)
            if (!m.allFinite())
                return false;
        return true;
    }
};

} // namespace slnet
