#pragma once

// Impulse-response kernels over the truncated coefficient space.
//
// The base kernel P is a (filtered) stable-spline kernel on lags 1..T. The
// sparse kernel K_S and the two low-rank kernels K_L act on the p^2 T
// dimensional theta space, ordered (output i, input j, lag k) as in
// ThetaVector.

#include "slnet/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace slnet {

enum class KernelFamily { TC, SS2 };

inline std::string to_string(KernelFamily f) { return f == KernelFamily::TC ? "TC" : "SS2"; }

inline KernelFamily kernel_family_from_string(const std::string& s)
{
    if (s == "TC")
        return KernelFamily::TC;
    if (s == "SS2")
        return KernelFamily::SS2;
    throw std::invalid_argument("unknown kernel family: " + s);
}

/// Shape parameters of the base kernel P = F P0 F^T.
struct BaseKernelParams {
    int T = 50;
    double beta_ss = 0.8; // decay rate, (0, 1)
    double rho = 0.0;     // filter pole modulus, [0, 1)
    double omega = 0.0;   // filter pole angle, [0, pi]
    KernelFamily family = KernelFamily::TC;

    void validate() const
    {
        require(T >= 1, "kernel truncation T must be >= 1");
        require(beta_ss > 0.0 && beta_ss < 1.0, "beta_ss must lie in (0, 1)");
        require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
        require(std::isfinite(omega), "omega must be finite");
    }
};

/// Impulse response f_1..f_T of 1 / (1 - 2 rho cos(omega) z^-1 + rho^2 z^-2),
/// normalized so that f_1 = 1.
inline Vector filter_impulse_response(double rho, double omega, int T)
{
    Vector f = Vector::Zero(T);
    const double a1 = 2.0 * rho * std::cos(omega);
    const double a2 = -rho * rho;
    for (int k = 0; k < T; ++k) {
        double v = (k == 0) ? 1.0 : 0.0;
        if (k >= 1)
            v += a1 * f[k - 1];
        if (k >= 2)
            v += a2 * f[k - 2];
        f[k] = v;
    }
    return f;
}

/// Lower-triangular Toeplitz matrix with first column f.
inline Matrix lower_toeplitz(const Vector& f)
{
    const Index T = f.size();
    Matrix F = Matrix::Zero(T, T);
    for (Index c = 0; c < T; ++c)
        for (Index r = c; r < T; ++r)
            F(r, c) = f[r - c];
    return F;
}

/// Unfiltered stable-spline kernel on lags 1..T.
inline Matrix stable_spline_kernel(KernelFamily family, double beta, int T)
{
    Matrix P0(T, T);
    for (int t = 1; t <= T; ++t) {
        for (int s = 1; s <= T; ++s) {
            const int mx = std::max(t, s);
            if (family == KernelFamily::TC) {
                P0(t - 1, s - 1) = std::pow(beta, mx);
            } else {
                P0(t - 1, s - 1) = std::pow(beta, t + s + mx) / 2.0 - std::pow(beta, 3 * mx) / 6.0;
            }
        }
    }
    return P0;
}

inline Matrix symmetrized(const Matrix& K) { return 0.5 * (K + K.transpose()); }

/// P = F P0 F^T (T x T).
inline Matrix build_base_kernel(const BaseKernelParams& params)
{
    params.validate();
    const Matrix P0 = stable_spline_kernel(params.family, params.beta_ss, params.T);
    if (params.rho == 0.0)
        return P0;
    const Matrix F = lower_toeplitz(filter_impulse_response(params.rho, params.omega, params.T));
    return symmetrized(F * P0 * F.transpose());
}

/// Low-rank prior structure Lambda = alpha (I - U U^T) + U diag(beta) U^T.
struct LambdaStructure {
    int p = 0;
    double alpha = 0.0;
    Vector beta; // n entries
    Matrix U;    // p x n, orthonormal columns

    LambdaStructure() = default;
    LambdaStructure(int p_, double a, Vector b, Matrix u)
        : p(p_), alpha(a), beta(std::move(b)), U(std::move(u))
    {
    }

    int n() const { return static_cast<int>(beta.size()); }

    void validate() const
    {
        require(p >= 1, "Lambda dimension must be >= 1");
        require(U.rows() == p && U.cols() == beta.size(), "U must be p x n with n = len(beta)");
        require(n() <= p, "rank n must not exceed p");
        require(alpha >= 0.0, "alpha must be nonnegative");
        require((beta.array() >= 0.0).all(), "beta entries must be nonnegative");
        if (n() > 0) {
            const Matrix G = U.transpose() * U;
            require((G - Matrix::Identity(n(), n())).cwiseAbs().maxCoeff() <= 1e-10,
                    "U must have orthonormal columns");
        }
    }

    Matrix assemble() const
    {
        validate();
        Matrix L = alpha * Matrix::Identity(p, p);
        if (n() > 0) {
            L -= alpha * U * U.transpose();
            L += U * beta.asDiagonal() * U.transpose();
        }
        return symmetrized(L);
    }
};

/// diag(gamma) (x) P. Block (i, j) of theta_s has covariance gamma[i*p + j] P.
inline Matrix build_KS(const Vector& gamma, const Matrix& P)
{
    require((gamma.array() >= 0.0).all(), "gamma entries must be nonnegative");
    const Index q = gamma.size();
    const Index T = P.rows();
    Matrix K = Matrix::Zero(q * T, q * T);
    for (Index a = 0; a < q; ++a)
        K.block(a * T, a * T, T, T) = gamma[a] * P;
    return symmetrized(K);
}

/// First maximum-entropy low-rank kernel, in the form that stays valid for a
/// singular Lambda:
///   K_L = l^-1 (I (x) P) - l^-2 (I (x) P) (l^-1 I (x) P + Lambda (x) I_pT)^-1 (I (x) P).
inline Matrix build_KL_type1(double lambda, const Matrix& Lambda, const Matrix& P)
{
    require(lambda > 0.0, "lambda must be positive");
    require(Lambda.rows() == Lambda.cols(), "Lambda must be square");
    require(P.rows() == P.cols(), "P must be square");
    const Index p = Lambda.rows();
    const Index T = P.rows();
    const Index m = p * p * T;

    // I_{p^2} (x) P and Lambda (x) I_{pT}
    Matrix IP = Matrix::Zero(m, m);
    for (Index a = 0; a < p * p; ++a)
        IP.block(a * T, a * T, T, T) = P;
    Matrix LI = Matrix::Zero(m, m);
    const Index pT = p * T;
    for (Index i = 0; i < p; ++i)
        for (Index ii = 0; ii < p; ++ii)
            if (Lambda(i, ii) != 0.0)
                LI.block(i * pT, ii * pT, pT, pT).diagonal().setConstant(Lambda(i, ii));

    const Matrix mid = IP / lambda + LI;
    Eigen::LDLT<Matrix> ldlt(mid);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("type-I kernel: inner factorization failed");
    const Matrix K = IP / lambda - (IP * ldlt.solve(IP)) / (lambda * lambda);
    return symmetrized(K);
}

inline Matrix build_KL_type1(double lambda, const LambdaStructure& Lambda, const Matrix& P)
{
    return build_KL_type1(lambda, Lambda.assemble(), P);
}

/// Second maximum-entropy low-rank kernel Lambda (x) I_p (x) P.
inline Matrix build_KL_type2(const Matrix& Lambda, const Matrix& P)
{
    require(Lambda.rows() == Lambda.cols(), "Lambda must be square");
    require(P.rows() == P.cols(), "P must be square");
    const Index p = Lambda.rows();
    const Index T = P.rows();
    const Index m = p * p * T;
    Matrix K = Matrix::Zero(m, m);
    for (Index i = 0; i < p; ++i)
        for (Index ii = 0; ii < p; ++ii) {
            if (Lambda(i, ii) == 0.0)
                continue;
            for (Index j = 0; j < p; ++j)
                K.block((i * p + j) * T, (ii * p + j) * T, T, T) = Lambda(i, ii) * P;
        }
    return symmetrized(K);
}

inline Matrix build_KL_type2(const LambdaStructure& Lambda, const Matrix& P)
{
    return build_KL_type2(Lambda.assemble(), P);
}

/// Symmetric within 1e-12 relative and min eigenvalue >= -tol * max eigenvalue.
inline bool is_symmetric_psd(const Matrix& K, double tol = 1e-8)
{
    if (K.rows() != K.cols())
        return false;
    if (K.size() == 0)
        return true;
    const double scale = std::max(K.cwiseAbs().maxCoeff(), 1e-300);
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(K, Eigen::EigenvaluesOnly);
    const double mx = es.eigenvalues().maxCoeff();
    const double mn = es.eigenvalues().minCoeff();
    return mn >= -tol * std::max(mx, 0.0) - 1e-300;
}

} // namespace slnet
