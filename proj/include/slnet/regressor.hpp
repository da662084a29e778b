#pragma once

// Stacked outputs y+, block-Toeplitz regressors Phi = I_p (x) [phi_1 ... phi_p]
// and the theta <-> coefficient-tensor layouts.
//
// Samples before t = 1 are taken as zero (zero initial conditions).

#include "slnet/types.hpp"

namespace slnet {

/// Channel-major stacking: channel 1 over time, then channel 2, ...
inline Vector stack_outputs(const TimeSeries& Y)
{
    const Index N = Y.samples();
    const Index p = Y.channels();
    Vector y(p * N);
    for (Index i = 0; i < p; ++i)
        y.segment(i * N, N) = Y.values.col(i);
    return y;
}

/// [phi_1 ... phi_p] (N x pT): entry (t, j*T + h) = y_j(t - h - 1), zero when
/// the time index falls before the first sample.
inline Matrix build_regressor_block(const TimeSeries& Y, int T)
{
    require(T >= 1, "lag truncation T must be >= 1");
    const Index N = Y.samples();
    const Index p = Y.channels();
    Matrix B = Matrix::Zero(N, p * T);
    for (Index j = 0; j < p; ++j)
        for (Index h = 0; h < T; ++h)
            for (Index t = h + 1; t < N; ++t)
                B(t, j * T + h) = Y.values(t - h - 1, j);
    return B;
}

/// Expand the per-output block to Phi = I_p (x) block (pN x p^2 T).
inline Matrix kron_identity(Index p, const Matrix& block)
{
    Matrix Phi = Matrix::Zero(p * block.rows(), p * block.cols());
    for (Index i = 0; i < p; ++i)
        Phi.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) = block;
    return Phi;
}

inline Matrix build_regressor(const TimeSeries& Y, int T)
{
    return kron_identity(Y.channels(), build_regressor_block(Y, T));
}

/// Linear model y+ = Phi theta + e+, e+ ~ N(0, Sigma (x) I_N).
///
/// Phi is stored through its per-output block since Phi = I_p (x) block.
struct RegressionProblem {
    int p = 0;
    int N = 0;
    int T = 0;
    Matrix phi_block; // N x pT
    Vector yplus;     // pN
    Matrix sigma;     // p x p

    Matrix phi() const { return kron_identity(p, phi_block); }

    /// Outputs as an N x p matrix (inverse of the channel-major stacking).
    Matrix outputs() const { return Eigen::Map<const Matrix>(yplus.data(), N, p); }

    void validate() const
    {
        require(phi_block.rows() == N && phi_block.cols() == Index(p) * T, "regressor block shape");
        require(yplus.size() == Index(p) * N, "y+ length must equal p*N");
        require(sigma.rows() == p && sigma.cols() == p, "Sigma must be p x p");
        require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, sigma.cwiseAbs().maxCoeff()),
                "Sigma must be symmetric");
        Eigen::LLT<Matrix> llt(sigma);
        require(llt.info() == Eigen::Success, "Sigma must be positive definite");
    }
};

/// Build the regression problem. With drop_initial the first T samples are
/// used only as regressors (no zero-padded rows).
inline RegressionProblem make_problem(const TimeSeries& Y, int T, const Matrix& sigma, bool drop_initial = false)
{
    Y.validate();
    RegressionProblem prob;
    prob.p = static_cast<int>(Y.channels());
    prob.T = T;
    prob.sigma = sigma;
    Matrix block = build_regressor_block(Y, T);
    Vector y = stack_outputs(Y);
    if (drop_initial) {
        const Index N = Y.samples();
        require(N > T, "drop_initial needs more than T samples");
        const Index keep = N - T;
        Matrix b2 = block.bottomRows(keep);
        Vector y2(prob.p * keep);
        for (int i = 0; i < prob.p; ++i)
            y2.segment(i * keep, keep) = y.segment(i * N + T, keep);
        block = std::move(b2);
        y = std::move(y2);
    }
    prob.N = static_cast<int>(block.rows());
    prob.phi_block = std::move(block);
    prob.yplus = std::move(y);
    prob.validate();
    return prob;
}

inline CoefficientTensor theta_to_tensor(const ThetaVector& th)
{
    require(th.data.size() == Index(th.p) * th.p * th.T, "theta length mismatch");
    CoefficientTensor ct(th.p, th.T);
    for (int i = 0; i < th.p; ++i)
        for (int j = 0; j < th.p; ++j)
            for (int k = 0; k < th.T; ++k)
                ct[k](i, j) = th(i, j, k);
    return ct;
}

inline ThetaVector tensor_to_theta(const CoefficientTensor& ct)
{
    ThetaVector th(ct.p, ct.T());
    for (int k = 0; k < ct.T(); ++k) {
        require(ct[k].rows() == ct.p && ct[k].cols() == ct.p, "coefficient matrix must be p x p");
        for (int i = 0; i < ct.p; ++i)
            for (int j = 0; j < ct.p; ++j)
                th(i, j, k) = ct[k](i, j);
    }
    return th;
}

/// A = [G_1 G_2 ... G_T] (p x pT).
inline Matrix stacked_coefficients(const CoefficientTensor& ct)
{
    Matrix A(ct.p, Index(ct.p) * ct.T());
    for (int k = 0; k < ct.T(); ++k)
        A.middleCols(Index(k) * ct.p, ct.p) = ct[k];
    return A;
}

} // namespace slnet
