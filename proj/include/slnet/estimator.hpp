#pragma once

#include "slnet/regressor.hpp"

#include <algorithm>
#include <cmath>

namespace slnet {

struct PosteriorEstimate {
    ThetaVector theta_s;
    ThetaVector theta_l;
    Vector dual_c;                 // (Phi K Phi^T + Sigma (x) I)^-1 y+
    double nll_at_solution = 0.0;  // negative log marginal likelihood, constant dropped

    ThetaVector theta() const { return ThetaVector(theta_s.p, theta_s.T, theta_s.data + theta_l.data); }
    CoefficientTensor sparse_part() const { return theta_to_tensor(theta_s); }
    CoefficientTensor low_rank_part() const { return theta_to_tensor(theta_l); }
    CoefficientTensor predictor() const { return theta_to_tensor(theta()); }
};

/// Sigma (x) I_N as a dense pN x pN matrix.
inline Matrix noise_covariance(const Matrix& sigma, Index N)
{
    const Index p = sigma.rows();
    Matrix W = Matrix::Zero(p * N, p * N);
    for (Index i = 0; i < p; ++i)
        for (Index ii = 0; ii < p; ++ii)
            W.block(i * N, ii * N, N, N).diagonal().setConstant(sigma(i, ii));
    return W;
}

/// Posterior means theta_s = K_S Phi^T c, theta_l = K_L Phi^T c with
/// c = V^-1 y+, V = Phi (K_S + K_L) Phi^T + Sigma (x) I_N.
inline PosteriorEstimate posterior_estimate(const RegressionProblem& prob, const Matrix& KS, const Matrix& KL)
{
    const Index m = Index(prob.p) * prob.p * prob.T;
    require(KS.rows() == m && KS.cols() == m, "K_S must be p^2 T square");
    require(KL.rows() == m && KL.cols() == m, "K_L must be p^2 T square");

    const Matrix Phi = prob.phi();
    Matrix V = Phi * (KS + KL) * Phi.transpose() + noise_covariance(prob.sigma, prob.N);
    V = 0.5 * (V + V.transpose());
    Eigen::LLT<Matrix> llt(V);
    if (llt.info() != Eigen::Success)
        throw NumericalError("posterior: V is not positive definite");

    PosteriorEstimate est;
    est.dual_c = llt.solve(prob.yplus);
    const Vector phit_c = Phi.transpose() * est.dual_c;
    est.theta_s = ThetaVector(prob.p, prob.T, KS * phit_c);
    est.theta_l = ThetaVector(prob.p, prob.T, KL * phit_c);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    est.nll_at_solution = 0.5 * logdet + 0.5 * prob.yplus.dot(est.dual_c);
    return est;
}

inline int default_arx_order(Index N, Index p)
{
    return static_cast<int>(std::min<Index>(20, N / (4 * p)));
}

/// Residual covariance of a least-squares VAR(order) fit with zero initial
/// conditions (centered, normalized by N). order = 0 gives the sample
/// covariance of Y.
inline Matrix estimate_noise_cov(const TimeSeries& Y, int order)
{
    Y.validate();
    require(order >= 0, "ARX order must be nonnegative");
    const Index N = Y.samples();
    const Index p = Y.channels();
    require(N > p * order + 1, "insufficient data for the requested ARX order");

    Matrix R = Y.values;
    if (order > 0) {
        const Matrix X = build_regressor_block(Y, order);
        const Matrix B = X.colPivHouseholderQr().solve(Y.values);
        R -= X * B;
    }
    const Matrix centered = R.rowwise() - R.colwise().mean();
    Matrix S = centered.transpose() * centered / static_cast<double>(N);
    return 0.5 * (S + S.transpose());
}

/// yhat(t) = sum_{k=1}^{min(t-1, T)} G_k y(t-k).
inline TimeSeries predict_one_step(const CoefficientTensor& coeffs, const TimeSeries& Y)
{
    require(coeffs.p == Y.channels(), "coefficient dimension must match the series");
    const Index N = Y.samples();
    Matrix out = Matrix::Zero(N, coeffs.p);
    for (Index t = 0; t < N; ++t)
        for (int k = 1; k <= coeffs.T() && k <= t; ++k)
            out.row(t).noalias() += (coeffs[k - 1] * Y.values.row(t - k).transpose()).transpose();
    return TimeSeries(out, Y.names);
}

} // namespace slnet
