#pragma once

// Negative log marginal likelihood of y+ under y+ = Phi theta + e,
// theta ~ N(0, K_S + K_L), e ~ N(0, Sigma (x) I_N):
//
//   nll = 1/2 log det V + 1/2 y+^T V^-1 y+,   V = Phi K Phi^T + Sigma (x) I_N
//
// with the 1/2 pN log(2 pi) constant dropped.
//
// Evidence evaluates it without forming V. Writing P = E diag(pi) E^T, every
// kernel built here is block diagonal over the eigen-lags k of P, with p^2 x
// p^2 blocks Q_k acting on the (output, input) pairs. With K = R R^T,
//
//   nll = 1/2 [N log det Sigma + log det(I + R^T A R) + y^T W y - z^T (I + R^T A R)^-1 z]
//
// where W = Sigma^-1 (x) I_N, A = Phi^T W Phi = Sigma^-1 (x) Phi_0^T Phi_0 and
// z = R^T Phi^T W y, all rotated into the eigen-lag basis. The cost is
// O((p^2 T)^3) per evaluation and independent of N.

#include "slnet/estimator.hpp"
#include "slnet/kernels.hpp"
#include "slnet/optimizer.hpp"

#include <boost/math/tools/minima.hpp>

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

namespace slnet {

/// Prior families; the estimator names are the ones used on the command line.
enum class KernelType { TypeI, TypeII, SparseOnly, LowRankOnlyI, LowRankOnlyII, Unstructured };

inline std::string to_string(KernelType t)
{
    switch (t) {
    case KernelType::TypeI: return "SL-I";
    case KernelType::TypeII: return "SL-II";
    case KernelType::SparseOnly: return "S";
    case KernelType::LowRankOnlyI: return "L-I";
    case KernelType::LowRankOnlyII: return "L-II";
    case KernelType::Unstructured: return "SS";
    }
    return "?";
}

inline KernelType kernel_type_from_string(const std::string& s)
{
    for (auto t : {KernelType::TypeI, KernelType::TypeII, KernelType::SparseOnly, KernelType::LowRankOnlyI,
                   KernelType::LowRankOnlyII, KernelType::Unstructured})
        if (to_string(t) == s)
            return t;
    throw std::invalid_argument("unknown estimator: " + s);
}

inline bool has_sparse_part(KernelType t)
{
    return t == KernelType::TypeI || t == KernelType::TypeII || t == KernelType::SparseOnly;
}
inline bool has_low_rank_part(KernelType t)
{
    return t == KernelType::TypeI || t == KernelType::TypeII || t == KernelType::LowRankOnlyI ||
           t == KernelType::LowRankOnlyII;
}
inline bool uses_type1(KernelType t) { return t == KernelType::TypeI || t == KernelType::LowRankOnlyI; }

struct HyperParams {
    KernelType type = KernelType::TypeII;
    Vector gamma;        // p^2 sparse scales (sparse types)
    double lambda = 1.0; // type-I trade-off
    double alpha = 0.0;  // scale off the low-rank subspace
    Vector beta;         // n scales along the columns of U
    Matrix U;            // p x n, orthonormal columns
    double scale = 1.0;  // unstructured kernel scale
    BaseKernelParams tau;

    int n() const { return static_cast<int>(beta.size()); }

    LambdaStructure lambda_structure(int p) const
    {
        Matrix u = U.size() ? U : Matrix(p, 0);
        return LambdaStructure(p, alpha, beta, u);
    }

    void validate(int p) const
    {
        if (has_sparse_part(type)) {
            require(gamma.size() == Index(p) * p, "gamma must have p^2 entries");
            require((gamma.array() >= 0.0).all(), "gamma entries must be nonnegative");
        }
        if (has_low_rank_part(type)) {
            require(U.rows() == p || n() == 0, "U must have p rows");
            lambda_structure(p).validate();
        }
        if (uses_type1(type))
            require(lambda > 0.0, "lambda must be positive");
        if (type == KernelType::Unstructured)
            require(scale >= 0.0, "scale must be nonnegative");
    }
};

/// Materialized K_S and K_L for a hyperparameter set.
inline std::pair<Matrix, Matrix> kernel_matrices(const HyperParams& hp, const Matrix& P, int p)
{
    const Index m = Index(p) * p * P.rows();
    Matrix KS = Matrix::Zero(m, m);
    Matrix KL = Matrix::Zero(m, m);
    if (has_sparse_part(hp.type))
        KS = build_KS(hp.gamma, P);
    if (hp.type == KernelType::Unstructured)
        KS = build_KS(Vector::Constant(Index(p) * p, hp.scale), P);
    if (has_low_rank_part(hp.type)) {
        const Matrix Lambda = hp.lambda_structure(p).assemble();
        KL = uses_type1(hp.type) ? build_KL_type1(hp.lambda, Lambda, P) : build_KL_type2(Lambda, P);
    }
    return {KS, KL};
}

/// Layout of the free hyperparameters packed into one vector:
/// [gamma..., alpha, beta..., lambda, scale], absent groups skipped.
struct ParamLayout {
    int n_gamma = 0;
    bool alpha = false;
    int n_beta = 0;
    bool lambda = false;
    bool scale = false;

    ParamLayout(const HyperParams& hp, int p)
    {
        if (has_sparse_part(hp.type))
            n_gamma = p * p;
        if (has_low_rank_part(hp.type)) {
            alpha = hp.n() < p;
            n_beta = hp.n();
            lambda = uses_type1(hp.type);
        }
        scale = hp.type == KernelType::Unstructured;
    }

    int size() const { return n_gamma + int(alpha) + n_beta + int(lambda) + int(scale); }
    int alpha_index() const { return n_gamma; }
    int beta_index() const { return n_gamma + int(alpha); }
    int lambda_index() const { return beta_index() + n_beta; }
    int scale_index() const { return lambda_index() + int(lambda); }

    Vector pack(const HyperParams& hp) const
    {
        Vector x(size());
        if (n_gamma)
            x.head(n_gamma) = hp.gamma;
        if (alpha)
            x[alpha_index()] = hp.alpha;
        if (n_beta)
            x.segment(beta_index(), n_beta) = hp.beta;
        if (lambda)
            x[lambda_index()] = hp.lambda;
        if (scale)
            x[scale_index()] = hp.scale;
        return x;
    }

    HyperParams unpack(const HyperParams& templ, const Vector& x) const
    {
        HyperParams hp = templ;
        if (n_gamma)
            hp.gamma = x.head(n_gamma);
        if (alpha)
            hp.alpha = x[alpha_index()];
        if (n_beta)
            hp.beta = x.segment(beta_index(), n_beta);
        if (lambda)
            hp.lambda = x[lambda_index()];
        if (scale)
            hp.scale = x[scale_index()];
        return hp;
    }

    /// Default box: variances >= 0, lambda >= 1e-8, everything <= 1e8.
    std::pair<Vector, Vector> default_bounds() const
    {
        Vector lo = Vector::Zero(size());
        Vector hi = Vector::Constant(size(), 1e8);
        if (lambda)
            lo[lambda_index()] = 1e-8;
        return {lo, hi};
    }
};

struct EvidenceValue {
    double nll = 0.0;
    Vector grad; // over the ParamLayout of the evaluated HyperParams
};

class Evidence {
public:
    Evidence(const RegressionProblem& prob, const BaseKernelParams& tau) : prob_(prob), tau_(tau)
    {
        prob.validate();
        require(tau.T == prob.T, "kernel truncation must match the regressor truncation");
        p_ = prob.p;
        T_ = prob.T;
        q2_ = p_ * p_;
        m_ = Index(q2_) * T_;

        P_ = build_base_kernel(tau);
        Eigen::SelfAdjointEigenSolver<Matrix> es(P_);
        E_ = es.eigenvectors();
        pi_ = es.eigenvalues().cwiseMax(0.0);

        Eigen::LLT<Matrix> sl(prob.sigma);
        if (sl.info() != Eigen::Success)
            throw NumericalError("Sigma is not positive definite");
        sigma_inv_ = sl.solve(Matrix::Identity(p_, p_));
        sigma_inv_ = 0.5 * (sigma_inv_ + sigma_inv_.transpose());
        const double logdet_sigma = 2.0 * Matrix(sl.matrixL()).diagonal().array().log().sum();

        const Matrix Y = prob.outputs();
        const Matrix G0 = prob.phi_block.transpose() * prob.phi_block;
        const Matrix C0 = prob.phi_block.transpose() * Y;

        // rotate lag indices into the eigenbasis of P
        Matrix G(p_ * T_, p_ * T_);
        for (int j = 0; j < p_; ++j)
            for (int jj = 0; jj < p_; ++jj)
                G.block(j * T_, jj * T_, T_, T_) = E_.transpose() * G0.block(j * T_, jj * T_, T_, T_) * E_;
        Matrix C(p_ * T_, p_);
        for (int j = 0; j < p_; ++j)
            C.middleRows(j * T_, T_) = E_.transpose() * C0.middleRows(j * T_, T_);
        const Matrix CS = C * sigma_inv_;

        A_.resize(m_, m_);
        r_.resize(m_);
        for (int k = 0; k < T_; ++k)
            for (int i = 0; i < p_; ++i)
                for (int j = 0; j < p_; ++j) {
                    const Index s = spectral_index(k, i, j);
                    r_[s] = CS(j * T_ + k, i);
                    for (int kk = 0; kk < T_; ++kk)
                        for (int ii = 0; ii < p_; ++ii)
                            for (int jj = 0; jj < p_; ++jj)
                                A_(s, spectral_index(kk, ii, jj)) = sigma_inv_(i, ii) * G(j * T_ + k, jj * T_ + kk);
                }

        const double ywy = (sigma_inv_ * (Y.transpose() * Y)).trace();
        constant_ = prob.N * logdet_sigma + ywy;
    }

    int p() const { return p_; }
    int T() const { return T_; }
    const Matrix& base_kernel() const { return P_; }
    const BaseKernelParams& tau() const { return tau_; }
    const RegressionProblem& problem() const { return prob_; }

    double nll(const HyperParams& hp) const { return compute(hp, false, false).value.nll; }

    EvidenceValue evaluate(const HyperParams& hp) const { return compute(hp, true, false).value; }

    PosteriorEstimate posterior(const HyperParams& hp) const { return *compute(hp, false, true).estimate; }

private:
    struct Blocks {
        std::vector<Matrix> S; // sparse part per eigen-lag
        std::vector<Matrix> L; // low-rank part per eigen-lag
    };

    struct Output {
        EvidenceValue value;
        std::optional<PosteriorEstimate> estimate;
    };

    Index spectral_index(int k, int i, int j) const { return Index(k) * q2_ + i * p_ + j; }

    /// (X (x) I_p) on (output, input) pairs.
    Matrix kron_eye(const Matrix& X) const
    {
        Matrix out = Matrix::Zero(q2_, q2_);
        for (int i = 0; i < p_; ++i)
            for (int ii = 0; ii < p_; ++ii)
                if (X(i, ii) != 0.0)
                    for (int j = 0; j < p_; ++j)
                        out(i * p_ + j, ii * p_ + j) = X(i, ii);
        return out;
    }

    // type-I eigenvalue map g(mu) = pi mu / (pi + lambda mu) and its partials
    static double g1(double mu, double pi, double lambda)
    {
        const double den = pi + lambda * mu;
        return den > 0.0 ? pi * mu / den : 0.0;
    }
    static double g1_dmu(double mu, double pi, double lambda)
    {
        const double den = pi + lambda * mu;
        return den > 0.0 ? pi * pi / (den * den) : 0.0;
    }
    static double g1_dlambda(double mu, double pi, double lambda)
    {
        const double den = pi + lambda * mu;
        return den > 0.0 ? -pi * mu * mu / (den * den) : 0.0;
    }

    Blocks blocks(const HyperParams& hp) const
    {
        Blocks b;
        b.S.assign(T_, Matrix::Zero(q2_, q2_));
        b.L.assign(T_, Matrix::Zero(q2_, q2_));
        Matrix Sdiag = Matrix::Zero(q2_, q2_);
        if (has_sparse_part(hp.type))
            Sdiag.diagonal() = hp.gamma;
        if (hp.type == KernelType::Unstructured)
            Sdiag.diagonal().setConstant(hp.scale);

        Matrix Lambda_kron, UUk, Ck;
        std::vector<Matrix> dir_kron;
        if (has_low_rank_part(hp.type)) {
            const LambdaStructure ls = hp.lambda_structure(p_);
            if (uses_type1(hp.type)) {
                Matrix comp = Matrix::Identity(p_, p_);
                for (int t = 0; t < hp.n(); ++t) {
                    dir_kron.push_back(kron_eye(ls.U.col(t) * ls.U.col(t).transpose()));
                    comp -= ls.U.col(t) * ls.U.col(t).transpose();
                }
                Ck = kron_eye(comp);
            } else {
                Lambda_kron = kron_eye(ls.assemble());
            }
        }

        for (int k = 0; k < T_; ++k) {
            const double pk = pi_[k];
            b.S[k] = pk * Sdiag;
            if (!has_low_rank_part(hp.type))
                continue;
            if (uses_type1(hp.type)) {
                Matrix L = g1(hp.alpha, pk, hp.lambda) * Ck;
                for (int t = 0; t < hp.n(); ++t)
                    L += g1(hp.beta[t], pk, hp.lambda) * dir_kron[t];
                b.L[k] = L;
            } else {
                b.L[k] = pk * Lambda_kron;
            }
        }
        return b;
    }

    Output compute(const HyperParams& hp, bool need_grad, bool need_post) const
    {
        hp.validate(p_);
        const Blocks bl = blocks(hp);

        // K = R R^T block by block
        std::vector<Matrix> R(T_);
        for (int k = 0; k < T_; ++k) {
            const Matrix Q = bl.S[k] + bl.L[k];
            if (Q.isDiagonal(0.0)) {
                R[k] = Matrix(Q.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal());
            } else {
                Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Q + Q.transpose()));
                R[k] = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
            }
        }

        Matrix AR(m_, m_);
        for (int k = 0; k < T_; ++k)
            AR.middleCols(Index(k) * q2_, q2_).noalias() = A_.middleCols(Index(k) * q2_, q2_) * R[k];
        Matrix S(m_, m_);
        Vector z(m_);
        for (int k = 0; k < T_; ++k) {
            S.middleRows(Index(k) * q2_, q2_).noalias() = R[k].transpose() * AR.middleRows(Index(k) * q2_, q2_);
            z.segment(Index(k) * q2_, q2_).noalias() = R[k].transpose() * r_.segment(Index(k) * q2_, q2_);
        }
        S = 0.5 * (S + S.transpose());
        S.diagonal().array() += 1.0;
        Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success)
            throw NumericalError("evidence: I + R^T A R is not positive definite");

        const auto L = llt.matrixL();
        Vector w = L.solve(z);
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

        Output out;
        out.value.nll = 0.5 * (constant_ + logdet - w.squaredNorm());
        if (!std::isfinite(out.value.nll))
            throw NumericalError("evidence: non-finite negative log likelihood");
        if (!need_grad && !need_post)
            return out;

        // b = Phi^T V^-1 y in the eigen-lag basis
        const Vector h = llt.matrixU().solve(w);
        const Vector b = r_ - AR * h;

        if (need_post)
            out.estimate = posterior_from(hp, bl, b, out.value.nll);
        if (need_grad)
            out.value.grad = gradient(hp, AR, llt, b);
        return out;
    }

    PosteriorEstimate posterior_from(const HyperParams& hp, const Blocks& bl, const Vector& b, double nll) const
    {
        Matrix th_s(q2_, T_), th_l(q2_, T_); // pair x eigen-lag
        for (int k = 0; k < T_; ++k) {
            const auto bk = b.segment(Index(k) * q2_, q2_);
            th_s.col(k) = bl.S[k] * bk;
            th_l.col(k) = bl.L[k] * bk;
        }
        // back to lags: theta(pair, t) = sum_k E(t, k) theta_hat(pair, k)
        const Matrix lag_s = th_s * E_.transpose();
        const Matrix lag_l = th_l * E_.transpose();
        PosteriorEstimate est;
        est.theta_s = ThetaVector(p_, T_);
        est.theta_l = ThetaVector(p_, T_);
        for (int a = 0; a < q2_; ++a)
            for (int t = 0; t < T_; ++t) {
                est.theta_s.data[Index(a) * T_ + t] = lag_s(a, t);
                est.theta_l.data[Index(a) * T_ + t] = lag_l(a, t);
            }
        (void)hp;

        // c = (Sigma^-1 (x) I)(y - Phi theta)
        const Vector theta = est.theta_s.data + est.theta_l.data;
        const Matrix coef = Eigen::Map<const Matrix>(theta.data(), Index(p_) * T_, p_); // column i: output i
        const Matrix resid = prob_.outputs() - prob_.phi_block * coef;
        const Matrix c = resid * sigma_inv_;
        est.dual_c = Eigen::Map<const Vector>(c.data(), c.size());
        est.nll_at_solution = nll;
        return est;
    }

    Vector gradient(const HyperParams& hp, const Matrix& AR, const Eigen::LLT<Matrix>& llt, const Vector& b) const
    {
        // D_k = 1/2 (M_kk - b_k b_k^T), M = A - A R (I + B)^-1 R^T A = Phi^T V^-1 Phi
        Matrix Y = AR.transpose();
        llt.matrixL().solveInPlace(Y);
        std::vector<Matrix> D(T_);
        for (int k = 0; k < T_; ++k) {
            const Index o = Index(k) * q2_;
            const auto Yk = Y.middleCols(o, q2_);
            Matrix Mkk = A_.block(o, o, q2_, q2_);
            Mkk.noalias() -= Yk.transpose() * Yk;
            const auto bk = b.segment(o, q2_);
            D[k] = 0.5 * (Mkk - bk * bk.transpose());
        }

        const ParamLayout lay(hp, p_);
        Vector g = Vector::Zero(lay.size());
        if (lay.n_gamma)
            for (int k = 0; k < T_; ++k)
                g.head(lay.n_gamma) += pi_[k] * D[k].diagonal();
        if (lay.scale)
            for (int k = 0; k < T_; ++k)
                g[lay.scale_index()] += pi_[k] * D[k].trace();
        if (!has_low_rank_part(hp.type))
            return g;

        // Omega_k(i, i') = sum_j D_k((i, j), (i', j))
        auto omega = [&](const Matrix& Dk) {
            Matrix O = Matrix::Zero(p_, p_);
            for (int i = 0; i < p_; ++i)
                for (int ii = 0; ii < p_; ++ii)
                    for (int j = 0; j < p_; ++j)
                        O(i, ii) += Dk(i * p_ + j, ii * p_ + j);
            return O;
        };
        const Matrix U = hp.n() ? hp.U : Matrix(p_, 0);
        auto complement_trace = [&](const Matrix& O) { return O.trace() - (U.transpose() * O * U).trace(); };

        if (!uses_type1(hp.type)) {
            Matrix O = Matrix::Zero(p_, p_);
            for (int k = 0; k < T_; ++k)
                O += pi_[k] * omega(D[k]);
            if (lay.alpha)
                g[lay.alpha_index()] = complement_trace(O);
            for (int t = 0; t < lay.n_beta; ++t)
                g[lay.beta_index() + t] = U.col(t).dot(O * U.col(t));
            return g;
        }

        for (int k = 0; k < T_; ++k) {
            const Matrix O = omega(D[k]);
            const double pk = pi_[k];
            const double ct = complement_trace(O);
            if (lay.alpha)
                g[lay.alpha_index()] += g1_dmu(hp.alpha, pk, hp.lambda) * ct;
            double dl = lay.alpha ? g1_dlambda(hp.alpha, pk, hp.lambda) * ct : 0.0;
            for (int t = 0; t < lay.n_beta; ++t) {
                const double ut = U.col(t).dot(O * U.col(t));
                g[lay.beta_index() + t] += g1_dmu(hp.beta[t], pk, hp.lambda) * ut;
                dl += g1_dlambda(hp.beta[t], pk, hp.lambda) * ut;
            }
            g[lay.lambda_index()] += dl;
        }
        return g;
    }

    RegressionProblem prob_;
    BaseKernelParams tau_;
    int p_ = 0, T_ = 0, q2_ = 0;
    Index m_ = 0;
    Matrix P_, E_;
    Vector pi_;
    Matrix sigma_inv_;
    Matrix A_;
    Vector r_;
    double constant_ = 0.0;
};

inline double nll(const RegressionProblem& prob, const HyperParams& hp) { return Evidence(prob, hp.tau).nll(hp); }

inline Vector nll_grad(const RegressionProblem& prob, const HyperParams& hp)
{
    return Evidence(prob, hp.tau).evaluate(hp).grad;
}

struct OptimizeResult {
    HyperParams hp;
    double nll = 0.0;
    double initial_nll = 0.0;
    BoxResult info;
};

/// Box-constrained minimization of the nll over the free hyperparameters of
/// `init` (U and tau stay fixed).
inline OptimizeResult optimize_hyperparams(const Evidence& ev, const HyperParams& init,
                                           const std::optional<std::pair<Vector, Vector>>& bounds = std::nullopt,
                                           const BoxOptions& opt = {})
{
    const ParamLayout lay(init, ev.p());
    const auto [lo, hi] = bounds ? *bounds : lay.default_bounds();
    require(lo.size() == lay.size() && hi.size() == lay.size(), "bounds size must match the free parameters");
    const Vector x0 = lay.pack(init);
    require(((x0.array() >= lo.array()) && (x0.array() <= hi.array())).all(), "initial hyperparameters are infeasible");

    auto f = [&](const Vector& x, Vector* grad) {
        const HyperParams hp = lay.unpack(init, x);
        if (grad) {
            EvidenceValue v = ev.evaluate(hp);
            *grad = v.grad;
            return v.nll;
        }
        try {
            return ev.nll(hp);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    OptimizeResult out;
    out.info = minimize_box(f, x0, lo, hi, opt);
    out.hp = lay.unpack(init, out.info.x);
    out.nll = out.info.f;
    out.initial_nll = out.info.history.front();
    return out;
}

/// Closed-form nll of the unstructured model K = c I_{p^2} (x) P as a function
/// of the scale c. Whitening by Sigma splits the problem into p independent
/// single-output regressions sharing Phi_0, each diagonalized once.
class UnstructuredEvidence {
public:
    UnstructuredEvidence(const RegressionProblem& prob, const BaseKernelParams& tau)
    {
        prob.validate();
        const int p = prob.p;
        const int T = prob.T;
        const Matrix P = build_base_kernel(tau);
        Eigen::SelfAdjointEigenSolver<Matrix> pe(P);
        const Matrix RP = pe.eigenvectors() * pe.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

        Eigen::SelfAdjointEigenSolver<Matrix> se(prob.sigma);
        const Vector sig = se.eigenvalues();
        if (sig.minCoeff() <= 0.0)
            throw NumericalError("Sigma is not positive definite");
        const Matrix Yw = prob.outputs() * se.eigenvectors() * sig.cwiseSqrt().cwiseInverse().asDiagonal();
        prior_ = sig.cwiseInverse();

        // Phi_0 R0 with R0 = I_p (x) RP
        Matrix PR(prob.N, Index(p) * T);
        for (int j = 0; j < p; ++j)
            PR.middleCols(Index(j) * T, T) = prob.phi_block.middleCols(Index(j) * T, T) * RP;
        Eigen::SelfAdjointEigenSolver<Matrix> be(PR.transpose() * PR);
        nu_ = be.eigenvalues().cwiseMax(0.0);
        W2_ = (be.eigenvectors().transpose() * (PR.transpose() * Yw)).array().square();
        yy_ = Yw.colwise().squaredNorm().transpose();
        constant_ = prob.N * sig.array().log().sum();
    }

    double nll(double c) const
    {
        double total = constant_;
        for (Index i = 0; i < prior_.size(); ++i) {
            const double s = c * prior_[i];
            const Vector den = (1.0 + s * nu_.array()).matrix();
            total += den.array().log().sum() + yy_[i] - s * (W2_.col(i).array() / den.array()).sum();
        }
        return 0.5 * total;
    }

    /// Minimizer of nll(c) over log c in [log c_min, log c_max].
    std::pair<double, double> best_scale(double c_min = 1e-8, double c_max = 1e4) const
    {
        const auto r = boost::math::tools::brent_find_minima([this](double lc) { return nll(std::exp(lc)); },
                                                             std::log(c_min), std::log(c_max), 40);
        return {std::exp(r.first), r.second};
    }

private:
    Vector prior_, nu_, yy_;
    Matrix W2_;
    double constant_ = 0.0;
};

struct TauSearchOptions {
    std::vector<double> beta_grid{0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
    std::vector<double> rho_grid{0.0, 0.3, 0.6, 0.9};
    std::vector<double> omega_grid{0.0, std::numbers::pi / 4, std::numbers::pi / 2, 3 * std::numbers::pi / 4,
                                   std::numbers::pi};
    KernelFamily family = KernelFamily::TC;
    double beta_max = 0.99;
    double rho_max = 0.99;
    int refine_rounds = 4;
};

struct TauEstimate {
    BaseKernelParams tau;
    double scale = 1.0;
    double nll = 0.0;
    double best_grid_nll = 0.0;
};

/// Grid search over (beta_ss, rho, omega) of the unstructured nll (scale
/// profiled out), followed by a shrinking compass search inside the box.
inline TauEstimate estimate_tau(const RegressionProblem& prob, const TauSearchOptions& opt = {})
{
    auto evaluate = [&](double beta, double rho, double omega) {
        BaseKernelParams t;
        t.T = prob.T;
        t.beta_ss = beta;
        t.rho = rho;
        t.omega = omega;
        t.family = opt.family;
        const auto [c, v] = UnstructuredEvidence(prob, t).best_scale();
        return std::make_tuple(t, c, v);
    };

    TauEstimate best;
    best.nll = std::numeric_limits<double>::infinity();
    for (double beta : opt.beta_grid)
        for (double rho : opt.rho_grid)
            for (double omega : opt.omega_grid) {
                if (rho == 0.0 && omega != opt.omega_grid.front())
                    continue; // omega is irrelevant without a filter pole
                const auto [t, c, v] = evaluate(beta, rho, omega);
                if (v < best.nll) {
                    best.tau = t;
                    best.scale = c;
                    best.nll = v;
                }
            }
    best.best_grid_nll = best.nll;

    std::array<double, 3> step{0.025, 0.075, std::numbers::pi / 16};
    for (int round = 0; round < opt.refine_rounds; ++round) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (int d = 0; d < 3; ++d)
                for (double sgn : {-1.0, 1.0}) {
                    double b = best.tau.beta_ss, r = best.tau.rho, w = best.tau.omega;
                    if (d == 0)
                        b = std::clamp(b + sgn * step[0], 0.05, opt.beta_max);
                    if (d == 1)
                        r = std::clamp(r + sgn * step[1], 0.0, opt.rho_max);
                    if (d == 2)
                        w = std::clamp(w + sgn * step[2], 0.0, std::numbers::pi);
                    if (b == best.tau.beta_ss && r == best.tau.rho && w == best.tau.omega)
                        continue;
                    const auto [t, c, v] = evaluate(b, r, w);
                    if (v < best.nll - 1e-9) {
                        best.tau = t;
                        best.scale = c;
                        best.nll = v;
                        improved = true;
                    }
                }
        }
        for (double& s : step)
            s *= 0.5;
    }
    return best;
}

inline TauEstimate estimate_tau(const TimeSeries& Y, const Matrix& sigma, int T, const TauSearchOptions& opt = {})
{
    return estimate_tau(make_problem(Y, T, sigma), opt);
}

} // namespace slnet
