#pragma once

// Sparse plus low-rank identification: noise covariance and kernel shape
// first, then a greedy rank increment where each rank alternates between
// re-estimating the factor subspace U and re-tuning the hyperparameters.

#include "slnet/evidence.hpp"

#include <Eigen/SVD>

#include <memory>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace slnet {

struct SLRConfig {
    int T = 50;
    int arx_order = -1;     // -1: default_arx_order(N, p)
    double tol_rel = 1e-4;  // improvement threshold relative to |nll|
    double tol_abs = 0.0;   // absolute floor on the threshold
    int max_inner = 20;
    int max_rank = -1;      // -1: p
    double edge_threshold = 0.1;
    BoxOptions optimizer;
    TauSearchOptions tau_search;

    double tolerance(double nll) const { return std::max(tol_abs, tol_rel * std::abs(nll)); }
};

struct TraceRecord {
    int k = 0;     // outer iteration (0 = baseline)
    int n = 0;     // rank
    double nll = 0.0;
    bool accepted = false;
};

struct NetworkTopology {
    int p = 0;
    std::set<std::pair<int, int>> sparse_edges; // (j, i): j -> i
    int n_factors = 0;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> factor_loading_support; // p x n
};

struct IdentResult {
    KernelType type = KernelType::TypeII;
    int n = 0;
    Matrix U; // p x n
    HyperParams hp;
    PosteriorEstimate estimate;
    std::vector<TraceRecord> nll_trace;
    NetworkTopology network;
    Matrix sigma;
    double nll = 0.0;

    int support_size(double rel = 1e-3) const
    {
        if (!has_sparse_part(hp.type) || hp.gamma.size() == 0)
            return 0;
        const double mx = hp.gamma.maxCoeff();
        if (mx <= 0.0)
            return 0;
        return static_cast<int>((hp.gamma.array() > rel * mx).count());
    }

    /// Numerical rank of Lambda (0 without a low-rank part).
    int effective_rank(double rel = 1e-3) const
    {
        if (!has_low_rank_part(hp.type))
            return 0;
        const Matrix L = hp.lambda_structure(sigma.rows()).assemble();
        Eigen::SelfAdjointEigenSolver<Matrix> es(L, Eigen::EigenvaluesOnly);
        const double mx = es.eigenvalues().maxCoeff();
        if (mx <= 0.0)
            return 0;
        return static_cast<int>((es.eigenvalues().array() > rel * mx).count());
    }
};

/// Top-n left singular vectors of A_hat, largest-magnitude entry of each
/// column made positive. nullopt when A_hat is zero.
inline std::optional<Matrix> subspace_update(const Matrix& A_hat, int n)
{
    require(n >= 1, "rank must be >= 1");
    require(n <= A_hat.rows(), "rank must not exceed p");
    if (A_hat.size() == 0 || A_hat.cwiseAbs().maxCoeff() == 0.0)
        return std::nullopt;
    Eigen::JacobiSVD<Matrix> svd(A_hat, Eigen::ComputeThinU);
    Matrix U = svd.matrixU().leftCols(n);
    for (int c = 0; c < n; ++c) {
        Index r;
        U.col(c).cwiseAbs().maxCoeff(&r);
        if (U(r, c) < 0.0)
            U.col(c) = -U.col(c);
    }
    return U;
}

inline NetworkTopology extract_network(const PosteriorEstimate& est, int n, const Matrix& U, double threshold_rel)
{
    NetworkTopology net;
    const int p = est.theta_s.p;
    const int T = est.theta_s.T;
    net.p = p;
    net.n_factors = n;

    Matrix norms(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            norms(i, j) = est.theta_s.data.segment(Index(i * p + j) * T, T).norm();
    const double mx = norms.maxCoeff();
    if (threshold_rel <= 0.0 || mx > 0.0)
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (threshold_rel <= 0.0 || norms(i, j) > threshold_rel * mx)
                    net.sparse_edges.insert({j, i});

    net.factor_loading_support.setConstant(p, n, false);
    if (n > 0 && U.size()) {
        const double umax = U.cwiseAbs().maxCoeff();
        net.factor_loading_support = (U.cwiseAbs().array() > threshold_rel * umax).matrix();
    }
    return net;
}

/// Sigma, tau and the unstructured fit shared by every estimator on one
/// data set. Fits are cached so that estimators reuse each other's work.
class Identifier {
public:
    Identifier(const TimeSeries& Y, const SLRConfig& cfg) : cfg_(cfg)
    {
        Y.validate();
        p_ = static_cast<int>(Y.channels());
        require(cfg.T >= 1, "T must be >= 1");
        const int order = cfg.arx_order >= 0 ? cfg.arx_order : default_arx_order(Y.samples(), p_);
        sigma_ = estimate_noise_cov(Y, order);
        prob_ = make_problem(Y, cfg.T, sigma_);
        tau_ = estimate_tau(prob_, cfg.tau_search);
        ev_ = std::make_unique<Evidence>(prob_, tau_.tau);
    }

    int p() const { return p_; }
    const Matrix& sigma() const { return sigma_; }
    const TauEstimate& tau() const { return tau_; }
    const Evidence& evidence() const { return *ev_; }
    const SLRConfig& config() const { return cfg_; }

    IdentResult identify(KernelType type)
    {
        switch (type) {
        case KernelType::Unstructured: return unstructured();
        case KernelType::SparseOnly: return sparse_only();
        default: return algorithm1(type);
        }
    }

    /// SS: K = c I (x) P with the scale from the tau search.
    const IdentResult& unstructured()
    {
        if (!ss_) {
            HyperParams hp = base_hp(KernelType::Unstructured);
            hp.scale = tau_.scale;
            ss_ = finish(hp, {TraceRecord{0, 0, 0.0, true}});
        }
        return *ss_;
    }

    /// S: K_L = 0, gamma tuned.
    const IdentResult& sparse_only()
    {
        if (!s_) {
            HyperParams hp = base_hp(KernelType::SparseOnly);
            hp.gamma = Vector::Ones(Index(p_) * p_);
            const OptimizeResult r = optimize_hyperparams(*ev_, hp, std::nullopt, cfg_.optimizer);
            s_ = finish(r.hp, {TraceRecord{0, 0, r.nll, true}});
        }
        return *s_;
    }

    IdentResult algorithm1(KernelType type)
    {
        require(has_low_rank_part(type), "rank search needs a low-rank kernel type");
        const bool sparse = has_sparse_part(type);
        const int max_rank = cfg_.max_rank >= 0 ? std::min(cfg_.max_rank, p_) : p_;
        const double trP = ev_->base_kernel().trace();
        const Matrix G_ss = stacked_coefficients(unstructured().estimate.predictor());

        // rank 0
        IdentResult best;
        HyperParams hp0;
        if (sparse) {
            best = sparse_only();
            hp0 = best.hp;
            hp0.type = type;
            hp0.alpha = 0.0;
        } else {
            hp0 = base_hp(type);
            hp0.alpha = G_ss.squaredNorm() / (double(p_) * p_ * trP);
            hp0.beta.resize(0);
            hp0.U.resize(p_, 0);
            const OptimizeResult r = optimize_hyperparams(*ev_, hp0, std::nullopt, cfg_.optimizer);
            hp0 = r.hp;
            best = finish(hp0, {});
        }
        best.type = type;
        std::vector<TraceRecord> trace{{0, 0, best.nll, true}};

        HyperParams prev = hp0;
        Matrix A_prev = sparse ? G_ss : stacked_coefficients(best.estimate.low_rank_part());
        if (A_prev.cwiseAbs().maxCoeff() == 0.0)
            A_prev = G_ss;
        int k = 0;
        for (int n = 1; n <= max_rank; ++n) {
            const auto U0 = subspace_update(A_prev, n);
            if (!U0) {
                trace.push_back({++k, n, std::numeric_limits<double>::infinity(), false});
                break;
            }
            HyperParams hp = prev;
            hp.type = type;
            hp.U = *U0;
            hp.beta.resize(n);
            for (int t = 0; t < n; ++t)
                hp.beta[t] = (U0->col(t).transpose() * A_prev).squaredNorm() / (double(p_) * trP);
            if (n == 1 && sparse) {
                const Matrix rest = A_prev - (*U0) * (U0->transpose() * A_prev);
                hp.alpha = rest.squaredNorm() / (double(std::max(p_ - 1, 1)) * p_ * trP);
            }
            if (n == p_)
                hp.alpha = 0.0;

            OptimizeResult r = optimize_hyperparams(*ev_, hp, std::nullopt, cfg_.optimizer);
            HyperParams rank_best = r.hp;
            double rank_nll = r.nll;
            trace.push_back({++k, n, rank_nll, false});
            std::size_t rank_record = trace.size() - 1;

            PosteriorEstimate est = ev_->posterior(rank_best);
            for (int inner = 0; inner < cfg_.max_inner; ++inner) {
                const auto U1 = subspace_update(stacked_coefficients(est.low_rank_part()), n);
                if (!U1)
                    break;
                HyperParams cand = rank_best;
                cand.U = *U1;
                const OptimizeResult ri = optimize_hyperparams(*ev_, cand, std::nullopt, cfg_.optimizer);
                trace.push_back({++k, n, ri.nll, false});
                if (!(ri.nll < rank_nll - cfg_.tolerance(rank_nll)))
                    break;
                rank_best = ri.hp;
                rank_nll = ri.nll;
                rank_record = trace.size() - 1;
                est = ev_->posterior(rank_best);
            }

            // Rank n - 1 again, started from the rank-n solution: the rank-n
            // search also re-tunes the shared hyperparameters, and that gain
            // alone must not count for the extra factor.
            {
                const HyperParams lower = drop_weakest_direction(rank_best);
                const OptimizeResult rl = optimize_hyperparams(*ev_, lower, std::nullopt, cfg_.optimizer);
                trace.push_back({++k, n - 1, rl.nll, false});
                if (rl.nll < best.nll) {
                    trace.back().accepted = true;
                    const auto kept = best.type;
                    best = finish(rl.hp, {});
                    best.type = kept;
                }
            }

            if (!(rank_nll < best.nll - cfg_.tolerance(best.nll)))
                break;
            trace[rank_record].accepted = true;
            best = finish(rank_best, {}, &est);
            best.nll = rank_nll;
            prev = rank_best;
            A_prev = stacked_coefficients(est.low_rank_part());
        }
        best.nll_trace = std::move(trace);
        return best;
    }

private:
    /// Same hyperparameters with the smallest-beta direction folded into the
    /// complement (or removed, at rank 1 with a sparse part).
    HyperParams drop_weakest_direction(const HyperParams& hp) const
    {
        const int n = hp.n();
        HyperParams out = hp;
        Index weakest = 0;
        hp.beta.minCoeff(&weakest);
        if (n == 1 && has_sparse_part(hp.type)) {
            out.type = KernelType::SparseOnly;
            out.alpha = 0.0;
        } else if (n == p_) {
            out.alpha = hp.beta[weakest];
        }
        Matrix U(p_, n - 1);
        Vector beta(n - 1);
        for (int t = 0, c = 0; t < n; ++t)
            if (t != weakest) {
                U.col(c) = hp.U.col(t);
                beta[c++] = hp.beta[t];
            }
        out.U = U;
        out.beta = beta;
        return out;
    }

    HyperParams base_hp(KernelType type) const
    {
        HyperParams hp;
        hp.type = type;
        hp.tau = tau_.tau;
        hp.U.resize(p_, 0);
        hp.beta.resize(0);
        return hp;
    }

    IdentResult finish(const HyperParams& hp, std::vector<TraceRecord> trace,
                       const PosteriorEstimate* est = nullptr) const
    {
        IdentResult res;
        res.type = hp.type;
        res.hp = hp;
        res.n = has_low_rank_part(hp.type) ? hp.n() : 0;
        res.U = res.n > 0 ? hp.U : Matrix(p_, 0);
        res.estimate = est ? *est : ev_->posterior(hp);
        res.nll = res.estimate.nll_at_solution;
        for (auto& t : trace)
            if (t.k == 0 && t.nll == 0.0)
                t.nll = res.nll;
        res.nll_trace = std::move(trace);
        res.sigma = sigma_;
        res.network = extract_network(res.estimate, res.n, res.U, cfg_.edge_threshold);
        return res;
    }

    SLRConfig cfg_;
    int p_ = 0;
    Matrix sigma_;
    RegressionProblem prob_;
    TauEstimate tau_;
    std::unique_ptr<Evidence> ev_;
    std::optional<IdentResult> ss_, s_;
};

/// Rank search on a single data set.
inline IdentResult run_algorithm1(const TimeSeries& Y, KernelType type, const SLRConfig& cfg = {})
{
    Identifier id(Y, cfg);
    return id.algorithm1(type);
}

} // namespace slnet
