#pragma once

// Scaled gradient projection for smooth objectives under box constraints.
//
// Each iteration projects a scaled gradient step onto the box, then runs a
// monotone Armijo backtracking along the feasible direction. The scaling is
// diag(x) (clamped away from zero), which suits nonnegative variance-type
// variables; step lengths follow the alternating Barzilai-Borwein rule.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace slnet {

struct BoxOptions {
    int max_iter = 500;
    double rel_tol = 1e-6;  // stop when the mean decrease per iteration, relative to max(1, |f|), drops below rel_tol
    int rel_window = 5;
    double pg_tol = 1e-5;   // stop when ||P(x - g) - x||_inf < pg_tol
    double armijo = 1e-4;
    int max_backtracks = 40;
    double step_min = 1e-12;
    double step_max = 1e12;
    double scale_floor = 1e-6; // relative to max(1, max |x|)
    double away_scale = 0.1;   // same, for coordinates with negative gradient
};

enum class StopReason { RelativeDecrease, ProjectedGradient, IterationLimit, LineSearchFailure, NoFreeVariables };

inline std::string to_string(StopReason r)
{
    switch (r) {
    case StopReason::RelativeDecrease: return "relative_decrease";
    case StopReason::ProjectedGradient: return "projected_gradient";
    case StopReason::IterationLimit: return "iteration_limit";
    case StopReason::LineSearchFailure: return "line_search_failure";
    case StopReason::NoFreeVariables: return "no_free_variables";
    }
    return "unknown";
}

struct BoxResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd grad;
    int iterations = 0;
    int evaluations = 0;
    StopReason reason = StopReason::IterationLimit;
    std::vector<double> history; // accepted objective values, starting with f(x0)
};

inline Eigen::VectorXd project_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    return x.cwiseMax(lo).cwiseMin(hi);
}

/// Minimize f over lo <= x <= hi. `f(x, grad)` returns the objective and
/// fills *grad when grad is non-null. The accepted sequence is monotone
/// non-increasing.
template <class Objective>
BoxResult minimize_box(Objective&& f, Eigen::VectorXd x0, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                       const BoxOptions& opt = {})
{
    using Vec = Eigen::VectorXd;
    using Index = Eigen::Index;
    BoxResult res;
    Vec x = project_box(x0, lo, hi);
    Vec g(x.size());
    double fx = f(x, &g);
    ++res.evaluations;
    res.history.push_back(fx);

    if (x.size() == 0) {
        res.x = x;
        res.f = fx;
        res.grad = g;
        res.reason = StopReason::NoFreeVariables;
        return res;
    }

    // diag(|x|) slows the approach to a zero bound; coordinates the gradient
    // pushes away from zero get the scale of the largest entry instead
    auto scaling = [&](const Vec& v, const Vec& grad) {
        const double big = std::max(1.0, v.cwiseAbs().maxCoeff());
        Vec out(v.size());
        for (Index i = 0; i < v.size(); ++i) {
            const double floor = grad[i] < 0.0 ? opt.away_scale * big : opt.scale_floor * big;
            out[i] = std::min(std::max(std::abs(v[i]), floor), 1e10);
        }
        return out;
    };

    Vec d = scaling(x, g);
    // first step changes no coordinate by more than half its scale
    double step = 0.5 / std::max(g.cwiseAbs().maxCoeff(), 1e-300);
    step = std::clamp(step, opt.step_min, opt.step_max);
    std::deque<double> recent_bb2;
    double tau = 0.5;

    res.reason = StopReason::IterationLimit;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        const double pg = (project_box(x - g, lo, hi) - x).cwiseAbs().maxCoeff();
        if (pg < opt.pg_tol) {
            res.reason = StopReason::ProjectedGradient;
            break;
        }

        Vec dir = project_box(x - step * d.cwiseProduct(g), lo, hi) - x;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            // Scaled step collapsed (e.g. every moving coordinate sits on a
            // bound); fall back to the unscaled projected gradient.
            dir = project_box(x - g, lo, hi) - x;
            slope = g.dot(dir);
            if (!(slope < 0.0)) {
                res.reason = StopReason::ProjectedGradient;
                break;
            }
        }

        double eta = 1.0;
        Vec xn;
        double fn = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
            xn = project_box(x + eta * dir, lo, hi);
            fn = f(xn, nullptr);
            ++res.evaluations;
            if (std::isfinite(fn) && fn <= fx + opt.armijo * eta * slope) {
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) {
            res.reason = StopReason::LineSearchFailure;
            break;
        }

        Vec gn(x.size());
        fn = f(xn, &gn);
        ++res.evaluations;
        const Vec s = xn - x;
        const Vec z = gn - g;
        const double decrease = fx - fn;
        x = xn;
        g = gn;
        fx = fn;
        res.history.push_back(fx);

        d = scaling(x, g);
        const Vec s_over_d = s.cwiseQuotient(d);
        const double denom1 = s_over_d.dot(z);
        // steps that move every coordinate by at most its own scale
        const double unit = 1.0 / std::max(d.cwiseProduct(g).cwiseAbs().maxCoeff(), 1e-300);
        if (denom1 <= 0.0) {
            // negative curvature along s: no BB estimate
            step = unit;
        } else {
            const double bb1 = s_over_d.squaredNorm() / denom1;
            const Vec dz = d.cwiseProduct(z);
            const double dzn = dz.squaredNorm();
            double bb2 = dzn > 0.0 ? s.dot(dz) / dzn : bb1;
            if (!(bb2 > 0.0))
                bb2 = bb1;
            recent_bb2.push_back(bb2);
            if (recent_bb2.size() > 3)
                recent_bb2.pop_front();
            if (bb2 / bb1 < tau) {
                step = *std::min_element(recent_bb2.begin(), recent_bb2.end());
                tau *= 0.9;
            } else {
                step = bb1;
                tau *= 1.1;
            }
        }
        step = std::clamp(step, opt.step_min, opt.step_max);

        // mean decrease over the last rel_window iterations; a single short
        // backtracked step is not evidence of convergence
        (void)decrease;
        const std::size_t w = static_cast<std::size_t>(std::max(1, opt.rel_window));
        if (res.history.size() > w &&
            (res.history[res.history.size() - 1 - w] - fx) / double(w) < opt.rel_tol * std::max(1.0, std::abs(fx))) {
            ++it;
            res.reason = StopReason::RelativeDecrease;
            break;
        }
    }
    res.iterations = it;
    res.x = x;
    res.f = fx;
    res.grad = g;
    return res;
}

} // namespace slnet
