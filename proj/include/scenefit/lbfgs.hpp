#pragma once

#include "scenefit/core.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace scenefit {

struct LbfgsOptions {
    int history = 10;
    int max_iterations = 200;
    double grad_tolerance = 1e-6;  // on the gradient 2-norm
    double c1 = 1e-4;              // sufficient decrease
    double c2 = 0.9;               // curvature
    int max_line_search = 30;
    // When positive, the search direction is rescaled so its norm does not
    // exceed this value before the line search runs. The line search may
    // still expand the step, so strong Wolfe acceptance is unaffected; the
    // cap only makes the first trial step local, which keeps the iterates on
    // the gradient-flow path when one energy term has a much larger scale
    // than the others (a stiff penalty can otherwise jump the iterate across
    // a barrier into a different basin in a single accepted step).
    double max_step = 0;
    bool check_wolfe = false;      // assert both Wolfe conditions on every accepted step
};

struct LbfgsResult {
    VecX x;
    double f = 0;
    VecX grad;
    int iterations = 0;
    bool converged = false;
    bool line_search_failed = false;
    std::vector<double> f_history;
};

/// Objective: f(x) with the gradient written to *grad when non-null.
using Objective = std::function<double(const VecX&, VecX*)>;

namespace detail {

struct LinePoint {
    double alpha = 0, phi = 0, dphi = 0;
};

/// Cubic-interpolation minimizer on [lo, hi] from two bracketing points,
/// clamped away from the interval ends. Falls back to bisection.
inline double cubic_step(const LinePoint& a, const LinePoint& b) {
    double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
    double disc = d1 * d1 - a.dphi * b.dphi;
    double lo = std::min(a.alpha, b.alpha), hi = std::max(a.alpha, b.alpha);
    double mid = 0.5 * (lo + hi);
    if (!std::isfinite(d1) || !std::isfinite(disc) || disc < 0) return mid;
    double d2 = std::sqrt(disc);
    if (b.alpha < a.alpha) d2 = -d2;
    double denom = b.dphi - a.dphi + 2.0 * d2;
    if (std::abs(denom) < 1e-300) return mid;
    double alpha = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
    double margin = 0.1 * (hi - lo);
    if (!std::isfinite(alpha) || alpha < lo + margin || alpha > hi - margin) return mid;
    return alpha;
}

}  // namespace detail

/// Strong Wolfe line search (bracket + zoom with cubic interpolation).
/// Returns the accepted step length, or a negative value on failure. On
/// success, x/f/grad hold the accepted point.
inline double wolfe_line_search(const Objective& fn, const VecX& x0, double f0, const VecX& g0,
                                const VecX& dir, VecX& x, double& f, VecX& g,
                                const LbfgsOptions& opts) {
    const double dphi0 = g0.dot(dir);
    if (dphi0 >= 0) return -1.0;  // not a descent direction

    auto eval = [&](double alpha) -> detail::LinePoint {
        x = x0 + alpha * dir;
        f = fn(x, &g);
        if (!std::isfinite(f)) f = std::numeric_limits<double>::infinity();
        return {alpha, f, g.dot(dir)};
    };
    auto armijo_ok = [&](const detail::LinePoint& p) {
        return p.phi <= f0 + opts.c1 * p.alpha * dphi0;
    };
    auto curvature_ok = [&](const detail::LinePoint& p) {
        return std::abs(p.dphi) <= opts.c2 * std::abs(dphi0);
    };

    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) -> double {
        for (int i = 0; i < opts.max_line_search; ++i) {
            double alpha = detail::cubic_step(lo, hi);
            detail::LinePoint p = eval(alpha);
            if (!armijo_ok(p) || p.phi >= lo.phi) {
                hi = p;
            } else {
                if (curvature_ok(p)) return p.alpha;
                if (p.dphi * (hi.alpha - lo.alpha) >= 0) hi = lo;
                lo = p;
            }
            if (std::abs(hi.alpha - lo.alpha) < 1e-16) break;
        }
        // interval collapsed: accept lo if it at least decreases sufficiently
        if (std::isfinite(lo.phi) && armijo_ok(lo) && lo.alpha > 0) {
            eval(lo.alpha);
            return lo.alpha;
        }
        return -1.0;
    };

    detail::LinePoint prev{0.0, f0, dphi0};
    double alpha = 1.0;
    for (int i = 0; i < opts.max_line_search; ++i) {
        detail::LinePoint p = eval(alpha);
        if (!std::isfinite(p.phi)) {  // overshot into a bad region: treat as too far
            return zoom(prev, p);
        }
        if (!armijo_ok(p) || (i > 0 && p.phi >= prev.phi)) return zoom(prev, p);
        if (curvature_ok(p)) return p.alpha;
        if (p.dphi >= 0) return zoom(p, prev);
        prev = p;
        alpha *= 2.0;
    }
    return -1.0;
}

/// Limited-memory BFGS with a strong Wolfe line search.
inline LbfgsResult lbfgs_minimize(const Objective& fn, const VecX& x0,
                                  const LbfgsOptions& opts = {}) {
    LbfgsResult res;
    res.x = x0;
    res.grad.resize(x0.size());
    res.f = fn(res.x, &res.grad);
    if (!std::isfinite(res.f))
        throw NumericError("lbfgs_minimize: objective is not finite at the starting point");
    res.f_history.push_back(res.f);

    std::deque<VecX> s_hist, y_hist;
    std::deque<double> rho_hist;

    VecX x_new(x0.size()), g_new(x0.size());
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (res.grad.norm() <= opts.grad_tolerance) {
            res.converged = true;
            return res;
        }
        // two-loop recursion
        VecX q = -res.grad;
        std::vector<double> alpha_coef(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha_coef[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha_coef[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (size_t i = 0; i < s_hist.size(); ++i) {
            double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha_coef[i] - beta) * s_hist[i];
        }
        VecX dir = q;
        if (dir.dot(res.grad) >= 0) {  // safeguard: fall back to steepest descent
            dir = -res.grad;
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        if (opts.max_step > 0) {
            double dn = dir.norm();
            if (dn > opts.max_step) dir *= opts.max_step / dn;
        }

        double f_new;
        double step = wolfe_line_search(fn, res.x, res.f, res.grad, dir, x_new, f_new, g_new, opts);
        if (step <= 0) {
            res.line_search_failed = true;
            return res;  // best point found so far
        }
        if (!std::isfinite(f_new))
            throw NumericError("lbfgs_minimize: objective became non-finite at an accepted point");
        if (opts.check_wolfe) {
            double dphi0 = res.grad.dot(dir);
            bool armijo = f_new <= res.f + opts.c1 * step * dphi0 + 1e-12 * std::abs(res.f);
            bool curvature = std::abs(g_new.dot(dir)) <= opts.c2 * std::abs(dphi0) + 1e-12;
            if (!(armijo && curvature))
                throw NumericError("lbfgs_minimize: accepted step violates the Wolfe conditions");
        }

        VecX s = x_new - res.x;
        VecX y = g_new - res.grad;
        double sy = s.dot(y);
        if (sy > 1e-10) {  // skip pairs that would break positive definiteness
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        res.x = x_new;
        res.f = f_new;
        res.grad = g_new;
        res.iterations = iter + 1;
        res.f_history.push_back(res.f);
    }
    res.converged = res.grad.norm() <= opts.grad_tolerance;
    return res;
}

}  // namespace scenefit
