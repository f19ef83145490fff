#pragma once

// Limited-memory BFGS with a strong-Wolfe line search.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <deque>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace devruled {

struct SolverOptions {
    int memory = 10;
    int max_iterations = 500;
    /// On the max-norm of the gradient.
    double gradient_tolerance = 1e-8;
    /// On the max-norm of an accepted step.
    double step_tolerance = 1e-12;
    double sufficient_decrease = 1e-4;
    double curvature = 0.9;
    int max_line_search_evaluations = 40;

    void validate() const {
        if (memory <= 0 || max_iterations <= 0 || !(gradient_tolerance > 0) || !(step_tolerance > 0) ||
            max_line_search_evaluations <= 0) {
            throw std::invalid_argument("solver options must be positive");
        }
        if (!(sufficient_decrease > 0 && sufficient_decrease < curvature && curvature < 1)) {
            throw std::invalid_argument("line-search constants must satisfy 0 < c1 < c2 < 1");
        }
    }
    friend bool operator==(const SolverOptions&, const SolverOptions&) = default;
};

enum class Termination { GradientTolerance, StepTolerance, MaxIterations, LineSearch };

inline const char* to_string(Termination t) noexcept {
    switch (t) {
        case Termination::GradientTolerance: return "gradient-tolerance";
        case Termination::StepTolerance: return "step-tolerance";
        case Termination::MaxIterations: return "max-iterations";
        case Termination::LineSearch: return "line-search";
    }
    return "unknown";
}

struct IterationRecord {
    double value = 0.0;
    double gradient_norm = 0.0;  // max-norm
    double step = 0.0;           // line-search step length
};

struct SolverTrace {
    double initial_value = 0.0;
    double initial_gradient_norm = 0.0;
    std::vector<IterationRecord> iterations;
    Termination reason = Termination::MaxIterations;
    int evaluations = 0;
};

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    SolverTrace trace;
};

/// Objective returned a NaN or infinity at an iterate.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, std::vector<double> iterate)
        : std::runtime_error(what), iterate_(std::move(iterate)) {}
    [[nodiscard]] const std::vector<double>& iterate() const noexcept { return iterate_; }

private:
    std::vector<double> iterate_;
};

template <class F>
concept ValueAndGradient = requires(F f, std::span<const double> x, std::span<double> g) {
    { f(x, g) } -> std::convertible_to<double>;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double max_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// Minimizer of the cubic through (a, fa, ga) and (b, fb, gb), or NaN.
inline double cubic_min(double a, double fa, double ga, double b, double fb, double gb) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    return b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
}

struct LinePoint {
    double alpha = 0.0;
    double f = 0.0;
    double g = 0.0;  // directional derivative
};

}  // namespace detail

/// Minimize `f` from `x0`. `f(x, grad)` returns the value and fills the gradient.
template <ValueAndGradient F>
MinimizeResult minimize(F&& f, std::vector<double> x0, const SolverOptions& options = {}) {
    options.validate();
    const std::size_t n = x0.size();
    MinimizeResult res;
    res.x = std::move(x0);
    std::vector<double> g(n), d(n), xt(n), gt(n);

    if (!detail::all_finite(res.x)) throw NonFiniteError("initial iterate is not finite", res.x);
    res.value = f(std::span<const double>(res.x), std::span<double>(g));
    res.trace.evaluations = 1;
    if (!std::isfinite(res.value) || !detail::all_finite(g)) {
        throw NonFiniteError("objective is not finite at the initial iterate", res.x);
    }
    res.trace.initial_value = res.value;
    res.trace.initial_gradient_norm = detail::max_norm(g);
    if (res.trace.initial_gradient_norm < options.gradient_tolerance) {
        res.trace.reason = Termination::GradientTolerance;
        return res;
    }

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> history;
    std::vector<double> alpha_buf(static_cast<std::size_t>(options.memory));

    const double c1 = options.sufficient_decrease, c2 = options.curvature;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        // Two-loop recursion for d = -H g.
        for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
        for (std::size_t h = history.size(); h-- > 0;) {
            const double a = history[h].rho * detail::dot(history[h].s, d);
            alpha_buf[h] = a;
            for (std::size_t i = 0; i < n; ++i) d[i] -= a * history[h].y[i];
        }
        if (!history.empty()) {
            const auto& last = history.back();
            const double gamma = detail::dot(last.s, last.y) / detail::dot(last.y, last.y);
            for (double& v : d) v *= gamma;
        }
        for (std::size_t h = 0; h < history.size(); ++h) {
            const double b = history[h].rho * detail::dot(history[h].y, d);
            for (std::size_t i = 0; i < n; ++i) d[i] += (alpha_buf[h] - b) * history[h].s[i];
        }
        double dg0 = detail::dot(d, g);
        if (!(dg0 < 0.0)) {
            history.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            dg0 = detail::dot(d, g);
        }
        double alpha = 1.0;
        if (history.empty()) alpha = std::min(1.0, 1.0 / std::sqrt(detail::dot(g, g)));

        // Strong-Wolfe line search (bracketing + cubic zoom).
        const double f0 = res.value;
        int evals = 0;
        auto phi = [&](double a) {
            for (std::size_t i = 0; i < n; ++i) xt[i] = res.x[i] + a * d[i];
            double v = f(std::span<const double>(xt), std::span<double>(gt));
            ++evals;
            if (!std::isfinite(v) || !detail::all_finite(gt)) v = std::numeric_limits<double>::infinity();
            return detail::LinePoint{a, v, std::isfinite(v) ? detail::dot(gt, d) : 0.0};
        };
        bool accepted = false;
        detail::LinePoint best;
        std::vector<double> best_x, best_g;
        auto accept = [&](const detail::LinePoint& p) {
            best = p;
            best_x = xt;
            best_g = gt;
            accepted = true;
        };
        auto sufficient = [&](const detail::LinePoint& p) { return p.f <= f0 + c1 * p.alpha * dg0; };
        auto curvature_ok = [&](const detail::LinePoint& p) { return std::abs(p.g) <= -c2 * dg0; };

        auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) {
            while (evals < options.max_line_search_evaluations) {
                double a = std::isfinite(hi.f) ? detail::cubic_min(lo.alpha, lo.f, lo.g, hi.alpha, hi.f, hi.g)
                                               : std::numeric_limits<double>::quiet_NaN();
                const double w = hi.alpha - lo.alpha;
                const double lo_b = std::min(lo.alpha + 0.1 * w, hi.alpha - 0.1 * w);
                const double hi_b = std::max(lo.alpha + 0.1 * w, hi.alpha - 0.1 * w);
                if (!std::isfinite(a) || a < lo_b || a > hi_b) a = lo.alpha + 0.5 * w;
                const detail::LinePoint p = phi(a);
                if (!sufficient(p) || p.f >= lo.f) {
                    hi = p;
                } else {
                    if (curvature_ok(p)) {
                        accept(p);
                        return;
                    }
                    if (p.g * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                    lo = p;
                }
                if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) break;
            }
            // Out of budget: fall back to the best sufficient-decrease point.
            if (lo.alpha > 0.0 && lo.f < f0) {
                phi(lo.alpha);
                accept(lo);
            }
        };

        detail::LinePoint prev{0.0, f0, dg0};
        for (int ls = 0; ls < options.max_line_search_evaluations && !accepted; ++ls) {
            const detail::LinePoint p = phi(alpha);
            if (!sufficient(p) || (ls > 0 && p.f >= prev.f)) {
                zoom(prev, p);
                break;
            }
            if (curvature_ok(p)) {
                accept(p);
                break;
            }
            if (p.g >= 0.0) {
                zoom(p, prev);
                break;
            }
            prev = p;
            alpha *= 2.0;
        }
        res.trace.evaluations += evals;

        if (!accepted || !(best.f <= f0)) {
            res.trace.reason = Termination::LineSearch;
            return res;
        }

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = best_x[i] - res.x[i];
            y[i] = best_g[i] - g[i];
        }
        res.x = std::move(best_x);
        g = std::move(best_g);
        res.value = best.f;
        const double gnorm = detail::max_norm(g);
        const double step_norm = detail::max_norm(s);
        res.trace.iterations.push_back({res.value, gnorm, best.alpha});

        const double sy = detail::dot(s, y);
        if (sy > 1e-16 * detail::dot(y, y)) {
            if (history.size() == static_cast<std::size_t>(options.memory)) history.pop_front();
            history.push_back({std::move(s), std::move(y), 1.0 / sy});
        }

        if (gnorm < options.gradient_tolerance) {
            res.trace.reason = Termination::GradientTolerance;
            return res;
        }
        if (step_norm < options.step_tolerance) {
            res.trace.reason = Termination::StepTolerance;
            return res;
        }
    }
    res.trace.reason = Termination::MaxIterations;
    return res;
}

}  // namespace devruled
