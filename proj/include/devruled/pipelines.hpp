#pragma once

// End-to-end surface construction from control rulings: one fixed boundary
// curve, or both boundaries relaxed with an outer reparametrization loop.
// Also synthesizes ruling strips for tests and demos.

#include "devruled/common.hpp"
#include "devruled/objective.hpp"
#include "devruled/optimizer.hpp"
#include "devruled/splines.hpp"
#include "devruled/surface.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace devruled {

/// Uniform scaling + translation that maps the input into [0,1]^3.
struct UnitBox {
    Vec3 origin = Vec3::Zero();
    double scale = 1.0;

    static UnitBox enclosing(std::span<const Vec3> pts) {
        Vec3 lo = pts.front(), hi = pts.front();
        for (const auto& p : pts) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const double extent = (hi - lo).maxCoeff();
        return {lo, extent > 0.0 ? 1.0 / extent : 1.0};
    }

    [[nodiscard]] Vec3 to_unit(const Vec3& x) const { return (x - origin) * scale; }
    [[nodiscard]] Vec3 from_unit(const Vec3& x) const { return x / scale + origin; }

    [[nodiscard]] RulingSequence to_unit(const RulingSequence& r) const {
        std::vector<Ruling> out;
        out.reserve(r.size());
        for (const auto& l : r.rulings()) out.push_back({to_unit(l.Q), to_unit(l.P)});
        return RulingSequence(std::move(out));
    }
    [[nodiscard]] SplineCurve to_unit(const SplineCurve& c) const {
        Points cps;
        for (const auto& p : c.control_points()) cps.push_back(to_unit(p));
        return c.with_control_points(std::move(cps));
    }
    [[nodiscard]] SplineCurve from_unit(const SplineCurve& c) const {
        Points cps;
        for (const auto& p : c.control_points()) cps.push_back(from_unit(p));
        return c.with_control_points(std::move(cps));
    }
};

struct OuterOptions {
    int max_outer = 20;
    double rel_improve_tol = 1e-3;
    /// Stop once the maximum warp angle (degrees) is at or below this value.
    double beta_target = 1e-3;
    friend bool operator==(const OuterOptions&, const OuterOptions&) = default;
};

struct PipelineOptions {
    int degree = kDefaultDegree;
    int M = kDefaultNormalSamples;
    int metric_samples = kDefaultMetricSamples;
    SolverOptions solver;
    OuterOptions outer;
    ClosenessForm closeness_form = ClosenessForm::Symmetric;
};

struct OuterRecord {
    double beta_max = 0.0;
    double beta_avg = 0.0;
    double objective = 0.0;
    friend bool operator==(const OuterRecord&, const OuterRecord&) = default;
};

struct PipelineResult {
    /// Result in input coordinates; terminal control points equal the input rulings.
    RuledSurface surface;
    /// The same surface in unit-box coordinates; `metrics` are measured on it.
    RuledSurface unit_surface;
    UnitBox box;
    NormalField normals;  // unit-box, unit length
    MetricsReport metrics;
    MetricsReport initial_metrics;
    std::vector<double> params;
    std::vector<OuterRecord> outer_trace;
    std::vector<SolverTrace> solver_traces;
    std::string termination;
};

/// Input rejected before optimization.
class PreconditionError : public InvalidInput {
public:
    PreconditionError(const std::string& what, std::vector<std::size_t> offenders)
        : InvalidInput(what), offenders_(std::move(offenders)) {}
    [[nodiscard]] const std::vector<std::size_t>& offenders() const noexcept { return offenders_; }

private:
    std::vector<std::size_t> offenders_;
};

inline constexpr double kOnCurveTolerance = 1e-6;

namespace detail {

/// Rotation + translation + uniform scaling of `c` taking its endpoints to a and b.
inline SplineCurve similarity_to_endpoints(const SplineCurve& c, const Vec3& a, const Vec3& b) {
    const Vec3 c_start = c.control_points().front(), c_end = c.control_points().back();
    const Vec3 from = c_end - c_start, to = b - a;
    if (!(from.norm() > 0.0) || !(to.norm() > 0.0)) {
        throw InvalidInput("similarity transform needs distinct endpoints");
    }
    const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(from, to);
    const double s = to.norm() / from.norm();
    Points cps;
    for (const auto& p : c.control_points()) cps.push_back(a + s * (q * (p - c_start)));
    cps.front() = a;
    cps.back() = b;
    return c.with_control_points(std::move(cps));
}

/// Map the unit-box surface back, pinning terminal control points to the
/// exact input ruling endpoints.
inline RuledSurface restore(const RuledSurface& unit, const UnitBox& box, const RulingSequence& rulings) {
    auto pin = [](SplineCurve c, const Vec3& first, const Vec3& last) {
        Points cps = c.control_points();
        cps.front() = first;
        cps.back() = last;
        return c.with_control_points(std::move(cps));
    };
    return RuledSurface(pin(box.from_unit(unit.c0()), rulings.front().Q, rulings.back().Q),
                        pin(box.from_unit(unit.c1()), rulings.front().P, rulings.back().P));
}

struct InnerResult {
    RuledSurface surface;
    NormalField normals;
    double objective;
    SolverTrace trace;
};

inline InnerResult optimize(Mode mode, const RuledSurface& start, const NormalField& normals,
                            const RulingSequence& rulings, const std::vector<double>& params,
                            const Weights& weights, const PipelineOptions& opt) {
    const Evaluator ev = assemble({mode, start, rulings, params, normals.params, weights, opt.closeness_form});
    MinimizeResult r = minimize(ev, ev.pack(start, normals), opt.solver);
    return {ev.unpack_surface(r.x), ev.unpack_normals(r.x).normalized(), r.value, std::move(r.trace)};
}

}  // namespace detail

/// Surface from control rulings whose Q ends lie on the fixed curve `c0`.
/// Only the interior control points of C1 (and the normals) are optimized.
inline PipelineResult fit_fixed_boundary(const SplineCurve& c0, const RulingSequence& rulings,
                                         const Weights& weights = Weights::fixed_boundary_defaults(),
                                         const PipelineOptions& opt = {}) {
    weights.validate();
    Points all = rulings.q_points();
    for (const auto& p : rulings.p_points()) all.push_back(p);
    for (const auto& p : c0.control_points()) all.push_back(p);
    const UnitBox box = UnitBox::enclosing(all);
    const RulingSequence ur = box.to_unit(rulings);
    const SplineCurve uc0 = box.to_unit(c0);
    const std::size_t K = rulings.last_index();

    // Parameters of the Q_i on C0, shared by the P_i.
    std::vector<double> t(K + 1);
    std::vector<std::size_t> offenders;
    for (std::size_t i = 0; i <= K; ++i) {
        const double guess = static_cast<double>(i) / static_cast<double>(K);
        FootPoint fp = foot_point(uc0, ur[i].Q, guess);
        if (i == 0) fp = {0.0, (uc0.evaluate(0.0) - ur[i].Q).norm()};
        if (i == K) fp = {1.0, (uc0.evaluate(1.0) - ur[i].Q).norm()};
        if (fp.distance >= kOnCurveTolerance) offenders.push_back(i);
        t[i] = fp.t;
    }
    if (!offenders.empty()) {
        std::ostringstream os;
        os << "fixed curve does not pass through Q at ruling indices";
        for (auto i : offenders) os << ' ' << i;
        throw PreconditionError(os.str(), std::move(offenders));
    }
    repair_monotone(t);

    SplineCurve uc1 = K == 1 ? detail::similarity_to_endpoints(uc0, ur[0].P, ur[1].P)
                             : interpolate_elevated(ur.p_points(), t, opt.degree);
    const RuledSurface start(uc0, uc1);
    const NormalField n0 = init_normals(start, opt.M);

    PipelineResult res{start, start, box, n0, {}, {}, t, {}, {}, {}};
    res.initial_metrics = compute_metrics(start, ur, opt.metric_samples);
    auto inner = detail::optimize(Mode::FixedBoundary, start, n0, ur, t, weights, opt);
    res.unit_surface = RuledSurface(uc0, inner.surface.c1());
    res.normals = inner.normals;
    res.metrics = compute_metrics(res.unit_surface, ur, opt.metric_samples);
    res.outer_trace.push_back({res.metrics.beta_max, res.metrics.beta_avg, inner.objective});
    res.termination = to_string(inner.trace.reason);
    res.solver_traces.push_back(std::move(inner.trace));
    res.surface = RuledSurface(c0, detail::restore(res.unit_surface, box, rulings).c1());
    return res;
}

/// Initial surface of the relaxed method: centripetal parameters of both
/// endpoint rows averaged per ruling, and one interpolating curve per row.
inline std::pair<RuledSurface, Parametrization> initial_interpolation(const RulingSequence& rulings,
                                                                     int degree = kDefaultDegree) {
    const Points q = rulings.q_points(), p = rulings.p_points();
    const Parametrization t = average_ruling_params(centripetal_params(q), centripetal_params(p));
    return {RuledSurface(interpolate_elevated(q, t.values(), degree), interpolate_elevated(p, t.values(), degree)),
            t};
}

/// Surface from control rulings with both boundary curves free except for
/// their terminal control points.
inline PipelineResult fit_relaxed(const RulingSequence& rulings, const Weights& weights = Weights::relaxed_defaults(),
                                  const PipelineOptions& opt = {}) {
    weights.validate();
    Points all = rulings.q_points();
    for (const auto& p : rulings.p_points()) all.push_back(p);
    const UnitBox box = UnitBox::enclosing(all);
    const RulingSequence ur = box.to_unit(rulings);
    const std::size_t K = ur.last_index();

    auto [start, param0] = initial_interpolation(ur, opt.degree);
    std::vector<double> t = param0.values();
    RuledSurface current = start;
    NormalField normals = init_normals(start, opt.M);

    PipelineResult res{start, start, box, normals, {}, {}, t, {}, {}, "max-outer"};
    res.initial_metrics = compute_metrics(start, ur, opt.metric_samples);

    res.metrics = res.initial_metrics;
    if (res.initial_metrics.beta_max <= opt.outer.beta_target && res.initial_metrics.defects.empty()) {
        // The interpolating surface is already developable; nothing to relax.
        res.termination = "developable";
        res.surface = detail::restore(res.unit_surface, box, rulings);
        return res;
    }

    double prev_beta = res.initial_metrics.beta_max;
    double best_beta = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < opt.outer.max_outer; ++outer) {
        auto inner = detail::optimize(Mode::Relaxed, current, normals, ur, t, weights, opt);
        const MetricsReport m = compute_metrics(inner.surface, ur, opt.metric_samples);
        res.outer_trace.push_back({m.beta_max, m.beta_avg, inner.objective});
        res.solver_traces.push_back(std::move(inner.trace));

        if (m.beta_max > best_beta + 1e-9) {
            res.termination = "regressed";
            break;
        }
        best_beta = std::min(best_beta, m.beta_max);
        res.unit_surface = inner.surface;
        res.normals = inner.normals;
        res.metrics = m;
        res.params = t;

        if (m.beta_max <= opt.outer.beta_target) {
            res.termination = "developable";
            break;
        }
        const double rel = prev_beta > 0.0 ? (prev_beta - m.beta_max) / prev_beta : 0.0;
        if (rel < opt.outer.rel_improve_tol) {
            res.termination = "converged";
            break;
        }
        prev_beta = m.beta_max;

        // Reproject the data onto the updated curves and share the averaged parameters.
        current = inner.surface;
        normals = inner.normals;
        std::vector<double> u(K + 1), v(K + 1);
        for (std::size_t i = 0; i <= K; ++i) {
            u[i] = foot_point(current.c0(), ur[i].Q, t[i]).t;
            v[i] = foot_point(current.c1(), ur[i].P, t[i]).t;
        }
        t = average_ruling_params(u, v, ParamSource::FootPointAverage).values();
    }
    res.surface = detail::restore(res.unit_surface, box, rulings);
    return res;
}

// ---------------------------------------------------------------------------
// Synthetic inputs

enum class StripKind { Planar, Cylinder, Cone, CoplanarChain, Perturbed };

inline std::optional<StripKind> parse_strip_kind(std::string_view s) {
    if (s == "planar") return StripKind::Planar;
    if (s == "cylinder") return StripKind::Cylinder;
    if (s == "cone") return StripKind::Cone;
    if (s == "coplanar-chain") return StripKind::CoplanarChain;
    if (s == "perturbed") return StripKind::Perturbed;
    return std::nullopt;
}

inline const char* to_string(StripKind k) noexcept {
    switch (k) {
        case StripKind::Planar: return "planar";
        case StripKind::Cylinder: return "cylinder";
        case StripKind::Cone: return "cone";
        case StripKind::CoplanarChain: return "coplanar-chain";
        case StripKind::Perturbed: return "perturbed";
    }
    return "unknown";
}

namespace detail {

/// Platform-independent uniform double in [lo, hi).
class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed) : engine_(seed) {}
    double operator()(double lo, double hi) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

private:
    std::mt19937_64 engine_;
};

inline Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()) * v;
}

inline std::vector<Ruling> coplanar_chain(std::size_t K, UniformSource& rng) {
    const double bend = rng(0.35, 0.6) * (rng(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    const double taper = rng(-0.15, 0.15);
    const double step = 3.0 / static_cast<double>(K);
    Vec3 q = Vec3::Zero();
    Vec3 r = Vec3::UnitZ();
    Vec3 f = Vec3::UnitX();
    double width = 1.0;
    std::vector<Ruling> out{{q, q + width * r}};
    for (std::size_t i = 0; i < K; ++i) {
        // Next ruling in the plane spanned by the current ruling and the forward direction.
        const double hq = step;
        const double hp = step * (1.0 + taper + rng(-0.05, 0.05));
        const Vec3 nq = out.back().Q + hq * f + rng(-0.05, 0.05) * step * r;
        const Vec3 np = out.back().P + hp * f + rng(-0.05, 0.05) * step * r;
        out.push_back({nq, np});
        r = (np - nq).normalized();
        f = (f - f.dot(r) * r).normalized();
        // Fold the next plane about the new ruling.
        f = rotate(f, r, step * (bend + rng(-0.1, 0.1)));
    }
    return out;
}

}  // namespace detail

/// K+1 synthetic rulings, deterministic in `seed`.
inline RulingSequence gen_strip(StripKind kind, std::size_t K, double perturbation = 0.0, std::uint64_t seed = 0) {
    if (K < 1) throw InvalidInput("strip needs K >= 1");
    if (!(perturbation >= 0.0)) throw InvalidInput("perturbation must be nonnegative");
    detail::UniformSource rng(seed);
    std::vector<Ruling> out;
    const double Kd = static_cast<double>(K);
    switch (kind) {
        case StripKind::Planar: {
            const double amp = rng(0.1, 0.4), phase = rng(0.0, 2.0 * kPi);
            for (std::size_t i = 0; i <= K; ++i) {
                const double x = 3.0 * static_cast<double>(i) / Kd;
                const Vec3 q(x, amp * std::sin(x + phase), 0.0);
                const double lean = 0.2 * std::sin(1.3 * x + phase);
                out.push_back({q, q + Vec3(lean, 1.0 + 0.2 * std::cos(x), 0.0)});
            }
            break;
        }
        case StripKind::Cylinder: {
            const double amp = rng(0.2, 0.6), phase = rng(0.0, 2.0 * kPi);
            for (std::size_t i = 0; i <= K; ++i) {
                const double x = 3.0 * static_cast<double>(i) / Kd;
                const Vec3 q(x, amp * std::sin(1.5 * x + phase), 0.0);
                out.push_back({q, q + Vec3(0.0, 0.0, 1.0)});
            }
            break;
        }
        case StripKind::Cone: {
            const Vec3 apex(rng(-0.2, 0.2), rng(-0.2, 0.2), -1.0);
            const double span = rng(1.2, 1.8), lift = rng(0.8, 1.2);
            for (std::size_t i = 0; i <= K; ++i) {
                const double a = span * static_cast<double>(i) / Kd;
                const Vec3 d = Vec3(std::cos(a), std::sin(a), lift).normalized();
                out.push_back({apex + 1.0 * d, apex + 2.5 * d});
            }
            break;
        }
        case StripKind::CoplanarChain:
        case StripKind::Perturbed: {
            out = detail::coplanar_chain(K, rng);
            if (kind == StripKind::Perturbed) {
                detail::UniformSource noise(seed ^ 0x9e3779b97f4a7c15ULL);
                for (auto& l : out) {
                    for (Vec3* v : {&l.Q, &l.P}) {
                        for (int c = 0; c < 3; ++c) (*v)[c] += perturbation * noise(-1.0, 1.0);
                    }
                }
            }
            break;
        }
    }
    return RulingSequence(std::move(out));
}

}  // namespace devruled
