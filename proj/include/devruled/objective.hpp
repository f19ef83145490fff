#pragma once

// Developability objective over ruled B-spline surfaces with independent
// sampled normals, its regularizers and fitting terms, and the assembled
// evaluator with analytic gradient over a flat variable vector.

#include "devruled/common.hpp"
#include "devruled/splines.hpp"
#include "devruled/surface.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

namespace devruled {

inline constexpr int kDefaultNormalSamples = 100;

/// Independent normals N_k at sample parameters t_k (M+1 of each).
struct NormalField {
    std::vector<double> params;
    Points normals;

    [[nodiscard]] std::size_t size() const noexcept { return params.size(); }

    /// Copy with every nonzero normal scaled to unit length.
    [[nodiscard]] NormalField normalized() const {
        NormalField out = *this;
        for (auto& n : out.normals) {
            const double len = n.norm();
            if (len > 0.0) n /= len;
        }
        return out;
    }
};

struct Weights {
    double energy = 0.0;
    double width = 0.0;
    double interior = 0.0;
    double closeness = 0.0;
    /// Penalty on (|N_k|^2 - 1)^2; keeps the normals away from the zero minimizer.
    double unit = 1.0;

    static Weights fixed_boundary_defaults() { return {0.001, 0.00001, 1.0, 0.0, 1.0}; }
    static Weights relaxed_defaults() { return {0.00001, 0.00001, 0.0, 1.0, 1.0}; }

    void validate() const {
        if (energy < 0 || width < 0 || interior < 0 || closeness < 0 || unit < 0) {
            throw InvalidInput("objective weights must be nonnegative");
        }
    }
    friend bool operator==(const Weights&, const Weights&) = default;
};

enum class Mode { FixedBoundary, Relaxed };

/// Closeness term variant. `Symmetric` sums squared distances on both
/// boundaries; `Literal` is (|C1(t_i)-P_i|^2 + |C0(t_i)-Q_i|)^2.
enum class ClosenessForm { Symmetric, Literal };

// ---------------------------------------------------------------------------
// Individual terms

inline double f_dev(const RuledSurface& surface, const NormalField& normals) {
    double sum = 0.0;
    for (std::size_t k = 0; k < normals.size(); ++k) {
        const double t = normals.params[k];
        const Vec3& n = normals.normals[k];
        const Vec3 c0 = surface.c0().evaluate(t), c1 = surface.c1().evaluate(t);
        const double a = surface.c0().evaluate(t, 1).dot(n);
        const double b = surface.c1().evaluate(t, 1).dot(n);
        const double c = (c0 - c1).dot(n);
        sum += a * a + b * b + c * c;
    }
    return sum;
}

inline double unit_penalty(const NormalField& normals) {
    double sum = 0.0;
    for (const auto& n : normals.normals) {
        const double e = n.squaredNorm() - 1.0;
        sum += e * e;
    }
    return sum;
}

/// Integral of |C''(t)|^2 over [0,1].
inline double f_energy(const SplineCurve& curve) {
    if (curve.degree() < 2) throw InvalidInput("bending energy needs degree >= 2");
    const Eigen::MatrixXd G = second_derivative_gram(curve);
    const auto& cps = curve.control_points();
    double sum = 0.0;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        for (std::size_t j = 0; j < cps.size(); ++j) {
            sum += G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * cps[i].dot(cps[j]);
        }
    }
    return sum;
}

inline double f_width(const RuledSurface& surface, std::span<const double> samples) {
    if (samples.size() < 2) throw InvalidInput("width variation needs at least two samples");
    std::vector<double> w(samples.size());
    for (std::size_t j = 0; j < samples.size(); ++j) {
        w[j] = (surface.c0().evaluate(samples[j]) - surface.c1().evaluate(samples[j])).squaredNorm();
    }
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < w.size(); ++j) {
        const double d = w[j] - w[j + 1];
        sum += d * d;
    }
    return sum;
}

/// Sum over interior indices 1..K-1 of |C(t_i) - target_i|^2.
inline double f_interior(const SplineCurve& curve, std::span<const Vec3> targets, std::span<const double> params) {
    if (targets.size() != params.size()) throw InvalidInput("target and parameter counts differ");
    double sum = 0.0;
    for (std::size_t i = 1; i + 1 < targets.size(); ++i) {
        sum += (curve.evaluate(params[i]) - targets[i]).squaredNorm();
    }
    return sum;
}

inline double f_closeness(const RuledSurface& surface, const RulingSequence& rulings, std::span<const double> params,
                          ClosenessForm form = ClosenessForm::Symmetric) {
    if (params.size() != rulings.size()) throw InvalidInput("parameter count differs from ruling count");
    double sum = 0.0;
    for (std::size_t i = 1; i < rulings.last_index(); ++i) {
        const double e1 = (surface.c1().evaluate(params[i]) - rulings[i].P).squaredNorm();
        const Vec3 r0 = surface.c0().evaluate(params[i]) - rulings[i].Q;
        if (form == ClosenessForm::Symmetric) {
            sum += e1 + r0.squaredNorm();
        } else {
            const double e = e1 + r0.norm();
            sum += e * e;
        }
    }
    return sum;
}

/// Normals at t_k = k/M from the mean of the surface normals at both ends of
/// each ruling; degenerate samples borrow the nearest valid neighbour.
inline NormalField init_normals(const RuledSurface& surface, int M = kDefaultNormalSamples) {
    if (M < 1) throw InvalidInput("normal sample count M must be >= 1");
    NormalField field;
    field.params = uniform_samples(M + 1);
    std::vector<std::optional<Vec3>> found(field.params.size());
    for (std::size_t k = 0; k < field.params.size(); ++k) {
        const double t = field.params[k];
        Vec3 sum = Vec3::Zero();
        for (double s : {0.0, 1.0}) {
            try {
                sum += surface_normal(surface, t, s);
            } catch (const DegenerateNormal&) {
            }
        }
        if (sum.norm() > 1e-9) found[k] = sum.normalized();
    }
    field.normals.resize(found.size());
    for (std::size_t k = 0; k < found.size(); ++k) {
        if (found[k]) {
            field.normals[k] = *found[k];
            continue;
        }
        bool ok = false;
        for (std::size_t d = 1; d < found.size() && !ok; ++d) {
            for (std::size_t j : {k - d, k + d}) {
                if (j < found.size() && found[j]) {
                    field.normals[k] = *found[j];
                    ok = true;
                    break;
                }
            }
        }
        if (!ok) throw DegenerateNormal("surface normal is degenerate at every sample");
    }
    return field;
}

// ---------------------------------------------------------------------------
// Assembly

/// Everything the evaluator needs besides the variables: the frozen curve
/// data (knots, terminal control points), the rulings with their shared
/// parameters, the normal sample parameters and the weights.
struct OptimizationProblem {
    Mode mode = Mode::Relaxed;
    RuledSurface initial;
    RulingSequence rulings;
    std::vector<double> params;
    std::vector<double> samples;
    Weights weights;
    ClosenessForm closeness_form = ClosenessForm::Symmetric;
};

/// Per-term values at a variable vector (unweighted).
struct TermValues {
    double dev = 0.0;
    double energy_c0 = 0.0;
    double energy_c1 = 0.0;
    double width = 0.0;
    double interior = 0.0;
    double closeness = 0.0;
    double unit = 0.0;
};

/// Variable layout: [interior control points of C0 (relaxed mode only)],
/// [interior control points of C1], [normals], each as xyz triples.
/// Terminal control points are never variables.
class Evaluator {
public:
    explicit Evaluator(OptimizationProblem problem) : p_(std::move(problem)) {
        p_.weights.validate();
        const auto& c0 = p_.initial.c0();
        const auto& c1 = p_.initial.c1();
        if (p_.params.size() != p_.rulings.size()) {
            throw InvalidInput("ruling parameters must align with the ruling sequence");
        }
        if (p_.samples.size() < 2) throw InvalidInput("normal field needs at least two samples");
        n0_ = c0.size();
        n1_ = c1.size();
        free0_ = p_.mode == Mode::Relaxed ? n0_ - 2 : 0;
        free1_ = n1_ - 2;
        off1_ = 3 * free0_;
        offn_ = off1_ + 3 * free1_;
        dim_ = offn_ + 3 * p_.samples.size();

        for (double t : p_.samples) {
            rows0_.push_back(c0.basis(t, 1));
            rows1_.push_back(c1.basis(t, 1));
        }
        for (double t : p_.params) {
            prow0_.push_back(c0.basis(t, 0));
            prow1_.push_back(c1.basis(t, 0));
        }
        gram0_ = second_derivative_gram(c0);
        gram1_ = second_derivative_gram(c1);
    }

    [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
    [[nodiscard]] const OptimizationProblem& problem() const noexcept { return p_; }
    [[nodiscard]] std::size_t normals_offset() const noexcept { return offn_; }

    [[nodiscard]] std::vector<double> pack(const RuledSurface& surface, const NormalField& normals) const {
        if (surface.c0().size() != n0_ || surface.c1().size() != n1_ || normals.size() != p_.samples.size()) {
            throw InvalidInput("surface or normal field does not match the problem layout");
        }
        std::vector<double> x(dim_);
        auto put = [&](std::size_t off, const Vec3& v) {
            x[off] = v.x();
            x[off + 1] = v.y();
            x[off + 2] = v.z();
        };
        for (std::size_t j = 0; j < free0_; ++j) put(3 * j, surface.c0().control_points()[j + 1]);
        for (std::size_t j = 0; j < free1_; ++j) put(off1_ + 3 * j, surface.c1().control_points()[j + 1]);
        for (std::size_t k = 0; k < normals.size(); ++k) put(offn_ + 3 * k, normals.normals[k]);
        return x;
    }

    [[nodiscard]] RuledSurface unpack_surface(std::span<const double> x) const {
        check(x);
        return RuledSurface(p_.initial.c0().with_control_points(control_net(x, 0)),
                            p_.initial.c1().with_control_points(control_net(x, 1)));
    }

    [[nodiscard]] NormalField unpack_normals(std::span<const double> x) const {
        check(x);
        NormalField f;
        f.params = p_.samples;
        f.normals.resize(p_.samples.size());
        for (std::size_t k = 0; k < f.normals.size(); ++k) f.normals[k] = at(x, offn_ + 3 * k);
        return f;
    }

    [[nodiscard]] TermValues terms(std::span<const double> x) const {
        TermValues tv;
        std::vector<double> dummy(dim_);
        eval(x, dummy, &tv);
        return tv;
    }

    /// Objective value; writes the analytic gradient into `grad`.
    double operator()(std::span<const double> x, std::span<double> grad) const { return eval(x, grad, nullptr); }

private:
    static Vec3 at(std::span<const double> x, std::size_t off) { return {x[off], x[off + 1], x[off + 2]}; }

    void check(std::span<const double> x) const {
        if (x.size() != dim_) {
            std::ostringstream os;
            os << "variable vector has " << x.size() << " entries, layout expects " << dim_;
            throw InvalidInput(os.str());
        }
    }

    Points control_net(std::span<const double> x, int which) const {
        const auto& frozen = which == 0 ? p_.initial.c0().control_points() : p_.initial.c1().control_points();
        Points cps = frozen;
        const std::size_t nfree = which == 0 ? free0_ : free1_;
        const std::size_t off = which == 0 ? 0 : off1_;
        for (std::size_t j = 0; j < nfree; ++j) cps[j + 1] = at(x, off + 3 * j);
        return cps;
    }

    static Vec3 combine(const BasisEval& b, int order, const Points& cps) {
        Vec3 v = Vec3::Zero();
        const auto& w = b.ders[order];
        for (std::size_t j = 0; j < w.size(); ++j) v += w[j] * cps[b.first + j];
        return v;
    }

    static void scatter(const BasisEval& b, int order, const Vec3& g, Points& grad) {
        const auto& w = b.ders[order];
        for (std::size_t j = 0; j < w.size(); ++j) grad[b.first + j] += w[j] * g;
    }

    static double energy(const Eigen::MatrixXd& G, const Points& cps, Points* grad, double weight) {
        double sum = 0.0;
        for (std::size_t i = 0; i < cps.size(); ++i) {
            Vec3 gi = Vec3::Zero();
            for (std::size_t j = 0; j < cps.size(); ++j) {
                gi += G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * cps[j];
            }
            sum += cps[i].dot(gi);
            if (grad) (*grad)[i] += 2.0 * weight * gi;
        }
        return sum;
    }

    double eval(std::span<const double> x, std::span<double> grad, TermValues* tv) const {
        check(x);
        if (grad.size() != dim_) throw InvalidInput("gradient buffer does not match the layout");
        const Points cp0 = control_net(x, 0);
        const Points cp1 = control_net(x, 1);
        Points g0(n0_, Vec3::Zero()), g1(n1_, Vec3::Zero());
        const std::size_t ns = p_.samples.size();
        Points gn(ns, Vec3::Zero());
        const Weights& w = p_.weights;

        // Developability residuals and unit-norm penalty, per normal sample.
        double dev = 0.0, unit = 0.0;
        std::vector<double> widths(ns);
        Points diffs(ns);
        for (std::size_t k = 0; k < ns; ++k) {
            const Vec3 n = at(x, offn_ + 3 * k);
            const Vec3 c0 = combine(rows0_[k], 0, cp0), d0 = combine(rows0_[k], 1, cp0);
            const Vec3 c1 = combine(rows1_[k], 0, cp1), d1 = combine(rows1_[k], 1, cp1);
            const Vec3 diff = c0 - c1;
            diffs[k] = diff;
            widths[k] = diff.squaredNorm();
            const double a = d0.dot(n), b = d1.dot(n), c = diff.dot(n);
            dev += a * a + b * b + c * c;
            scatter(rows0_[k], 1, 2.0 * a * n, g0);
            scatter(rows1_[k], 1, 2.0 * b * n, g1);
            scatter(rows0_[k], 0, 2.0 * c * n, g0);
            scatter(rows1_[k], 0, -2.0 * c * n, g1);
            gn[k] += 2.0 * (a * d0 + b * d1 + c * diff);

            const double e = n.squaredNorm() - 1.0;
            unit += e * e;
            gn[k] += w.unit * 4.0 * e * n;
        }
        double value = dev + w.unit * unit;

        // Width variation between consecutive samples.
        double width = 0.0;
        for (std::size_t k = 0; k + 1 < ns; ++k) {
            const double d = widths[k] - widths[k + 1];
            width += d * d;
            if (w.width != 0.0) {
                const double coef = 2.0 * w.width * d;
                // dw_k/dC0 = 2 diff_k, dw_k/dC1 = -2 diff_k
                scatter(rows0_[k], 0, coef * 2.0 * diffs[k], g0);
                scatter(rows1_[k], 0, -coef * 2.0 * diffs[k], g1);
                scatter(rows0_[k + 1], 0, -coef * 2.0 * diffs[k + 1], g0);
                scatter(rows1_[k + 1], 0, coef * 2.0 * diffs[k + 1], g1);
            }
        }
        value += w.width * width;

        // Bending energy: C1 always, C0 only when it is a variable.
        double e0 = 0.0, e1 = 0.0;
        e1 = energy(gram1_, cp1, w.energy != 0.0 ? &g1 : nullptr, w.energy);
        if (p_.mode == Mode::Relaxed) e0 = energy(gram0_, cp0, w.energy != 0.0 ? &g0 : nullptr, w.energy);
        value += w.energy * (e0 + e1);

        // Fitting of interior rulings.
        double interior = 0.0, closeness = 0.0;
        const std::size_t K = p_.rulings.last_index();
        for (std::size_t i = 1; i < K; ++i) {
            const Vec3 r1 = combine(prow1_[i], 0, cp1) - p_.rulings[i].P;
            const Vec3 r0 = combine(prow0_[i], 0, cp0) - p_.rulings[i].Q;
            if (p_.mode == Mode::FixedBoundary) {
                interior += r1.squaredNorm();
                if (w.interior != 0.0) scatter(prow1_[i], 0, 2.0 * w.interior * r1, g1);
            } else if (p_.closeness_form == ClosenessForm::Symmetric) {
                closeness += r1.squaredNorm() + r0.squaredNorm();
                if (w.closeness != 0.0) {
                    scatter(prow1_[i], 0, 2.0 * w.closeness * r1, g1);
                    scatter(prow0_[i], 0, 2.0 * w.closeness * r0, g0);
                }
            } else {
                const double len0 = r0.norm();
                const double e = r1.squaredNorm() + len0;
                closeness += e * e;
                if (w.closeness != 0.0) {
                    const double coef = 2.0 * w.closeness * e;
                    scatter(prow1_[i], 0, coef * 2.0 * r1, g1);
                    if (len0 > 0.0) scatter(prow0_[i], 0, coef * r0 / len0, g0);
                }
            }
        }
        value += w.interior * interior + w.closeness * closeness;

        auto put = [&](std::size_t off, const Vec3& v) {
            grad[off] = v.x();
            grad[off + 1] = v.y();
            grad[off + 2] = v.z();
        };
        for (std::size_t j = 0; j < free0_; ++j) put(3 * j, g0[j + 1]);
        for (std::size_t j = 0; j < free1_; ++j) put(off1_ + 3 * j, g1[j + 1]);
        for (std::size_t k = 0; k < ns; ++k) put(offn_ + 3 * k, gn[k]);

        if (tv) *tv = {dev, e0, e1, width, interior, closeness, unit};
        return value;
    }

    OptimizationProblem p_;
    std::size_t n0_ = 0, n1_ = 0, free0_ = 0, free1_ = 0;
    std::size_t off1_ = 0, offn_ = 0, dim_ = 0;
    std::vector<BasisEval> rows0_, rows1_, prow0_, prow1_;
    Eigen::MatrixXd gram0_, gram1_;
};

/// Build the evaluator for a problem.
inline Evaluator assemble(OptimizationProblem problem) { return Evaluator(std::move(problem)); }

}  // namespace devruled
