#pragma once

// Clamped B-spline curves on [0,1]: evaluation, interpolation, data
// parametrization and foot-point projection.

#include "devruled/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

namespace devruled {

inline constexpr int kDefaultDegree = 3;

/// Nonzero basis functions (and derivatives) at one parameter value.
/// `ders[k][j]` is the k-th derivative of basis function `first + j`.
struct BasisEval {
    std::size_t first = 0;
    std::vector<std::vector<double>> ders;
};

class SplineCurve {
public:
    SplineCurve(int degree, std::vector<double> knots, Points control_points)
        : degree_(degree), knots_(std::move(knots)), control_points_(std::move(control_points)) {
        validate();
    }

    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] const std::vector<double>& knots() const noexcept { return knots_; }
    [[nodiscard]] const Points& control_points() const noexcept { return control_points_; }
    [[nodiscard]] std::size_t size() const noexcept { return control_points_.size(); }

    friend bool operator==(const SplineCurve& a, const SplineCurve& b) {
        return a.degree_ == b.degree_ && a.knots_ == b.knots_ && a.control_points_ == b.control_points_;
    }

    /// Same knots and degree, new control net.
    [[nodiscard]] SplineCurve with_control_points(Points cps) const {
        return SplineCurve(degree_, knots_, std::move(cps));
    }

    [[nodiscard]] std::size_t find_span(double t) const {
        const auto p = static_cast<std::size_t>(degree_);
        const std::size_t n = control_points_.size() - 1;
        if (t >= knots_[n + 1]) return n;
        if (t <= knots_[p]) return p;
        const auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(p),
                                         knots_.begin() + static_cast<std::ptrdiff_t>(n + 2), t);
        return static_cast<std::size_t>(it - knots_.begin()) - 1;
    }

    /// Basis values and derivatives up to `max_order` at t (Piegl & Tiller A2.3).
    [[nodiscard]] BasisEval basis(double t, int max_order) const {
        check_param(t);
        if (max_order < 0 || max_order > degree_) {
            throw DomainError("derivative order must lie in [0, degree]");
        }
        const int p = degree_;
        const std::size_t span = find_span(t);
        const auto& U = knots_;

        std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
        std::vector<double> left(p + 1, 0.0), right(p + 1, 0.0);
        ndu[0][0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[j] = t - U[span + 1 - j];
            right[j] = U[span + j] - t;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                ndu[j][r] = right[r + 1] + left[j - r];
                const double temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        BasisEval out;
        out.first = span - static_cast<std::size_t>(p);
        out.ders.assign(max_order + 1, std::vector<double>(p + 1, 0.0));
        for (int j = 0; j <= p; ++j) out.ders[0][j] = ndu[j][p];

        std::array<std::vector<double>, 2> a{std::vector<double>(p + 1), std::vector<double>(p + 1)};
        for (int r = 0; r <= p; ++r) {
            int s1 = 0, s2 = 1;
            a[0][0] = 1.0;
            for (int k = 1; k <= max_order; ++k) {
                double d = 0.0;
                const int rk = r - k, pk = p - k;
                if (r >= k) {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                const int j1 = rk >= -1 ? 1 : -rk;
                const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
                for (int j = j1; j <= j2; ++j) {
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                    d += a[s2][j] * ndu[rk + j][pk];
                }
                if (r <= pk) {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                out.ders[k][r] = d;
                std::swap(s1, s2);
            }
        }
        double factor = p;
        for (int k = 1; k <= max_order; ++k) {
            for (int j = 0; j <= p; ++j) out.ders[k][j] *= factor;
            factor *= (p - k);
        }
        return out;
    }

    /// Position (order 0) or the order-th derivative at t.
    [[nodiscard]] Vec3 evaluate(double t, int order = 0) const {
        check_param(t);
        if (order == 0) {
            // Clamped ends reproduce the terminal control points bit-exactly.
            if (t == 0.0) return control_points_.front();
            if (t == 1.0) return control_points_.back();
        }
        const BasisEval b = basis(t, order);
        Vec3 v = Vec3::Zero();
        for (std::size_t j = 0; j < b.ders[order].size(); ++j) {
            v += b.ders[order][j] * control_points_[b.first + j];
        }
        return v;
    }

private:
    static void check_param(double t) {
        if (!(t >= 0.0 && t <= 1.0)) {
            std::ostringstream os;
            os << "curve parameter " << t << " outside [0,1]";
            throw DomainError(os.str());
        }
    }

    void validate() const {
        if (degree_ < 1) throw InvalidInput("spline degree must be >= 1");
        const auto p = static_cast<std::size_t>(degree_);
        if (control_points_.size() < p + 1) {
            throw InvalidInput("spline needs at least degree+1 control points");
        }
        if (knots_.size() != control_points_.size() + p + 1) {
            throw InvalidInput("knot count must equal control-point count + degree + 1");
        }
        for (std::size_t i = 1; i < knots_.size(); ++i) {
            if (knots_[i] < knots_[i - 1]) throw InvalidInput("knot vector must be nondecreasing");
        }
        for (std::size_t i = 0; i <= p; ++i) {
            if (knots_[i] != 0.0 || knots_[knots_.size() - 1 - i] != 1.0) {
                throw InvalidInput("knot vector must be clamped on [0,1]");
            }
        }
    }

    int degree_;
    std::vector<double> knots_;
    Points control_points_;
};

/// Clamped knot vector with no interior knots (a single Bezier segment).
inline std::vector<double> bezier_knots(int degree) {
    std::vector<double> k(2 * static_cast<std::size_t>(degree + 1), 0.0);
    std::fill(k.begin() + degree + 1, k.end(), 1.0);
    return k;
}

/// Raise a single-segment curve to `target` degree; the geometry is unchanged.
inline SplineCurve elevate_bezier(const SplineCurve& curve, int target) {
    if (curve.size() != static_cast<std::size_t>(curve.degree() + 1)) {
        throw InvalidInput("degree elevation requires a single Bezier segment");
    }
    Points cps = curve.control_points();
    for (int p = curve.degree(); p < target; ++p) {
        Points next(cps.size() + 1);
        next.front() = cps.front();
        next.back() = cps.back();
        for (std::size_t i = 1; i < cps.size(); ++i) {
            const double a = static_cast<double>(i) / (p + 1);
            next[i] = a * cps[i - 1] + (1.0 - a) * cps[i];
        }
        cps = std::move(next);
    }
    const int degree = std::max(curve.degree(), target);
    return SplineCurve(degree, bezier_knots(degree), std::move(cps));
}

// ---------------------------------------------------------------------------
// Parametrization

enum class ParamSource { Centripetal, CentripetalAverage, FootPointAverage, Given };

inline const char* to_string(ParamSource s) noexcept {
    switch (s) {
        case ParamSource::Centripetal: return "centripetal";
        case ParamSource::CentripetalAverage: return "centripetal-average";
        case ParamSource::FootPointAverage: return "foot-point-average";
        case ParamSource::Given: return "given";
    }
    return "unknown";
}

/// Strictly increasing data parameters pinned to 0 and 1.
class Parametrization {
public:
    Parametrization(std::vector<double> params, ParamSource source)
        : params_(std::move(params)), sources_(params_.size(), source) {
        if (params_.size() < 2) throw InvalidInput("parametrization needs at least two values");
        if (params_.front() != 0.0 || params_.back() != 1.0) {
            throw InvalidInput("parametrization must start at 0 and end at 1");
        }
        for (std::size_t i = 1; i < params_.size(); ++i) {
            if (!(params_[i] > params_[i - 1])) {
                std::ostringstream os;
                os << "parametrization not strictly increasing at index " << i;
                throw InvalidInput(os.str());
            }
        }
    }

    [[nodiscard]] const std::vector<double>& values() const noexcept { return params_; }
    [[nodiscard]] const std::vector<ParamSource>& sources() const noexcept { return sources_; }
    [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return params_[i]; }

private:
    std::vector<double> params_;
    std::vector<ParamSource> sources_;
};

inline constexpr double kMonotoneEpsilon = 1e-6;

/// Pin the ends to 0 and 1, bump every non-increasing entry to its
/// predecessor + eps, then rescale so the last entry is 1 again.
inline void repair_monotone(std::vector<double>& t, double eps = kMonotoneEpsilon) {
    if (t.size() < 2) return;
    t.front() = 0.0;
    t.back() = 1.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i] <= t[i - 1]) t[i] = t[i - 1] + eps;
    }
    if (t.back() != 1.0) {
        const double s = t.back();
        for (double& v : t) v /= s;
        t.back() = 1.0;
    }
}

inline Parametrization centripetal_params(std::span<const Vec3> points) {
    if (points.size() < 2) throw InvalidInput("centripetal parametrization needs at least two points");
    std::vector<double> t(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double chord = (points[i] - points[i - 1]).norm();
        if (chord == 0.0) {
            std::ostringstream os;
            os << "coincident consecutive points at indices " << i - 1 << " and " << i;
            throw InvalidInput(os.str());
        }
        t[i] = t[i - 1] + std::sqrt(chord);
    }
    const double total = t.back();
    for (double& v : t) v /= total;
    t.back() = 1.0;
    return Parametrization(std::move(t), ParamSource::Centripetal);
}

/// Shared ruling parameters t_i = (u_i + v_i)/2, repaired to be monotone.
inline Parametrization average_ruling_params(std::span<const double> u, std::span<const double> v,
                                             ParamSource source = ParamSource::CentripetalAverage) {
    if (u.size() != v.size()) throw InvalidInput("parameter sequences differ in length");
    std::vector<double> t(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) t[i] = 0.5 * (u[i] + v[i]);
    repair_monotone(t);
    return Parametrization(std::move(t), source);
}

inline Parametrization average_ruling_params(const Parametrization& u, const Parametrization& v) {
    return average_ruling_params(u.values(), v.values());
}

// ---------------------------------------------------------------------------
// Interpolation

/// Interior knots by averaging `degree` consecutive parameters.
inline std::vector<double> averaged_knots(std::span<const double> params, int degree) {
    const std::size_t n = params.size();
    const auto p = static_cast<std::size_t>(degree);
    std::vector<double> knots(n + p + 1, 0.0);
    for (std::size_t i = n; i < knots.size(); ++i) knots[i] = 1.0;
    for (std::size_t j = 1; j + p < n; ++j) {
        double sum = 0.0;
        for (std::size_t i = j; i < j + p; ++i) sum += params[i];
        knots[j + p] = sum / static_cast<double>(p);
    }
    return knots;
}

/// Clamped B-spline C with C(params[i]) = points[i].
inline SplineCurve interpolate(std::span<const Vec3> points, std::span<const double> params,
                               int degree = kDefaultDegree) {
    if (points.size() != params.size()) throw InvalidInput("point and parameter counts differ");
    if (degree < 1) throw InvalidInput("interpolation degree must be >= 1");
    if (points.size() < static_cast<std::size_t>(degree) + 1) {
        throw InvalidInput("interpolation needs at least degree+1 points");
    }
    std::vector<std::size_t> bad;
    for (std::size_t i = 1; i < params.size(); ++i) {
        if (!(params[i] > params[i - 1])) {
            bad.push_back(i - 1);
            bad.push_back(i);
        }
    }
    if (!bad.empty() || params.front() < 0.0 || params.back() > 1.0) {
        std::ostringstream os;
        os << "singular collocation matrix: parameters not strictly increasing at indices";
        for (auto i : bad) os << ' ' << i;
        throw SingularSystem(os.str(), std::move(bad));
    }

    const std::size_t n = points.size();
    std::vector<double> knots = averaged_knots(params, degree);
    // Placeholder net so the basis can be evaluated on the final knots.
    const SplineCurve shape(degree, knots, Points(n, Vec3::Zero()));
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd rhs(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
        const BasisEval b = shape.basis(params[i], 0);
        for (std::size_t j = 0; j < b.ders[0].size(); ++j) {
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b.first + j)) = b.ders[0][j];
        }
        rhs.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        throw SingularSystem("singular collocation matrix", std::move(all));
    }
    const Eigen::MatrixXd sol = lu.solve(rhs);
    Points cps(n);
    for (std::size_t i = 0; i < n; ++i) cps[i] = sol.row(static_cast<Eigen::Index>(i)).transpose();
    // Clamped interpolation fixes the terminal control points to the data.
    cps.front() = points.front();
    cps.back() = points.back();
    return SplineCurve(degree, std::move(knots), std::move(cps));
}

inline SplineCurve interpolate(std::span<const Vec3> points, const Parametrization& params,
                               int degree = kDefaultDegree) {
    return interpolate(points, std::span<const double>(params.values()), degree);
}

/// Interpolate at `degree` when there are enough points, otherwise through a
/// single Bezier segment of the highest possible degree raised to `degree`.
inline SplineCurve interpolate_elevated(std::span<const Vec3> points, std::span<const double> params,
                                        int degree = kDefaultDegree) {
    if (points.size() >= static_cast<std::size_t>(degree) + 1) return interpolate(points, params, degree);
    if (points.size() < 2) throw InvalidInput("interpolation needs at least two points");
    const int low = static_cast<int>(points.size()) - 1;
    return elevate_bezier(interpolate(points, params, low), degree);
}

// ---------------------------------------------------------------------------
// Quadrature

/// Gauss-Legendre nodes and weights on [-1,1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

/// Gram matrix G_ij = integral over [0,1] of N_i''(t) N_j''(t), exact per span.
inline Eigen::MatrixXd second_derivative_gram(const SplineCurve& curve) {
    const auto n = static_cast<Eigen::Index>(curve.size());
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    if (curve.degree() < 2) return G;
    const auto [x, w] = gauss_legendre(curve.degree() + 1);
    const auto& U = curve.knots();
    for (std::size_t s = 0; s + 1 < U.size(); ++s) {
        const double a = U[s], b = U[s + 1];
        if (!(b > a)) continue;
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t q = 0; q < x.size(); ++q) {
            const double t = mid + half * x[q];
            const BasisEval be = curve.basis(t, 2);
            const auto& d2 = be.ders[2];
            for (std::size_t i = 0; i < d2.size(); ++i) {
                for (std::size_t j = 0; j < d2.size(); ++j) {
                    G(static_cast<Eigen::Index>(be.first + i), static_cast<Eigen::Index>(be.first + j)) +=
                        w[q] * half * d2[i] * d2[j];
                }
            }
        }
    }
    return G;
}

// ---------------------------------------------------------------------------
// Foot point

struct FootPoint {
    double t = 0.0;
    double distance = 0.0;
};

inline constexpr int kFootScanSamples = 64;
inline constexpr int kFootNewtonIterations = 32;

namespace detail {

inline double foot_residual(const SplineCurve& c, const Vec3& p, double t) {
    return (c.evaluate(t) - p).dot(c.evaluate(t, 1));
}

// Newton on f(t) = (C(t)-P).C'(t). Returns false if an iterate leaves [0,1]
// or the iteration stalls.
inline bool newton_foot(const SplineCurve& c, const Vec3& p, double& t) {
    const bool has_second = c.degree() >= 2;
    for (int it = 0; it < kFootNewtonIterations; ++it) {
        const Vec3 r = c.evaluate(t) - p;
        const Vec3 d1 = c.evaluate(t, 1);
        const double f = r.dot(d1);
        double fp = d1.squaredNorm();
        if (has_second) fp += r.dot(c.evaluate(t, 2));
        if (!(fp > 0.0)) return false;
        const double dt = -f / fp;
        const double next = t + dt;
        if (next < 0.0 || next > 1.0) return false;
        t = next;
        if (std::abs(dt) < 1e-10) return true;
    }
    return true;
}

inline double bisect_foot(const SplineCurve& c, const Vec3& p, double lo, double hi) {
    double flo = foot_residual(c, p, lo);
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = foot_residual(c, p, mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Parameter of the nearest point on `curve` to `point`. The result is never
/// farther than the best sample of a 64-point uniform scan.
inline FootPoint foot_point(const SplineCurve& curve, const Vec3& point, double t_init) {
    t_init = std::clamp(t_init, 0.0, 1.0);
    auto dist = [&](double t) { return (curve.evaluate(t) - point).norm(); };
    auto sample = [](int j) { return static_cast<double>(j) / (kFootScanSamples - 1); };

    std::vector<double> scan(kFootScanSamples);
    for (int j = 0; j < kFootScanSamples; ++j) scan[j] = dist(sample(j));

    FootPoint best{0.0, scan[0]};
    auto consider = [&](double t) {
        const double d = dist(t);
        if (d < best.distance) best = {t, d};
    };
    for (int j = 1; j < kFootScanSamples; ++j) {
        if (scan[j] < best.distance) best = {sample(j), scan[j]};
    }

    double t = t_init;
    if (detail::newton_foot(curve, point, t)) consider(t);

    // Refine every local minimum of the scan, not just the smallest sample.
    const double h = 1.0 / (kFootScanSamples - 1);
    for (int j = 0; j < kFootScanSamples; ++j) {
        const bool left = j == 0 || scan[j] <= scan[j - 1];
        const bool right = j + 1 == kFootScanSamples || scan[j] <= scan[j + 1];
        if (!left || !right) continue;
        t = sample(j);
        if (detail::newton_foot(curve, point, t)) {
            consider(t);
            continue;
        }
        const double lo = std::max(0.0, sample(j) - h), hi = std::min(1.0, sample(j) + h);
        const double flo = detail::foot_residual(curve, point, lo);
        const double fhi = detail::foot_residual(curve, point, hi);
        if ((flo < 0.0) != (fhi < 0.0)) consider(detail::bisect_foot(curve, point, lo, hi));
    }
    return best;
}

}  // namespace devruled
