#pragma once

// Ruled surfaces S(t,s) = C0(t)(1-s) + C1(t)s, their normals, warp-angle and
// distance metrics, and planar-strip checks on ruling sequences.

#include "devruled/common.hpp"
#include "devruled/splines.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <sstream>
#include <utility>
#include <vector>

namespace devruled {

inline constexpr double kMinRulingLength = 1e-9;

/// Straight segment from Q (on the C0 side) to P (on the C1 side).
struct Ruling {
    Vec3 Q = Vec3::Zero();
    Vec3 P = Vec3::Zero();

    [[nodiscard]] Vec3 direction() const { return P - Q; }
    [[nodiscard]] double length() const { return (P - Q).norm(); }
    friend bool operator==(const Ruling& a, const Ruling& b) { return a.Q == b.Q && a.P == b.P; }
};

/// Ordered control rulings L_0..L_K, K >= 1.
class RulingSequence {
public:
    explicit RulingSequence(std::vector<Ruling> rulings) : rulings_(std::move(rulings)) {
        if (rulings_.size() < 2) throw InvalidInput("a ruling sequence needs at least two rulings");
        for (std::size_t i = 0; i < rulings_.size(); ++i) {
            if (!(rulings_[i].length() > kMinRulingLength)) {
                std::ostringstream os;
                os << "degenerate ruling at index " << i;
                throw InvalidInput(os.str());
            }
            if (i > 0 && rulings_[i] == rulings_[i - 1]) {
                std::ostringstream os;
                os << "ruling " << i << " repeats ruling " << i - 1;
                throw InvalidInput(os.str());
            }
        }
    }

    [[nodiscard]] const std::vector<Ruling>& rulings() const noexcept { return rulings_; }
    [[nodiscard]] std::size_t size() const noexcept { return rulings_.size(); }
    /// K, the index of the last ruling.
    [[nodiscard]] std::size_t last_index() const noexcept { return rulings_.size() - 1; }
    [[nodiscard]] const Ruling& operator[](std::size_t i) const { return rulings_[i]; }
    [[nodiscard]] const Ruling& front() const { return rulings_.front(); }
    [[nodiscard]] const Ruling& back() const { return rulings_.back(); }

    [[nodiscard]] Points q_points() const {
        Points out;
        out.reserve(rulings_.size());
        for (const auto& r : rulings_) out.push_back(r.Q);
        return out;
    }
    [[nodiscard]] Points p_points() const {
        Points out;
        out.reserve(rulings_.size());
        for (const auto& r : rulings_) out.push_back(r.P);
        return out;
    }

    friend bool operator==(const RulingSequence& a, const RulingSequence& b) { return a.rulings_ == b.rulings_; }

private:
    std::vector<Ruling> rulings_;
};

class RuledSurface {
public:
    RuledSurface(SplineCurve c0, SplineCurve c1) : c0_(std::move(c0)), c1_(std::move(c1)) {}

    [[nodiscard]] const SplineCurve& c0() const noexcept { return c0_; }
    [[nodiscard]] const SplineCurve& c1() const noexcept { return c1_; }

private:
    SplineCurve c0_;
    SplineCurve c1_;
};

namespace detail {
inline void check_unit(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "surface parameter " << name << "=" << v << " outside [0,1]";
        throw DomainError(os.str());
    }
}
}  // namespace detail

inline Vec3 eval_surface(const RuledSurface& surface, double t, double s) {
    detail::check_unit(t, "t");
    detail::check_unit(s, "s");
    return surface.c0().evaluate(t) * (1.0 - s) + surface.c1().evaluate(t) * s;
}

inline constexpr double kDegenerateNormal = 1e-12;

/// Unnormalized normal dS/dt x dS/ds.
inline Vec3 surface_normal_raw(const RuledSurface& surface, double t, double s) {
    detail::check_unit(t, "t");
    detail::check_unit(s, "s");
    const Vec3 dt = surface.c0().evaluate(t, 1) * (1.0 - s) + surface.c1().evaluate(t, 1) * s;
    const Vec3 ds = surface.c1().evaluate(t) - surface.c0().evaluate(t);
    return dt.cross(ds);
}

inline Vec3 surface_normal(const RuledSurface& surface, double t, double s) {
    const Vec3 n = surface_normal_raw(surface, t, s);
    const double len = n.norm();
    if (!(len >= kDegenerateNormal)) {
        std::ostringstream os;
        os << "degenerate surface normal at (t,s)=(" << t << "," << s << ")";
        throw DegenerateNormal(os.str());
    }
    return n / len;
}

/// Angle in degrees between the normals at both ends of the ruling at t.
inline double warp_angle(const RuledSurface& surface, double t) {
    return angle_deg(surface_normal(surface, t, 0.0), surface_normal(surface, t, 1.0));
}

struct MetricsReport {
    double beta_max = 0.0;
    double beta_avg = 0.0;
    double d_max = 0.0;
    double d_avg = 0.0;
    int sample_count = 0;
    /// Parameters of samples with a degenerate normal; excluded from beta.
    std::vector<double> defects;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline constexpr int kDefaultMetricSamples = 100;

inline std::vector<double> uniform_samples(int count) {
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) t[j] = static_cast<double>(j) / (count - 1);
    if (count > 0) t.back() = 1.0;
    return t;
}

/// Foot-point distances from every Q_i to C0 and every P_i to C1.
inline std::vector<double> projection_distances(const RuledSurface& surface, const RulingSequence& rulings) {
    std::vector<double> d;
    d.reserve(2 * rulings.size());
    const double K = static_cast<double>(rulings.last_index());
    for (std::size_t i = 0; i < rulings.size(); ++i) {
        const double guess = static_cast<double>(i) / K;
        d.push_back(foot_point(surface.c0(), rulings[i].Q, guess).distance);
        d.push_back(foot_point(surface.c1(), rulings[i].P, guess).distance);
    }
    return d;
}

/// Distances between ruling endpoints and the curve points at their own parameters.
inline std::vector<double> matched_distances(const RuledSurface& surface, const RulingSequence& rulings,
                                             std::span<const double> params) {
    if (params.size() != rulings.size()) throw InvalidInput("parameter count differs from ruling count");
    std::vector<double> d;
    d.reserve(2 * rulings.size());
    for (std::size_t i = 0; i < rulings.size(); ++i) {
        d.push_back((surface.c0().evaluate(params[i]) - rulings[i].Q).norm());
        d.push_back((surface.c1().evaluate(params[i]) - rulings[i].P).norm());
    }
    return d;
}

inline MetricsReport compute_metrics(const RuledSurface& surface, const RulingSequence& rulings,
                                     int sample_count = kDefaultMetricSamples) {
    if (sample_count < 2) throw InvalidInput("metrics need at least two samples");
    MetricsReport m;
    m.sample_count = sample_count;
    double sum = 0.0;
    int used = 0;
    for (double t : uniform_samples(sample_count)) {
        try {
            const double b = warp_angle(surface, t);
            m.beta_max = std::max(m.beta_max, b);
            sum += b;
            ++used;
        } catch (const DegenerateNormal&) {
            m.defects.push_back(t);
        }
    }
    m.beta_avg = used > 0 ? sum / used : 0.0;
    const auto d = projection_distances(surface, rulings);
    double dsum = 0.0;
    for (double v : d) {
        m.d_max = std::max(m.d_max, v);
        dsum += v;
    }
    m.d_avg = dsum / static_cast<double>(d.size());
    return m;
}

// ---------------------------------------------------------------------------
// Planar strips

/// Tetrahedron volume of {P_i, Q_i, Q_{i+1}, P_{i+1}} divided by the
/// 1.5-power of the mean squared length of its six edges. Zero iff the two
/// rulings are coplanar.
inline double quad_planarity_defect(const Ruling& a, const Ruling& b) {
    const std::array<Vec3, 4> v{a.P, a.Q, b.Q, b.P};
    const double volume = std::abs((v[1] - v[0]).dot((v[2] - v[0]).cross(v[3] - v[0]))) / 6.0;
    double sq = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) sq += (v[i] - v[j]).squaredNorm();
    }
    const double mean_sq = sq / 6.0;
    return volume / std::pow(mean_sq, 1.5);
}

inline std::vector<double> strip_planarity_defect(const RulingSequence& rulings) {
    std::vector<double> out;
    out.reserve(rulings.size() - 1);
    for (std::size_t i = 0; i + 1 < rulings.size(); ++i) {
        out.push_back(quad_planarity_defect(rulings[i], rulings[i + 1]));
    }
    return out;
}

/// Auxiliary segment W_i = (A_i, B_i); A_i lies on ruling L_i and B_i tilts
/// the plane through L_i.
struct Anchor {
    Vec3 A = Vec3::Zero();
    Vec3 B = Vec3::Zero();
    friend bool operator==(const Anchor& a, const Anchor& b) { return a.A == b.A && a.B == b.B; }
};

inline constexpr double kAnchorOnRulingTolerance = 1e-9;

inline double distance_to_line(const Vec3& x, const Vec3& a, const Vec3& b) {
    const Vec3 d = b - a;
    return (x - a).cross(d).norm() / d.norm();
}

/// Plane through a ruling and the tip of its anchor segment.
struct Plane {
    Vec3 origin;
    Vec3 normal;  // unit

    [[nodiscard]] double signed_distance(const Vec3& x) const { return (x - origin).dot(normal); }
    [[nodiscard]] Vec3 project(const Vec3& x) const { return x - signed_distance(x) * normal; }
};

inline Plane ruling_plane(const Ruling& ruling, const Anchor& anchor) {
    if (distance_to_line(anchor.A, ruling.Q, ruling.P) > kAnchorOnRulingTolerance) {
        throw InvalidInput("anchor point A does not lie on its ruling");
    }
    const Vec3 n = ruling.direction().cross(anchor.B - anchor.A);
    const double len = n.norm();
    if (!(len > kDegenerateNormal * ruling.length())) {
        throw InvalidInput("anchor segment is parallel to its ruling; plane undefined");
    }
    return {ruling.Q, n / len};
}

/// Anchors for the rulings of a strip built plane by plane. `anchors[i]`
/// defines the plane through ruling i on which ruling i+1 is placed.
struct PlaneChain {
    std::vector<Anchor> anchors;
};

/// Rejection of a candidate ruling whose endpoints are too far from the active plane.
class PlaneSnapError : public std::runtime_error {
public:
    PlaneSnapError(const std::string& what, double q_distance, double p_distance)
        : std::runtime_error(what), q_distance_(q_distance), p_distance_(p_distance) {}
    [[nodiscard]] double q_distance() const noexcept { return q_distance_; }
    [[nodiscard]] double p_distance() const noexcept { return p_distance_; }
    [[nodiscard]] double distance() const noexcept { return std::max(q_distance_, p_distance_); }

private:
    double q_distance_;
    double p_distance_;
};

inline constexpr double kDefaultSnapTolerance = 1e-6;

/// Append a ruling on the plane defined by the last ruling and the last anchor,
/// snapping both endpoints onto that plane.
inline RulingSequence extend_chain(const PlaneChain& chain, const RulingSequence& rulings, const Vec3& next_Q,
                                   const Vec3& next_P, double snap_tolerance = kDefaultSnapTolerance) {
    if (chain.anchors.size() != rulings.size()) {
        throw InvalidInput("plane chain needs exactly one anchor per ruling");
    }
    const Plane plane = ruling_plane(rulings.back(), chain.anchors.back());
    const double dq = std::abs(plane.signed_distance(next_Q));
    const double dp = std::abs(plane.signed_distance(next_P));
    if (dq > snap_tolerance || dp > snap_tolerance) {
        std::ostringstream os;
        os << "candidate ruling is off the active plane (Q distance " << dq << ", P distance " << dp
           << ", tolerance " << snap_tolerance << ")";
        throw PlaneSnapError(os.str(), dq, dp);
    }
    std::vector<Ruling> out = rulings.rulings();
    Ruling next{dq == 0.0 ? next_Q : plane.project(next_Q), dp == 0.0 ? next_P : plane.project(next_P)};
    out.push_back(next);
    return RulingSequence(std::move(out));
}

}  // namespace devruled
