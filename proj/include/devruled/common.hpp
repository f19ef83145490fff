#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace devruled {

using Vec3 = Eigen::Vector3d;
using Points = std::vector<Vec3>;

/// Parameter or argument outside its admissible range.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Input data that violates a structural precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear system that cannot be solved, e.g. a collocation matrix built
/// from coincident parameters. `indices` names the offending data entries.
class SingularSystem : public std::runtime_error {
public:
    SingularSystem(const std::string& what, std::vector<std::size_t> indices)
        : std::runtime_error(what), indices_(std::move(indices)) {}

    [[nodiscard]] const std::vector<std::size_t>& indices() const noexcept { return indices_; }

private:
    std::vector<std::size_t> indices_;
};

/// Surface normal requested where the partial derivatives are parallel.
class DegenerateNormal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

inline double rad_to_deg(double r) noexcept { return r * 180.0 / kPi; }

/// Angle between two nonzero vectors in degrees, robust near 0 and 180.
inline double angle_deg(const Vec3& a, const Vec3& b) noexcept {
    return rad_to_deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

}  // namespace devruled
