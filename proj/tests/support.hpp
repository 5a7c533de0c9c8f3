#ifndef COSSERAT_TESTS_SUPPORT_HPP
#define COSSERAT_TESTS_SUPPORT_HPP

#include "cosserat/kinematics.hpp"

#include <cmath>
#include <random>

namespace testing_support {

using namespace cosserat;

inline std::mt19937_64& rng()
{
    static std::mt19937_64 g(20240917);
    return g;
}

inline double uniform(double a = -1.0, double b = 1.0)
{
    return std::uniform_real_distribution<double>(a, b)(rng());
}

inline Quaternion random_quaternion()
{
    return {uniform(), uniform(), uniform(), uniform()};
}

inline Quaternion random_unit_quaternion()
{
    std::normal_distribution<double> n(0.0, 1.0);
    Quaternion q{n(rng()), n(rng()), n(rng()), n(rng())};
    return (1.0 / modulus(q)) * q;
}

inline Vec3 random_vec3() { return {uniform(), uniform(), uniform()}; }

inline Mat3 random_mat3()
{
    Mat3 m;
    for (double& v : m.a) v = uniform();
    return m;
}

inline double max_abs_diff(const Mat3& a, const Mat3& b)
{
    double e = 0.0;
    for (int i = 0; i < 9; ++i) e = std::max(e, std::abs(a.a[i] - b.a[i]));
    return e;
}

inline double max_abs_diff(const Quaternion& a, const Quaternion& b)
{
    double e = 0.0;
    for (int i = 0; i < 4; ++i) e = std::max(e, std::abs(a[i] - b[i]));
    return e;
}

/// Rotation by `angle` about the unit axis u (Rodrigues' formula).
inline Mat3 axis_angle(const Vec3& u, double angle)
{
    Mat3 r = std::cos(angle) * Mat3::identity();
    r.axpy(1.0 - std::cos(angle), outer(u, u));
    r.axpy(std::sin(angle), eps_skew(u));
    return r;
}

} // namespace testing_support

#endif
