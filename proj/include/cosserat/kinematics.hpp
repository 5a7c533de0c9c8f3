#ifndef COSSERAT_KINEMATICS_HPP
#define COSSERAT_KINEMATICS_HPP

// Small-tensor algebra, quaternions and the two rotation parameterizations
// (Euler-Rodrigues quaternion map and the x-y-z Euler-angle product).
//
// Quaternions are stored as (q0, q1, q2, q3) with q0 the real part.

#include "cosserat/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

namespace cosserat {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// 3x3 real tensor, row-major.
struct Mat3 {
    std::array<double, 9> a{};

    double& operator()(int i, int j) { return a[3 * i + j]; }
    double operator()(int i, int j) const { return a[3 * i + j]; }

    static Mat3 zero() { return {}; }

    static Mat3 identity()
    {
        Mat3 m;
        m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
        return m;
    }

    static Mat3 diag(double x, double y, double z)
    {
        Mat3 m;
        m(0, 0) = x;
        m(1, 1) = y;
        m(2, 2) = z;
        return m;
    }

    static Mat3 rows(const Vec3& r0, const Vec3& r1, const Vec3& r2)
    {
        Mat3 m;
        for (int j = 0; j < 3; ++j) {
            m(0, j) = r0[j];
            m(1, j) = r1[j];
            m(2, j) = r2[j];
        }
        return m;
    }

    Mat3& operator+=(const Mat3& o)
    {
        for (int i = 0; i < 9; ++i) a[i] += o.a[i];
        return *this;
    }

    Mat3& operator-=(const Mat3& o)
    {
        for (int i = 0; i < 9; ++i) a[i] -= o.a[i];
        return *this;
    }

    Mat3& operator*=(double s)
    {
        for (double& v : a) v *= s;
        return *this;
    }

    /// this += s * o
    void axpy(double s, const Mat3& o)
    {
        for (int i = 0; i < 9; ++i) a[i] += s * o.a[i];
    }
};

inline Mat3 operator+(Mat3 x, const Mat3& y) { return x += y; }
inline Mat3 operator-(Mat3 x, const Mat3& y) { return x -= y; }
inline Mat3 operator*(double s, Mat3 x) { return x *= s; }

inline Mat3 operator*(const Mat3& x, const Mat3& y)
{
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r(i, j) = x(i, 0) * y(0, j) + x(i, 1) * y(1, j) + x(i, 2) * y(2, j);
    return r;
}

inline Vec3 operator*(const Mat3& m, const Vec3& v)
{
    return {m(0, 0) * v[0] + m(0, 1) * v[1] + m(0, 2) * v[2],
            m(1, 0) * v[0] + m(1, 1) * v[1] + m(1, 2) * v[2],
            m(2, 0) * v[0] + m(2, 1) * v[1] + m(2, 2) * v[2]};
}

inline Mat3 transpose(const Mat3& m)
{
    Mat3 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t(i, j) = m(j, i);
    return t;
}

inline double trace(const Mat3& m) { return m(0, 0) + m(1, 1) + m(2, 2); }
inline Mat3 sym(const Mat3& m) { return 0.5 * (m + transpose(m)); }
inline Mat3 skw(const Mat3& m) { return 0.5 * (m - transpose(m)); }

/// A:B = tr(A^t B)
inline double inner(const Mat3& x, const Mat3& y)
{
    double s = 0.0;
    for (int i = 0; i < 9; ++i) s += x.a[i] * y.a[i];
    return s;
}

inline double frobenius_norm(const Mat3& m) { return std::sqrt(inner(m, m)); }

inline Mat3 outer(const Vec3& u, const Vec3& v)
{
    Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = u[i] * v[j];
    return m;
}

inline double det(const Mat3& m)
{
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
         - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
         + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

inline Mat3 cofactor(const Mat3& m)
{
    Mat3 c;
    c(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    c(0, 1) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
    c(0, 2) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
    c(1, 0) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
    c(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
    c(1, 2) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
    c(2, 0) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
    c(2, 1) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
    c(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return c;
}

inline Mat3 inverse(const Mat3& m)
{
    const double d = det(m);
    if (d == 0.0 || !std::isfinite(d)) throw DomainError("inverse: singular matrix");
    return (1.0 / d) * transpose(cofactor(m));
}

/// Alternating skew tensor: eps_skew(v) w = v x w.
inline Mat3 eps_skew(const Vec3& v)
{
    return Mat3::rows({0.0, -v[2], v[1]}, {v[2], 0.0, -v[0]}, {-v[1], v[0], 0.0});
}

// ---------------------------------------------------------------------------
// Quaternions

struct Quaternion {
    double q0 = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    double q3 = 0.0;

    static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
    static Quaternion pure(const Vec3& v) { return {0.0, v[0], v[1], v[2]}; }

    Vec3 vec() const { return {q1, q2, q3}; }

    double operator[](int b) const
    {
        switch (b) {
        case 0: return q0;
        case 1: return q1;
        case 2: return q2;
        default: return q3;
        }
    }

    double& operator[](int b)
    {
        switch (b) {
        case 0: return q0;
        case 1: return q1;
        case 2: return q2;
        default: return q3;
        }
    }

    friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

inline Quaternion operator+(const Quaternion& p, const Quaternion& q)
{
    return {p.q0 + q.q0, p.q1 + q.q1, p.q2 + q.q2, p.q3 + q.q3};
}

inline Quaternion operator-(const Quaternion& p, const Quaternion& q)
{
    return {p.q0 - q.q0, p.q1 - q.q1, p.q2 - q.q2, p.q3 - q.q3};
}

inline Quaternion operator*(double s, const Quaternion& q) { return {s * q.q0, s * q.q1, s * q.q2, s * q.q3}; }
inline Quaternion operator-(const Quaternion& q) { return -1.0 * q; }

inline double dot(const Quaternion& p, const Quaternion& q)
{
    return p.q0 * q.q0 + p.q1 * q.q1 + p.q2 * q.q2 + p.q3 * q.q3;
}

/// Hamilton product p0q0 - p.q + p0 q + q0 p + p x q.
inline Quaternion hmul(const Quaternion& p, const Quaternion& q)
{
    return {p.q0 * q.q0 - p.q1 * q.q1 - p.q2 * q.q2 - p.q3 * q.q3,
            p.q0 * q.q1 + q.q0 * p.q1 + p.q2 * q.q3 - p.q3 * q.q2,
            p.q0 * q.q2 + q.q0 * p.q2 + p.q3 * q.q1 - p.q1 * q.q3,
            p.q0 * q.q3 + q.q0 * p.q3 + p.q1 * q.q2 - p.q2 * q.q1};
}

inline Quaternion conjugate(const Quaternion& q) { return {q.q0, -q.q1, -q.q2, -q.q3}; }
inline double squared_modulus(const Quaternion& q) { return dot(q, q); }
inline double modulus(const Quaternion& q) { return std::sqrt(dot(q, q)); }

inline Quaternion inverse(const Quaternion& q)
{
    const double n2 = squared_modulus(q);
    if (n2 == 0.0) throw DomainError("inverse: zero quaternion");
    return (1.0 / n2) * conjugate(q);
}

inline constexpr double unit_tolerance = 1e-8;

namespace detail {

// Homogeneous Euler-Rodrigues matrix; equals |q|^2 R(q/|q|).
inline Mat3 rotation_unscaled(const Quaternion& q)
{
    const double a = q.q0, b = q.q1, c = q.q2, d = q.q3;
    Mat3 r;
    r(0, 0) = a * a + b * b - c * c - d * d;
    r(0, 1) = 2.0 * (b * c - a * d);
    r(0, 2) = 2.0 * (b * d + a * c);
    r(1, 0) = 2.0 * (b * c + a * d);
    r(1, 1) = a * a - b * b + c * c - d * d;
    r(1, 2) = 2.0 * (c * d - a * b);
    r(2, 0) = 2.0 * (b * d - a * c);
    r(2, 1) = 2.0 * (c * d + a * b);
    r(2, 2) = a * a - b * b - c * c + d * d;
    return r;
}

// d rotation_unscaled / d q_b (linear in q).
inline std::array<Mat3, 4> rotation_unscaled_derivative(const Quaternion& q)
{
    const double a = q.q0, b = q.q1, c = q.q2, d = q.q3;
    std::array<Mat3, 4> m;
    m[0] = Mat3::rows({a, -d, c}, {d, a, -b}, {-c, b, a});
    m[1] = Mat3::rows({b, c, d}, {c, -b, -a}, {d, a, -b});
    m[2] = Mat3::rows({-c, b, a}, {b, c, d}, {-a, d, -c});
    m[3] = Mat3::rows({-d, -a, b}, {a, -d, c}, {b, c, d});
    for (auto& x : m) x *= 2.0;
    return m;
}

} // namespace detail

/// Euler-Rodrigues rotation of a unit quaternion,
/// (2q0^2 - |q|^2) I + 2 qhat (x) qhat + 2 q0 eps(qhat).
inline Mat3 rotation(const Quaternion& q)
{
    const double n = modulus(q);
    if (!(std::abs(n - 1.0) <= unit_tolerance))
        throw ContractViolation("rotation: quaternion is not unit (|q| = " + std::to_string(n) + ")");
    const Vec3 v = q.vec();
    Mat3 r = (2.0 * q.q0 * q.q0 - n * n) * Mat3::identity();
    r.axpy(2.0, outer(v, v));
    r.axpy(2.0 * q.q0, eps_skew(v));
    return r;
}

/// Scale-invariant rotation R(q/|q|), defined for every nonzero q.
inline Mat3 rotation_normalized(const Quaternion& q)
{
    const double n2 = squared_modulus(q);
    if (!(n2 > 0.0)) throw DomainError("rotation_normalized: zero quaternion");
    return (1.0 / n2) * detail::rotation_unscaled(q);
}

/// Value and the four partial derivatives d/dq_b of rotation_normalized(q).
struct RotationJet {
    Mat3 value;
    std::array<Mat3, 4> d;
};

inline RotationJet rotation_normalized_jet(const Quaternion& q)
{
    const double n2 = squared_modulus(q);
    if (!(n2 > 0.0)) throw DomainError("rotation_normalized: zero quaternion");
    const Mat3 raw = detail::rotation_unscaled(q);
    const auto draw = detail::rotation_unscaled_derivative(q);
    RotationJet jet;
    jet.value = (1.0 / n2) * raw;
    for (int b = 0; b < 4; ++b) {
        jet.d[b] = (1.0 / n2) * draw[b];
        jet.d[b].axpy(-2.0 * q[b] / (n2 * n2), raw);
    }
    return jet;
}

// ---------------------------------------------------------------------------
// Euler angles

struct EulerAngles {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;

    double operator[](int i) const { return i == 0 ? a1 : (i == 1 ? a2 : a3); }
    double& operator[](int i) { return i == 0 ? a1 : (i == 1 ? a2 : a3); }
    friend bool operator==(const EulerAngles&, const EulerAngles&) = default;
};

namespace detail {

// The three elementary factors R3(a3) R2(a2) R1(a1) as displayed in the
// classical Euler-angle Cosserat code, and their derivatives.
inline Mat3 euler_factor3(double t) { const double c = std::cos(t), s = std::sin(t); return Mat3::rows({1, 0, 0}, {0, c, s}, {0, -s, c}); }
inline Mat3 euler_factor2(double t) { const double c = std::cos(t), s = std::sin(t); return Mat3::rows({c, 0, -s}, {0, 1, 0}, {s, 0, c}); }
inline Mat3 euler_factor1(double t) { const double c = std::cos(t), s = std::sin(t); return Mat3::rows({c, s, 0}, {-s, c, 0}, {0, 0, 1}); }
inline Mat3 euler_factor3_d(double t) { const double c = std::cos(t), s = std::sin(t); return Mat3::rows({0, 0, 0}, {0, -s, c}, {0, -c, -s}); }
inline Mat3 euler_factor2_d(double t) { const double c = std::cos(t), s = std::sin(t); return Mat3::rows({-s, 0, -c}, {0, 0, 0}, {c, 0, -s}); }
inline Mat3 euler_factor1_d(double t) { const double c = std::cos(t), s = std::sin(t); return Mat3::rows({-s, c, 0}, {-c, -s, 0}, {0, 0, 0}); }

} // namespace detail

inline Mat3 rotation_euler(const EulerAngles& al)
{
    return detail::euler_factor3(al.a3) * detail::euler_factor2(al.a2) * detail::euler_factor1(al.a1);
}

/// Value and partials d/d a_i (i = 0,1,2 for a1,a2,a3) of rotation_euler.
struct EulerJet {
    Mat3 value;
    std::array<Mat3, 3> d;
};

inline EulerJet rotation_euler_jet(const EulerAngles& al)
{
    using namespace detail;
    const Mat3 f3 = euler_factor3(al.a3), f2 = euler_factor2(al.a2), f1 = euler_factor1(al.a1);
    EulerJet jet;
    jet.value = f3 * f2 * f1;
    jet.d[0] = f3 * f2 * euler_factor1_d(al.a1);
    jet.d[1] = f3 * euler_factor2_d(al.a2) * f1;
    jet.d[2] = euler_factor3_d(al.a3) * f2 * f1;
    return jet;
}

/// Inverse of rotation_euler on its regular chart; at gimbal lock (|cos a2| ~ 0)
/// a3 is set to zero.
inline EulerAngles euler_from_rotation(const Mat3& r)
{
    EulerAngles al;
    al.a2 = std::asin(std::clamp(-r(0, 2), -1.0, 1.0));
    if (std::abs(std::cos(al.a2)) > 1e-12) {
        al.a3 = std::atan2(r(1, 2), r(2, 2));
        al.a1 = std::atan2(r(0, 1), r(0, 0));
    } else {
        al.a3 = 0.0;
        al.a1 = std::atan2(-r(1, 0), r(1, 1));
    }
    return al;
}

// ---------------------------------------------------------------------------
// Curvature (Darboux) vectors

struct CurvatureVector {
    Vec3 k{};
    /// Real part of 2 qbar dq; vanishes for unit-norm fields.
    double real_part = 0.0;
};

/// Vector part of 2 qbar dq, where dq is a directional derivative of the field.
inline CurvatureVector curvature_vector(const Quaternion& qbar, const Quaternion& dq)
{
    const Quaternion k = 2.0 * hmul(qbar, dq);
    return {k.vec(), k.q0};
}

// ---------------------------------------------------------------------------
// Polar decomposition and matrix -> quaternion

struct PolarDecomposition {
    Mat3 rotation;
    Mat3 stretch;
};

/// F = R U via the Newton iteration R <- (R + R^{-T})/2 seeded with F.
inline PolarDecomposition polar_decompose(const Mat3& f)
{
    const double d = det(f);
    if (!(d > 0.0) || !std::isfinite(d))
        throw DomainError("polar_decompose: det(F) must be positive");
    Mat3 r = f;
    for (int it = 0; it < 100; ++it) {
        const Mat3 next = 0.5 * (r + transpose(inverse(r)));
        const double change = frobenius_norm(next - r);
        r = next;
        if (change <= 1e-12 * std::max(1.0, frobenius_norm(r))) break;
    }
    return {r, sym(transpose(r) * f)};
}

/// Unit quaternion with rotation(q) = R. Sign convention: q0 >= 0, and when
/// q0 vanishes the first nonzero vector component is positive.
inline Quaternion quat_from_rotation(const Mat3& r)
{
    if (frobenius_norm(transpose(r) * r - Mat3::identity()) > unit_tolerance
        || std::abs(det(r) - 1.0) > unit_tolerance)
        throw DomainError("quat_from_rotation: matrix is not in SO(3)");

    // Largest-pivot extraction: pick the biggest of 4q0^2, 4q1^2, 4q2^2, 4q3^2.
    const double t = trace(r);
    const std::array<double, 4> pivots{1.0 + t, 1.0 + 2.0 * r(0, 0) - t, 1.0 + 2.0 * r(1, 1) - t,
                                       1.0 + 2.0 * r(2, 2) - t};
    const int p = static_cast<int>(std::max_element(pivots.begin(), pivots.end()) - pivots.begin());
    Quaternion q;
    const double s = std::sqrt(std::max(pivots[p], 0.0));
    switch (p) {
    case 0:
        q = {0.5 * s, (r(2, 1) - r(1, 2)) / (2.0 * s), (r(0, 2) - r(2, 0)) / (2.0 * s),
             (r(1, 0) - r(0, 1)) / (2.0 * s)};
        break;
    case 1:
        q = {(r(2, 1) - r(1, 2)) / (2.0 * s), 0.5 * s, (r(0, 1) + r(1, 0)) / (2.0 * s),
             (r(0, 2) + r(2, 0)) / (2.0 * s)};
        break;
    case 2:
        q = {(r(0, 2) - r(2, 0)) / (2.0 * s), (r(0, 1) + r(1, 0)) / (2.0 * s), 0.5 * s,
             (r(1, 2) + r(2, 1)) / (2.0 * s)};
        break;
    default:
        q = {(r(1, 0) - r(0, 1)) / (2.0 * s), (r(0, 2) + r(2, 0)) / (2.0 * s),
             (r(1, 2) + r(2, 1)) / (2.0 * s), 0.5 * s};
        break;
    }
    q = (1.0 / modulus(q)) * q;

    constexpr double zero_tol = 1e-15;
    bool flip = q.q0 < -zero_tol;
    if (std::abs(q.q0) <= zero_tol) {
        for (int b = 1; b < 4; ++b) {
            if (std::abs(q[b]) > zero_tol) {
                flip = q[b] < 0.0;
                break;
            }
        }
    }
    return flip ? -q : q;
}

} // namespace cosserat

#endif
