#ifndef COSSERAT_ENERGY_HPP
#define COSSERAT_ENERGY_HPP

// Time-discrete Cosserat energy with single-slip holonomic plasticity and its
// analytic gradient on a structured grid.
//
// Integrand per node:
//   W_st(R^t Dphi Fp(gamma)^-1) + W_c + Lambda (|q|^2 - 1)^2 - f.phi - M:R
//   + rho (gamma - gamma0)^2 + r_eps(gamma - gamma0) (sigma_Y - 2 rho kappa0)
// summed with the trapezoidal weights (w/8) N_ijk.

#include "cosserat/error.hpp"
#include "cosserat/grid.hpp"
#include "cosserat/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace cosserat {

enum class CurvatureVariant {
    full,       ///< mu2 sum_l |d_l R(q)|^2
    simplified, ///< 2 mu2 sum_l |d_l q|^2
    euler       ///< 2 mu2 sum_l |d_l alpha|^2
};

struct MaterialParams {
    double mu = 1e4;
    double lambda = 1e3;
    double mu_c = 2e4;
    double mu2 = 100.0;
    double rho = 0.0;
    double sigma_y = 0.0;
    double penalty = 20.0;  ///< Lambda, weight of (|q|^2 - 1)^2
    double eps_reg = 1e-4;  ///< regularization band of |gamma - gamma0|
    Vec3 slip{1.0, 0.0, 0.0};
    Vec3 normal{0.0, 1.0, 0.0};
    Vec3 f_ext{0.0, 0.0, 0.0};
    Mat3 m_ext{};
    CurvatureVariant curvature = CurvatureVariant::full;

    void validate() const
    {
        if (!(mu > 0 && lambda > 0 && mu_c > 0 && mu2 > 0 && penalty > 0))
            throw ConfigurationError("material: mu, lambda, mu_c, mu2 and penalty must be positive");
        if (!(rho >= 0 && sigma_y >= 0)) throw ConfigurationError("material: rho and sigma_y must be non-negative");
        if (!(eps_reg > 0)) throw ConfigurationError("material: eps_reg must be positive");
        if (std::abs(norm(slip) - 1.0) > 1e-12 || std::abs(norm(normal) - 1.0) > 1e-12)
            throw ConfigurationError("material: slip vector and slip normal must have unit length");
        if (std::abs(dot(slip, normal)) > 1e-12)
            throw ConfigurationError("material: slip vector and slip normal must be orthogonal");
    }
};

/// Slip and dislocation density of the previous time step.
struct PlasticHistory {
    std::vector<double> gamma0;
    std::vector<double> kappa0;

    static PlasticHistory zero(std::int64_t nodes)
    {
        return {std::vector<double>(nodes, 0.0), std::vector<double>(nodes, 0.0)};
    }

    void validate(std::int64_t nodes) const
    {
        if (static_cast<std::int64_t>(gamma0.size()) != nodes || static_cast<std::int64_t>(kappa0.size()) != nodes)
            throw StructuralError("plastic history does not match the grid");
        for (double k : kappa0)
            if (k > 0.0) throw ConfigurationError("plastic history: kappa0 must be <= 0");
    }
};

// ---------------------------------------------------------------------------
// Pointwise constitutive pieces

/// Fp = I + gamma m (x) n; det Fp = 1 since m.n = 0.
inline Mat3 fp(double gamma, const Vec3& m, const Vec3& n)
{
    Mat3 r = Mat3::identity();
    r.axpy(gamma, outer(m, n));
    return r;
}

/// Exact inverse I - gamma m (x) n, because (m (x) n)^2 = (m.n) m (x) n = 0.
inline Mat3 fp_inverse(double gamma, const Vec3& m, const Vec3& n)
{
    Mat3 r = Mat3::identity();
    r.axpy(-gamma, outer(m, n));
    return r;
}

inline double stretch_energy(const Mat3& ue, const MaterialParams& p)
{
    const Mat3 id = Mat3::identity();
    const Mat3 s = sym(ue) - id;
    const Mat3 k = skw(ue);
    const double tr = trace(ue) - 3.0;
    return p.mu * inner(s, s) + p.mu_c * inner(k, k) + 0.5 * p.lambda * tr * tr;
}

/// dW_st / dUe.
inline Mat3 stretch_stress(const Mat3& ue, const MaterialParams& p)
{
    Mat3 s = 2.0 * p.mu * (sym(ue) - Mat3::identity());
    s.axpy(2.0 * p.mu_c, skw(ue));
    s.axpy(p.lambda * (trace(ue) - 3.0), Mat3::identity());
    return s;
}

/// C^1 regularization of |x|: quadratic x^2/eps inside [-eps, eps].
inline double reg_abs(double x, double eps)
{
    if (x > eps) return x;
    if (x < -eps) return -x;
    return x * x / eps;
}

inline double reg_abs_derivative(double x, double eps)
{
    if (x > eps) return 1.0;
    if (x < -eps) return -1.0;
    return 2.0 * x / eps;
}

/// kappa = kappa0 - |gamma - gamma0| (exact modulus).
inline double hardening_update(double gamma, double gamma0, double kappa0)
{
    return kappa0 - std::abs(gamma - gamma0);
}

/// mu2 sum_l |dR(q)[dq_l]|^2 with the chain-rule derivative of the normalized
/// rotation along the given quaternion derivatives.
inline double curvature_density_full(const Quaternion& q, const std::array<Quaternion, 3>& dq, double mu2)
{
    const RotationJet jet = rotation_normalized_jet(q);
    double s = 0.0;
    for (int l = 0; l < 3; ++l) {
        Mat3 dr;
        for (int b = 0; b < 4; ++b) dr.axpy(dq[l][b], jet.d[b]);
        s += inner(dr, dr);
    }
    return mu2 * s;
}

/// 2 mu2 sum_l |K^l|^2 with K^l = 2 qbar dq_l.
inline double curvature_density_darboux(const Quaternion& q, const std::array<Quaternion, 3>& dq, double mu2)
{
    double s = 0.0;
    for (int l = 0; l < 3; ++l) {
        const Vec3 k = curvature_vector(conjugate(q), dq[l]).k;
        s += dot(k, k);
    }
    return 2.0 * mu2 * s;
}

inline double curvature_density_simplified(const std::array<Quaternion, 3>& dq, double mu2)
{
    return 2.0 * mu2 * (dot(dq[0], dq[0]) + dot(dq[1], dq[1]) + dot(dq[2], dq[2]));
}

// ---------------------------------------------------------------------------
// Assembly

namespace detail {

/// Runs fn(k) for every k-plane, split over up to `threads` workers.
inline void for_each_plane(int planes, int threads, const std::function<void(int)>& fn)
{
    threads = std::clamp(threads, 1, planes);
    if (threads == 1) {
        for (int k = 0; k < planes; ++k) fn(k);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (int k = t; k < planes; k += threads) fn(k);
        });
    }
    for (auto& th : pool) th.join();
}

inline bool finite(const Vec3& v) { return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]); }

} // namespace detail

/// Breakdown of the quadrature sum by term.
struct EnergyParts {
    double stretch = 0.0;
    double curvature = 0.0;
    double constraint = 0.0; ///< integral of Lambda (|q|^2 - 1)^2
    double external = 0.0;
    double plastic = 0.0;

    double total() const { return stretch + curvature + constraint + external + plastic; }
};

/// Energy and gradient assembler bound to one grid, material and history.
///
/// Evaluation is a two-pass reduction: a per-node pass computes integrand
/// values and adjoints with respect to the local deformation gradient and
/// rotation, and a gather pass collects them through the finite-difference
/// stencils. Plane partial sums are added in a fixed order, so results do
/// not depend on the thread count.
class EnergyModel {
public:
    EnergyModel(Grid3 grid, MaterialParams params, PlasticHistory history, Parameterization param,
                int threads = 1)
        : grid_(std::move(grid)), p_(params), hist_(std::move(history)), param_(param), threads_(threads)
    {
        p_.validate();
        hist_.validate(grid_.node_count());
        const bool euler_variant = p_.curvature == CurvatureVariant::euler;
        if (euler_variant != (param_ == Parameterization::euler))
            throw ConfigurationError("energy: the euler curvature variant requires (and is required by) the "
                                     "Euler-angle parameterization");
        const auto n = static_cast<std::size_t>(grid_.node_count());
        weight_.resize(n);
        for (std::int64_t node = 0; node < grid_.node_count(); ++node)
            weight_[node] = quadrature_weight(grid_, grid_.node(node));
    }

    const Grid3& grid() const { return grid_; }
    const MaterialParams& params() const { return p_; }
    const PlasticHistory& history() const { return hist_; }
    Parameterization parameterization() const { return param_; }
    void set_threads(int t) { threads_ = std::max(1, t); }

    double energy(const FieldState& s) const { return evaluate(s, nullptr).total(); }

    EnergyParts parts(const FieldState& s) const { return evaluate(s, nullptr); }

    /// Energy and nodal gradient. The nodal gradient has slots_per_node
    /// entries per node (phi, rotation, gamma), including fixed slots.
    double energy_and_gradient(const FieldState& s, std::vector<double>& nodal_grad) const
    {
        return evaluate(s, &nodal_grad).total();
    }

    /// Gradient restricted to the free entries of a layout.
    std::vector<double> free_gradient(const FieldState& s, const DofLayout& layout) const
    {
        std::vector<double> nodal;
        evaluate(s, &nodal);
        return restrict_gradient(nodal, layout);
    }

    static std::vector<double> restrict_gradient(const std::vector<double>& nodal, const DofLayout& layout)
    {
        std::vector<double> g(static_cast<std::size_t>(layout.free_count()));
        for (std::int64_t e = 0; e < layout.free_count(); ++e) g[e] = nodal[layout.slot_of(e)];
        return g;
    }

    /// Curvature integrand at one node, for the selected variant.
    double curvature_at_node(const FieldState& s, const Index3& ijk) const
    {
        double wc = 0.0;
        switch (p_.curvature) {
        case CurvatureVariant::full:
            for (int l = 0; l < 3; ++l) {
                const Mat3 d = grid_derivative(grid_, ijk, l, [&](std::int64_t m) { return rotation_normalized(s.q[m]); });
                wc += inner(d, d);
            }
            return p_.mu2 * wc;
        case CurvatureVariant::simplified:
            for (int l = 0; l < 3; ++l) {
                const Quaternion d = grid_derivative(grid_, ijk, l, [&](std::int64_t m) { return s.q[m]; });
                wc += dot(d, d);
            }
            return 2.0 * p_.mu2 * wc;
        case CurvatureVariant::euler:
            for (int l = 0; l < 3; ++l) {
                const Vec3 d = grid_derivative(grid_, ijk, l, [&](std::int64_t m) {
                    const auto& a = s.alpha[m];
                    return Vec3{a.a1, a.a2, a.a3};
                });
                wc += dot(d, d);
            }
            return 2.0 * p_.mu2 * wc;
        }
        return 0.0;
    }

    /// Integral of Lambda (|q|^2 - 1)^2; zero in Euler mode.
    double constraint_violation(const FieldState& s) const { return parts(s).constraint; }

private:
    struct Scratch {
        std::vector<Mat3> rot;              // R at every node
        std::vector<std::array<Mat3, 4>> drot; // dR/dq_b (or dR/da_i in the first 3)
        std::vector<Mat3> p_adj;            // c_n dW/dF
        std::vector<Mat3> r_adj;            // c_n dW/dR, local terms
        std::vector<std::array<Mat3, 3>> c_full;        // c_n 2 mu2 d_l R
        std::vector<std::array<Quaternion, 3>> c_param; // c_n 4 mu2 d_l q (or alpha)
        std::vector<double> g_adj;          // c_n dW/dgamma
        std::vector<double> plane_sum[5];
    };

    EnergyParts evaluate(const FieldState& s, std::vector<double>* grad) const
    {
        const auto n = static_cast<std::size_t>(grid_.node_count());
        const bool quat = param_ == Parameterization::quaternion;
        if (s.phi.size() != n || s.gamma.size() != n || (quat ? s.q.size() : s.alpha.size()) != n)
            throw StructuralError("energy: field state does not match the grid");

        for (std::size_t m = 0; m < n; ++m) {
            bool ok = detail::finite(s.phi[m]) && std::isfinite(s.gamma[m]);
            if (quat) {
                const auto& q = s.q[m];
                ok = ok && std::isfinite(q.q0) && std::isfinite(q.q1) && std::isfinite(q.q2) && std::isfinite(q.q3);
                if (ok && !(squared_modulus(q) > 0.0))
                    throw EvaluationError("energy: zero quaternion at node " + std::to_string(m));
            } else {
                const auto& a = s.alpha[m];
                ok = ok && std::isfinite(a.a1) && std::isfinite(a.a2) && std::isfinite(a.a3);
            }
            if (!ok) throw EvaluationError("energy: non-finite field value at node " + std::to_string(m));
        }

        Scratch& sc = scratch_;
        const bool want_grad = grad != nullptr;
        sc.rot.resize(n);
        if (want_grad) {
            sc.drot.resize(n);
            sc.p_adj.resize(n);
            sc.r_adj.resize(n);
            sc.g_adj.resize(n);
            if (p_.curvature == CurvatureVariant::full)
                sc.c_full.resize(n);
            else
                sc.c_param.resize(n);
        }
        const int planes = grid_.intervals()[2] + 1;
        for (auto& v : sc.plane_sum) v.assign(planes, 0.0);

        // Pass 0: nodal rotations.
        detail::for_each_plane(planes, threads_, [&](int k) {
            for (int j = 0; j <= grid_.intervals()[1]; ++j) {
                for (int i = 0; i <= grid_.intervals()[0]; ++i) {
                    const std::int64_t m = grid_.index(i, j, k);
                    if (quat) {
                        if (want_grad) {
                            const RotationJet jet = rotation_normalized_jet(s.q[m]);
                            sc.rot[m] = jet.value;
                            sc.drot[m] = jet.d;
                        } else {
                            sc.rot[m] = rotation_normalized(s.q[m]);
                        }
                    } else {
                        if (want_grad) {
                            const EulerJet jet = rotation_euler_jet(s.alpha[m]);
                            sc.rot[m] = jet.value;
                            sc.drot[m] = {jet.d[0], jet.d[1], jet.d[2], Mat3{}};
                        } else {
                            sc.rot[m] = rotation_euler(s.alpha[m]);
                        }
                    }
                }
            }
        });

        // Pass 1: integrand and local adjoints.
        const Mat3 mn = outer(p_.slip, p_.normal);
        detail::for_each_plane(planes, threads_, [&](int k) {
            double e_st = 0, e_c = 0, e_pen = 0, e_ext = 0, e_pl = 0;
            for (int j = 0; j <= grid_.intervals()[1]; ++j) {
                for (int i = 0; i <= grid_.intervals()[0]; ++i) {
                    const Index3 ijk{i, j, k};
                    const std::int64_t m = grid_.index(ijk);
                    const double c = weight_[m];
                    const Mat3& r = sc.rot[m];

                    Mat3 f;
                    for (int l = 0; l < 3; ++l) {
                        const Vec3 col = grid_derivative(grid_, ijk, l, [&](std::int64_t x) { return s.phi[x]; });
                        for (int a = 0; a < 3; ++a) f(a, l) = col[a];
                    }
                    const Mat3 fpi = fp_inverse(s.gamma[m], p_.slip, p_.normal);
                    const Mat3 mtx = f * fpi;
                    const Mat3 ue = transpose(r) * mtx;
                    e_st += c * stretch_energy(ue, p_);

                    e_ext -= c * (dot(p_.f_ext, s.phi[m]) + inner(p_.m_ext, r));

                    const double dg = s.gamma[m] - hist_.gamma0[m];
                    const double coef = p_.sigma_y - 2.0 * p_.rho * hist_.kappa0[m];
                    e_pl += c * (p_.rho * dg * dg + reg_abs(dg, p_.eps_reg) * coef);

                    if (quat) {
                        const double t = squared_modulus(s.q[m]) - 1.0;
                        e_pen += c * p_.penalty * t * t;
                    }

                    double wc = 0.0;
                    if (p_.curvature == CurvatureVariant::full) {
                        for (int l = 0; l < 3; ++l) {
                            const Mat3 d = grid_derivative(grid_, ijk, l, [&](std::int64_t x) { return sc.rot[x]; });
                            wc += inner(d, d);
                            if (want_grad) sc.c_full[m][l] = (2.0 * p_.mu2 * c) * d;
                        }
                        wc *= p_.mu2;
                    } else {
                        for (int l = 0; l < 3; ++l) {
                            Quaternion d;
                            if (quat) {
                                d = grid_derivative(grid_, ijk, l, [&](std::int64_t x) { return s.q[x]; });
                            } else {
                                const Vec3 v = grid_derivative(grid_, ijk, l, [&](std::int64_t x) {
                                    const auto& a = s.alpha[x];
                                    return Vec3{a.a1, a.a2, a.a3};
                                });
                                d = {v[0], v[1], v[2], 0.0};
                            }
                            wc += dot(d, d);
                            if (want_grad) sc.c_param[m][l] = (4.0 * p_.mu2 * c) * d;
                        }
                        wc *= 2.0 * p_.mu2;
                    }
                    e_c += c * wc;

                    if (want_grad) {
                        const Mat3 st = stretch_stress(ue, p_);
                        sc.p_adj[m] = c * (r * st * transpose(fpi));
                        Mat3 ra = c * (mtx * transpose(st));
                        ra.axpy(-c, p_.m_ext);
                        sc.r_adj[m] = ra;
                        // W_st depends on gamma through Fp^-1 = I - gamma m (x) n.
                        const double dw = -inner(transpose(f) * r * st, mn);
                        sc.g_adj[m] = c * (dw + 2.0 * p_.rho * dg + reg_abs_derivative(dg, p_.eps_reg) * coef);
                    }
                }
            }
            sc.plane_sum[0][k] = e_st;
            sc.plane_sum[1][k] = e_c;
            sc.plane_sum[2][k] = e_pen;
            sc.plane_sum[3][k] = e_ext;
            sc.plane_sum[4][k] = e_pl;
        });

        EnergyParts parts;
        for (int k = 0; k < planes; ++k) {
            parts.stretch += sc.plane_sum[0][k];
            parts.curvature += sc.plane_sum[1][k];
            parts.constraint += sc.plane_sum[2][k];
            parts.external += sc.plane_sum[3][k];
            parts.plastic += sc.plane_sum[4][k];
        }
        if (!std::isfinite(parts.total())) throw EvaluationError("energy: non-finite energy");
        if (!want_grad) return parts;

        // Pass 2: gather.
        const int spn = quat ? 8 : 7;
        const int rslots = quat ? 4 : 3;
        grad->assign(n * spn, 0.0);
        std::vector<double>& g = *grad;
        const auto& d = grid_.intervals();
        const auto& eta = grid_.spacing();
        detail::for_each_plane(planes, threads_, [&](int k) {
            for (int j = 0; j <= d[1]; ++j) {
                for (int i = 0; i <= d[0]; ++i) {
                    const Index3 ijk{i, j, k};
                    const std::int64_t m = grid_.index(ijk);
                    const double c = weight_[m];
                    Vec3 gphi = (-c) * p_.f_ext;
                    Mat3 gr = sc.r_adj[m];
                    Quaternion gpar{};

                    // Every node whose derivative stencil touches m lies within
                    // one step along the stencil axis.
                    for (int l = 0; l < 3; ++l) {
                        for (int off = -1; off <= 1; ++off) {
                            Index3 src = ijk;
                            src[l] += off;
                            if (src[l] < 0 || src[l] > d[l]) continue;
                            const AxisStencil st = axis_stencil(src[l], d[l], eta[l]);
                            for (int t = 0; t < 2; ++t) {
                                if (st.index[t] != ijk[l]) continue;
                                const double a = st.coeff[t];
                                const std::int64_t sm = grid_.index(src);
                                const Mat3& pa = sc.p_adj[sm];
                                gphi[0] += a * pa(0, l);
                                gphi[1] += a * pa(1, l);
                                gphi[2] += a * pa(2, l);
                                if (p_.curvature == CurvatureVariant::full)
                                    gr.axpy(a, sc.c_full[sm][l]);
                                else
                                    gpar = gpar + a * sc.c_param[sm][l];
                            }
                        }
                    }

                    double* out = g.data() + m * spn;
                    out[0] = gphi[0];
                    out[1] = gphi[1];
                    out[2] = gphi[2];
                    for (int b = 0; b < rslots; ++b) out[3 + b] = inner(gr, sc.drot[m][b]) + gpar[b];
                    if (quat) {
                        const double t = squared_modulus(s.q[m]) - 1.0;
                        for (int b = 0; b < 4; ++b) out[3 + b] += c * 4.0 * p_.penalty * t * s.q[m][b];
                    }

                    out[spn - 1] = sc.g_adj[m];
                }
            }
        });
        return parts;
    }

    Grid3 grid_;
    MaterialParams p_;
    PlasticHistory hist_;
    Parameterization param_;
    int threads_ = 1;
    std::vector<double> weight_;
    mutable Scratch scratch_;
};

/// Quadrature sum of the energy for a state with Dirichlet data imposed.
inline double total_energy(const FieldState& state, const PlasticHistory& hist, const Grid3& grid,
                           const MaterialParams& p)
{
    return EnergyModel(grid, p, hist, state.parameterization()).energy(state);
}

/// dE / d(free DOF) for the full (phi, rotation, gamma) layout.
inline std::vector<double> total_gradient(const FieldState& state, const PlasticHistory& hist, const Grid3& grid,
                                          const MaterialParams& p)
{
    const EnergyModel model(grid, p, hist, state.parameterization());
    return model.free_gradient(state, DofLayout(grid, state.parameterization()));
}

/// Curvature integrand at one node (see EnergyModel::curvature_at_node).
inline double curvature_energy_at_node(const FieldState& state, const Index3& node, const Grid3& grid,
                                       const MaterialParams& p)
{
    const EnergyModel model(grid, p, PlasticHistory::zero(grid.node_count()), state.parameterization());
    return model.curvature_at_node(state, node);
}

} // namespace cosserat

#endif
