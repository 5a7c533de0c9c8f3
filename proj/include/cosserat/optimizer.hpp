#ifndef COSSERAT_OPTIMIZER_HPP
#define COSSERAT_OPTIMIZER_HPP

// Limited-memory BFGS with a strong-Wolfe line search and a pluggable
// initial inverse-Hessian H0 applied at the midpoint of the two-loop
// recursion.

#include "cosserat/error.hpp"
#include "cosserat/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cosserat {

// ---------------------------------------------------------------------------
// Dense vector helpers

namespace vec {

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y += s x
inline void axpy(double s, std::span<const double> x, std::span<double> y)
{
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline bool finite(std::span<const double> a)
{
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace vec

struct LbfgsConfig {
    int history = 5;                       ///< m, number of stored pairs
    double eps0 = 1e-7;                    ///< stop tolerance
    std::int64_t max_iter = 10'000'000;
    double c1 = 1e-4;                      ///< Armijo constant
    double c2 = 0.9;                       ///< curvature constant
    double skip_threshold = 1e-10;         ///< store a pair only if y.s > threshold |y||s|
    int max_line_search = 60;              ///< trial steps per line search
    bool record_trace = true;

    void validate() const
    {
        if (history < 1) throw ConfigurationError("lbfgs: history must be >= 1");
        if (!(eps0 > 0)) throw ConfigurationError("lbfgs: eps0 must be positive");
        if (max_iter < 0) throw ConfigurationError("lbfgs: max_iter must be >= 0");
        if (!(0 < c1 && c1 < c2 && c2 < 1)) throw ConfigurationError("lbfgs: need 0 < c1 < c2 < 1");
        if (!(skip_threshold >= 0)) throw ConfigurationError("lbfgs: skip threshold must be >= 0");
        if (max_line_search < 1) throw ConfigurationError("lbfgs: max_line_search must be >= 1");
    }
};

struct CurvaturePair {
    std::vector<double> s;
    std::vector<double> y;
    double rho = 0.0; ///< 1 / y.s
};

/// Ring buffer of the m most recent (s, y) pairs, oldest first.
class CurvaturePairs {
public:
    explicit CurvaturePairs(int capacity = 5) : capacity_(std::max(1, capacity)) {}

    /// Stores the pair if y.s > 0; returns whether it was stored.
    bool push(std::vector<double> s, std::vector<double> y)
    {
        if (s.size() != y.size()) throw StructuralError("curvature pair: s and y differ in length");
        if (!pairs_.empty() && s.size() != pairs_.front().s.size())
            throw StructuralError("curvature pair: dimension change");
        const double ys = vec::dot(y, s);
        if (!(ys > 0.0)) return false;
        if (static_cast<int>(pairs_.size()) == capacity_) pairs_.pop_front();
        pairs_.push_back({std::move(s), std::move(y), 1.0 / ys});
        return true;
    }

    int size() const { return static_cast<int>(pairs_.size()); }
    bool empty() const { return pairs_.empty(); }
    int capacity() const { return capacity_; }
    std::size_t dimension() const { return pairs_.empty() ? 0 : pairs_.front().s.size(); }
    const CurvaturePair& operator[](int i) const { return pairs_[static_cast<std::size_t>(i)]; }
    const CurvaturePair& newest() const { return pairs_.back(); }
    void clear() { pairs_.clear(); }

private:
    int capacity_;
    std::deque<CurvaturePair> pairs_;
};

/// delta = s.y / y.y, or 1 when y vanishes.
inline double cholesky_scale(std::span<const double> s, std::span<const double> y)
{
    const double yy = vec::dot(y, y);
    if (!(yy > 0.0)) return 1.0;
    const double d = vec::dot(s, y) / yy;
    return std::isfinite(d) && d > 0.0 ? d : 1.0;
}

inline double cholesky_scale(const CurvaturePairs& pairs)
{
    return pairs.empty() ? 1.0 : cholesky_scale(pairs.newest().s, pairs.newest().y);
}

// ---------------------------------------------------------------------------
// Band preconditioner Z

enum class BandMode { multiply, solve };

/// Neighbour table of the Z stencil over a DOF layout: for every free
/// rotation entry, the entries of the same component at index offset +-2
/// along each axis (-1 where that neighbour is outside the grid or fixed).
class BandStencil {
public:
    BandStencil(const DofLayout& layout, std::array<bool, 3> axes) : axes_(axes)
    {
        const Grid3& grid = layout.grid();
        const int spn = layout.slots_per_node();
        const auto n = static_cast<std::size_t>(layout.free_count());
        rotation_.assign(n, 0);
        neighbours_.assign(n, {-1, -1, -1, -1, -1, -1});
        for (std::int64_t e = 0; e < layout.free_count(); ++e) {
            const std::int64_t gs = layout.slot_of(e);
            const std::int64_t node = gs / spn;
            const int slot = static_cast<int>(gs % spn);
            if (slot < DofLayout::rotation_offset() || slot >= layout.gamma_slot()) continue;
            rotation_[e] = 1;
            const Index3 ijk = grid.node(node);
            for (int l = 0; l < 3; ++l) {
                if (!axes_[l]) continue;
                for (int side = 0; side < 2; ++side) {
                    Index3 nb = ijk;
                    nb[l] += side == 0 ? -2 : 2;
                    if (!grid.contains(nb[0], nb[1], nb[2])) continue;
                    neighbours_[e][2 * l + side] = layout.free_index(grid.index(nb), slot);
                }
            }
        }
    }

    std::size_t size() const { return rotation_.size(); }
    const std::array<bool, 3>& axes() const { return axes_; }
    bool is_rotation(std::size_t e) const { return rotation_[e] != 0; }
    const std::array<std::int64_t, 6>& neighbours(std::size_t e) const { return neighbours_[e]; }

private:
    std::array<bool, 3> axes_;
    std::vector<char> rotation_;
    std::vector<std::array<std::int64_t, 6>> neighbours_;
};

namespace detail {

/// r = Z g: prefactor (2 g_e - sum of +-2 neighbours) on rotation entries,
/// identity on the remaining entries.
inline void band_multiply(const BandStencil& st, double prefactor, std::span<const double> g, std::span<double> r)
{
    for (std::size_t e = 0; e < st.size(); ++e) {
        if (!st.is_rotation(e)) {
            r[e] = g[e];
            continue;
        }
        double v = 2.0 * g[e];
        for (std::int64_t nb : st.neighbours(e))
            if (nb >= 0) v -= g[static_cast<std::size_t>(nb)];
        r[e] = prefactor * v;
    }
}

/// Conjugate gradients on Z x = g; throws when Z is not positive definite
/// along a search direction.
inline void band_solve(const BandStencil& st, double prefactor, std::span<const double> g, std::span<double> x)
{
    const std::size_t n = st.size();
    std::fill(x.begin(), x.end(), 0.0);
    std::vector<double> r(g.begin(), g.end()), p = r, zp(n);
    const double gnorm = vec::norm(g);
    if (gnorm == 0.0) return;
    double rr = vec::dot(r, r);
    const std::size_t max_it = 20 * n + 100;
    for (std::size_t it = 0; it < max_it; ++it) {
        if (std::sqrt(rr) <= 1e-11 * gnorm) return;
        band_multiply(st, prefactor, p, zp);
        const double pzp = vec::dot(p, zp);
        if (!(pzp > 0.0)) throw PreconditionerError("band preconditioner: Z is not positive definite");
        const double a = rr / pzp;
        vec::axpy(a, p, x);
        vec::axpy(-a, zp, r);
        const double rr_new = vec::dot(r, r);
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
        rr = rr_new;
    }
    if (std::sqrt(rr) > 1e-10 * gnorm) throw PreconditionerError("band preconditioner: solve did not converge");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Initial inverse-Hessian choices

struct IdentityH0 {};

/// delta_k I with delta_k = s.y / y.y of the newest pair.
struct CholeskyH0 {};

struct BandZ {
    std::shared_ptr<const BandStencil> stencil;
    double prefactor = 1.0;
    BandMode mode = BandMode::multiply;
};

/// Curvature pairs of an earlier run on a subspace. `embedding[i]` is the
/// position in the current vector of entry i of the stored pairs; the pairs
/// act there through their own two-loop recursion, every other entry gets
/// the Cholesky-scaled identity of the current run.
struct WarmPairs {
    std::shared_ptr<const CurvaturePairs> pairs;
    std::vector<std::int64_t> embedding;
};

using PreconditionerSpec = std::variant<IdentityH0, CholeskyH0, BandZ, WarmPairs>;

inline std::string preconditioner_name(const PreconditionerSpec& spec)
{
    struct Visitor {
        std::string operator()(const IdentityH0&) const { return "identity"; }
        std::string operator()(const CholeskyH0&) const { return "cholesky_scaling"; }
        std::string operator()(const BandZ& z) const
        {
            return z.mode == BandMode::multiply ? "band_z(multiply)" : "band_z(solve)";
        }
        std::string operator()(const WarmPairs&) const { return "warm_pairs"; }
    };
    return std::visit(Visitor{}, spec);
}

/// Z g (multiply mode) or Z^{-1} g (solve mode).
inline std::vector<double> apply_band_z(const BandZ& z, std::span<const double> g)
{
    if (!z.stencil || z.stencil->size() != g.size())
        throw StructuralError("apply_band_z: stencil does not match the vector");
    std::vector<double> r(g.size());
    if (z.mode == BandMode::multiply)
        detail::band_multiply(*z.stencil, z.prefactor, g, r);
    else
        detail::band_solve(*z.stencil, z.prefactor, g, r);
    return r;
}

std::vector<double> two_loop(std::span<const double> g, const CurvaturePairs& pairs, const PreconditionerSpec& h0);

namespace detail {

inline void apply_h0(const PreconditionerSpec& h0, const CurvaturePairs& pairs, std::span<const double> g,
                     std::span<double> r)
{
    if (std::holds_alternative<IdentityH0>(h0)) {
        std::copy(g.begin(), g.end(), r.begin());
    } else if (std::holds_alternative<CholeskyH0>(h0)) {
        const double delta = cholesky_scale(pairs);
        for (std::size_t i = 0; i < g.size(); ++i) r[i] = delta * g[i];
    } else if (const auto* z = std::get_if<BandZ>(&h0)) {
        try {
            const auto zg = apply_band_z(*z, g);
            std::copy(zg.begin(), zg.end(), r.begin());
        } catch (const PreconditionerError&) {
            apply_h0(CholeskyH0{}, pairs, g, r);
        }
    } else {
        const auto& warm = std::get<WarmPairs>(h0);
        const double delta = cholesky_scale(pairs);
        for (std::size_t i = 0; i < g.size(); ++i) r[i] = delta * g[i];
        if (!warm.pairs || warm.pairs->empty()) return;
        std::vector<double> sub(warm.embedding.size());
        for (std::size_t i = 0; i < sub.size(); ++i) sub[i] = g[static_cast<std::size_t>(warm.embedding[i])];
        const auto hsub = two_loop(sub, *warm.pairs, CholeskyH0{});
        for (std::size_t i = 0; i < sub.size(); ++i) r[static_cast<std::size_t>(warm.embedding[i])] = hsub[i];
    }
}

} // namespace detail

/// H_k g by the two-loop recursion, with r <- H0 g between the loops.
inline std::vector<double> two_loop(std::span<const double> g, const CurvaturePairs& pairs,
                                    const PreconditionerSpec& h0)
{
    if (!pairs.empty() && pairs.dimension() != g.size())
        throw StructuralError("two_loop: pair dimension does not match the gradient");
    const int m = pairs.size();
    std::vector<double> q(g.begin(), g.end());
    std::vector<double> alpha(static_cast<std::size_t>(m));
    for (int i = m - 1; i >= 0; --i) {
        alpha[i] = pairs[i].rho * vec::dot(pairs[i].s, q);
        vec::axpy(-alpha[i], pairs[i].y, q);
    }
    std::vector<double> r(g.size());
    detail::apply_h0(h0, pairs, q, r);
    for (int i = 0; i < m; ++i) {
        const double beta = pairs[i].rho * vec::dot(pairs[i].y, r);
        vec::axpy(alpha[i] - beta, pairs[i].s, r);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Line search

struct LineSearchResult {
    double alpha = 0.0;
    double f = 0.0;
    std::vector<double> x;
    std::vector<double> g;
    int evaluations = 0;
    bool strong_wolfe = true; ///< false if only sufficient decrease could be met
};

namespace detail {

// Minimizer of the cubic through (a, fa, da), (b, fb, db), safeguarded into
// the inner 80% of the interval; bisection when the cubic is unusable.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db)
{
    const double lo = std::min(a, b), hi = std::max(a, b), width = hi - lo;
    double t = 0.5 * (a + b);
    if (std::isfinite(fa) && std::isfinite(fb) && std::isfinite(da) && std::isfinite(db)) {
        const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
        const double disc = d1 * d1 - da * db;
        if (disc >= 0.0) {
            const double d2 = std::copysign(std::sqrt(disc), b - a);
            const double denom = db - da + 2.0 * d2;
            if (denom != 0.0) {
                const double c = b - (b - a) * (db + d2 - d1) / denom;
                if (std::isfinite(c)) t = c;
            }
        }
    }
    return std::clamp(t, lo + 0.1 * width, hi - 0.1 * width);
}

} // namespace detail

/// Strong-Wolfe line search along a descent direction d.
///
/// `fg(x, g)` returns f(x) and writes its gradient; an EvaluationError or
/// DomainError thrown there is treated as an infinite value. Throws
/// ContractViolation if d is not a descent direction, LineSearchError if no
/// acceptable step is found within cfg.max_line_search evaluations.
template <class Fg>
LineSearchResult line_search(Fg&& fg, std::span<const double> x, double f0, std::span<const double> g0,
                             std::span<const double> d, const LbfgsConfig& cfg, double alpha0 = 1.0)
{
    const double dphi0 = vec::dot(g0, d);
    if (!(dphi0 < 0.0)) throw ContractViolation("line_search: d is not a descent direction");

    const std::size_t n = x.size();
    LineSearchResult trial;
    trial.x.resize(n);
    trial.g.resize(n);
    LineSearchResult armijo_best;
    bool have_armijo = false;
    int evals = 0;

    auto eval = [&](double a, double& f, double& dphi) {
        ++evals;
        for (std::size_t i = 0; i < n; ++i) trial.x[i] = x[i] + a * d[i];
        try {
            f = fg(std::span<const double>(trial.x), std::span<double>(trial.g));
        } catch (const EvaluationError&) {
            f = std::numeric_limits<double>::infinity();
        } catch (const DomainError&) {
            f = std::numeric_limits<double>::infinity();
        }
        dphi = std::isfinite(f) ? vec::dot(trial.g, d) : std::numeric_limits<double>::quiet_NaN();
        if (std::isfinite(f) && f < f0 && f <= f0 + cfg.c1 * a * dphi0 && (!have_armijo || f < armijo_best.f)) {
            armijo_best = trial;
            armijo_best.alpha = a;
            armijo_best.f = f;
            armijo_best.strong_wolfe = false;
            have_armijo = true;
        }
    };
    auto accept = [&](double a, double f) {
        trial.alpha = a;
        trial.f = f;
        trial.evaluations = evals;
        trial.strong_wolfe = true;
        return std::move(trial);
    };
    auto fail = [&]() -> LineSearchResult {
        if (have_armijo) {
            armijo_best.evaluations = evals;
            return std::move(armijo_best);
        }
        throw LineSearchError("line search: no acceptable step within " + std::to_string(cfg.max_line_search)
                              + " trials");
    };

    auto zoom = [&](double lo, double flo, double dlo, double hi, double fhi, double dhi) -> LineSearchResult {
        while (evals < cfg.max_line_search) {
            if (std::abs(hi - lo) <= 1e-16 * std::max(std::abs(lo), std::abs(hi))) break;
            const double a = detail::cubic_step(lo, flo, dlo, hi, fhi, dhi);
            double f, dphi;
            eval(a, f, dphi);
            if (!std::isfinite(f) || f > f0 + cfg.c1 * a * dphi0 || f >= flo) {
                hi = a;
                fhi = f;
                dhi = dphi;
            } else {
                if (std::abs(dphi) <= -cfg.c2 * dphi0) return accept(a, f);
                if (dphi * (hi - lo) >= 0.0) {
                    hi = lo;
                    fhi = flo;
                    dhi = dlo;
                }
                lo = a;
                flo = f;
                dlo = dphi;
            }
        }
        return fail();
    };

    double a_prev = 0.0, f_prev = f0, d_prev = dphi0;
    double a = alpha0 > 0.0 && std::isfinite(alpha0) ? alpha0 : 1.0;
    while (evals < cfg.max_line_search) {
        double f, dphi;
        eval(a, f, dphi);
        // f >= f0 also rejects steps whose decrease is lost to roundoff.
        if (!std::isfinite(f) || f >= f0 || f > f0 + cfg.c1 * a * dphi0 || (evals > 1 && f >= f_prev))
            return zoom(a_prev, f_prev, d_prev, a, f, dphi);
        if (std::abs(dphi) <= -cfg.c2 * dphi0) return accept(a, f);
        if (dphi >= 0.0) return zoom(a, f, dphi, a_prev, f_prev, d_prev);
        a_prev = a;
        f_prev = f;
        d_prev = dphi;
        a *= 4.0;
    }
    return fail();
}

// ---------------------------------------------------------------------------
// Minimization

struct TraceEntry {
    std::int64_t iter = 0;
    double f = 0.0;
    double gnorm = 0.0;
};

inline void write_trace_csv(std::ostream& os, std::span<const TraceEntry> trace, const char* f_column = "f")
{
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << "iter," << f_column << ",gradnorm\n";
    os.precision(17);
    for (const auto& t : trace) os << t.iter << ',' << t.f << ',' << t.gnorm << '\n';
    os.flags(flags);
    os.precision(prec);
}

enum class StopReason { converged, max_iterations, line_search_failed };

inline const char* to_string(StopReason r)
{
    switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::line_search_failed: return "line_search_failed";
    }
    return "?";
}

struct MinimizeResult {
    std::vector<double> x;
    double f = 0.0;
    double gnorm = 0.0;
    std::int64_t iterations = 0;
    std::int64_t evaluations = 0;
    int restarts = 0;
    StopReason reason = StopReason::converged;
    std::vector<TraceEntry> trace;
    CurvaturePairs pairs;

    bool converged() const { return reason == StopReason::converged; }
};

/// Thrown when f or its gradient becomes non-finite at an accepted iterate.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::vector<TraceEntry> trace)
        : Error(what), trace_(std::move(trace))
    {
    }

    const std::vector<TraceEntry>& trace() const { return trace_; }

private:
    std::vector<TraceEntry> trace_;
};

/// |grad| < eps0 max{1, |x|}
inline bool stop_rule_satisfied(double gnorm, double xnorm, double eps0)
{
    return gnorm < eps0 * std::max(1.0, xnorm);
}

/// L-BFGS: x_{k+1} = x_k + alpha d_k with d_k = -H_k grad(x_k).
template <class Fg>
MinimizeResult minimize(Fg&& fg, std::vector<double> x0, const LbfgsConfig& cfg, const PreconditionerSpec& h0)
{
    cfg.validate();
    const std::size_t n = x0.size();
    MinimizeResult res;
    res.pairs = CurvaturePairs(cfg.history);
    res.x = std::move(x0);
    std::vector<double> g(n);
    res.f = fg(std::span<const double>(res.x), std::span<double>(g));
    res.evaluations = 1;
    res.gnorm = vec::norm(g);
    if (cfg.record_trace) res.trace.push_back({0, res.f, res.gnorm});
    if (!std::isfinite(res.f) || !vec::finite(g))
        throw DivergenceError("minimize: non-finite energy or gradient at the initial point", res.trace);

    std::vector<double> d(n);
    while (true) {
        if (stop_rule_satisfied(res.gnorm, vec::norm(res.x), cfg.eps0)) {
            res.reason = StopReason::converged;
            break;
        }
        if (res.iterations >= cfg.max_iter) {
            res.reason = StopReason::max_iterations;
            break;
        }

        auto direction = [&](const PreconditionerSpec& spec) {
            const auto hg = two_loop(g, res.pairs, spec);
            for (std::size_t i = 0; i < n; ++i) d[i] = -hg[i];
            const double dg = vec::dot(d, g);
            return std::isfinite(dg) && dg < 0.0;
        };
        if (!direction(h0)) {
            // A band preconditioner in multiply mode is indefinite; fall back.
            if (!direction(CholeskyH0{})) {
                res.pairs.clear();
                direction(IdentityH0{});
            }
        }

        const double alpha0 = res.pairs.empty() ? std::min(1.0, 1.0 / vec::norm(d)) : 1.0;
        LineSearchResult ls;
        try {
            ls = line_search(fg, res.x, res.f, g, d, cfg, alpha0);
        } catch (const LineSearchError&) {
            ++res.restarts;
            res.pairs.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            try {
                ls = line_search(fg, res.x, res.f, g, d, cfg, std::min(1.0, 1.0 / res.gnorm));
            } catch (const LineSearchError&) {
                res.reason = StopReason::line_search_failed;
                break;
            }
        }
        res.evaluations += ls.evaluations;
        if (!std::isfinite(ls.f) || !vec::finite(ls.g))
            throw DivergenceError("minimize: non-finite energy or gradient", res.trace);

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = ls.x[i] - res.x[i];
            y[i] = ls.g[i] - g[i];
        }
        const double ys = vec::dot(y, s);
        if (ys > cfg.skip_threshold * vec::norm(y) * vec::norm(s)) res.pairs.push(std::move(s), std::move(y));

        res.x = std::move(ls.x);
        g = std::move(ls.g);
        res.f = ls.f;
        res.gnorm = vec::norm(g);
        ++res.iterations;
        if (cfg.record_trace) res.trace.push_back({res.iterations, res.f, res.gnorm});
    }
    return res;
}

} // namespace cosserat

#endif
