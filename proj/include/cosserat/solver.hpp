#ifndef COSSERAT_SOLVER_HPP
#define COSSERAT_SOLVER_HPP

// Time-incremental driver: boundary data of the shear and bending
// benchmarks, the q-only predictor, the warm-started corrector, hardening
// updates and the scenario loop.

#include "cosserat/energy.hpp"
#include "cosserat/error.hpp"
#include "cosserat/grid.hpp"
#include "cosserat/kinematics.hpp"
#include "cosserat/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cosserat {

enum class ScenarioKind { shear, bending };
enum class Preconditioning { off, two_pass };

/// Slip used for the bending rotation data on the boundary: the closed-form
/// profile sin(pi x1 / (2 L1)) beta(t), or the slip of the previous step.
enum class BoundarySlip { analytic, previous };

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::shear;
    double beta_rate = 0.25; ///< beta(t) = beta_rate t
    double h = 0.1;
    double T = 1.0;
    Vec3 lengths{1.0, 1.0, 1.0};
    Index3 resolution{10, 10, 10};
    MaterialParams material;
    Parameterization parameterization = Parameterization::quaternion;
    LbfgsConfig lbfgs;
    Preconditioning preconditioning = Preconditioning::off;
    BandMode band_mode = BandMode::multiply;
    BoundarySlip boundary_slip = BoundarySlip::analytic;
    int threads = 1;
    double perturbation = 0.0; ///< amplitude of a random interior perturbation of the initial state
    std::uint64_t seed = 0;

    static ScenarioSpec shear_defaults() { return {}; }

    static ScenarioSpec bending_defaults()
    {
        ScenarioSpec s;
        s.kind = ScenarioKind::bending;
        s.lengths = {5.0, 1.0, 2.0};
        s.material.mu = 0.025;
        s.material.lambda = 0.025;
        s.material.mu_c = 0.4;
        s.material.mu2 = 0.02;
        s.material.curvature = CurvatureVariant::simplified;
        s.preconditioning = Preconditioning::two_pass;
        return s;
    }

    double beta(double t) const { return beta_rate * t; }

    int step_count() const { return static_cast<int>(std::floor(T / h + 1e-9)); }

    double time_of(int step) const { return step * h; }

    void validate() const
    {
        if (!(h > 0.0)) throw ConfigurationError("scenario: time step h must be positive");
        if (!(T >= h)) throw ConfigurationError("scenario: final time T must be >= h");
        if (threads < 1) throw ConfigurationError("scenario: threads must be >= 1");
        if (!(perturbation >= 0.0)) throw ConfigurationError("scenario: perturbation must be >= 0");
        (void)Grid3(lengths, resolution);
        material.validate();
        lbfgs.validate();
        if ((material.curvature == CurvatureVariant::euler) != (parameterization == Parameterization::euler))
            throw ConfigurationError("scenario: Euler parameterization and the euler curvature variant go together");
    }
};

struct StepReport {
    int step = 0;
    double t = 0.0;
    std::int64_t pred_iters = 0;
    std::int64_t corr_iters = 0;
    double energy = 0.0;
    double gradnorm = 0.0;
    double constraint_violation = 0.0;
    double wall_ms = 0.0;
    StopReason pred_stop = StopReason::converged;
    StopReason corr_stop = StopReason::converged;

    std::int64_t total_iters() const { return pred_iters + corr_iters; }
    bool converged() const
    {
        return corr_stop == StopReason::converged && (pred_iters == 0 || pred_stop == StopReason::converged);
    }
};

inline void write_report_header(std::ostream& os)
{
    os << "step,t,pred_iters,corr_iters,energy,gradnorm,constraint_violation,wall_ms\n";
}

inline void write_report_row(std::ostream& os, const StepReport& r)
{
    const auto flags = os.flags();
    const auto prec = os.precision();
    os.precision(17);
    os << r.step << ',' << r.t << ',' << r.pred_iters << ',' << r.corr_iters << ',' << r.energy << ','
       << r.gradnorm << ',' << r.constraint_violation << ',' << r.wall_ms << '\n';
    os.flags(flags);
    os.precision(prec);
}

// ---------------------------------------------------------------------------
// Boundary data

struct BoundaryValue {
    Vec3 phi;
    Mat3 dphi; ///< derivative of the boundary map
    Quaternion q;
};

inline BoundaryValue shear_bc(const Vec3& x, double beta)
{
    BoundaryValue b;
    b.phi = {x[0] + beta * x[1], x[1], x[2]};
    b.dphi = Mat3::identity();
    b.dphi(0, 1) = beta;
    b.q = Quaternion::identity();
    return b;
}

/// x2-displacement (2 L1 / pi)(sin(3 pi / 2 + pi x1 / (2 L1)) + 1) beta.
inline Vec3 bending_map(const Vec3& x, double l1, double beta)
{
    const double pi = std::numbers::pi;
    const double u = 2.0 * l1 / pi * (std::sin(1.5 * pi + 0.5 * pi * x[0] / l1) + 1.0) * beta;
    return {x[0], x[1] + u, x[2]};
}

inline Mat3 bending_gradient(const Vec3& x, double l1, double beta)
{
    const double pi = std::numbers::pi;
    Mat3 d = Mat3::identity();
    d(1, 0) = std::cos(1.5 * pi + 0.5 * pi * x[0] / l1) * beta;
    return d;
}

/// Closed-form slip profile sin(pi x1 / (2 L1)) beta.
inline double bending_slip(const Vec3& x, double l1, double beta)
{
    return std::sin(0.5 * std::numbers::pi * x[0] / l1) * beta;
}

/// g_D and q_D = quaternion of polar(Dg_D Fp(gamma)^-1).
inline BoundaryValue bending_bc(const Vec3& x, double l1, double beta, double gamma, const MaterialParams& p)
{
    BoundaryValue b;
    b.phi = bending_map(x, l1, beta);
    b.dphi = bending_gradient(x, l1, beta);
    try {
        const auto pd = polar_decompose(b.dphi * fp_inverse(gamma, p.slip, p.normal));
        b.q = quat_from_rotation(pd.rotation);
    } catch (const DomainError& e) {
        throw BoundaryConditionError(std::string("bending boundary data: ") + e.what());
    }
    return b;
}

/// Boundary value of a scenario at time t for a node; gamma enters the
/// bending rotation data only.
inline BoundaryValue boundary_value(const ScenarioSpec& spec, const Vec3& x, double t, double gamma)
{
    const double beta = spec.beta(t);
    if (spec.kind == ScenarioKind::shear) return shear_bc(x, beta);
    return bending_bc(x, spec.lengths[0], beta, gamma, spec.material);
}

namespace detail {

inline double boundary_gamma(const ScenarioSpec& spec, const Vec3& x, double t, double previous)
{
    if (spec.kind == ScenarioKind::bending && spec.boundary_slip == BoundarySlip::analytic)
        return bending_slip(x, spec.lengths[0], spec.beta(t));
    return previous;
}

inline void set_rotation(FieldState& s, std::int64_t n, const Quaternion& q)
{
    if (s.parameterization() == Parameterization::quaternion)
        s.q[n] = q;
    else
        s.alpha[n] = euler_from_rotation(rotation(q));
}

} // namespace detail

/// Writes Dirichlet data for time t into the boundary nodes of `state`.
inline void apply_boundary(const ScenarioSpec& spec, const Grid3& grid, double t, FieldState& state)
{
    for (std::int64_t n = 0; n < grid.node_count(); ++n) {
        const Index3 ijk = grid.node(n);
        if (!grid.is_boundary(ijk)) continue;
        const Vec3 x = grid.position(ijk);
        const BoundaryValue b = boundary_value(spec, x, t, detail::boundary_gamma(spec, x, t, state.gamma[n]));
        state.phi[n] = b.phi;
        detail::set_rotation(state, n, b.q);
    }
}

/// State for the first step: the boundary map extended into the interior
/// (Cauchy-Born), rotation data evaluated at every node, gamma = 0.
inline FieldState initial_state(const ScenarioSpec& spec, const Grid3& grid, double t)
{
    FieldState s = FieldState::sized(grid.node_count(), spec.parameterization);
    for (std::int64_t n = 0; n < grid.node_count(); ++n) {
        const Index3 ijk = grid.node(n);
        const Vec3 x = grid.position(ijk);
        const BoundaryValue b = boundary_value(spec, x, t, detail::boundary_gamma(spec, x, t, 0.0));
        s.phi[n] = b.phi;
        detail::set_rotation(s, n, b.q);
        s.gamma[n] = 0.0;
    }
    if (spec.perturbation > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const double a = spec.perturbation;
        for (std::int64_t n = 0; n < grid.node_count(); ++n) {
            if (grid.is_boundary(grid.node(n))) continue;
            for (int c = 0; c < 3; ++c) s.phi[n][c] += a * grid.spacing()[c] * u(rng);
            if (spec.parameterization == Parameterization::quaternion) {
                Quaternion& q = s.q[n];
                for (int c = 0; c < 4; ++c) q[c] += a * u(rng);
            } else {
                for (int c = 0; c < 3; ++c) s.alpha[n][c] += a * u(rng);
            }
        }
    }
    return s;
}

/// Maximum distance of phi from the boundary map evaluated at every node.
inline double cauchy_born_deviation(const ScenarioSpec& spec, const Grid3& grid, const FieldState& s, double t)
{
    double e = 0.0;
    for (std::int64_t n = 0; n < grid.node_count(); ++n) {
        const Vec3 x = grid.position(grid.node(n));
        const Vec3 g = spec.kind == ScenarioKind::shear ? shear_bc(x, spec.beta(t)).phi
                                                        : bending_map(x, spec.lengths[0], spec.beta(t));
        e = std::max(e, norm(s.phi[n] - g));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Predictor and corrector

struct PassResult {
    std::int64_t iterations = 0;
    std::int64_t evaluations = 0;
    double energy = 0.0;
    double gradnorm = 0.0;
    StopReason stop = StopReason::converged;
    std::vector<TraceEntry> trace;
    std::shared_ptr<const CurvaturePairs> pairs;
};

namespace detail {

/// Energy and free gradient as a function of the free vector of `layout`.
inline auto free_objective(const EnergyModel& model, const DofLayout& layout, FieldState& work)
{
    return [&model, &layout, &work, nodal = std::vector<double>()](std::span<const double> x,
                                                                    std::span<double> g) mutable {
        unpack_into(x, layout, work);
        const double f = model.energy_and_gradient(work, nodal);
        for (std::int64_t e = 0; e < layout.free_count(); ++e) g[e] = nodal[layout.slot_of(e)];
        return f;
    };
}

inline PassResult run_pass(const EnergyModel& model, const DofLayout& layout, FieldState& state,
                           const LbfgsConfig& cfg, const PreconditionerSpec& h0)
{
    FieldState work = state;
    auto fg = free_objective(model, layout, work);
    MinimizeResult r = minimize(fg, pack(state, layout), cfg, h0);
    unpack_into(r.x, layout, state);
    PassResult p;
    p.iterations = r.iterations;
    p.evaluations = r.evaluations;
    p.energy = r.f;
    p.gradnorm = r.gnorm;
    p.stop = r.reason;
    p.trace = std::move(r.trace);
    p.pairs = std::make_shared<const CurvaturePairs>(std::move(r.pairs));
    return p;
}

} // namespace detail

/// Axes coupled by the band preconditioner: the first axis for the full
/// curvature energy, all three for the simplified and Euler variants.
inline std::array<bool, 3> band_axes(CurvatureVariant v)
{
    if (v == CurvatureVariant::full) return {true, false, false};
    return {true, true, true};
}

/// Band preconditioner for the rotation-only layout, prefactor w mu2 / eta1^2.
inline BandZ band_preconditioner(const DofLayout& rotation_layout, const MaterialParams& p, BandMode mode)
{
    const Grid3& g = rotation_layout.grid();
    BandZ z;
    z.stencil = std::make_shared<const BandStencil>(rotation_layout, band_axes(p.curvature));
    z.prefactor = g.cell_volume() * p.mu2 / (g.spacing()[0] * g.spacing()[0]);
    z.mode = mode;
    return z;
}

/// Minimizes over the rotation DOFs with phi and gamma frozen.
inline PassResult predictor(FieldState& state, const EnergyModel& model, const LbfgsConfig& cfg,
                            BandMode mode = BandMode::multiply)
{
    const DofLayout layout(model.grid(), model.parameterization(), DofSubset::rotation_only);
    return detail::run_pass(model, layout, state, cfg, band_preconditioner(layout, model.params(), mode));
}

/// Minimizes over all free DOFs; the predictor pairs act on the rotation
/// entries of H0 and the Cholesky-scaled identity on the rest.
inline PassResult corrector(FieldState& state, const EnergyModel& model, const LbfgsConfig& cfg,
                            std::shared_ptr<const CurvaturePairs> pairs)
{
    const DofLayout full(model.grid(), model.parameterization(), DofSubset::all);
    const DofLayout rot(model.grid(), model.parameterization(), DofSubset::rotation_only);
    WarmPairs warm;
    warm.pairs = std::move(pairs);
    warm.embedding.resize(static_cast<std::size_t>(rot.free_count()));
    const int spn = rot.slots_per_node();
    for (std::int64_t e = 0; e < rot.free_count(); ++e) {
        const std::int64_t gs = rot.slot_of(e);
        warm.embedding[e] = full.free_index(gs / spn, static_cast<int>(gs % spn));
    }
    return detail::run_pass(model, full, state, cfg, warm);
}

/// Plain L-BFGS over all free DOFs with Cholesky scaling.
inline PassResult single_pass(FieldState& state, const EnergyModel& model, const LbfgsConfig& cfg)
{
    const DofLayout full(model.grid(), model.parameterization(), DofSubset::all);
    return detail::run_pass(model, full, state, cfg, CholeskyH0{});
}

// ---------------------------------------------------------------------------
// Time stepping

struct StepOutcome {
    FieldState state;
    PlasticHistory history;
    StepReport report;
    std::vector<TraceEntry> predictor_trace;
    std::vector<TraceEntry> corrector_trace;
};

/// Advances from the state of step `step - 1` to step `step`: boundary data
/// at t = step h, minimization, hardening update.
inline StepOutcome run_time_step(const ScenarioSpec& spec, const Grid3& grid, FieldState state,
                                 const PlasticHistory& hist, int step)
{
    const auto t0 = std::chrono::steady_clock::now();
    const double t = spec.time_of(step);
    apply_boundary(spec, grid, t, state);

    const EnergyModel model(grid, spec.material, hist, spec.parameterization, spec.threads);
    StepOutcome out;
    StepReport& r = out.report;
    r.step = step;
    r.t = t;
    PassResult last;
    if (spec.preconditioning == Preconditioning::two_pass) {
        PassResult pred = predictor(state, model, spec.lbfgs, spec.band_mode);
        r.pred_iters = pred.iterations;
        r.pred_stop = pred.stop;
        out.predictor_trace = std::move(pred.trace);
        last = corrector(state, model, spec.lbfgs, pred.pairs);
    } else {
        last = single_pass(state, model, spec.lbfgs);
    }
    r.corr_iters = last.iterations;
    r.corr_stop = last.stop;
    r.energy = last.energy;
    r.gradnorm = last.gradnorm;
    r.constraint_violation = model.constraint_violation(state);
    out.corrector_trace = std::move(last.trace);

    out.history.gamma0 = state.gamma;
    out.history.kappa0.resize(hist.kappa0.size());
    for (std::size_t n = 0; n < hist.kappa0.size(); ++n)
        out.history.kappa0[n] = hardening_update(state.gamma[n], hist.gamma0[n], hist.kappa0[n]);
    out.state = std::move(state);
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct SimulationResult {
    Grid3 grid;
    std::vector<StepReport> reports;
    FieldState state;
    PlasticHistory history;
    bool completed = false;
    std::string failure; ///< diagnostic of the failing step, empty on success
};

/// Runs all steps t = h, 2h, ..., T from phi = id, gamma0 = kappa0 = 0.
/// `on_step` sees every completed step. A failing step stops the loop; the
/// steps before it are kept in the result.
inline SimulationResult run_simulation(const ScenarioSpec& spec,
                                       const std::function<void(const StepOutcome&)>& on_step = {})
{
    spec.validate();
    SimulationResult res;
    res.grid = Grid3(spec.lengths, spec.resolution);
    res.history = PlasticHistory::zero(res.grid.node_count());
    res.state = initial_state(spec, res.grid, spec.time_of(1));
    for (int step = 1; step <= spec.step_count(); ++step) {
        try {
            StepOutcome o = run_time_step(spec, res.grid, res.state, res.history, step);
            if (on_step) on_step(o);
            res.reports.push_back(o.report);
            res.state = std::move(o.state);
            res.history = std::move(o.history);
        } catch (const Error& e) {
            res.failure = "step " + std::to_string(step) + ": " + e.what();
            return res;
        }
    }
    res.completed = true;
    return res;
}

} // namespace cosserat

#endif
