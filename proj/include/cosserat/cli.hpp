#ifndef COSSERAT_CLI_HPP
#define COSSERAT_CLI_HPP

// Run configuration files, benchmark execution and the artifacts written
// for a run: iteration traces, step reports, field dumps and summaries.
//
// Configuration format: one `key = value` per line, `#` starts a comment.
// The `scenario` key selects the default parameter set and may appear on
// any line; all other keys override those defaults.

#include "cosserat/error.hpp"
#include "cosserat/solver.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace cosserat {

struct RunConfig {
    std::string scenario = "shear";
    ScenarioSpec spec = ScenarioSpec::shear_defaults();
    std::string output_dir = "out";
    bool reproducible = false;
};

inline std::string parameterization_label(const ScenarioSpec& s)
{
    if (s.parameterization == Parameterization::euler) return "euler";
    return s.material.curvature == CurvatureVariant::full ? "quaternion_full" : "quaternion_simple";
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t b = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > b) out.push_back(s.substr(b, i - b));
    }
    return out;
}

template <class T>
T parse_number(std::string_view text, int line, std::string_view key)
{
    T v{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError(line, "invalid value '" + std::string(text) + "' for " + std::string(key));
    return v;
}

inline double parse_double(std::string_view text, int line, std::string_view key)
{
    const double v = parse_number<double>(text, line, key);
    if (!std::isfinite(v)) throw ParseError(line, "non-finite value for " + std::string(key));
    return v;
}

inline std::vector<double> parse_doubles(std::string_view text, std::size_t count, int line, std::string_view key)
{
    const auto parts = split_ws(text);
    if (parts.size() != count)
        throw ParseError(line, std::string(key) + " expects " + std::to_string(count) + " numbers");
    std::vector<double> v;
    for (auto p : parts) v.push_back(parse_double(p, line, key));
    return v;
}

inline bool parse_bool(std::string_view text, int line, std::string_view key)
{
    if (text == "true" || text == "on" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "off" || text == "no" || text == "0") return false;
    throw ParseError(line, "invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

struct ConfigLine {
    int line;
    std::string key;
    std::string value;
};

inline void apply_key(RunConfig& c, const ConfigLine& l)
{
    ScenarioSpec& s = c.spec;
    MaterialParams& m = s.material;
    LbfgsConfig& o = s.lbfgs;
    const std::string_view v = l.value;
    const int n = l.line;
    const std::string& k = l.key;
    auto num = [&] { return parse_double(v, n, k); };
    auto vec3 = [&] {
        const auto d = parse_doubles(v, 3, n, k);
        return Vec3{d[0], d[1], d[2]};
    };

    if (k == "scenario") {
        return; // handled before the other keys
    } else if (k == "resolution") {
        const auto parts = split_ws(v);
        if (parts.size() != 3) throw ParseError(n, "resolution expects 3 integers");
        for (int a = 0; a < 3; ++a) s.resolution[a] = parse_number<int>(parts[a], n, k);
    } else if (k == "lengths") {
        s.lengths = vec3();
    } else if (k == "parameterization") {
        if (v == "quaternion_full") {
            s.parameterization = Parameterization::quaternion;
            m.curvature = CurvatureVariant::full;
        } else if (v == "quaternion_simple") {
            s.parameterization = Parameterization::quaternion;
            m.curvature = CurvatureVariant::simplified;
        } else if (v == "euler") {
            s.parameterization = Parameterization::euler;
            m.curvature = CurvatureVariant::euler;
        } else {
            throw ParseError(n, "unknown parameterization '" + std::string(v) + "'");
        }
    } else if (k == "preconditioning") {
        if (v == "two_pass")
            s.preconditioning = Preconditioning::two_pass;
        else
            s.preconditioning = parse_bool(v, n, k) ? Preconditioning::two_pass : Preconditioning::off;
    } else if (k == "band_mode") {
        if (v == "multiply")
            s.band_mode = BandMode::multiply;
        else if (v == "solve")
            s.band_mode = BandMode::solve;
        else
            throw ParseError(n, "band_mode must be multiply or solve");
    } else if (k == "boundary_slip") {
        if (v == "analytic")
            s.boundary_slip = BoundarySlip::analytic;
        else if (v == "previous")
            s.boundary_slip = BoundarySlip::previous;
        else
            throw ParseError(n, "boundary_slip must be analytic or previous");
    } else if (k == "output") {
        if (v.empty()) throw ParseError(n, "output needs a directory");
        c.output_dir = std::string(v);
    } else if (k == "reproducible") {
        c.reproducible = parse_bool(v, n, k);
    } else if (k == "threads") {
        s.threads = parse_number<int>(v, n, k);
    } else if (k == "seed") {
        s.seed = parse_number<std::uint64_t>(v, n, k);
    } else if (k == "perturbation") {
        s.perturbation = num();
    } else if (k == "beta_rate") {
        s.beta_rate = num();
    } else if (k == "h") {
        s.h = num();
    } else if (k == "T") {
        s.T = num();
    } else if (k == "mu") {
        m.mu = num();
    } else if (k == "lambda") {
        m.lambda = num();
    } else if (k == "mu_c") {
        m.mu_c = num();
    } else if (k == "mu2") {
        m.mu2 = num();
    } else if (k == "rho") {
        m.rho = num();
    } else if (k == "sigma_y") {
        m.sigma_y = num();
    } else if (k == "penalty") {
        m.penalty = num();
    } else if (k == "eps_reg") {
        m.eps_reg = num();
    } else if (k == "slip") {
        m.slip = vec3();
    } else if (k == "normal") {
        m.normal = vec3();
    } else if (k == "f_ext") {
        m.f_ext = vec3();
    } else if (k == "m_ext") {
        const auto d = parse_doubles(v, 9, n, k);
        for (int i = 0; i < 9; ++i) m.m_ext(i / 3, i % 3) = d[i];
    } else if (k == "history") {
        o.history = parse_number<int>(v, n, k);
    } else if (k == "eps0") {
        o.eps0 = num();
    } else if (k == "max_iter") {
        o.max_iter = parse_number<std::int64_t>(v, n, k);
    } else if (k == "c1") {
        o.c1 = num();
    } else if (k == "c2") {
        o.c2 = num();
    } else if (k == "skip_threshold") {
        o.skip_threshold = num();
    } else if (k == "max_line_search") {
        o.max_line_search = parse_number<int>(v, n, k);
    } else {
        throw ParseError(n, "unknown key '" + k + "'");
    }
}

} // namespace detail

inline RunConfig default_config(std::string_view scenario)
{
    RunConfig c;
    if (scenario == "shear") {
        c.scenario = "shear";
        c.spec = ScenarioSpec::shear_defaults();
    } else if (scenario == "bending") {
        c.scenario = "bending";
        c.spec = ScenarioSpec::bending_defaults();
    } else {
        throw ConfigurationError("unknown scenario '" + std::string(scenario) + "'");
    }
    return c;
}

/// Parses a configuration text; throws ParseError naming the first
/// offending line.
inline RunConfig parse_config(std::string_view text)
{
    std::vector<detail::ConfigLine> lines;
    int scenario_line = 0;
    std::string scenario = "shear";
    int no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = std::min(text.find('\n', pos), text.size());
        std::string_view raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        raw = detail::trim(raw);
        if (raw.empty()) continue;
        const auto eq = raw.find('=');
        if (eq == std::string_view::npos) throw ParseError(no, "expected 'key = value'");
        const std::string key(detail::trim(raw.substr(0, eq)));
        const std::string value(detail::trim(raw.substr(eq + 1)));
        if (key.empty()) throw ParseError(no, "missing key");
        for (const auto& l : lines)
            if (l.key == key) throw ParseError(no, "duplicate key '" + key + "'");
        if (key == "scenario") {
            if (value != "shear" && value != "bending") throw ParseError(no, "unknown scenario '" + value + "'");
            scenario = value;
            scenario_line = no;
        }
        lines.push_back({no, key, value});
    }

    RunConfig c = default_config(scenario);
    int penalty_line = 0;
    for (const auto& l : lines) {
        detail::apply_key(c, l);
        if (l.key == "penalty") penalty_line = l.line;
    }
    if (c.spec.parameterization == Parameterization::euler && penalty_line != 0)
        throw ParseError(penalty_line, "penalty has no effect with the euler parameterization");
    try {
        c.spec.validate();
    } catch (const ConfigurationError& e) {
        throw ParseError(lines.empty() ? std::max(scenario_line, 1) : lines.back().line, e.what());
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Artifacts

struct DofSummary {
    std::int64_t nodes = 0;
    std::int64_t boundary_nodes = 0;
    std::int64_t dofs_euler = 0;
    std::int64_t dofs_quaternion = 0;
};

inline DofSummary dof_summary(const Index3& d)
{
    const Grid3 g({1.0, 1.0, 1.0}, d);
    return {g.node_count(), g.boundary_node_count(), free_dof_count(d, Parameterization::euler),
            free_dof_count(d, Parameterization::quaternion)};
}

/// Storage of one double per free DOF, in MB of 2^20 bytes.
inline double dof_memory_mb(std::int64_t dofs) { return static_cast<double>(dofs) * 8.0 / 1048576.0; }

inline std::string iteration_label(const StepReport& r, bool two_pass)
{
    return two_pass ? std::to_string(r.pred_iters) + "/" + std::to_string(r.corr_iters)
                    : std::to_string(r.corr_iters);
}

inline void write_summary(std::ostream& os, const RunConfig& c, const std::vector<StepReport>& reports,
                          const std::string& failure)
{
    const ScenarioSpec& s = c.spec;
    const bool two_pass = s.preconditioning == Preconditioning::two_pass;
    const DofSummary dof = dof_summary(s.resolution);
    os << "scenario          " << c.scenario << '\n'
       << "parameterization  " << parameterization_label(s) << '\n'
       << "preconditioning   " << (two_pass ? "two_pass" : "off") << '\n'
       << "band_mode         " << (s.band_mode == BandMode::multiply ? "multiply" : "solve") << '\n'
       << "resolution        " << s.resolution[0] << " x " << s.resolution[1] << " x " << s.resolution[2] << '\n'
       << "eps0              " << s.lbfgs.eps0 << '\n'
       << "nodes             " << dof.nodes << " (boundary " << dof.boundary_nodes << ")\n";
    os << std::fixed << std::setprecision(2);
    os << "unknowns euler     " << dof.dofs_euler << "  memory " << dof_memory_mb(dof.dofs_euler) << " MB\n"
       << "unknowns quaternion " << dof.dofs_quaternion << "  memory " << dof_memory_mb(dof.dofs_quaternion)
       << " MB\n\n";
    os.unsetf(std::ios::floatfield);

    os << std::left << std::setw(6) << "step" << std::setw(8) << "t" << std::setw(16)
       << (two_pass ? "iter pred/corr" : "iterations") << std::setw(14) << "time [s]" << std::setw(16)
       << "energy" << std::setw(16) << "gradnorm" << "constraint\n";
    std::int64_t total = 0;
    double total_ms = 0.0, max_cv = 0.0;
    for (const auto& r : reports) {
        os << std::setw(6) << r.step << std::setw(8) << std::setprecision(4) << r.t << std::setw(16)
           << iteration_label(r, two_pass) << std::setw(14) << std::setprecision(6) << r.wall_ms / 1000.0
           << std::setw(16) << std::setprecision(6) << r.energy << std::setw(16) << r.gradnorm
           << r.constraint_violation << '\n';
        total += r.total_iters();
        total_ms += r.wall_ms;
        max_cv = std::max(max_cv, r.constraint_violation);
    }
    os << '\n';
    if (!reports.empty()) {
        os << "average iterations        " << std::setprecision(6)
           << static_cast<double>(total) / static_cast<double>(reports.size()) << '\n'
           << "total time [s]            " << total_ms / 1000.0 << '\n'
           << "max constraint violation  " << max_cv << '\n';
    }
    os << "status                    " << (failure.empty() ? "completed" : "failed: " + failure) << '\n';
}

/// Side-by-side table of two runs, one row per step.
inline void write_comparison(std::ostream& os, const RunConfig& a, const std::vector<StepReport>& ra,
                             const RunConfig& b, const std::vector<StepReport>& rb)
{
    const bool tpa = a.spec.preconditioning == Preconditioning::two_pass;
    const bool tpb = b.spec.preconditioning == Preconditioning::two_pass;
    auto label = [](const RunConfig& c) {
        return c.scenario + "/" + parameterization_label(c.spec)
               + (c.spec.preconditioning == Preconditioning::two_pass ? "/pc" : "");
    };
    os << "A: " << label(a) << "  resolution " << a.spec.resolution[0] << 'x' << a.spec.resolution[1] << 'x'
       << a.spec.resolution[2] << '\n'
       << "B: " << label(b) << "  resolution " << b.spec.resolution[0] << 'x' << b.spec.resolution[1] << 'x'
       << b.spec.resolution[2] << "\n\n";
    os << std::left << std::setw(6) << "step" << std::setw(16) << "iterations A" << std::setw(16)
       << "iterations B" << std::setw(14) << "time A [s]" << "time B [s]\n";
    const std::size_t rows = std::max(ra.size(), rb.size());
    std::int64_t ta = 0, tb = 0;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        os << std::setw(6) << i + 1;
        os << std::setw(16) << (i < ra.size() ? iteration_label(ra[i], tpa) : "-");
        os << std::setw(16) << (i < rb.size() ? iteration_label(rb[i], tpb) : "-");
        os << std::setw(14) << std::setprecision(6) << (i < ra.size() ? ra[i].wall_ms / 1000.0 : 0.0);
        os << (i < rb.size() ? rb[i].wall_ms / 1000.0 : 0.0) << '\n';
        if (i < ra.size()) ta += ra[i].total_iters(), ma += ra[i].wall_ms;
        if (i < rb.size()) tb += rb[i].total_iters(), mb += rb[i].wall_ms;
    }
    os << '\n';
    const double avg_a = ra.empty() ? 0.0 : static_cast<double>(ta) / static_cast<double>(ra.size());
    const double avg_b = rb.empty() ? 0.0 : static_cast<double>(tb) / static_cast<double>(rb.size());
    os << "average iterations  A " << avg_a << "  B " << avg_b << '\n';
    if (avg_a > 0.0) os << "B relative to A     " << std::setprecision(4) << 100.0 * (avg_b / avg_a - 1.0) << " %\n";
    os << "total time [s]      A " << std::setprecision(6) << ma / 1000.0 << "  B " << mb / 1000.0 << '\n';
}

struct RunArtifacts {
    std::vector<StepReport> reports;
    std::string failure;
    bool ok() const { return failure.empty(); }
};

inline std::string step_file(const std::string& stem, int step, const std::string& ext)
{
    std::ostringstream os;
    os << stem << '_' << std::setw(3) << std::setfill('0') << step << ext;
    return os.str();
}

/// Runs the scenario and writes into c.output_dir:
///   steps.csv, trace_step_NNN.csv (and trace_step_NNN_predictor.csv for
///   two-pass runs), fields_step_NNN.txt and summary.txt.
/// Artifacts of completed steps are kept when a later step fails.
inline RunArtifacts run_config(const RunConfig& c)
{
    namespace fs = std::filesystem;
    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    std::ofstream steps(dir / "steps.csv");
    if (!steps) throw ConfigurationError("cannot write to " + dir.string());
    write_report_header(steps);

    RunArtifacts art;
    const SimulationResult res = run_simulation(c.spec, [&](const StepOutcome& o) {
        StepReport r = o.report;
        if (c.reproducible) r.wall_ms = 0.0;
        write_report_row(steps, r);
        steps.flush();
        {
            std::ofstream tr(dir / step_file("trace_step", r.step, ".csv"));
            write_trace_csv(tr, o.corrector_trace, "energy");
        }
        if (c.spec.preconditioning == Preconditioning::two_pass) {
            std::ofstream tr(dir / step_file("trace_step", r.step, "_predictor.csv"));
            write_trace_csv(tr, o.predictor_trace, "energy");
        }
        std::ofstream fd(dir / step_file("fields_step", r.step, ".txt"));
        const Grid3 grid(c.spec.lengths, c.spec.resolution);
        write_field_dump(fd, grid, o.state, o.history.kappa0);
        art.reports.push_back(r);
    });
    art.failure = res.failure;
    std::ofstream sum(dir / "summary.txt");
    write_summary(sum, c, art.reports, art.failure);
    return art;
}

} // namespace cosserat

#endif
