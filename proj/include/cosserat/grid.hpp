#ifndef COSSERAT_GRID_HPP
#define COSSERAT_GRID_HPP

// Structured box discretization of (0,L1)x(0,L2)x(0,L3): node coordinates,
// composite trapezoidal quadrature weights, finite-difference stencils and
// the packing of nodal fields into the free-DOF optimization vector.

#include "cosserat/error.hpp"
#include "cosserat/kinematics.hpp"

#include <array>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace cosserat {

using Index3 = std::array<int, 3>;

class Grid3 {
public:
    Grid3() = default;

    Grid3(const Vec3& lengths, const Index3& intervals) : lengths_(lengths), d_(intervals)
    {
        for (int l = 0; l < 3; ++l) {
            if (d_[l] < 2)
                throw ConfigurationError("grid: axis " + std::to_string(l + 1)
                                         + " needs at least 2 intervals (got " + std::to_string(d_[l]) + ")");
            if (!(lengths_[l] > 0.0))
                throw ConfigurationError("grid: axis " + std::to_string(l + 1) + " length must be positive");
            eta_[l] = lengths_[l] / d_[l];
        }
        cell_volume_ = eta_[0] * eta_[1] * eta_[2];
    }

    const Vec3& lengths() const { return lengths_; }
    const Index3& intervals() const { return d_; }
    const Vec3& spacing() const { return eta_; }
    /// w = eta1 eta2 eta3
    double cell_volume() const { return cell_volume_; }
    double volume() const { return lengths_[0] * lengths_[1] * lengths_[2]; }

    int nodes_along(int axis) const { return d_[axis] + 1; }
    std::int64_t node_count() const
    {
        return std::int64_t(d_[0] + 1) * (d_[1] + 1) * (d_[2] + 1);
    }

    std::int64_t boundary_node_count() const
    {
        return node_count() - std::int64_t(d_[0] - 1) * (d_[1] - 1) * (d_[2] - 1);
    }

    /// Linear node index, i fastest.
    std::int64_t index(int i, int j, int k) const
    {
        return i + std::int64_t(d_[0] + 1) * (j + std::int64_t(d_[1] + 1) * k);
    }

    std::int64_t index(const Index3& ijk) const { return index(ijk[0], ijk[1], ijk[2]); }

    Index3 node(std::int64_t n) const
    {
        const int n0 = d_[0] + 1, n1 = d_[1] + 1;
        return {static_cast<int>(n % n0), static_cast<int>((n / n0) % n1), static_cast<int>(n / (std::int64_t(n0) * n1))};
    }

    bool contains(int i, int j, int k) const
    {
        return i >= 0 && j >= 0 && k >= 0 && i <= d_[0] && j <= d_[1] && k <= d_[2];
    }

    Vec3 position(int i, int j, int k) const { return {i * eta_[0], j * eta_[1], k * eta_[2]}; }
    Vec3 position(const Index3& ijk) const { return position(ijk[0], ijk[1], ijk[2]); }

    bool is_boundary(int i, int j, int k) const
    {
        return i == 0 || j == 0 || k == 0 || i == d_[0] || j == d_[1] || k == d_[2];
    }

    bool is_boundary(const Index3& ijk) const { return is_boundary(ijk[0], ijk[1], ijk[2]); }

private:
    Vec3 lengths_{1.0, 1.0, 1.0};
    Index3 d_{2, 2, 2};
    Vec3 eta_{0.5, 0.5, 0.5};
    double cell_volume_ = 0.125;
};

inline Grid3 build_grid(const Vec3& lengths, const Index3& intervals) { return Grid3(lengths, intervals); }

/// Trapezoidal product weight N_ijk: 1 per boundary axis, 2 per interior axis.
inline int newton_cotes_weight(int i, int j, int k, const Grid3& grid)
{
    if (!grid.contains(i, j, k))
        throw IndexError("newton_cotes_weight: node (" + std::to_string(i) + "," + std::to_string(j) + ","
                         + std::to_string(k) + ") outside grid");
    const auto& d = grid.intervals();
    auto n = [](int a, int dd) { return (a == 0 || a == dd) ? 1 : 2; };
    return n(i, d[0]) * n(j, d[1]) * n(k, d[2]);
}

/// Quadrature factor (w/8) N_ijk of a node.
inline double quadrature_weight(const Grid3& grid, const Index3& ijk)
{
    return grid.cell_volume() / 8.0 * newton_cotes_weight(ijk[0], ijk[1], ijk[2], grid);
}

inline double central_diff(double f_minus, double f_plus, double eta) { return (f_plus - f_minus) / (2.0 * eta); }

/// Two-point derivative stencil along one axis: central in the interior,
/// first-order one-sided at the two ends.
struct AxisStencil {
    std::array<int, 2> index;
    std::array<double, 2> coeff;
};

inline AxisStencil axis_stencil(int i, int d, double eta)
{
    if (i == 0) return {{1, 0}, {1.0 / eta, -1.0 / eta}};
    if (i == d) return {{d, d - 1}, {1.0 / eta, -1.0 / eta}};
    return {{i + 1, i - 1}, {0.5 / eta, -0.5 / eta}};
}

/// Discrete partial derivative of a nodal field along `axis` at node ijk.
template <class Field, class Value = std::decay_t<decltype(std::declval<Field>()(std::int64_t{}))>>
Value grid_derivative(const Grid3& grid, const Index3& ijk, int axis, Field&& field)
{
    const AxisStencil st = axis_stencil(ijk[axis], grid.intervals()[axis], grid.spacing()[axis]);
    Index3 a = ijk, b = ijk;
    a[axis] = st.index[0];
    b[axis] = st.index[1];
    return st.coeff[0] * field(grid.index(a)) + st.coeff[1] * field(grid.index(b));
}

// ---------------------------------------------------------------------------
// Fields and DOF layout

enum class Parameterization { quaternion, euler };

/// Nodal unknowns. `q` is used by the quaternion parameterization, `alpha`
/// by the Euler-angle one; the unused container is empty.
struct FieldState {
    std::vector<Vec3> phi;
    std::vector<Quaternion> q;
    std::vector<EulerAngles> alpha;
    std::vector<double> gamma;

    static FieldState sized(std::int64_t nodes, Parameterization p)
    {
        FieldState s;
        s.phi.resize(nodes);
        s.gamma.resize(nodes);
        if (p == Parameterization::quaternion)
            s.q.resize(nodes);
        else
            s.alpha.resize(nodes);
        return s;
    }

    Parameterization parameterization() const
    {
        return q.empty() && !alpha.empty() ? Parameterization::euler : Parameterization::quaternion;
    }

    std::int64_t node_count() const { return static_cast<std::int64_t>(phi.size()); }
};

/// Which slots of a node take part in the optimization vector.
enum class DofSubset { all, rotation_only };

/// Node-major slot map: phi (3), rotation (4 quaternion or 3 Euler), gamma (1).
/// phi and rotation slots of boundary nodes are Dirichlet-fixed; gamma is
/// free at every node.
class DofLayout {
public:
    DofLayout(const Grid3& grid, Parameterization p, DofSubset subset = DofSubset::all)
        : grid_(grid), param_(p), subset_(subset)
    {
        const std::int64_t n = grid.node_count();
        const int spn = slots_per_node();
        free_of_slot_.assign(static_cast<std::size_t>(n * spn), -1);
        for (std::int64_t node = 0; node < n; ++node) {
            const bool boundary = grid.is_boundary(grid.node(node));
            for (int s = 0; s < spn; ++s) {
                const bool is_rot = s >= rotation_offset() && s < gamma_slot();
                const bool is_gamma = s == gamma_slot();
                bool active = subset == DofSubset::all || is_rot;
                if (!is_gamma && boundary) active = false;
                if (active) {
                    free_of_slot_[static_cast<std::size_t>(node * spn + s)] =
                        static_cast<std::int64_t>(slot_of_free_.size());
                    slot_of_free_.push_back(node * spn + s);
                }
            }
        }
    }

    const Grid3& grid() const { return grid_; }
    Parameterization parameterization() const { return param_; }
    DofSubset subset() const { return subset_; }

    int rotation_slots() const { return param_ == Parameterization::quaternion ? 4 : 3; }
    int slots_per_node() const { return 4 + rotation_slots(); }
    static constexpr int rotation_offset() { return 3; }
    int gamma_slot() const { return 3 + rotation_slots(); }

    /// D, the length of the optimization vector.
    std::int64_t free_count() const { return static_cast<std::int64_t>(slot_of_free_.size()); }

    /// Free-vector position of (node, slot), or -1 if fixed or inactive.
    std::int64_t free_index(std::int64_t node, int slot) const
    {
        return free_of_slot_[static_cast<std::size_t>(node * slots_per_node() + slot)];
    }

    /// Global slot id (node * slots_per_node + slot) of free entry e.
    std::int64_t slot_of(std::int64_t e) const { return slot_of_free_[static_cast<std::size_t>(e)]; }

private:
    Grid3 grid_;
    Parameterization param_;
    DofSubset subset_;
    std::vector<std::int64_t> free_of_slot_;
    std::vector<std::int64_t> slot_of_free_;
};

/// Closed-form free-DOF counts, usable for resolutions too large to lay out.
inline std::int64_t free_dof_count(const Index3& d, Parameterization p)
{
    const std::int64_t n = std::int64_t(d[0] + 1) * (d[1] + 1) * (d[2] + 1);
    const std::int64_t b = n - std::int64_t(d[0] - 1) * (d[1] - 1) * (d[2] - 1);
    return p == Parameterization::quaternion ? 8 * n - 7 * b : 7 * n - 6 * b;
}

namespace detail {

inline double& slot_ref(FieldState& s, Parameterization p, std::int64_t node, int slot)
{
    if (slot < 3) return s.phi[node][slot];
    if (p == Parameterization::quaternion) {
        if (slot < 7) return s.q[node][slot - 3];
        return s.gamma[node];
    }
    if (slot < 6) return s.alpha[node][slot - 3];
    return s.gamma[node];
}

inline void check_state(const FieldState& s, const DofLayout& layout)
{
    const std::int64_t n = layout.grid().node_count();
    const bool quat = layout.parameterization() == Parameterization::quaternion;
    const auto rot = quat ? s.q.size() : s.alpha.size();
    if (static_cast<std::int64_t>(s.phi.size()) != n || static_cast<std::int64_t>(s.gamma.size()) != n
        || static_cast<std::int64_t>(rot) != n)
        throw StructuralError("field state does not match the grid/parameterization of the layout");
}

} // namespace detail

/// Reads a single slot of a node.
inline double slot_value(const FieldState& s, Parameterization p, std::int64_t node, int slot)
{
    return detail::slot_ref(const_cast<FieldState&>(s), p, node, slot);
}

inline std::vector<double> pack(const FieldState& state, const DofLayout& layout)
{
    detail::check_state(state, layout);
    const int spn = layout.slots_per_node();
    std::vector<double> v(static_cast<std::size_t>(layout.free_count()));
    for (std::int64_t e = 0; e < layout.free_count(); ++e) {
        const std::int64_t gs = layout.slot_of(e);
        v[e] = slot_value(state, layout.parameterization(), gs / spn, static_cast<int>(gs % spn));
    }
    return v;
}

/// Overwrites the free entries of `base` (which carries the Dirichlet data)
/// with the values in v.
inline void unpack_into(std::span<const double> v, const DofLayout& layout, FieldState& base)
{
    detail::check_state(base, layout);
    if (static_cast<std::int64_t>(v.size()) != layout.free_count())
        throw StructuralError("unpack: vector length " + std::to_string(v.size()) + " != free DOF count "
                              + std::to_string(layout.free_count()));
    const int spn = layout.slots_per_node();
    for (std::int64_t e = 0; e < layout.free_count(); ++e) {
        const std::int64_t gs = layout.slot_of(e);
        detail::slot_ref(base, layout.parameterization(), gs / spn, static_cast<int>(gs % spn)) = v[e];
    }
}

inline FieldState unpack(std::span<const double> v, const DofLayout& layout, FieldState base)
{
    unpack_into(v, layout, base);
    return base;
}

/// One line per node: i j k x1 x2 x3 phi1 phi2 phi3 q0 q1 q2 q3 gamma kappa.
/// Euler states are written through the quaternion of their rotation.
inline void write_field_dump(std::ostream& os, const Grid3& grid, const FieldState& state,
                             std::span<const double> kappa)
{
    const auto old_flags = os.flags();
    const auto old_prec = os.precision();
    os << std::setprecision(17);
    const bool quat = state.parameterization() == Parameterization::quaternion;
    for (std::int64_t n = 0; n < grid.node_count(); ++n) {
        const Index3 ijk = grid.node(n);
        const Vec3 x = grid.position(ijk);
        const Quaternion q = quat ? state.q[n] : quat_from_rotation(rotation_euler(state.alpha[n]));
        os << ijk[0] << ' ' << ijk[1] << ' ' << ijk[2] << ' ' << x[0] << ' ' << x[1] << ' ' << x[2] << ' '
           << state.phi[n][0] << ' ' << state.phi[n][1] << ' ' << state.phi[n][2] << ' ' << q.q0 << ' ' << q.q1
           << ' ' << q.q2 << ' ' << q.q3 << ' ' << state.gamma[n] << ' '
           << (kappa.empty() ? 0.0 : kappa[static_cast<std::size_t>(n)]) << '\n';
    }
    os.flags(old_flags);
    os.precision(old_prec);
}

} // namespace cosserat

#endif
