#include "sclab/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sclab/errors.hpp"
#include "sclab/legendre.hpp"
#include "sclab/util.hpp"

namespace sclab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

std::array<std::array<double, 3>, 3> identity3() {
    return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

// determinant of the leading n x n block
double block_det(const std::array<std::array<double, 3>, 3>& b, int n) {
    if (n == 1) return b[0][0];
    if (n == 2) return b[0][0] * b[1][1] - b[0][1] * b[1][0];
    return b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
           b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
           b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
}

std::array<std::array<double, 3>, 3> block_inverse(const std::array<std::array<double, 3>, 3>& b,
                                                   int n, double det) {
    auto inv = identity3();
    if (n == 1) {
        inv[0][0] = 1.0 / det;
    } else if (n == 2) {
        inv[0][0] = b[1][1] / det;
        inv[0][1] = -b[0][1] / det;
        inv[1][0] = -b[1][0] / det;
        inv[1][1] = b[0][0] / det;
    } else {
        inv[0][0] = (b[1][1] * b[2][2] - b[1][2] * b[2][1]) / det;
        inv[0][1] = (b[0][2] * b[2][1] - b[0][1] * b[2][2]) / det;
        inv[0][2] = (b[0][1] * b[1][2] - b[0][2] * b[1][1]) / det;
        inv[1][0] = (b[1][2] * b[2][0] - b[1][0] * b[2][2]) / det;
        inv[1][1] = (b[0][0] * b[2][2] - b[0][2] * b[2][0]) / det;
        inv[1][2] = (b[0][2] * b[1][0] - b[0][0] * b[1][2]) / det;
        inv[2][0] = (b[1][0] * b[2][1] - b[1][1] * b[2][0]) / det;
        inv[2][1] = (b[0][1] * b[2][0] - b[0][0] * b[2][1]) / det;
        inv[2][2] = (b[0][0] * b[1][1] - b[0][1] * b[1][0]) / det;
    }
    return inv;
}

// frequency of a torus lattice mode: 2 pi |sum_i m_i dual_i|
double torus_frequency(const ManifoldModel& m, const std::array<std::int32_t, 4>& label) {
    double v[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < m.dimension(); ++i)
        for (int c = 0; c < m.dimension(); ++c) v[c] += double(label[i]) * m.dual()[i][c];
    return kTwoPi * std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

double klein_frequency(std::int32_t p, std::int32_t q) {
    return kPi * std::sqrt(double(p) * double(p) + 4.0 * double(q) * double(q));
}

double sphere_frequency(int n, std::int32_t l) {
    return std::sqrt(double(l) * double(l + n - 1));
}

std::complex<double> unit_phase(double u) {
    u -= std::nearbyint(u); // exact periodic reduction, keeps |u| <= 1/2
    return {std::cos(kTwoPi * u), std::sin(kTwoPi * u)};
}

constexpr long kMaxWindowModes = 1L << 26;

} // namespace

ManifoldModel ManifoldModel::torus(int n) { return torus(n, identity3()); }

ManifoldModel ManifoldModel::torus(int n, const std::array<std::array<double, 3>, 3>& basis) {
    if (n < 1 || n > 3) throw validation_error("torus dimension must be 1, 2, or 3");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if ((r >= n || c >= n) && basis[r][c] != (r == c ? 1.0 : 0.0))
                throw validation_error("torus basis must occupy the leading n x n block");
    double det = block_det(basis, n);
    if (!(std::abs(det) > 1e-12)) throw validation_error("torus basis is singular");
    ManifoldModel m;
    m.kind_ = ManifoldKind::torus;
    m.n_ = n;
    m.volume_ = std::abs(det);
    m.basis_ = basis;
    m.dual_ = block_inverse(basis, n, det);
    return m;
}

ManifoldModel ManifoldModel::klein_bottle() {
    ManifoldModel m;
    m.kind_ = ManifoldKind::klein_bottle;
    m.n_ = 2;
    m.volume_ = 1.0;
    m.basis_ = identity3();
    m.dual_ = identity3();
    return m;
}

ManifoldModel ManifoldModel::sphere(int n) {
    if (n < 2 || n > 3) throw validation_error("sphere dimension must be 2 or 3");
    ManifoldModel m;
    m.kind_ = ManifoldKind::sphere;
    m.n_ = n;
    m.volume_ = (n == 2) ? 4.0 * kPi : 2.0 * kPi * kPi;
    m.basis_ = identity3();
    m.dual_ = identity3();
    return m;
}

std::string ManifoldModel::descriptor() const {
    switch (kind_) {
        case ManifoldKind::klein_bottle: return "klein_bottle";
        case ManifoldKind::sphere: return "sphere[n=" + std::to_string(n_) + "]";
        case ManifoldKind::torus: break;
    }
    std::string s = "torus[n=" + std::to_string(n_) + ";B=";
    for (int c = 0; c < n_; ++c) {
        if (c) s += ';';
        for (int r = 0; r < n_; ++r) {
            if (r) s += ',';
            s += format_double(basis_[r][c]);
        }
    }
    return s + "]";
}

int ManifoldModel::deck_generator_count() const {
    if (kind_ == ManifoldKind::sphere) return 0;
    if (kind_ == ManifoldKind::klein_bottle) return 2;
    return n_;
}

Point ManifoldModel::apply_deck_generator(int i, const Point& y) const {
    if (i < 0 || i >= deck_generator_count())
        throw validation_error("deck generator index out of range");
    Point out = y;
    if (kind_ == ManifoldKind::klein_bottle) {
        if (i == 0) { // glide
            out[0] += 1.0;
            out[1] = -out[1];
        } else {
            out[1] += 1.0;
        }
    } else {
        out[i] += 1.0;
    }
    return out;
}

bool eigen_index_less(const EigenIndex& a, const EigenIndex& b) {
    if (a.frequency != b.frequency) return a.frequency < b.frequency;
    return a.label < b.label;
}

std::int64_t sphere_degree_multiplicity(int n, int l) {
    if (l < 0) throw validation_error("degree must be nonnegative");
    auto binom = [](std::int64_t a, std::int64_t k) -> std::int64_t {
        if (a < k || k < 0) return 0;
        std::int64_t r = 1;
        for (std::int64_t i = 1; i <= k; ++i) r = r * (a - k + i) / i;
        return r;
    };
    return binom(n + l, n) - binom(n + l - 2, n);
}

EigenIndex make_index(const ManifoldModel& model, const std::array<std::int32_t, 4>& label) {
    EigenIndex idx;
    idx.label = label;
    switch (model.kind()) {
        case ManifoldKind::torus:
            for (int i = model.dimension(); i < 4; ++i)
                if (label[i] != 0) throw validation_error("torus label uses only n entries");
            idx.frequency = torus_frequency(model, label);
            break;
        case ManifoldKind::klein_bottle: {
            if (label[2] != 0 || label[3] != 0)
                throw validation_error("klein bottle label is a pair (p, q)");
            std::int32_t p = label[0], q = label[1];
            if (q < 0) throw validation_error("klein bottle label needs q >= 0");
            if (q == 0 && (p % 2) != 0)
                throw validation_error("klein bottle modes with q = 0 need even p");
            idx.frequency = klein_frequency(p, q);
            break;
        }
        case ManifoldKind::sphere: {
            if (label[2] != 0 || label[3] != 0)
                throw validation_error("sphere label is a pair (l, j)");
            std::int32_t l = label[0], j = label[1];
            if (l < 0 || j < 0 || j >= sphere_degree_multiplicity(model.dimension(), l))
                throw validation_error("sphere label (l, j) needs 0 <= j < mult(l)");
            idx.frequency = sphere_frequency(model.dimension(), l);
            break;
        }
    }
    return idx;
}

std::vector<EigenIndex> enumerate_window(const ManifoldModel& model, double lo, double hi) {
    if (!(lo >= 0.0) || !(hi >= lo) || !std::isfinite(hi))
        throw validation_error("frequency window needs 0 <= lo <= hi, finite");
    std::vector<EigenIndex> out;
    switch (model.kind()) {
        case ManifoldKind::torus: {
            int n = model.dimension();
            double R = hi / kTwoPi;
            long bound[3] = {0, 0, 0};
            double box = 1.0;
            for (int i = 0; i < n; ++i) {
                double bn = 0.0;
                for (int c = 0; c < n; ++c) bn += model.basis()[c][i] * model.basis()[c][i];
                bound[i] = long(std::floor(R * std::sqrt(bn) + 1e-9)) + 1;
                box *= 2.0 * double(bound[i]) + 1.0;
            }
            if (box > double(kMaxWindowModes))
                throw capability_error("frequency window enumeration exceeds the mode cap");
            std::array<std::int32_t, 4> lab{};
            for (long m1 = -bound[0]; m1 <= bound[0]; ++m1)
                for (long m2 = -bound[1]; m2 <= bound[1]; ++m2)
                    for (long m3 = -bound[2]; m3 <= bound[2]; ++m3) {
                        lab[0] = std::int32_t(m1);
                        lab[1] = n > 1 ? std::int32_t(m2) : 0;
                        lab[2] = n > 2 ? std::int32_t(m3) : 0;
                        if (n < 3 && m3 != 0) continue;
                        if (n < 2 && m2 != 0) continue;
                        double f = torus_frequency(model, lab);
                        if (f >= lo && f <= hi) out.push_back({lab, f});
                    }
            break;
        }
        case ManifoldKind::klein_bottle: {
            long pmax = long(hi / kPi) + 1;
            long qmax = long(hi / kTwoPi) + 1;
            if ((2 * pmax + 1) * (qmax + 1) > kMaxWindowModes)
                throw capability_error("frequency window enumeration exceeds the mode cap");
            for (long p = -pmax; p <= pmax; ++p)
                for (long q = 0; q <= qmax; ++q) {
                    if (q == 0 && (p % 2) != 0) continue;
                    double f = klein_frequency(std::int32_t(p), std::int32_t(q));
                    if (f >= lo && f <= hi)
                        out.push_back({{std::int32_t(p), std::int32_t(q), 0, 0}, f});
                }
            break;
        }
        case ManifoldKind::sphere: {
            long total = 0;
            for (std::int32_t l = 0;; ++l) {
                double f = sphere_frequency(model.dimension(), l);
                if (f > hi) break;
                if (f < lo) continue;
                std::int64_t mult = sphere_degree_multiplicity(model.dimension(), l);
                total += mult;
                if (total > kMaxWindowModes)
                    throw capability_error("frequency window enumeration exceeds the mode cap");
                for (std::int32_t j = 0; j < mult; ++j) out.push_back({{l, j, 0, 0}, f});
            }
            break;
        }
    }
    std::sort(out.begin(), out.end(), eigen_index_less);
    return out;
}

std::complex<double> eval_eigenfunction(const ManifoldModel& model, const EigenIndex& idx,
                                        const Point& y) {
    switch (model.kind()) {
        case ManifoldKind::torus: {
            double u = 0.0;
            for (int i = 0; i < model.dimension(); ++i) u += double(idx.label[i]) * y[i];
            return unit_phase(u) / std::sqrt(model.volume());
        }
        case ManifoldKind::klein_bottle: {
            double p = idx.label[0], q = idx.label[1];
            if (idx.label[1] == 0) return unit_phase(0.5 * p * y[0]);
            std::complex<double> plus = unit_phase(0.5 * p * y[0] + q * y[1]);
            std::complex<double> minus = unit_phase(0.5 * p * y[0] - q * y[1]);
            double sign = (idx.label[0] % 2 == 0) ? 1.0 : -1.0;
            return (plus + sign * minus) / std::sqrt(2.0);
        }
        case ManifoldKind::sphere: {
            if (model.dimension() != 2)
                throw capability_error("sphere eigenfunctions are evaluated for n = 2 only");
            double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
            if (!(std::abs(r - 1.0) < 1e-8))
                throw validation_error("sphere points must lie on the unit sphere");
            double theta = std::acos(std::clamp(y[2] / r, -1.0, 1.0));
            double phi = std::atan2(y[1], y[0]);
            std::int32_t l = idx.label[0];
            int m = int(idx.label[1]) - int(l); // signed order, sin branch when negative
            return {real_sph_harm(l, m, theta, phi), 0.0};
        }
    }
    throw contract_error("unreachable manifold kind");
}

// ------------------------------------------------------------- grids -----

QuadratureGrid quadrature_grid(const ManifoldModel& model, long resolution) {
    if (resolution < 8) throw contract_error("quadrature resolution must be at least 8");
    QuadratureGrid g;
    g.model_ = model;
    g.res_ = resolution;
    g.volume_ = model.volume();
    if (model.flat()) {
        int n = model.dimension();
        double size = std::pow(double(resolution), n);
        if (size > 4.3e9) throw capability_error("quadrature grid exceeds the point cap");
        g.size_ = 1;
        for (int i = 0; i < n; ++i) g.size_ *= resolution;
        g.row_len_ = resolution;
        g.rows_ = g.size_ / resolution;
    } else {
        if (model.dimension() != 2)
            throw capability_error("sphere quadrature is implemented for n = 2 only");
        if (resolution > 65536) throw capability_error("quadrature grid exceeds the point cap");
        GaussLegendre gl = gauss_legendre(int(resolution));
        g.theta_.resize(size_t(resolution));
        g.theta_w_.resize(size_t(resolution));
        for (long i = 0; i < resolution; ++i) {
            g.theta_[size_t(i)] = std::acos(std::clamp(gl.x[size_t(i)], -1.0, 1.0));
            g.theta_w_[size_t(i)] = gl.w[size_t(i)];
        }
        g.rows_ = resolution;
        g.row_len_ = 2 * resolution;
        g.size_ = g.rows_ * g.row_len_;
    }
    return g;
}

Point QuadratureGrid::point(long i) const {
    if (i < 0 || i >= size_) throw contract_error("grid point index out of range");
    return row_point(i / row_len_, i % row_len_);
}

double QuadratureGrid::weight(long i) const {
    if (i < 0 || i >= size_) throw contract_error("grid point index out of range");
    return row_weight(i / row_len_, i % row_len_);
}

Point QuadratureGrid::row_point(long row, long k) const {
    Point p{};
    if (model_.flat()) {
        p[0] = double(k) / double(res_);
        long rest = row;
        for (int c = 1; c < model_.dimension(); ++c) {
            p[c] = double(rest % res_) / double(res_);
            rest /= res_;
        }
        return p;
    }
    double th = theta_[size_t(row)], ph = phi(k);
    p[0] = std::sin(th) * std::cos(ph);
    p[1] = std::sin(th) * std::sin(ph);
    p[2] = std::cos(th);
    return p;
}

double QuadratureGrid::row_weight(long row, long k) const {
    (void)k;
    if (model_.flat()) return volume_ / double(size_);
    return theta_w_[size_t(row)] * (kTwoPi / double(row_len_));
}

double QuadratureGrid::theta(long row) const {
    if (model_.flat()) throw contract_error("theta is a sphere grid accessor");
    return theta_[size_t(row)];
}

double QuadratureGrid::phi(long k) const { return kTwoPi * double(k) / double(row_len_); }

// --------------------------------------------------------- geodesics -----

double GeodesicSpec::frequency(long k) const {
    if (k < 1) throw validation_error("geodesic frequency index must be positive");
    return kTwoPi * double(k) / length;
}

GeodesicSpec periodic_geodesic(const ManifoldModel& model,
                               const std::array<std::int32_t, 3>& direction, const Point& base) {
    if (!model.flat())
        throw capability_error("periodic geodesics are catalogued for flat models only");
    std::array<std::int32_t, 3> d = direction;
    for (int i = model.dimension(); i < 3; ++i)
        if (d[i] != 0) throw contract_error("geodesic direction uses only n entries");
    long g = 0;
    for (int i = 0; i < 3; ++i) g = std::gcd(g, long(std::abs(d[i])));
    if (g == 0) throw contract_error("geodesic direction must be a nonzero closed direction");
    for (int i = 0; i < 3; ++i) d[i] = std::int32_t(d[i] / g);

    GeodesicSpec spec;
    spec.model = model;
    spec.base = base;
    spec.lattice = d;
    spec.m0 = identity3();
    spec.m0_order = 1;

    double v[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < model.dimension(); ++c)
        for (int i = 0; i < model.dimension(); ++i) v[c] += model.basis()[c][i] * double(d[i]);
    double vn = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    for (int c = 0; c < 3; ++c) spec.direction[c] = v[c] / vn;

    if (model.kind() == ManifoldKind::torus) {
        spec.length = vn;
        return spec;
    }

    // Klein bottle: the glide axis (and its half-height twin) is stabilized
    // by the glide itself, so l0 = 1 with a reflecting transverse part; any
    // other horizontal line only closes after the square of the glide.
    if (d[1] == 0) {
        double frac = base[1] - std::floor(base[1]);
        double to_axis = std::min({frac, std::abs(frac - 0.5), std::abs(frac - 1.0)});
        if (to_axis < 1e-12) {
            spec.length = 1.0;
            spec.m0[1][1] = -1.0;
            spec.m0_order = 2;
        } else {
            spec.length = 2.0;
        }
        return spec;
    }
    if (d[0] == 0) {
        spec.length = 1.0;
        return spec;
    }
    // oblique directions close under the translation sublattice 2Z x Z
    double t = (d[0] % 2 == 0) ? 1.0 : 2.0;
    spec.length = t * vn;
    return spec;
}

// ------------------------------------------------------------- tubes -----

namespace {

// distance of x to the set c + Z
double dist_mod1(double x, double c) {
    double u = x - c;
    u -= std::nearbyint(u);
    return std::abs(u);
}

// tube axes must be coordinate directions of an orthogonal unit lattice;
// that is the only case with an exact closed-form image set
int tube_axis(const TubeSpec& tube) {
    const auto& d = tube.geodesic.lattice;
    int axis = -1;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) == 1 && axis < 0)
            axis = i;
        else if (d[i] != 0)
            return -1;
    }
    return axis;
}

} // namespace

TubeSpec TubeSpec::flat(const GeodesicSpec& geodesic, double radius, double cbar) {
    if (!geodesic.model.flat()) throw contract_error("flat tube needs a flat geodesic");
    if (!(radius > 0.0)) throw validation_error("tube radius must be positive");
    if (!(cbar > 0.0 && cbar < 0.5))
        throw validation_error("tube arclength half-window must lie in (0, 1/2)");
    TubeSpec t;
    t.model = geodesic.model;
    t.geodesic = geodesic;
    t.radius = radius;
    t.cbar = cbar;
    const auto& b = geodesic.model.basis();
    for (int r = 0; r < geodesic.model.dimension(); ++r)
        for (int c = 0; c < geodesic.model.dimension(); ++c)
            if (r != c && b[r][c] != 0.0)
                throw capability_error("tube membership needs an orthogonal lattice basis");
    if (tube_axis(t) < 0)
        throw capability_error("tube membership is implemented for coordinate axes");
    if (geodesic.model.kind() == ManifoldKind::klein_bottle && tube_axis(t) != 0)
        throw capability_error("klein bottle tubes are implemented about the glide axis");
    return t;
}

TubeSpec TubeSpec::sphere_equator(const ManifoldModel& model, double radius) {
    if (model.flat() || model.dimension() != 2)
        throw contract_error("equatorial tubes are defined on the 2-sphere");
    if (!(radius > 0.0 && radius < 1.5)) throw validation_error("tube radius out of range");
    TubeSpec t;
    t.model = model;
    t.equatorial = true;
    t.radius = radius;
    return t;
}

bool tube_contains(const TubeSpec& tube, const Point& y) {
    if (tube.equatorial) {
        // geodesic distance to the equator is |theta - pi/2| = asin(|x3|)
        double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
        return std::asin(std::min(1.0, std::abs(y[2]) / r)) <= tube.radius;
    }
    int axis = tube_axis(tube);
    int n = tube.model.dimension();
    const Point& base = tube.geodesic.base;
    // arclength window along the axis (lattice spacing is 1 on these models)
    double scale = std::abs(tube.model.basis()[axis][axis]);
    if (dist_mod1(y[axis], base[axis]) * scale > tube.cbar) return false;
    bool klein_axis = tube.model.kind() == ManifoldKind::klein_bottle;
    for (int c = 0; c < n; ++c) {
        if (c == axis) continue;
        double sc = std::abs(tube.model.basis()[c][c]);
        double d = dist_mod1(y[c], base[c]) * sc;
        if (klein_axis && c == 1) d = std::min(d, dist_mod1(y[c], -base[c]) * sc);
        if (d > tube.radius) return false;
    }
    return true;
}

long tube_cross_points(const TubeSpec& tube, const QuadratureGrid& grid) {
    if (tube.equatorial) {
        long count = 0;
        for (long r = 0; r < grid.rows(); ++r)
            if (std::abs(grid.theta(r) - 0.5 * kPi) <= tube.radius) ++count;
        return count;
    }
    int axis = tube_axis(tube);
    double sc = std::abs(tube.model.basis()[axis == 0 ? 1 : 0][axis == 0 ? 1 : 0]);
    return long(std::floor(2.0 * tube.radius / sc * double(grid.resolution())));
}

} // namespace sclab
