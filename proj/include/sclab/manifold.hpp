#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace sclab {

// Points carry up to four coordinates: lattice coordinates in [0,1)^n for
// the flat models (periodic formulas accept any reals), ambient unit
// vectors for spheres.
using Point = std::array<double, 4>;

enum class ManifoldKind { torus, klein_bottle, sphere };

// Compact description of a model manifold.  All spectral data below is
// expressed through frequencies of sqrt(-Laplacian), not its eigenvalues.
class ManifoldModel {
  public:
    // flat n-torus with lattice basis columns b_1..b_n (default: unit cube)
    static ManifoldModel torus(int n);
    static ManifoldModel torus(int n, const std::array<std::array<double, 3>, 3>& basis);
    // standard Klein bottle: glide (y1+1, -y2) and translation (y1, y2+1),
    // fundamental domain [0,1)^2
    static ManifoldModel klein_bottle();
    // round unit n-sphere in R^{n+1}
    static ManifoldModel sphere(int n);

    ManifoldKind kind() const { return kind_; }
    int dimension() const { return n_; }
    bool flat() const { return kind_ != ManifoldKind::sphere; }
    double volume() const { return volume_; }
    // lattice basis (flat models); column i is generator i
    const std::array<std::array<double, 3>, 3>& basis() const { return basis_; }
    // dual basis rows: dual(i) . basis_column(j) = delta_ij
    const std::array<std::array<double, 3>, 3>& dual() const { return dual_; }

    std::string descriptor() const;
    bool operator==(const ManifoldModel& o) const { return descriptor() == o.descriptor(); }
    bool operator!=(const ManifoldModel& o) const { return !(*this == o); }

    // deck transformations of the fundamental-domain coordinates that
    // generate the covering group (torus: unit translations; Klein bottle:
    // glide then translation)
    int deck_generator_count() const;
    Point apply_deck_generator(int i, const Point& y) const;

  private:
    ManifoldModel() = default;
    ManifoldKind kind_ = ManifoldKind::torus;
    int n_ = 2;
    double volume_ = 1.0;
    std::array<std::array<double, 3>, 3> basis_{};
    std::array<std::array<double, 3>, 3> dual_{};
};

// One eigenfunction of the model, identified by an integer label:
//   torus: lattice mode m (n entries), frequency 2 pi |B^{-T} m|
//   klein_bottle: (p, q) with q >= 1, or (p, 0) with p even;
//                 frequency pi sqrt(p^2 + 4 q^2)
//   sphere: (l, j) with 0 <= j < mult(l), frequency sqrt(l (l + n - 1))
struct EigenIndex {
    std::array<std::int32_t, 4> label{};
    double frequency = 0.0;
};

bool eigen_index_less(const EigenIndex& a, const EigenIndex& b);

// multiplicity of the sphere eigenspace of degree l on S^n
std::int64_t sphere_degree_multiplicity(int n, int l);

// All eigenfunction labels with frequency in [lo, hi], sorted by frequency
// then label.  Bounds are inclusive; lo <= hi and lo >= 0 required.
std::vector<EigenIndex> enumerate_window(const ManifoldModel& model, double lo, double hi);

// Value of the L^2-normalized eigenfunction at a point.
std::complex<double> eval_eigenfunction(const ManifoldModel& model, const EigenIndex& idx,
                                        const Point& y);

// recomputes the frequency for a label and validates it for the model
EigenIndex make_index(const ManifoldModel& model, const std::array<std::int32_t, 4>& label);

// ------------------------------------------------------------- grids -----

// Product quadrature over the fundamental domain.  Flat models: uniform
// res^n grid, exact for band-limited integrands below the Nyquist index.
// Sphere (n = 2 only): Gauss-Legendre in cos(theta) times uniform phi with
// 2*res azimuthal nodes, exact for polynomial integrands of bounded degree.
// Points are streamed, not materialized.
class QuadratureGrid {
  public:
    const ManifoldModel& model() const { return model_; }
    long resolution() const { return res_; }
    long size() const { return size_; }
    double volume() const { return volume_; }
    Point point(long i) const;
    double weight(long i) const;

    // flat: number of rows (res^{n-1}), each row scans coordinate 1;
    // sphere: rows are theta nodes, each row scans phi
    long rows() const { return rows_; }
    long row_length() const { return row_len_; }
    Point row_point(long row, long k) const;
    double row_weight(long row, long k) const;

    // sphere accessors
    double theta(long row) const;
    double phi(long k) const;

  private:
    friend QuadratureGrid quadrature_grid(const ManifoldModel&, long);
    ManifoldModel model_ = ManifoldModel::torus(2);
    long res_ = 0, size_ = 0, rows_ = 0, row_len_ = 0;
    double volume_ = 0.0;
    std::vector<double> theta_, theta_w_; // sphere only
};

QuadratureGrid quadrature_grid(const ManifoldModel& model, long resolution);

// --------------------------------------------------------- geodesics -----

// A closed geodesic on a flat model, with the generator of its stabilizer
// in the covering group written in geodesic-adapted coordinates: the axis
// is the first coordinate, so the orthogonal part m0 fixes e1 and acts on
// the transverse block (identity for translations, a reflection for the
// Klein bottle glide).
struct GeodesicSpec {
    ManifoldModel model = ManifoldModel::torus(2);
    Point base{};
    std::array<double, 3> direction{};      // unit vector, physical coords
    std::array<std::int32_t, 3> lattice{};  // primitive lattice direction
    double length = 0.0;                    // l0, minimal period
    std::array<std::array<double, 3>, 3> m0{};
    int m0_order = 1;

    // admissible quasimode frequencies 2 pi k / l0
    double frequency(long k) const;
};

GeodesicSpec periodic_geodesic(const ManifoldModel& model,
                               const std::array<std::int32_t, 3>& direction,
                               const Point& base = Point{});

// ------------------------------------------------------------- tubes -----

// A tube of fixed transverse radius about an arclength segment |t| <= cbar
// of a closed geodesic (flat models), or the full equatorial band x3 = 0
// (sphere).  Membership accounts for all deck images of the axis.
struct TubeSpec {
    ManifoldModel model = ManifoldModel::torus(2);
    bool equatorial = false;
    GeodesicSpec geodesic;
    double radius = 0.0;
    double cbar = 0.25;

    static TubeSpec flat(const GeodesicSpec& geodesic, double radius, double cbar);
    static TubeSpec sphere_equator(const ManifoldModel& model, double radius);
};

bool tube_contains(const TubeSpec& tube, const Point& y);
// number of grid points across the tube diameter (resolution check)
long tube_cross_points(const TubeSpec& tube, const QuadratureGrid& grid);

} // namespace sclab
