#include "sclab/quasimode.hpp"

#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_legendre.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>

#include "sclab/errors.hpp"
#include "sclab/util.hpp"

namespace sclab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::complex<double> phase2pi(double u) {
    u -= std::nearbyint(u);
    double a = kTwoPi * u;
    return {std::cos(a), std::sin(a)};
}

// |u - xi/|xi|| for a physical dual vector xi, the plate's angular argument.
double axis_gap(const std::array<double, 3>& u, const std::array<double, 3>& xi, double r) {
    double d0 = u[0] - xi[0] / r;
    double d1 = u[1] - xi[1] / r;
    double d2 = u[2] - xi[2] / r;
    return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
}

struct PlateBox {
    double center[3];
    long lo[3], hi[3];
    double r_rad;  // radial half-extent of the shell, in |xi| units
    double r_perp; // transverse half-extent of the cone section
};

// Integer bounding box, per lattice axis, of the dual-space plate
//   { xi : | |xi| - lambda | <= r_rad, |u - xi/|xi|| <= sqrt(delta/lambda) }.
PlateBox plate_box(const ManifoldModel& model, const std::array<double, 3>& u, double lambda,
                   double delta, double s_reach) {
    PlateBox box{};
    box.r_rad = s_reach * delta; // s_reach / T
    box.r_perp = (lambda + box.r_rad) * std::sqrt(delta / lambda);
    const auto& B = model.basis();
    for (int i = 0; i < model.dimension(); ++i) {
        double bi[3] = {B[0][i], B[1][i], B[2][i]};
        double along = u[0] * bi[0] + u[1] * bi[1] + u[2] * bi[2];
        double len2 = bi[0] * bi[0] + bi[1] * bi[1] + bi[2] * bi[2];
        double perp = std::sqrt(std::max(len2 - along * along, 0.0));
        double c = lambda / kTwoPi * along;
        double h = (box.r_rad * std::abs(along) + box.r_perp * perp) / kTwoPi + 1.0;
        box.center[i] = c;
        box.lo[i] = long(std::ceil(c - h));
        box.hi[i] = long(std::floor(c + h));
    }
    return box;
}

void validate_knapp_params(const KnappParams& params) {
    if (!(params.c0 > 0.0 && params.c0 < 1.0))
        throw validation_error("knapp window support radius c0 must lie in (0,1)");
    if (params.k < 2) throw validation_error("knapp mode number k must be at least 2");
    if (!(params.truncation_multiplier > 0.0))
        throw validation_error("knapp truncation multiplier must be positive");
}

} // namespace

double KnappParams::lambda(double l0) const { return kTwoPi * double(k) / l0; }

std::shared_ptr<const EtaProfile> knapp_eta(double c0) {
    static std::mutex mutex;
    static std::map<std::uint64_t, std::shared_ptr<const EtaProfile>> cache;
    std::uint64_t key;
    static_assert(sizeof(key) == sizeof(c0));
    std::memcpy(&key, &c0, sizeof(key));
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto made = std::make_shared<const EtaProfile>(c0);
    cache.emplace(key, made);
    return made;
}

CoefficientVector knapp_flat(const ManifoldModel& model, const GeodesicSpec& geodesic,
                             const KnappParams& params) {
    if (!model.flat())
        throw capability_error("knapp construction is defined on flat models only");
    if (geodesic.model != model)
        throw contract_error("geodesic belongs to a different model");
    validate_knapp_params(params);
    const double lambda = params.lambda(geodesic.length);
    if (!(lambda > M_E))
        throw domain_error("mode number too small: 2 pi k / l0 must exceed e for a log window");
    const double T = std::log(lambda);
    const double delta = 1.0 / T;
    const int n = model.dimension();

    auto eta = params.eta ? params.eta : knapp_eta(params.c0);
    if (eta->is_zero()) return CoefficientVector(model);

    const double s_reach = std::min(eta->reach(1e-15), eta->support_radius());
    const PlateBox box = plate_box(model, geodesic.direction, lambda, delta, s_reach);
    const double ang_scale = std::sqrt(lambda / delta);
    const auto& u = geodesic.direction;
    const auto& dual = model.dual();

    // amplitude of one raw plane wave at dual point xi
    auto symbol = [&](const std::array<double, 3>& xi) -> double {
        double r = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        if (!(r > 0.0)) return 0.0;
        double e = (*eta)(T * (lambda - r));
        if (e == 0.0) return 0.0;
        double av = a_profile(ang_scale * axis_gap(u, xi, r));
        if (av == 0.0) return 0.0;
        return av * beta_profile(r / lambda) * e;
    };

    std::vector<CoefficientVector::Entry> entries;
    const double scale = std::pow(kTwoPi, n) / std::sqrt(model.volume()) *
                         std::pow(lambda * delta, -0.25 * double(n - 1));

    if (model.kind() == ManifoldKind::torus) {
        long lo1 = box.lo[0], hi1 = box.hi[0];
        long lo2 = n >= 2 ? box.lo[1] : 0, hi2 = n >= 2 ? box.hi[1] : 0;
        long lo3 = n >= 3 ? box.lo[2] : 0, hi3 = n >= 3 ? box.hi[2] : 0;
        for (long m1 = lo1; m1 <= hi1; ++m1)
            for (long m2 = lo2; m2 <= hi2; ++m2)
                for (long m3 = lo3; m3 <= hi3; ++m3) {
                    std::array<double, 3> xi{};
                    for (int c = 0; c < 3; ++c)
                        xi[c] = kTwoPi * (double(m1) * dual[0][c] + double(m2) * dual[1][c] +
                                          double(m3) * dual[2][c]);
                    double amp = symbol(xi);
                    if (amp == 0.0) continue;
                    double mdotb = double(m1) * geodesic.base[0] + double(m2) * geodesic.base[1] +
                                   double(m3) * geodesic.base[2];
                    auto idx = make_index(model, {std::int32_t(m1), std::int32_t(m2),
                                                  std::int32_t(m3), 0});
                    entries.push_back({idx, scale * amp * phase2pi(-mdotb)});
                }
    } else {
        // Klein bottle: periodize over the translation lattice of the double
        // cover (covolume 2, dual modes (p/2, q)), then average the glide
        // coset.  The average folds (p, -q) onto (p, q) with the glide sign
        // and kills odd p when the plate is symmetric about the axis.
        const double b1 = geodesic.base[0], b2 = geodesic.base[1];
        long plo = 2 * box.lo[0] - 1, phi = 2 * box.hi[0] + 1;
        double c2 = box.center[1], h2 = double(box.hi[1]) - box.center[1] + 1.0;
        long qmax = long(std::floor(std::max(std::abs(c2), 0.0) + h2));
        long qlo_far = long(std::ceil(std::abs(c2) - h2));
        for (long p = plo; p <= phi; ++p) {
            double xi1 = M_PI * double(p);
            for (long q = 0; q <= qmax; ++q) {
                if (q > 0 && q < qlo_far && std::abs(double(q) - std::abs(c2)) > h2) continue;
                double fpos = symbol({xi1, kTwoPi * double(q), 0.0});
                double fneg = q == 0 ? fpos : symbol({xi1, -kTwoPi * double(q), 0.0});
                if (fpos == 0.0 && fneg == 0.0) continue;
                // glide pairing: F(p, q) + (-1)^p e^{4 pi i q b2} F(p, -q)
                std::complex<double> glide = phase2pi(2.0 * double(q) * b2);
                if (p & 1) glide = -glide;
                std::complex<double> combo = fpos + glide * fneg;
                if (q == 0) {
                    if (p & 1) continue; // exact cancellation
                } else {
                    // the orthonormal pair mode carries both raw waves:
                    // C_{p,q} = sqrt(2) * c_raw(p,q)
                    combo *= std::sqrt(2.0);
                }
                if (combo == std::complex<double>(0.0, 0.0)) continue;
                std::complex<double> ph = phase2pi(-(0.5 * double(p) * b1 + double(q) * b2));
                auto idx = make_index(model, {std::int32_t(p), std::int32_t(q), 0, 0});
                entries.push_back({idx, scale * 0.5 * combo * ph});
            }
        }
    }

    auto out = CoefficientVector::from_entries(model, std::move(entries));
    out.drop_below(1e-14 * out.max_abs());
    return out;
}

namespace {

struct KernelSum {
    std::complex<double> value;
    double abs_mass; // integral of |integrand|, the kernel's natural scale
};

// One tensor-rule pass over the plate in polar coordinates.
KernelSum kernel_pass(int n, const Point& z, double lambda, double delta, const EtaProfile& eta,
                      double rlo, double rhi, double theta_star, long nr, long na) {
    const double T = 1.0 / delta;
    const double ang_scale = std::sqrt(lambda / delta);
    gsl_integration_glfixed_table* rt = gsl_integration_glfixed_table_alloc(std::size_t(nr));
    gsl_integration_glfixed_table* at =
        n >= 2 ? gsl_integration_glfixed_table_alloc(std::size_t(na)) : nullptr;
    KernelSum acc{{0.0, 0.0}, 0.0};
    for (long i = 0; i < nr; ++i) {
        double r, wr;
        gsl_integration_glfixed_point(rlo, rhi, std::size_t(i), &r, &wr, rt);
        double radial = beta_profile(r / lambda) * eta(T * (lambda - r));
        if (radial == 0.0) continue;
        if (n == 1) {
            double w = wr * radial;
            acc.value += w * std::complex<double>(std::cos(r * z[0]), std::sin(r * z[0]));
            acc.abs_mass += std::abs(w);
            double aneg = a_profile(2.0 * ang_scale);
            if (aneg > 0.0) {
                double wn = w * aneg;
                acc.value += wn * std::complex<double>(std::cos(r * z[0]), -std::sin(r * z[0]));
                acc.abs_mass += std::abs(wn);
            }
            continue;
        }
        if (n == 2) {
            for (long j = 0; j < na; ++j) {
                double th, wt;
                gsl_integration_glfixed_point(-theta_star, theta_star, std::size_t(j), &th, &wt, at);
                double av = a_profile(2.0 * ang_scale * std::abs(std::sin(0.5 * th)));
                if (av == 0.0) continue;
                double w = wr * wt * radial * av * r;
                double ph = r * (z[0] * std::cos(th) + z[1] * std::sin(th));
                acc.value += w * std::complex<double>(std::cos(ph), std::sin(ph));
                acc.abs_mass += std::abs(w);
            }
            continue;
        }
        long nphi = na;
        for (long j = 0; j < na; ++j) {
            double th, wt;
            gsl_integration_glfixed_point(0.0, theta_star, std::size_t(j), &th, &wt, at);
            double av = a_profile(2.0 * ang_scale * std::sin(0.5 * th));
            if (av == 0.0) continue;
            double ring = wr * wt * radial * av * r * r * std::sin(th);
            double c1 = r * z[0] * std::cos(th);
            for (long m = 0; m < nphi; ++m) {
                double phi = kTwoPi * double(m) / double(nphi);
                double w = ring * kTwoPi / double(nphi);
                double ph = c1 + r * std::sin(th) * (z[1] * std::cos(phi) + z[2] * std::sin(phi));
                acc.value += w * std::complex<double>(std::cos(ph), std::sin(ph));
                acc.abs_mass += std::abs(w);
            }
        }
    }
    gsl_integration_glfixed_table_free(rt);
    if (at) gsl_integration_glfixed_table_free(at);
    return acc;
}

} // namespace

std::complex<double> knapp_kernel_rn(int n, const Point& z, double lambda, double delta,
                                     const KnappParams& params) {
    if (n < 1 || n > 3) throw capability_error("free-space kernel supports dimensions 1 to 3");
    if (!(lambda > M_E)) throw domain_error("kernel frequency must exceed e");
    if (!(delta > 0.0 && delta <= 1.0)) throw validation_error("kernel width must lie in (0,1]");
    validate_knapp_params(params);
    auto eta = params.eta ? params.eta : knapp_eta(params.c0);
    if (eta->is_zero()) return 0.0;

    const double T = 1.0 / delta;
    const double s_max = eta->support_radius();
    const double rlo = std::max(lambda / 4.0, lambda - s_max / T);
    const double rhi = std::min(4.0 * lambda, lambda + s_max / T);
    if (!(rlo < rhi)) return 0.0;
    const double theta_star = 2.0 * std::asin(std::min(1.0, 0.5 * std::sqrt(delta / lambda)));

    std::complex<double> prev = 0.0;
    bool have_prev = false;
    for (int level = 0; level <= 5; ++level) {
        long nr = 256L << level;
        long na = 64L << level;
        KernelSum s = kernel_pass(n, z, lambda, delta, *eta, rlo, rhi, theta_star, nr, na);
        if (have_prev) {
            // relative test on scale, absolute floor against the plate mass so the
            // rapidly decaying far field (true value below quadrature noise) settles
            if (std::abs(s.value - prev) <=
                std::max(1e-6 * std::abs(s.value), 1e-9 * s.abs_mass))
                return s.value;
        }
        prev = s.value;
        have_prev = true;
    }
    throw accuracy_error("free-space kernel quadrature did not converge");
}

double defect(const ManifoldModel& model, double lambda, const CoefficientVector& coeffs) {
    if (coeffs.model() != model) throw contract_error("coefficients belong to a different model");
    if (!(lambda > 0.0)) throw validation_error("defect frequency must be positive");
    std::vector<double> sq(coeffs.size());
    const auto& es = coeffs.entries();
    for (std::size_t i = 0; i < es.size(); ++i) {
        double gap = lambda * lambda - es[i].index.frequency * es[i].index.frequency;
        sq[i] = gap * gap * std::norm(es[i].value);
    }
    return std::sqrt(pairwise_sum(sq));
}

double quasimode_budget(const ManifoldModel& model, double lambda, const CoefficientVector& coeffs,
                        double delta) {
    if (!(delta > 0.0)) throw validation_error("budget width must be positive");
    return coeffs.norm2() + defect(model, lambda, coeffs) / (lambda * delta);
}

double coefficient_mass_within(const CoefficientVector& coeffs, double lambda, double halfwidth) {
    if (!(halfwidth >= 0.0)) throw validation_error("halfwidth must be nonnegative");
    std::vector<double> all(coeffs.size()), in(coeffs.size(), 0.0);
    const auto& es = coeffs.entries();
    for (std::size_t i = 0; i < es.size(); ++i) {
        all[i] = std::norm(es[i].value);
        if (std::abs(es[i].index.frequency - lambda) <= halfwidth) in[i] = all[i];
    }
    double total = pairwise_sum(all);
    return total > 0.0 ? pairwise_sum(in) / total : 0.0;
}

namespace {

long sphere_envelope(double q, int l) {
    long qeff = (q <= 0.0 || !std::isfinite(q)) ? 4 : 2 * long(std::ceil(q / 2.0));
    return std::max(qeff * long(l) + 1, 8L);
}

double beam_norm_constant(int l) {
    static std::mutex mutex;
    static std::map<int, double> cache;
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(l);
        if (it != cache.end()) return it->second;
    }
    // integral of sin^{2l} over S^2, exact at this Gauss-Legendre order
    auto grid = quadrature_grid(ManifoldModel::sphere(2), std::max(8L, long(l) + 2));
    double total = 0.0;
    for (long r = 0; r < grid.rows(); ++r) {
        double s = std::sin(grid.theta(r));
        total += grid.row_weight(r, 0) * double(grid.row_length()) * std::pow(s, 2 * l);
    }
    double c = 1.0 / std::sqrt(total);
    std::lock_guard<std::mutex> lock(mutex);
    cache.emplace(l, c);
    return c;
}

// sphere points are embedded unit vectors, matching eval_eigenfunction
void check_on_sphere(const Point& y) {
    double r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    if (!(std::abs(r2 - 1.0) < 2e-8))
        throw validation_error("sphere points must lie on the unit sphere");
}

class GaussianBeam final : public QuasimodeEvaluator {
  public:
    GaussianBeam(int l)
        : QuasimodeEvaluator(ManifoldModel::sphere(2), std::sqrt(double(l) * double(l + 1))),
          l_(l),
          norm_(beam_norm_constant(l)) {}

    std::complex<double> value(const Point& y) const override {
        check_on_sphere(y);
        // (y0 + i y1)^l = sin^l(theta) e^{i l phi} on the unit sphere
        std::complex<double> w(y[0], y[1]);
        std::complex<double> p = 1.0;
        int e = l_;
        while (e > 0) {
            if (e & 1) p *= w;
            w *= w;
            e >>= 1;
        }
        return norm_ * p;
    }
    long envelope_resolution(double q) const override { return sphere_envelope(q, l_); }

  private:
    int l_;
    double norm_;
};

class ZonalHarmonic final : public QuasimodeEvaluator {
  public:
    ZonalHarmonic(int l, const Point& pole)
        : QuasimodeEvaluator(ManifoldModel::sphere(2), std::sqrt(double(l) * double(l + 1))),
          l_(l),
          norm_(std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI))) {
        check_on_sphere(pole);
        axis_ = {pole[0], pole[1], pole[2]};
    }

    std::complex<double> value(const Point& y) const override {
        check_on_sphere(y);
        double c = y[0] * axis_[0] + y[1] * axis_[1] + y[2] * axis_[2];
        c = std::clamp(c, -1.0, 1.0);
        return norm_ * gsl_sf_legendre_Pl(l_, c);
    }
    long envelope_resolution(double q) const override { return sphere_envelope(q, l_); }

  private:
    int l_;
    double norm_;
    std::array<double, 3> axis_{};
};

} // namespace

std::unique_ptr<QuasimodeEvaluator> gaussian_beam(int n, int l) {
    if (n != 2)
        throw capability_error("gaussian beams are built on the 2-sphere only in this laboratory");
    if (l < 1) throw validation_error("beam degree must be at least 1");
    return std::make_unique<GaussianBeam>(l);
}

std::unique_ptr<QuasimodeEvaluator> zonal(int n, int l, const Point& pole) {
    if (n != 2) throw capability_error("zonal harmonics need the Legendre path, 2-sphere only");
    if (l < 1) throw validation_error("zonal degree must be at least 1");
    return std::make_unique<ZonalHarmonic>(l, pole);
}

double tube_mass(const QuasimodeEvaluator& psi, const TubeSpec& tube, const QuadratureGrid& grid,
                 const NormOptions& opts) {
    return grid_measure(psi, grid, {}, &tube, opts).tube_mass;
}

double deck_invariance_check(const ManifoldModel& model, const QuasimodeEvaluator& psi,
                             int samples, std::uint64_t seed) {
    if (!model.flat()) throw capability_error("deck invariance applies to flat quotients");
    if (psi.model() != model) throw contract_error("evaluator belongs to a different model");
    if (samples < 1) throw validation_error("sample count must be positive");
    CounterRng rng(seed, 41);
    int n = model.dimension();
    double worst = 0.0, sup = 0.0;
    for (int s = 0; s < samples; ++s) {
        Point y{};
        for (int c = 0; c < n; ++c) y[c] = rng.uniform(std::uint64_t(s) * 4 + std::uint64_t(c));
        auto v = psi.value(y);
        sup = std::max(sup, std::abs(v));
        for (int g = 0; g < model.deck_generator_count(); ++g) {
            auto d = std::abs(psi.value(model.apply_deck_generator(g, y)) - v);
            worst = std::max(worst, d);
        }
    }
    return sup > 0.0 ? worst / sup : 0.0;
}

double l1_lower_ratio(const QuasimodeEvaluator& psi, double lambda, int n,
                      const QuadratureGrid& grid, const NormOptions& opts) {
    if (!(lambda > 0.0)) throw validation_error("ratio frequency must be positive");
    if (n < 1) throw validation_error("dimension must be positive");
    auto m = grid_measure(psi, grid, {1.0, 2.0}, nullptr, opts);
    if (m.norms[1] == 0.0) return 0.0;
    return m.norms[0] * std::pow(lambda, 0.25 * double(n - 1)) / m.norms[1];
}

} // namespace sclab
