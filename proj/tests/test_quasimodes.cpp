#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sclab/errors.hpp"
#include "sclab/manifold.hpp"
#include "sclab/profiles.hpp"
#include "sclab/quasimode.hpp"
#include "sclab/spectral.hpp"
#include "sclab/util.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <vector>

using namespace sclab;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kInf = std::numeric_limits<double>::infinity();

NormOptions envelope_opts() {
    NormOptions o;
    o.alias = AliasPolicy::envelope;
    return o;
}

// direct deck-sum evaluation through the free-space kernel; the lattice sum
// is truncated where the kernel drops below the comparison tolerance
std::complex<double> torus_deck_sum(const ManifoldModel& model, const GeodesicSpec& geo,
                                    double lambda, double delta, const KnappParams& prm,
                                    const Point& y, int J) {
    auto rot = [&](double zx, double zy) {
        double ux = geo.direction[0], uy = geo.direction[1];
        return Point{ux * zx + uy * zy, -uy * zx + ux * zy, 0.0, 0.0};
    };
    const auto& B = model.basis();
    std::complex<double> acc = 0.0;
    double scale = std::pow(lambda * delta, -0.25 * (model.dimension() - 1));
    for (int j1 = -J; j1 <= J; ++j1)
        for (int j2 = -J; j2 <= J; ++j2) {
            double zx = B[0][0] * (y[0] - geo.base[0] + j1) + B[0][1] * (y[1] - geo.base[1] + j2);
            double zy = B[1][0] * (y[0] - geo.base[0] + j1) + B[1][1] * (y[1] - geo.base[1] + j2);
            Point z = rot(zx, zy);
            if (std::abs(z[1]) > 4.5) continue;
            if (std::abs(z[0]) > prm.c0 / delta + 0.6) continue;
            acc += knapp_kernel_rn(2, z, lambda, delta, prm);
        }
    return scale * acc;
}

std::complex<double> klein_deck_sum(const GeodesicSpec& geo, double lambda, double delta,
                                    const KnappParams& prm, const Point& y, int J) {
    auto rot = [&](double zx, double zy) {
        double ux = geo.direction[0], uy = geo.direction[1];
        return Point{ux * zx + uy * zy, -uy * zx + ux * zy, 0.0, 0.0};
    };
    std::complex<double> acc = 0.0;
    double z1 = y[0] - geo.base[0], z2 = y[1] - geo.base[1];
    for (int j1 = -J; j1 <= J; ++j1)
        for (int j2 = -J; j2 <= J; ++j2) {
            // translation lattice of the orientation double cover: (2 j1, j2)
            Point za = rot(z1 + 2.0 * j1, z2 + j2);
            if (std::abs(za[1]) <= 4.5 && std::abs(za[0]) <= prm.c0 / delta + 0.6)
                acc += knapp_kernel_rn(2, za, lambda, delta, prm);
            // glide coset
            Point zb = rot(z1 + 1.0 + 2.0 * j1, -z2 + j2 - 2.0 * geo.base[1]);
            if (std::abs(zb[1]) <= 4.5 && std::abs(zb[0]) <= prm.c0 / delta + 0.6)
                acc += knapp_kernel_rn(2, zb, lambda, delta, prm);
        }
    return std::pow(lambda * delta, -0.25) * acc;
}

Point embed(double th, double ph) {
    return Point{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th), 0.0};
}
} // namespace

TEST_CASE("flat directional quasimode: window shape and stable budget") {
    auto t2 = ManifoldModel::torus(2);
    auto geo = periodic_geodesic(t2, {1, 0, 0});
    KnappParams prm;
    prm.c0 = 0.9;
    prm.k = 256;
    const double lambda = prm.lambda(geo.length);
    const double T = std::log(lambda), delta = 1.0 / T;
    auto psi = knapp_flat(t2, geo, prm);

    CHECK(psi.size() == 187);
    CHECK(psi.norm2() == doctest::Approx(17.9872029879).epsilon(1e-6));

    // every retained mode sits inside the frequency window |T(lambda-f)| <= reach
    auto eta = knapp_eta(prm.c0);
    double reach = eta->reach(1e-15);
    double mmax2 = 0.0;
    for (const auto& e : psi.entries()) {
        CHECK(std::abs(T * (lambda - e.index.frequency)) <= reach + 1e-9);
        mmax2 = std::max(mmax2, std::abs(double(e.index.label[1])));
    }
    CHECK(mmax2 == 2.0); // transverse cone sqrt(delta lambda)/(2 pi) is narrow
    double perp_bound = (lambda + reach * delta) * std::sqrt(delta / lambda) / kTwoPi;
    CHECK(mmax2 <= perp_bound + 1.0);

    const double rel_def = defect(t2, lambda, psi) / (lambda * delta);
    CHECK(rel_def == doctest::Approx(3.42754).epsilon(1e-3));
    CHECK(quasimode_budget(t2, lambda, psi, delta) ==
          doctest::Approx(21.4147).epsilon(1e-3));
    CHECK(1.0 - coefficient_mass_within(psi, lambda, 10.0 * delta) < 1e-6);
    CHECK(coefficient_mass_within(psi, lambda, reach * delta + 1e-9) ==
          doctest::Approx(1.0).epsilon(1e-15));

    // grid L2 agrees with coefficient L2
    CoefficientEvaluator ev(psi, lambda);
    auto grid = quadrature_grid(t2, ev.envelope_resolution(2.0));
    CHECK(lq_norm(ev, 2.0, grid, envelope_opts()) ==
          doctest::Approx(psi.norm2()).epsilon(1e-12));

    // empty profile surrogate and out-of-domain frequency
    KnappParams zero = prm;
    zero.eta = std::make_shared<const EtaProfile>(EtaProfile::zero_surrogate(prm.c0));
    CHECK(knapp_flat(t2, geo, zero).empty());

    GeodesicSpec long_geo = geo;
    long_geo.length = 10.0; // 2 pi 2 / 10 < e
    KnappParams small;
    small.k = 2;
    CHECK_THROWS_AS((void)knapp_flat(t2, long_geo, small), domain_error);
}

TEST_CASE("flat quasimode equals its free-space deck sum") {
    auto t2 = ManifoldModel::torus(2);
    auto geo = periodic_geodesic(t2, {1, 0, 0});
    KnappParams prm;
    prm.c0 = 0.9;
    prm.k = 256;
    const double lambda = prm.lambda(geo.length);
    const double T = std::log(lambda), delta = 1.0 / T;
    auto psi = knapp_flat(t2, geo, prm);
    CoefficientEvaluator ev(psi, lambda);
    const double sup_scale = std::pow(lambda * delta, 0.25) * std::sqrt(T);
    for (const Point& y : {Point{0.1, 0.0, 0.0, 0.0}, Point{0.73, 0.003, 0.0, 0.0},
                           Point{0.2, 0.011, 0.0, 0.0}}) {
        auto direct = ev.value(y);
        auto kernel = torus_deck_sum(t2, geo, lambda, delta, prm, y, 12);
        CHECK(std::abs(direct - kernel) < 15e-4 * sup_scale);
    }
}

TEST_CASE("klein bottle glide quasimode descends and matches its deck sum") {
    auto kb = ManifoldModel::klein_bottle();
    auto geo = periodic_geodesic(kb, {1, 0, 0});
    KnappParams prm;
    prm.c0 = 0.9;
    prm.k = 256;
    const double lambda = prm.lambda(geo.length);
    const double T = std::log(lambda), delta = 1.0 / T;
    auto psi = knapp_flat(kb, geo, prm);

    CHECK(psi.size() == 113);
    for (const auto& e : psi.entries()) CHECK(e.index.label[0] % 2 == 0);

    CoefficientEvaluator ev(psi, lambda);
    CHECK(deck_invariance_check(kb, ev, 50) < 1e-10);
    auto grid = quadrature_grid(kb, ev.envelope_resolution(2.0));
    CHECK(lq_norm(ev, 2.0, grid, envelope_opts()) ==
          doctest::Approx(psi.norm2()).epsilon(1e-10));

    const double sup_scale = std::pow(lambda * delta, 0.25) * std::sqrt(T);
    for (const Point& y : {Point{0.15, 0.0, 0.0, 0.0}, Point{0.62, 0.004, 0.0, 0.0}}) {
        auto direct = ev.value(y);
        auto kernel = klein_deck_sum(geo, lambda, delta, prm, y, 12);
        CHECK(std::abs(direct - kernel) < 15e-4 * sup_scale);
    }
}

TEST_CASE("klein bottle transverse geodesic carries both parities") {
    auto kb = ManifoldModel::klein_bottle();
    auto geo = periodic_geodesic(kb, {0, 1, 0}, Point{0.3, 0.0, 0.0, 0.0});
    KnappParams prm;
    prm.c0 = 0.9;
    prm.k = 128;
    const double lambda = prm.lambda(geo.length);
    const double T = std::log(lambda), delta = 1.0 / T;
    auto psi = knapp_flat(kb, geo, prm);

    bool has_odd = false;
    for (const auto& e : psi.entries()) has_odd = has_odd || (e.index.label[0] % 2 != 0);
    CHECK(has_odd);

    CoefficientEvaluator ev(psi, lambda);
    CHECK(deck_invariance_check(kb, ev, 50) < 1e-10);
    const double sup_scale = std::pow(lambda * delta, 0.25) * std::sqrt(T);
    for (const Point& y : {Point{0.3, 0.44, 0.0, 0.0}, Point{0.297, 0.8, 0.0, 0.0}}) {
        auto direct = ev.value(y);
        auto kernel = klein_deck_sum(geo, lambda, delta, prm, y, 12);
        CHECK(std::abs(direct - kernel) < 20e-4 * sup_scale);
    }
}

namespace {
// adds a wave that flips sign under the glide: a planted symmetry defect
class CorruptedEvaluator final : public QuasimodeEvaluator {
  public:
    CorruptedEvaluator(const ManifoldModel& model, const QuasimodeEvaluator& base,
                       double amplitude)
        : QuasimodeEvaluator(model, base.nominal_frequency()), base_(base),
          amplitude_(amplitude) {}
    std::complex<double> value(const Point& y) const override {
        return base_.value(y) +
               amplitude_ * std::exp(std::complex<double>(0.0, kPi * y[0]));
    }

  private:
    const QuasimodeEvaluator& base_;
    double amplitude_;
};
} // namespace

TEST_CASE("deck invariance check flags a planted symmetry defect") {
    auto kb = ManifoldModel::klein_bottle();
    auto geo = periodic_geodesic(kb, {1, 0, 0});
    KnappParams prm;
    prm.c0 = 0.9;
    prm.k = 64;
    auto psi = knapp_flat(kb, geo, prm);
    CoefficientEvaluator ev(psi, prm.lambda(geo.length));
    CorruptedEvaluator bad(kb, ev, 0.05 * psi.norm2());
    CHECK(deck_invariance_check(kb, bad, 50) > 1e-3);
}

TEST_CASE("free-space kernel regimes at lambda = e^4") {
    KnappParams prm;
    prm.c0 = 0.9;
    const double lambda = std::exp(4.0), delta = 0.25, T = 4.0;

    auto K0 = knapp_kernel_rn(2, {0.0, 0.0, 0.0, 0.0}, lambda, delta, prm);
    CHECK(K0.real() == doctest::Approx(8.015032149).epsilon(1e-6));
    CHECK(std::abs(K0.imag()) < 1e-9 * K0.real());

    auto Kt = knapp_kernel_rn(2, {0.0, 1.0, 0.0, 0.0}, lambda, delta, prm);
    CHECK(std::abs(Kt) / K0.real() == doctest::Approx(0.122188).epsilon(1e-4));

    auto Kf = knapp_kernel_rn(2, {4.0 * T, 0.0, 0.0, 0.0}, lambda, delta, prm);
    CHECK(std::abs(Kf) / K0.real() < 1e-9); // beyond the group-velocity cone

    auto Kmid = knapp_kernel_rn(2, {0.5, 0.0, 0.0, 0.0}, lambda, delta, prm);
    CHECK(std::abs(Kmid) / K0.real() == doctest::Approx(0.980473).epsilon(1e-4));

    auto K1 = knapp_kernel_rn(1, {0.3, 0.0, 0.0, 0.0}, lambda, delta, prm);
    auto K3 = knapp_kernel_rn(3, {0.3, 0.01, 0.0, 0.0}, lambda, delta, prm);
    CHECK(std::abs(K1) == doctest::Approx(1.43605).epsilon(1e-4));
    CHECK(std::abs(K3) == doctest::Approx(35.2447).epsilon(1e-4));
}

TEST_CASE("one- and three-dimensional tori") {
    KnappParams prm;
    prm.c0 = 0.9;

    auto t1 = ManifoldModel::torus(1);
    auto g1 = periodic_geodesic(t1, {1, 0, 0});
    prm.k = 64;
    auto psi1 = knapp_flat(t1, g1, prm);
    CHECK(psi1.size() == 47);
    CHECK(quasimode_budget(t1, prm.lambda(g1.length), psi1,
                           1.0 / std::log(prm.lambda(g1.length))) ==
          doctest::Approx(6.42836).epsilon(1e-4));

    auto t3 = ManifoldModel::torus(3);
    auto g3 = periodic_geodesic(t3, {1, 0, 0});
    prm.k = 16;
    const double l3 = prm.lambda(g3.length);
    auto psi3 = knapp_flat(t3, g3, prm);
    CHECK(psi3.size() == 192);
    CHECK(psi3.norm2() == doctest::Approx(53.1206).epsilon(1e-4));
    CHECK(quasimode_budget(t3, l3, psi3, 1.0 / std::log(l3)) ==
          doctest::Approx(60.7241).epsilon(1e-4));

    CoefficientEvaluator ev3(psi3, l3);
    auto grid3 = quadrature_grid(t3, ev3.envelope_resolution(2.0));
    CHECK(lq_norm(ev3, 2.0, grid3, envelope_opts()) ==
          doctest::Approx(psi3.norm2()).epsilon(1e-10));
}

TEST_CASE("knapp mass concentrates on its geodesic tube") {
    auto t2 = ManifoldModel::torus(2);
    auto geo = periodic_geodesic(t2, {1, 0, 0});
    KnappParams prm;
    prm.c0 = 0.9;
    prm.k = 256;
    const double lambda = prm.lambda(geo.length);
    const double T = std::log(lambda);
    auto psi = knapp_flat(t2, geo, prm);
    CoefficientEvaluator ev(psi, lambda);

    const double radius = std::sqrt(T / lambda);
    auto tube = TubeSpec::flat(geo, radius, 0.25);
    long res = std::max(ev.envelope_resolution(2.0), long(std::ceil(8.0 / (2.0 * radius))));
    auto grid = quadrature_grid(t2, res);
    double tm = tube_mass(ev, tube, grid, envelope_opts());
    // the |t| <= 1/4 segment-tube holds a stable share of the total L2 norm
    CHECK(tm / psi.norm2() > 0.45);
    CHECK(tm / psi.norm2() < 0.60);

    // on-axis amplitude never collapses
    const double amp_scale = std::pow(lambda / T, 0.25);
    double c1 = 1e300;
    for (int i = 0; i < 32; ++i) {
        double t = -0.25 + 0.5 * (double(i) + 0.5) / 32.0;
        c1 = std::min(c1, std::abs(ev.value({t, 0.0, 0.0, 0.0})) / amp_scale);
    }
    CHECK(c1 > 0.4);

    // L1 lower-bound ratio stays bounded away from zero
    double l1r = l1_lower_ratio(ev, lambda, 2, grid, envelope_opts());
    CHECK(l1r > 1.0);
}

TEST_CASE("gaussian beams and zonal harmonics on the 2-sphere") {
    auto sph = ManifoldModel::sphere(2);
    auto opts = envelope_opts();
    const Point north{0.0, 0.0, 1.0, 0.0};

    for (int l : {10, 40}) {
        const double lambda = std::sqrt(double(l) * (l + 1.0));
        auto G = gaussian_beam(2, l);
        auto Z = zonal(2, l, north);
        long res = 8;
        for (double q : {1.0, 2.0, 6.0, kInf})
            res = std::max(res, std::max(G->envelope_resolution(q), Z->envelope_resolution(q)));
        const double rad = std::pow(lambda, -0.4);
        res = std::max(res, long(std::ceil(4.0 * kPi / rad)));
        auto grid = quadrature_grid(sph, res);

        auto mg = grid_measure(*G, grid, {1.0, 2.0, 6.0, kInf}, nullptr, opts);
        auto mz = grid_measure(*Z, grid, {1.0, 2.0, 6.0, kInf}, nullptr, opts);
        CHECK(std::abs(mg.norms[1] - 1.0) < 1e-8); // built L2-normalized
        CHECK(std::abs(mz.norms[1] - 1.0) < 1e-8);

        // zonal sup is attained at its pole with the exact closed-form value
        const double zpole = std::abs(Z->value(north));
        CHECK(zpole == doctest::Approx(std::sqrt((2.0 * l + 1.0) / (4.0 * kPi)))
                           .epsilon(1e-12));
        CHECK(mz.norms[3] == doctest::Approx(zpole).epsilon(1e-8));

        // growth scalings: beams at lambda^{1/4}, zonal sup at lambda^{1/2}
        CHECK(mg.norms[2] / std::pow(lambda, 1.0 / 6.0) > 0.40);
        CHECK(mg.norms[2] / std::pow(lambda, 1.0 / 6.0) < 0.42);
        CHECK(mg.norms[3] / std::pow(lambda, 0.25) > 0.29);
        CHECK(mg.norms[3] / std::pow(lambda, 0.25) < 0.31);
        CHECK(mz.norms[3] / std::sqrt(lambda) > 0.39);
        CHECK(mz.norms[3] / std::sqrt(lambda) < 0.41);

        // beam mass sits on the equatorial band of width lambda^{-0.4}
        auto tube = TubeSpec::sphere_equator(sph, rad);
        double frac = tube_mass(*G, tube, grid, opts) / mg.norms[1];
        CHECK(frac > 0.94);
        CHECK(frac <= 1.0);
    }

    // beam modulus peaks on the equator
    auto G1 = gaussian_beam(2, 1);
    const double eq = std::abs(G1->value(embed(kPi / 2.0, 0.3)));
    for (double th : {0.3, 0.9, 1.2, 2.0, 2.8})
        CHECK(std::abs(G1->value(embed(th, 0.7))) <= eq + 1e-12);

    CHECK_THROWS_AS((void)gaussian_beam(3, 10), capability_error);
}

TEST_CASE("transverse gradient scales like the plate width") {
    auto t2 = ManifoldModel::torus(2);
    auto geo = periodic_geodesic(t2, {1, 0, 0});
    std::vector<double> ratios;
    for (long k : {64L, 256L}) {
        KnappParams prm;
        prm.c0 = 0.9;
        prm.k = k;
        const double lambda = prm.lambda(geo.length);
        const double T = std::log(lambda), delta = 1.0 / T;
        auto psi = knapp_flat(t2, geo, prm);
        CoefficientEvaluator ev(psi, lambda);
        const double h = 1e-2 / lambda;
        const double radius = std::sqrt(T / lambda);
        double gmax = 0.0;
        for (int i = 0; i < 24; ++i) {
            double t = -0.25 + 0.5 * (double(i) + 0.5) / 24.0;
            for (double s : {-0.5 * radius, 0.0, 0.5 * radius}) {
                auto up = ev.value({t, s + h, 0.0, 0.0});
                auto dn = ev.value({t, s - h, 0.0, 0.0});
                gmax = std::max(gmax, std::abs(up - dn) / (2.0 * h));
            }
        }
        // scale (lambda delta)^{(n-1)/4} * sqrt(lambda delta): envelope height
        // times the transverse frequency width of the plate
        ratios.push_back(gmax / std::pow(lambda * delta, 0.75));
    }
    CHECK(ratios[0] > 0.0);
    CHECK(ratios[1] > 0.0);
    CHECK(ratios[1] / ratios[0] < 2.0);
    CHECK(ratios[0] / ratios[1] < 2.0);
    CHECK(std::max(ratios[0], ratios[1]) < 50.0);
}

TEST_CASE("tube mass of a constant counts the tube measure") {
    auto t2 = ManifoldModel::torus(2);
    auto geo = periodic_geodesic(t2, {1, 0, 0});
    const double radius = 0.05, cbar = 0.25;
    auto tube = TubeSpec::flat(geo, radius, cbar);
    CoefficientVector one = CoefficientVector::from_entries(
        t2, {{EigenIndex{{0, 0, 0, 0}, 0.0}, 1.0}});
    CoefficientEvaluator ev(one, 1.0);
    auto grid = quadrature_grid(t2, 160);
    const double measure = (2.0 * cbar) * (2.0 * radius);
    CHECK(tube_mass(ev, tube, grid, envelope_opts()) ==
          doctest::Approx(std::sqrt(measure)).epsilon(0.2));
}
