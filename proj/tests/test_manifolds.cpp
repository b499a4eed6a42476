#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sclab/errors.hpp"
#include "sclab/legendre.hpp"
#include "sclab/manifold.hpp"
#include "sclab/profiles.hpp"

#include <cmath>
#include <complex>
#include <set>

using namespace sclab;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
} // namespace

TEST_CASE("torus lattice frequencies and window enumeration") {
    auto t2 = ManifoldModel::torus(2);
    CHECK(t2.dimension() == 2);
    CHECK(t2.flat());
    CHECK(t2.volume() == doctest::Approx(1.0));

    // nine modes with |m| <= sqrt(2) on the unit torus
    auto modes = enumerate_window(t2, 0.0, kTwoPi * std::sqrt(2.0) + 1e-9);
    CHECK(modes.size() == 9);
    for (std::size_t i = 1; i < modes.size(); ++i)
        CHECK(modes[i - 1].frequency <= modes[i].frequency);

    // brute-force window count
    auto win = enumerate_window(t2, 10.0, 40.0);
    long brute = 0;
    for (int a = -8; a <= 8; ++a)
        for (int b = -8; b <= 8; ++b) {
            double f = kTwoPi * std::sqrt(double(a) * a + double(b) * b);
            if (f >= 10.0 && f <= 40.0) ++brute;
        }
    CHECK(long(win.size()) == brute);

    // skew basis: frequency = 2 pi |B^{-T} m|
    std::array<std::array<double, 3>, 3> B = {
        {{1.0, 0.25, 0.0}, {0.0, 0.8, 0.0}, {0.0, 0.0, 1.0}}};
    auto tb = ManifoldModel::torus(2, B);
    CHECK(tb.volume() == doctest::Approx(0.8));
    // invert the 2x2 basis block by hand: frequency = 2 pi |B^{-T} m|
    const auto& bb = tb.basis();
    double det = bb[0][0] * bb[1][1] - bb[0][1] * bb[1][0];
    double binvt[2][2] = {{bb[1][1] / det, -bb[1][0] / det},
                          {-bb[0][1] / det, bb[0][0] / det}};
    for (auto m : {std::array<int, 2>{3, -2}, std::array<int, 2>{1, 4}}) {
        auto idx = make_index(tb, {m[0], m[1], 0, 0});
        double gx = binvt[0][0] * m[0] + binvt[0][1] * m[1];
        double gy = binvt[1][0] * m[0] + binvt[1][1] * m[1];
        CHECK(idx.frequency == doctest::Approx(kTwoPi * std::hypot(gx, gy)).epsilon(1e-12));
    }

    // eigenfunction is an exact plane wave in lattice coordinates
    auto idx = make_index(t2, {2, -1, 0, 0});
    Point y{0.37, 0.81, 0.0, 0.0};
    auto v = eval_eigenfunction(t2, idx, y);
    auto want = std::exp(std::complex<double>(0.0, kTwoPi * (2 * y[0] - y[1])));
    CHECK(std::abs(v - want) < 1e-12);
}

TEST_CASE("klein bottle spectrum structure and deck invariance") {
    auto kb = ManifoldModel::klein_bottle();
    CHECK(kb.dimension() == 2);
    CHECK(kb.flat());
    CHECK(kb.volume() == doctest::Approx(1.0));
    CHECK(kb.deck_generator_count() == 2);

    auto modes = enumerate_window(kb, 1.0, 30.0);
    CHECK(modes.size() >= 8);
    for (const auto& m : modes) {
        int p = m.label[0], q = m.label[1];
        // transverse-constant modes exist only at even p
        CHECK((q >= 1 || p % 2 == 0));
        CHECK(m.frequency ==
              doctest::Approx(kPi * std::sqrt(double(p) * p + 4.0 * double(q) * q))
                  .epsilon(1e-12));
    }

    // every eigenfunction descends: invariant under both deck generators
    for (const auto& m : {modes[0], modes[3], modes[modes.size() - 1]}) {
        for (Point y : {Point{0.37, 0.21, 0.0, 0.0}, Point{0.91, 0.66, 0.0, 0.0}}) {
            auto v0 = eval_eigenfunction(kb, m, y);
            for (int g = 0; g < kb.deck_generator_count(); ++g) {
                auto v1 = eval_eigenfunction(kb, m, kb.apply_deck_generator(g, y));
                CHECK(std::abs(v0 - v1) < 1e-12);
            }
        }
    }
}

TEST_CASE("sphere degrees, multiplicities and window enumeration") {
    auto s2 = ManifoldModel::sphere(2);
    CHECK(!s2.flat());
    CHECK(s2.volume() == doctest::Approx(4.0 * kPi));
    CHECK(sphere_degree_multiplicity(2, 0) == 1);
    CHECK(sphere_degree_multiplicity(2, 5) == 11);
    CHECK(sphere_degree_multiplicity(3, 4) == 25);

    // single-degree window at l = 3
    auto modes = enumerate_window(s2, std::sqrt(12.0) - 0.1, std::sqrt(12.0) + 0.1);
    CHECK(modes.size() == 7);
    for (const auto& m : modes) {
        CHECK(m.label[0] == 3);
        CHECK(m.frequency == doctest::Approx(std::sqrt(12.0)).epsilon(1e-14));
    }

    // degrees 0..4 inclusive
    auto low = enumerate_window(s2, 0.0, std::sqrt(20.0) + 1e-12);
    CHECK(low.size() == 1 + 3 + 5 + 7 + 9);
}

TEST_CASE("quadrature grids integrate the constant to the volume") {
    for (auto model : {ManifoldModel::torus(2), ManifoldModel::klein_bottle(),
                       ManifoldModel::torus(3), ManifoldModel::sphere(2)}) {
        auto grid = quadrature_grid(model, 24);
        double sum = 0.0;
        for (long i = 0; i < grid.size(); ++i) sum += grid.weight(i);
        CHECK(sum == doctest::Approx(model.volume()).epsilon(1e-12));
        CHECK(grid.volume() == doctest::Approx(model.volume()).epsilon(1e-12));
    }
    CHECK_THROWS_AS((void)quadrature_grid(ManifoldModel::torus(2), 4), contract_error);
}

TEST_CASE("gauss-legendre nodes and spherical harmonic orthonormality") {
    auto gl = gauss_legendre(24);
    double sw = 0.0, sx2 = 0.0;
    for (int i = 0; i < 24; ++i) {
        sw += gl.w[i];
        sx2 += gl.w[i] * gl.x[i] * gl.x[i];
    }
    CHECK(sw == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(sx2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

    auto s2 = ManifoldModel::sphere(2);
    auto grid = quadrature_grid(s2, 32);
    double n32 = 0.0, cross = 0.0, n10 = 0.0;
    for (long i = 0; i < grid.size(); ++i) {
        auto p = grid.point(i);
        double w = grid.weight(i);
        double th = std::acos(p[2]), ph = std::atan2(p[1], p[0]);
        double y32 = real_sph_harm(3, 2, th, ph);
        double y21 = real_sph_harm(2, 1, th, ph);
        double y10 = real_sph_harm(1, 0, th, ph);
        n32 += w * y32 * y32;
        cross += w * y32 * y21;
        n10 += w * y10 * y10;
    }
    CHECK(n32 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(cross) < 1e-13);
    CHECK(n10 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(real_sph_harm(1, 0, 0.0, 0.0) ==
          doctest::Approx(std::sqrt(3.0 / (4.0 * kPi))).epsilon(1e-15));
}

TEST_CASE("periodic geodesics on flat models") {
    auto t2 = ManifoldModel::torus(2);
    auto g10 = periodic_geodesic(t2, {1, 0, 0});
    CHECK(g10.length == doctest::Approx(1.0));
    CHECK(g10.frequency(256) == doctest::Approx(kTwoPi * 256.0));

    CHECK(periodic_geodesic(t2, {1, 1, 0}).length == doctest::Approx(std::sqrt(2.0)));
    CHECK(periodic_geodesic(t2, {3, 4, 0}).length == doctest::Approx(5.0));
    // non-primitive directions reduce to the primitive period
    CHECK(periodic_geodesic(t2, {2, 0, 0}).length == doctest::Approx(1.0));

    auto kb = ManifoldModel::klein_bottle();
    auto glide = periodic_geodesic(kb, {1, 0, 0});
    CHECK(glide.length == doctest::Approx(1.0));
    CHECK(glide.m0_order == 2); // holonomy flips the transverse direction
    auto e2 = periodic_geodesic(kb, {0, 1, 0}, Point{0.3, 0.0, 0.0, 0.0});
    CHECK(e2.length == doctest::Approx(1.0));

    CHECK_THROWS_AS((void)periodic_geodesic(ManifoldModel::sphere(2), {1, 0, 0}),
                    error);
}

TEST_CASE("tube membership accounts for deck images") {
    auto t2 = ManifoldModel::torus(2);
    auto geo = periodic_geodesic(t2, {1, 0, 0});
    auto tube = TubeSpec::flat(geo, 0.1, 0.25);

    CHECK(tube_contains(tube, {0.1, 0.05, 0.0, 0.0}));
    CHECK(tube_contains(tube, {0.9, 0.0, 0.0, 0.0}));   // wraps to t = -0.1
    CHECK(tube_contains(tube, {0.05, 0.95, 0.0, 0.0})); // transverse wrap
    CHECK(!tube_contains(tube, {0.5, 0.0, 0.0, 0.0}));  // beyond the segment
    CHECK(!tube_contains(tube, {0.1, 0.3, 0.0, 0.0}));  // off axis

    auto grid = quadrature_grid(t2, 64);
    CHECK(tube_cross_points(tube, grid) >= 12);

    auto s2 = ManifoldModel::sphere(2);
    auto eq = TubeSpec::sphere_equator(s2, 0.2);
    CHECK(tube_contains(eq, {1.0, 0.0, 0.0, 0.0}));
    CHECK(tube_contains(eq, {0.0, std::cos(0.1), std::sin(0.1), 0.0}));
    CHECK(!tube_contains(eq, {0.0, 0.0, 1.0, 0.0}));
}

TEST_CASE("window profiles: plateaus, supports and normalization") {
    CHECK(a_profile(0.3) == 1.0);
    CHECK(a_profile(0.5) == 1.0);
    CHECK(a_profile(1.1) == 0.0);
    CHECK(a_profile(0.9) > 0.0);
    CHECK(a_profile(0.9) < 1.0);

    CHECK(beta_profile(1.0) == 1.0);
    CHECK(beta_profile(0.5) == 1.0);
    CHECK(beta_profile(2.0) == 1.0);
    CHECK(beta_profile(0.2) == 0.0);
    CHECK(beta_profile(4.5) == 0.0);

    EtaProfile eta(0.25);
    CHECK(eta(0.0) == 1.0);
    CHECK(eta.hat(0.0) > 0.0);
    CHECK(eta.hat(0.2) > 0.0);
    CHECK(eta.hat(0.26) == 0.0); // transform supported inside (-c0, c0)
    CHECK(eta.support_radius() > 100.0); // time-side truncation radius
    CHECK(std::abs(eta(5.0)) < eta(0.0));
    CHECK(eta.reach(1e-12) < eta.reach(1e-14));
    CHECK(!eta.is_zero());

    WindowProfile rho;
    auto r0 = rho.value(0.0);
    CHECK(r0.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r0.imag()) < 1e-12);
    for (double s : {3.7, 41.0, 277.0})
        CHECK(std::abs(rho.value(-s) - std::conj(rho.value(s))) < 1e-15);
    CHECK(rho.abs_value(10000.0) < 1e-2);
    CHECK(rho.abs_value(60000.0) < 1e-6);
}
