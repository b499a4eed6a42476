#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sclab/errors.hpp"
#include "sclab/manifold.hpp"
#include "sclab/profiles.hpp"
#include "sclab/spectral.hpp"
#include "sclab/util.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

using namespace sclab;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

NormOptions envelope_opts() {
    NormOptions o;
    o.alias = AliasPolicy::envelope;
    return o;
}

CoefficientVector random_window_vector(const ManifoldModel& model,
                                       const std::vector<EigenIndex>& modes,
                                       std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    CoefficientVector cv(model);
    for (std::size_t i = 0; i < modes.size(); ++i)
        cv.set(modes[i], {rng.normal(2 * i), rng.normal(2 * i + 1)});
    return cv;
}
} // namespace

TEST_CASE("explicit cosine has closed-form L^q norms") {
    // sqrt(2) cos(2 pi x1): |psi|^2 averages trigonometric powers exactly
    auto t2 = ManifoldModel::torus(2);
    CoefficientVector c(t2);
    c.set(make_index(t2, {1, 0, 0, 0}), 1.0 / std::sqrt(2.0));
    c.set(make_index(t2, {-1, 0, 0, 0}), 1.0 / std::sqrt(2.0));
    CoefficientEvaluator psi(c);
    auto grid = quadrature_grid(t2, 64);
    auto opts = envelope_opts();

    CHECK(lq_norm(psi, 2.0, grid, opts) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lq_norm(psi, 4.0, grid, opts) ==
          doctest::Approx(std::pow(1.5, 0.25)).epsilon(1e-12));
    CHECK(lq_norm(psi, 6.0, grid, opts) ==
          doctest::Approx(std::pow(2.5, 1.0 / 6.0)).epsilon(1e-12));
    CHECK(lq_norm(psi, kInf, grid, opts) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));

    CHECK_THROWS_AS((void)lq_norm(psi, 0.5, grid, opts), validation_error);
}

TEST_CASE("strict aliasing gate refuses undersampled grids") {
    auto t2 = ManifoldModel::torus(2);
    CoefficientVector h(t2);
    h.set(make_index(t2, {40, 0, 0, 0}), 1.0);
    CoefficientEvaluator psi(h);
    NormOptions strict;
    strict.alias = AliasPolicy::strict;

    bool threw = false;
    try {
        (void)lq_norm(psi, 2.0, quadrature_grid(t2, 64), strict);
    } catch (const resolution_error& e) {
        threw = true;
        CHECK(e.required_resolution() > 64);
    }
    CHECK(threw);
    CHECK(lq_norm(psi, 2.0, quadrature_grid(t2, 160), strict) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("parseval and fft row synthesis on a skew torus") {
    std::array<std::array<double, 3>, 3> B = {
        {{1.0, 0.25, 0.0}, {0.0, 0.8, 0.0}, {0.0, 0.0, 1.0}}};
    auto tb = ManifoldModel::torus(2, B);
    auto modes = enumerate_window(tb, SpectralWindow::interval(20.0, 40.0));
    REQUIRE(modes.size() >= 8);
    auto cv = random_window_vector(tb, modes, 7, 1);
    CoefficientEvaluator ev(cv);
    auto grid = quadrature_grid(tb, ev.strict_resolution());
    CHECK(lq_norm(ev, 2.0, grid, envelope_opts()) ==
          doctest::Approx(cv.norm2()).epsilon(1e-10));

    auto ws = ev.make_workspace(grid);
    std::vector<std::complex<double>> row(grid.row_length());
    for (std::size_t r : {std::size_t(0), std::size_t(3), std::size_t(grid.rows() - 1)}) {
        ev.synthesize_row(grid, r, ws.get(), row.data());
        for (std::size_t k : {std::size_t(1), std::size_t(17)})
            CHECK(std::abs(row[k] - ev.value(grid.row_point(r, k))) < 1e-10);
    }
}

TEST_CASE("klein bottle synthesis, parseval and deck invariance") {
    auto kb = ManifoldModel::klein_bottle();
    auto modes = enumerate_window(kb, SpectralWindow::interval(1.0, 30.0));
    REQUIRE(modes.size() >= 8);
    auto cv = random_window_vector(kb, modes, 11, 2);
    CoefficientEvaluator ev(cv);
    auto grid = quadrature_grid(kb, std::max<long>(64, ev.strict_resolution()));

    auto ws = ev.make_workspace(grid);
    std::vector<std::complex<double>> row(grid.row_length());
    for (std::size_t r : {std::size_t(0), std::size_t(5), std::size_t(grid.rows() / 2)}) {
        ev.synthesize_row(grid, r, ws.get(), row.data());
        for (std::size_t k :
             {std::size_t(0), std::size_t(9), std::size_t(grid.row_length() - 2)})
            CHECK(std::abs(row[k] - ev.value(grid.row_point(r, k))) < 1e-9);
    }
    CHECK(lq_norm(ev, 2.0, grid, envelope_opts()) ==
          doctest::Approx(cv.norm2()).epsilon(1e-10));
}

TEST_CASE("sphere synthesis and parseval") {
    auto s2 = ManifoldModel::sphere(2);
    auto modes = enumerate_window(s2, SpectralWindow::interval(3.0, 9.0));
    REQUIRE(modes.size() >= 30);
    auto cv = random_window_vector(s2, modes, 13, 3);
    CoefficientEvaluator ev(cv);
    auto grid = quadrature_grid(s2, 64);

    auto ws = ev.make_workspace(grid);
    std::vector<std::complex<double>> row(grid.row_length());
    for (std::size_t r : {std::size_t(0), std::size_t(31), std::size_t(grid.rows() - 1)}) {
        ev.synthesize_row(grid, r, ws.get(), row.data());
        for (std::size_t k : {std::size_t(2), std::size_t(77)})
            CHECK(std::abs(row[k] - ev.value(grid.row_point(r, k))) < 1e-9);
    }
    CHECK(lq_norm(ev, 2.0, grid, envelope_opts()) ==
          doctest::Approx(cv.norm2()).epsilon(1e-9));
}

TEST_CASE("projector window norms match closed forms") {
    auto t2 = ManifoldModel::torus(2);
    auto win = SpectralWindow::interval(0.0, 2.0 * kPi * std::sqrt(2.0) + 1e-9);
    auto m = enumerate_window(t2, win);
    CHECK(opnorm_2_to_inf(t2, win) ==
          doctest::Approx(std::sqrt(double(m.size()))).epsilon(1e-12));

    auto s2 = ManifoldModel::sphere(2);
    auto winl = SpectralWindow::interval(std::sqrt(12.0) - 0.1, std::sqrt(12.0) + 0.1);
    CHECK(opnorm_2_to_inf(s2, winl) ==
          doctest::Approx(std::sqrt(7.0 / (4.0 * kPi))).epsilon(1e-12));

    // klein: compare against a brute-force scan of the diagonal kernel
    auto kb = ManifoldModel::klein_bottle();
    auto wk = SpectralWindow::interval(5.0, 25.0);
    auto km = enumerate_window(kb, wk);
    double best = 0.0;
    for (int i = 0; i <= 20000; ++i) {
        Point y{0.0, double(i) / 20000.0, 0.0, 0.0};
        double s = 0.0;
        for (const auto& idx : km) s += std::norm(eval_eigenfunction(kb, idx, y));
        best = std::max(best, s);
    }
    CHECK(opnorm_2_to_inf(kb, wk) == doctest::Approx(std::sqrt(best)).epsilon(1e-9));

    auto kmx = opnorm_2_to_inf_argmax(t2, win);
    CHECK(kmx.modes == long(m.size()));
    CHECK(kmx.value == doctest::Approx(std::sqrt(double(m.size()))).epsilon(1e-12));
}

TEST_CASE("projection is idempotent and window-supported") {
    auto t2 = ManifoldModel::torus(2);
    auto win = SpectralWindow::interval(6.0, 10.0);
    auto all = enumerate_window(t2, SpectralWindow::interval(0.0, 16.0));
    auto cv = random_window_vector(t2, all, 17, 4);

    auto p1 = project(t2, win, cv);
    auto p2 = project(t2, win, p1);
    for (const auto& e : p2.entries())
        CHECK(std::abs(e.value - p1.at(e.index.label)) == 0.0);
    for (const auto& e : p1.entries()) {
        CHECK(e.index.frequency >= 6.0);
        CHECK(e.index.frequency <= 10.0);
    }

    auto grid = quadrature_grid(t2, 32);
    auto opts = envelope_opts();
    std::vector<CoefficientVector> cands{cv};
    auto lb = opnorm_lower_bound(t2, win, kInf, cands, grid, opts);
    CHECK(!lb.empty);
    CHECK(lb.value <= opnorm_2_to_inf(t2, win) + 1e-9);

    auto nothing =
        opnorm_lower_bound(t2, SpectralWindow::interval(6.001, 6.002), 2.0, cands, grid, opts);
    CHECK(nothing.empty);
}

TEST_CASE("smoothed projector multiplier is exact on shell") {
    auto t2 = ManifoldModel::torus(2);
    WindowProfile prof;
    CoefficientVector cv(t2);
    cv.set(make_index(t2, {1, 0, 0, 0}), 1.0);
    auto out = smooth_project(t2, prof, 8.0, 2.0 * kPi, cv);
    CHECK(std::abs(out.at({1, 0, 0, 0})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coefficient vectors merge duplicates and prune") {
    auto t2 = ManifoldModel::torus(2);
    std::vector<CoefficientVector::Entry> entries;
    entries.push_back({make_index(t2, {1, 0, 0, 0}), {1.0, 0.0}});
    entries.push_back({make_index(t2, {1, 0, 0, 0}), {0.5, 0.0}});
    entries.push_back({make_index(t2, {0, 2, 0, 0}), {0.0, 1e-18}});
    auto cv = CoefficientVector::from_entries(t2, entries);
    CHECK(cv.size() == 2);
    CHECK(std::abs(cv.at({1, 0, 0, 0}) - std::complex<double>(1.5, 0.0)) == 0.0);

    cv.drop_below(1e-12);
    CHECK(cv.size() == 1);
    CHECK(cv.min_frequency() == cv.max_frequency());
}

TEST_CASE("grid measurement agrees with single-norm calls and is thread-stable") {
    auto t2 = ManifoldModel::torus(2);
    auto modes = enumerate_window(t2, SpectralWindow::interval(10.0, 30.0));
    auto cv = random_window_vector(t2, modes, 23, 5);
    CoefficientEvaluator ev(cv);
    long res = std::max({ev.envelope_resolution(2.0), ev.envelope_resolution(6.0),
                         ev.envelope_resolution(kInf)});
    auto grid = quadrature_grid(t2, res);
    auto opts = envelope_opts();

    auto geo = periodic_geodesic(t2, {1, 0, 0});
    auto tube = TubeSpec::flat(geo, 0.2, 0.25);
    auto gm = grid_measure(ev, grid, {2.0, 6.0, kInf}, &tube, opts);
    REQUIRE(gm.norms.size() == 3);
    CHECK(gm.tube_requested);
    CHECK(gm.norms[0] == doctest::Approx(lq_norm(ev, 2.0, grid, opts)).epsilon(1e-15));
    CHECK(gm.norms[1] == doctest::Approx(lq_norm(ev, 6.0, grid, opts)).epsilon(1e-15));
    CHECK(gm.norms[2] == doctest::Approx(lq_norm(ev, kInf, grid, opts)).epsilon(1e-15));
    CHECK(std::abs(ev.value(gm.argmax)) == doctest::Approx(gm.grid_max).epsilon(1e-12));
    CHECK(gm.tube_mass > 0.0);
    CHECK(gm.tube_mass <= gm.norms[0] + 1e-12);

    // pairwise reduction keeps results bit-identical across thread counts
    NormOptions two = opts;
    two.threads = 2;
    auto gm2 = grid_measure(ev, grid, {2.0, 6.0, kInf}, &tube, two);
    CHECK(gm.norms[0] == gm2.norms[0]);
    CHECK(gm.norms[1] == gm2.norms[1]);
    CHECK(gm.tube_mass == gm2.tube_mass);
}

TEST_CASE("envelope aliasing policy enforces its resolution floor") {
    auto t2 = ManifoldModel::torus(2);
    CoefficientVector h(t2);
    h.set(make_index(t2, {25, 0, 0, 0}), 1.0 / std::sqrt(2.0));
    h.set(make_index(t2, {-25, 0, 0, 0}), 1.0 / std::sqrt(2.0));
    CoefficientEvaluator ev(h);
    auto opts = envelope_opts();
    long need = ev.envelope_resolution(6.0); // label span 50 at q = 6
    CHECK(need >= ev.strict_resolution());

    bool threw = false;
    try {
        (void)lq_norm(ev, 6.0, quadrature_grid(t2, need / 2), opts);
    } catch (const resolution_error& e) {
        threw = true;
        CHECK(e.required_resolution() == need);
    }
    CHECK(threw);
    // sqrt(2) cos(50 pi x1) has the same L^6 norm as any unit-speed cosine
    CHECK(lq_norm(ev, 6.0, quadrature_grid(t2, need), opts) ==
          doctest::Approx(std::pow(2.5, 1.0 / 6.0)).epsilon(1e-10));
}
