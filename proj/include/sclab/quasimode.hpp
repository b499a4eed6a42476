#pragma once

#include <complex>
#include <cstdint>
#include <memory>

#include "sclab/manifold.hpp"
#include "sclab/profiles.hpp"
#include "sclab/spectral.hpp"

namespace sclab {

// Parameters of the flat Knapp construction.  The mode number k selects the
// resonant frequency lambda_k = 2 pi k / l0 for a geodesic of length l0; the
// window width is always delta = 1 / log(lambda_k).
struct KnappParams {
    // Support radius of the window transform, in (0,1).  The off-shell rows of a
    // Knapp plate sample the window tail at spacing 2 pi T, so a small radius
    // leaves a fat oscillating tail there and the spectral budget jitters by
    // factors of several across mode numbers; scans that compare budgets
    // across k pass 0.9 here to keep that term under a tenth of the plate norm.
    double c0 = 0.25;
    int k = 2;        // mode number, at least 2
    // Far-field radius for the R^n kernel checks, in units of 2T.
    double truncation_multiplier = 2.0;
    // Optional replacement window (the all-zero surrogate in tests).  When
    // empty, a shared profile for c0 is built on first use.
    std::shared_ptr<const EtaProfile> eta;

    double lambda(double l0) const;
};

// Shared window profile for a given support radius (built once, cached).
std::shared_ptr<const EtaProfile> knapp_eta(double c0);

// Eigenbasis expansion of the Knapp quasimode concentrating on the given
// periodic geodesic.  The deck sum is evaluated in closed form: lattice
// periodization on the torus, double-cover periodization plus the two-term
// glide average on the Klein bottle.  Coefficients below 1e-14 of the peak
// are dropped.
CoefficientVector knapp_flat(const ManifoldModel& model, const GeodesicSpec& geodesic,
                             const KnappParams& params);

// Free-space Knapp kernel at a point z, by polar quadrature with successive
// refinement; disagreement beyond 1e-6 (relative to the kernel scale) is an
// accuracy error.  The plate axis is the first coordinate axis.
std::complex<double> knapp_kernel_rn(int n, const Point& z, double lambda, double delta,
                                     const KnappParams& params);

// Parseval defect ( sum |(lambda^2 - lambda_j^2) c_j|^2 )^{1/2}.
double defect(const ManifoldModel& model, double lambda, const CoefficientVector& coeffs);

// Quasimode budget ||psi||_2 + (lambda delta)^{-1} defect; the quantity a
// window of width delta must keep O(1) for the L^q lower bounds to apply.
double quasimode_budget(const ManifoldModel& model, double lambda,
                        const CoefficientVector& coeffs, double delta);

// Fraction of squared coefficient mass with |frequency - lambda| <= halfwidth.
double coefficient_mass_within(const CoefficientVector& coeffs, double lambda,
                               double halfwidth);

// Highest-weight spherical harmonic: L^2-normalized restriction of
// (x1 + i x2)^l to the sphere.  Only the 2-sphere is built here.
std::unique_ptr<QuasimodeEvaluator> gaussian_beam(int n, int l);

// L^2-normalized zonal harmonic about the given pole (2-sphere only).
std::unique_ptr<QuasimodeEvaluator> zonal(int n, int l, const Point& pole);

// L^2 mass of the evaluator restricted to the tube.
double tube_mass(const QuasimodeEvaluator& psi, const TubeSpec& tube,
                 const QuadratureGrid& grid, const NormOptions& opts = {});

// Max over random sample points and deck generators of
// |psi(alpha(y)) - psi(y)| relative to the sampled sup; zero means the
// evaluator genuinely lives on the quotient.
double deck_invariance_check(const ManifoldModel& model, const QuasimodeEvaluator& psi,
                             int samples, std::uint64_t seed = 2026);

// ||psi||_1 lambda^{(n-1)/4} / ||psi||_2, the scale-invariant ratio whose
// uniform positivity is the universal L^1 lower bound.
double l1_lower_ratio(const QuasimodeEvaluator& psi, double lambda, int n,
                      const QuadratureGrid& grid, const NormOptions& opts = {});

} // namespace sclab
