#pragma once

#include <vector>

namespace sclab {

// Gauss-Legendre nodes/weights on [-1,1] (Newton on the three-term
// recurrence; machine-precision for the node counts used here).
struct GaussLegendre {
    std::vector<double> x, w;
};
GaussLegendre gauss_legendre(int n);

// Legendre polynomial P_l(x), |x| <= 1, by upward recurrence.
double legendre_p(int l, double x);

// Fully normalized associated Legendre values
//   Ptilde_l^m = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m
// for m = 0..l at fixed l, Condon-Shortley phase included.  Stable through
// l of a few hundred.  out must hold l+1 entries.
void normalized_assoc_legendre_row(int l, double cos_theta, double* out);

// Real orthonormal spherical harmonic on S^2:
//   m = 0: Ptilde_l^0, m > 0: sqrt(2) Ptilde_l^m cos(m phi),
//   m < 0: sqrt(2) Ptilde_l^|m| sin(|m| phi).
double real_sph_harm(int l, int m, double theta, double phi);

// All 2l+1 orthonormal harmonics of degree l at one point; out[j] is order
// m = j - l.  Cost O(l) per call given the row recurrence.
void real_sph_harm_row(int l, double theta, double phi, double* out);

} // namespace sclab
