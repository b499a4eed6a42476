#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

namespace sclab {

// Standard mollifier exp(-1/(1-t^2)) on (-1,1), zero outside.
double bump(double t);
// Integral of the mollifier over (-1,1).
double bump_integral();
// Normalized cumulative of the mollifier: smoothstep rising 0 -> 1 on (-1,1).
double smoothstep(double u);

// Angular cutoff: exactly 1 on |s| <= 1/2, smooth taper, support in (-1,1).
double a_profile(double s);
// Radial cutoff: exactly 1 on [1/2,2], smooth taper, support in (1/4,4).
double beta_profile(double s);

// Directory for binary profile-table sidecars ("" disables caching).
void set_profile_cache_dir(const std::string& dir);
std::string profile_cache_dir();

// Fourier transform of a nonnegative compactly supported mollifier:
//
//   eta(s) = integral of eta_hat(t) e^{ist} dt,
//   eta_hat(t) = bump(t/c0) scaled so the integral is 1.
//
// Real, even, eta(0) = 1 exactly, super-algebraic decay.  Values come from
// a trapezoid discretization of the integral evaluated as one long FFT and
// interpolated cubically; beyond the tabulated range (where the envelope is
// below 1e-19) the profile reads as zero.
class EtaProfile {
  public:
    explicit EtaProfile(double c0);
    double c0() const { return c0_; }
    double operator()(double s) const;
    double hat(double t) const;
    // Tabulated range; |s| past this evaluates to zero.
    double support_radius() const;
    // Smallest s0 such that |eta| < rel for all tabulated |s| >= s0.
    double reach(double rel) const;
    bool is_zero() const { return zero_; }

    // All-zero stand-in (the eta_hat == 0 degenerate window used in tests).
    static EtaProfile zero_surrogate(double c0);

  private:
    EtaProfile() = default;
    void build();
    double c0_ = 0.0;
    double ds_ = 0.0;
    bool zero_ = false;
    std::shared_ptr<const std::vector<double>> table_;
};

// Smoothed spectral window profile rho: rho_hat is the mollifier scaled to
// [delta(1-delta0), delta(1+delta0)] and normalized so rho(0) = 1 exactly.
// The one-sided frequency support makes rho complex-valued; multipliers use
// rho(T(lambda - lambda_j)) directly and bounds use |rho|.
class WindowProfile {
  public:
    explicit WindowProfile(double delta = 1.0 / 16.0, double delta0 = 1.0 / 16.0);
    double delta() const { return delta_; }
    double delta0() const { return delta0_; }
    std::complex<double> value(double s) const;
    double abs_value(double s) const { return std::abs(value(s)); }
    double hat(double t) const;
    double support_radius() const;
    std::string descriptor() const;

  private:
    void build();
    double delta_ = 0.0, delta0_ = 0.0;
    double ds_ = 0.0;
    std::shared_ptr<const std::vector<std::complex<double>>> table_;
};

} // namespace sclab
