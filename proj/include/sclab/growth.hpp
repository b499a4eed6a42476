#pragma once

#include <cstddef>
#include <vector>

namespace sclab {

// Growth-law analysis.  Norm data arrives as (lambda, N) samples with
// N a ratio of cluster norms, and the working model in log coordinates is
//
//     log N = logC + a log(lambda) + b log(log(lambda)).
//
// a is the polynomial rate, b the logarithmic correction.  The classifier
// pins a to its theoretical value and reads the curvature sign off b.

struct GrowthPoint {
    double lambda;
    double norm; // must be positive
};

enum class CurvatureSign { positive, zero, negative };

// Least-squares result in log coordinates.  residual is the root mean
// square of the fit residuals, b_stderr the OLS standard error of b
// (zero when the data are an exact model instance).
struct GrowthFit {
    double a = 0.0;
    double b = 0.0;
    double log_c = 0.0;
    double b_stderr = 0.0;
    double residual = 0.0;
    bool a_was_fixed = true;
    bool conditioning_warning = false; // design condition number above 1e6
    std::size_t n_points = 0;
};

struct CurvatureVerdict {
    CurvatureSign sign = CurvatureSign::zero;
    bool ambiguous = false;         // both nearest laws sit inside 2 sigma of b
    double distance[3] = {0, 0, 0}; // |b - b_theory|, indexed like CurvatureSign
    double confidence = 0.0;        // second-best distance minus best distance
    GrowthFit fit;
};

// 2(n+1)/(n-1), the exponent where the two branches of the norm growth
// rate meet.  n = 2 gives 6, n = 3 gives 4.
double critical_exponent(int n);

// Polynomial growth exponent mu(q) for a cluster of width 1/log(lambda):
// (n-1)/2 * (1/2 - 1/q) up to the critical exponent, n(1/2 - 1/q) - 1/2
// beyond it.  The branches agree at q_c.  q may be infinite; q <= 2 is
// outside the theory.
double mu(double q, int n);

// Theoretical value of b for 2 < q <= q_c: 0 under positive curvature,
// -mu(q) on flat manifolds, -1/2 under negative curvature.  Above q_c the
// subcritical corrections collapse and the sign cannot be read off.
double theoretical_log_exponent(double q, int n, CurvatureSign sign);

// Fit b and logC with a pinned at a_fixed.  Needs at least 4 points, all
// lambda above e^2, spanning a factor of 8 or more.
GrowthFit fit_log_exponent(const std::vector<GrowthPoint>& points, double a_fixed);

// Fit a, b and logC jointly.  Needs at least 6 points spanning a factor
// of 64; log(lambda) and log(log(lambda)) are nearly collinear on short
// spans, so the fit carries a conditioning warning past condition 1e6 and
// refuses outright once b stops being identifiable.
GrowthFit fit_free(const std::vector<GrowthPoint>& points);

// Fix a = mu(q, n), fit b, and name the curvature sign whose theoretical
// b is nearest.  The verdict is flagged ambiguous when the two nearest
// candidates both lie within twice the fit's b standard error.
CurvatureVerdict classify(double q, int n, const std::vector<GrowthPoint>& points);

const char* curvature_name(CurvatureSign sign);
const char* verdict_name(const CurvatureVerdict& verdict);

} // namespace sclab
