#include "sclab/growth.hpp"

#include "sclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>

#include <gsl/gsl_linalg.h>
#include <gsl/gsl_multifit.h>

namespace sclab {

namespace {

struct OlsResult {
    std::vector<double> coeff;
    std::vector<double> stderr_; // per coefficient, residual-scaled
    double rms = 0.0;            // sqrt(chisq / m)
    double cond = 0.0;           // condition number of the raw design matrix
};

// Ordinary least squares of y against the given columns.  GSL scales the
// covariance by chisq/(m-p), so the reported errors are the usual OLS ones.
OlsResult run_ols(const std::vector<std::vector<double>>& cols,
                  const std::vector<double>& y) {
    const std::size_t m = y.size();
    const std::size_t p = cols.size();

    std::unique_ptr<gsl_matrix, void (*)(gsl_matrix*)> X(
        gsl_matrix_alloc(m, p), gsl_matrix_free);
    std::unique_ptr<gsl_vector, void (*)(gsl_vector*)> yv(
        gsl_vector_alloc(m), gsl_vector_free);
    std::unique_ptr<gsl_vector, void (*)(gsl_vector*)> c(
        gsl_vector_alloc(p), gsl_vector_free);
    std::unique_ptr<gsl_matrix, void (*)(gsl_matrix*)> cov(
        gsl_matrix_alloc(p, p), gsl_matrix_free);
    std::unique_ptr<gsl_multifit_linear_workspace,
                    void (*)(gsl_multifit_linear_workspace*)>
        work(gsl_multifit_linear_alloc(m, p), gsl_multifit_linear_free);

    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            gsl_matrix_set(X.get(), i, j, cols[j][i]);
        gsl_vector_set(yv.get(), i, y[i]);
    }

    double chisq = 0.0;
    int status = gsl_multifit_linear(X.get(), yv.get(), c.get(), cov.get(),
                                     &chisq, work.get());
    if (status != 0)
        throw conditioning_error("least squares solve failed on the fit design");

    OlsResult r;
    r.coeff.resize(p);
    r.stderr_.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        r.coeff[j] = gsl_vector_get(c.get(), j);
        r.stderr_[j] = std::sqrt(std::max(0.0, gsl_matrix_get(cov.get(), j, j)));
    }
    r.rms = std::sqrt(std::max(0.0, chisq) / static_cast<double>(m));

    // gsl_multifit_linear balances columns before its SVD, so recover the
    // condition number of the design as given
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j)
            gsl_matrix_set(X.get(), i, j, cols[j][i]);
    std::unique_ptr<gsl_matrix, void (*)(gsl_matrix*)> V(
        gsl_matrix_alloc(p, p), gsl_matrix_free);
    std::unique_ptr<gsl_vector, void (*)(gsl_vector*)> S(
        gsl_vector_alloc(p), gsl_vector_free);
    std::unique_ptr<gsl_vector, void (*)(gsl_vector*)> tmp(
        gsl_vector_alloc(p), gsl_vector_free);
    gsl_linalg_SV_decomp(X.get(), V.get(), S.get(), tmp.get());
    const double smin = gsl_vector_get(S.get(), p - 1);
    const double smax = gsl_vector_get(S.get(), 0);
    r.cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    return r;
}

void check_points(const std::vector<GrowthPoint>& points, std::size_t min_count,
                  double min_span) {
    if (points.size() < min_count)
        throw validation_error("growth fit needs at least " +
                               std::to_string(min_count) + " points, got " +
                               std::to_string(points.size()));

    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    const double e2 = std::exp(2.0);
    for (const auto& pt : points) {
        if (!(std::isfinite(pt.lambda)) || pt.lambda <= e2)
            throw validation_error(
                "growth fit needs lambda > e^2 so log(log(lambda)) is usable");
        if (!(pt.norm > 0.0) || !std::isfinite(pt.norm))
            throw validation_error("growth fit norms must be positive and finite");
        lo = std::min(lo, pt.lambda);
        hi = std::max(hi, pt.lambda);
    }

    if (hi == lo)
        throw conditioning_error(
            "degenerate fit design: every point has the same lambda");
    if (hi / lo < min_span)
        throw validation_error("growth fit needs lambda spanning a factor of " +
                               std::to_string(static_cast<int>(min_span)) +
                               "; the data span only a factor of " +
                               std::to_string(hi / lo));
}

} // namespace

double critical_exponent(int n) {
    if (n < 2)
        throw domain_error("critical exponent is defined for dimension n >= 2");
    return 2.0 * (n + 1) / (n - 1);
}

double mu(double q, int n) {
    const double qc = critical_exponent(n);
    if (!(q > 2.0))
        throw domain_error("growth exponent mu(q) is defined for q > 2");
    const double inv_q = std::isinf(q) ? 0.0 : 1.0 / q;
    if (q <= qc)
        return 0.5 * (n - 1) * (0.5 - inv_q);
    return n * (0.5 - inv_q) - 0.5;
}

double theoretical_log_exponent(double q, int n, CurvatureSign sign) {
    const double qc = critical_exponent(n);
    const double m = mu(q, n);
    if (q > qc)
        throw domain_error(
            "log-power corrections above the critical exponent do not "
            "distinguish between the two geometries");
    switch (sign) {
    case CurvatureSign::positive: return 0.0;
    case CurvatureSign::zero: return -m;
    case CurvatureSign::negative: return -0.5;
    }
    throw contract_error("unknown curvature sign");
}

GrowthFit fit_log_exponent(const std::vector<GrowthPoint>& points, double a_fixed) {
    check_points(points, 4, 8.0);
    if (!std::isfinite(a_fixed))
        throw validation_error("imposed exponent a must be finite");

    const std::size_t m = points.size();
    std::vector<std::vector<double>> cols(2, std::vector<double>(m));
    std::vector<double> y(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double ll = std::log(points[i].lambda);
        cols[0][i] = 1.0;
        cols[1][i] = std::log(ll);
        y[i] = std::log(points[i].norm) - a_fixed * ll;
    }

    OlsResult ols = run_ols(cols, y);
    GrowthFit fit;
    fit.a = a_fixed;
    fit.log_c = ols.coeff[0];
    fit.b = ols.coeff[1];
    fit.b_stderr = ols.stderr_[1];
    fit.residual = ols.rms;
    fit.a_was_fixed = true;
    fit.n_points = m;
    return fit;
}

GrowthFit fit_free(const std::vector<GrowthPoint>& points) {
    check_points(points, 6, 64.0);

    const std::size_t m = points.size();
    std::vector<std::vector<double>> cols(3, std::vector<double>(m));
    std::vector<double> y(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double ll = std::log(points[i].lambda);
        cols[0][i] = 1.0;
        cols[1][i] = ll;
        cols[2][i] = std::log(ll);
        y[i] = std::log(points[i].norm);
    }

    // b rides on the part of log(log(lambda)) that is not a linear function
    // of log(lambda); when that part is below 1e-2 rms the coefficient is
    // pure noise and the fit refuses.
    OlsResult collin = run_ols({cols[0], cols[1]}, cols[2]);
    if (collin.rms < 1e-2)
        throw conditioning_error(
            "log(log(lambda)) is collinear with log(lambda) on this sample; "
            "the log-power exponent is not identifiable");

    OlsResult ols = run_ols(cols, y);
    GrowthFit fit;
    fit.log_c = ols.coeff[0];
    fit.a = ols.coeff[1];
    fit.b = ols.coeff[2];
    fit.b_stderr = ols.stderr_[2];
    fit.residual = ols.rms;
    fit.a_was_fixed = false;
    fit.n_points = m;
    fit.conditioning_warning = ols.cond > 1e6;
    return fit;
}

CurvatureVerdict classify(double q, int n, const std::vector<GrowthPoint>& points) {
    const double theory[3] = {
        theoretical_log_exponent(q, n, CurvatureSign::positive),
        theoretical_log_exponent(q, n, CurvatureSign::zero),
        theoretical_log_exponent(q, n, CurvatureSign::negative),
    };

    CurvatureVerdict verdict;
    verdict.fit = fit_log_exponent(points, mu(q, n));

    for (int i = 0; i < 3; ++i)
        verdict.distance[i] = std::abs(verdict.fit.b - theory[i]);
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (verdict.distance[i] < verdict.distance[best]) best = i;
    int second = best == 0 ? 1 : 0;
    for (int i = 0; i < 3; ++i)
        if (i != best && verdict.distance[i] < verdict.distance[second]) second = i;

    verdict.sign = static_cast<CurvatureSign>(best);
    verdict.confidence = verdict.distance[second] - verdict.distance[best];
    verdict.ambiguous = verdict.distance[best] <= 2.0 * verdict.fit.b_stderr &&
                        verdict.distance[second] <= 2.0 * verdict.fit.b_stderr;
    return verdict;
}

const char* curvature_name(CurvatureSign sign) {
    switch (sign) {
    case CurvatureSign::positive: return "positive";
    case CurvatureSign::zero: return "zero";
    case CurvatureSign::negative: return "negative";
    }
    throw contract_error("unknown curvature sign");
}

const char* verdict_name(const CurvatureVerdict& verdict) {
    return verdict.ambiguous ? "ambiguous" : curvature_name(verdict.sign);
}

} // namespace sclab
