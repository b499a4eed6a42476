#include "sclab/legendre.hpp"
#include "sclab/errors.hpp"

#include <cmath>
#include <vector>

namespace sclab {

GaussLegendre gauss_legendre(int n) {
    if (n < 1) throw validation_error("gauss_legendre needs n >= 1");
    GaussLegendre gl;
    gl.x.resize(n);
    gl.w.resize(n);
    // symmetric rule: solve the upper half, mirror
    int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int l = 2; l <= n; ++l) {
                double p2 = ((2 * l - 1) * x * p1 - (l - 1) * p0) / l;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        gl.x[i] = -x;
        gl.x[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        gl.w[i] = w;
        gl.w[n - 1 - i] = w;
    }
    if (n % 2 == 1) gl.x[n / 2] = 0.0;
    return gl;
}

double legendre_p(int l, double x) {
    if (l < 0) throw validation_error("legendre_p needs l >= 0");
    if (l == 0) return 1.0;
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= l; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

void normalized_assoc_legendre_row(int l, double ct, double* out) {
    if (l < 0) throw validation_error("assoc legendre needs l >= 0");
    double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    // diagonal chain Ptilde_m^m, then one off-diagonal step, then upward in
    // degree at fixed order; everything carries its normalization so no
    // factorial overflows appear.
    std::vector<double> pmm(l + 1);
    pmm[0] = std::sqrt(1.0 / (4.0 * M_PI));
    for (int m = 1; m <= l; ++m)
        pmm[m] = -pmm[m - 1] * st * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
    for (int m = 0; m <= l; ++m) {
        if (m == l) {
            out[m] = pmm[m];
            continue;
        }
        double pa = pmm[m];                                    // degree m
        double pb = pa * ct * std::sqrt(2.0 * m + 3.0);        // degree m+1
        for (int k = m + 2; k <= l; ++k) {
            double alk = std::sqrt((4.0 * k * k - 1.0) / (double(k) * k - double(m) * m));
            double alk1 =
                std::sqrt((4.0 * (k - 1.0) * (k - 1.0) - 1.0) / ((k - 1.0) * (k - 1.0) - double(m) * m));
            double pc = alk * (ct * pb - pa / alk1);
            pa = pb;
            pb = pc;
        }
        out[m] = pb;
    }
}

double real_sph_harm(int l, int m, double theta, double phi) {
    int am = std::abs(m);
    if (am > l) throw validation_error("order exceeds degree");
    std::vector<double> row(l + 1);
    normalized_assoc_legendre_row(l, std::cos(theta), row.data());
    if (m == 0) return row[0];
    double v = std::sqrt(2.0) * row[am];
    return m > 0 ? v * std::cos(am * phi) : v * std::sin(am * phi);
}

void real_sph_harm_row(int l, double theta, double phi, double* out) {
    std::vector<double> row(l + 1);
    normalized_assoc_legendre_row(l, std::cos(theta), row.data());
    out[l] = row[0];
    for (int m = 1; m <= l; ++m) {
        double v = std::sqrt(2.0) * row[m];
        out[l + m] = v * std::cos(m * phi);
        out[l - m] = v * std::sin(m * phi);
    }
}

} // namespace sclab
