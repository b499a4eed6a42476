#include "sclab/profiles.hpp"
#include "sclab/errors.hpp"
#include "sclab/util.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <filesystem>
#include <mutex>

namespace sclab {

double bump(double t) {
    double u = 1.0 - t * t;
    if (u <= 0.0) return 0.0;
    return std::exp(-1.0 / u);
}

namespace {

constexpr int kStepNodes = 1 << 14; // Simpson panels for the cumulative table

struct StepTable {
    std::vector<double> g;  // cumulative, normalized to [0,1]
    double integral = 0.0;  // raw integral of bump over (-1,1)
};

const StepTable& step_table() {
    static StepTable tbl = [] {
        StepTable t;
        const int n = kStepNodes; // even
        const double h = 2.0 / n;
        std::vector<double> f(n + 1);
        for (int i = 0; i <= n; ++i) f[i] = bump(-1.0 + i * h);
        // composite Simpson prefix on pairs of panels
        t.g.assign(n + 1, 0.0);
        for (int i = 2; i <= n; i += 2)
            t.g[i] = t.g[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
        // odd nodes by a local Simpson-3/8-free half step (Newton 3-point)
        for (int i = 1; i <= n; i += 2)
            t.g[i] = t.g[i - 1] + h / 12.0 * (5.0 * f[i - 1] + 8.0 * f[i] - f[i + 1 <= n ? i + 1 : i]);
        t.integral = t.g[n];
        for (auto& v : t.g) v /= t.integral;
        t.g[n] = 1.0;
        return t;
    }();
    return tbl;
}

double interp_cubic(const std::vector<double>& tab, double x, double dx) {
    // Catmull-Rom on a uniform grid.  The left stencil reflects evenly
    // across node 0 (all tables here are even or flat there), which keeps
    // interp(0) == tab[0] exact.
    double u = x / dx;
    long i = static_cast<long>(std::floor(u));
    long n = static_cast<long>(tab.size());
    if (i < 0) i = 0;
    if (i > n - 3) i = n - 3;
    double s = u - i;
    double p0 = (i >= 1) ? tab[i - 1] : tab[1];
    double p1 = tab[i], p2 = tab[i + 1], p3 = tab[i + 2];
    return p1 + 0.5 * s * (p2 - p0 + s * (2 * p0 - 5 * p1 + 4 * p2 - p3 + s * (3 * (p1 - p2) + p3 - p0)));
}

std::string g_cache_dir; // NOLINT
std::mutex g_cache_mutex;

struct SidecarHeader {
    char magic[8];
    std::uint32_t version;
    std::uint32_t kind; // 1 = eta (real), 2 = rho (complex)
    double p0, p1;
    std::uint64_t length;
    double ds;
};

template <typename T>
bool load_sidecar(const std::string& path, std::uint32_t kind, double p0, double p1,
                  std::vector<T>& out, double& ds) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    SidecarHeader h{};
    bool ok = std::fread(&h, sizeof h, 1, f) == 1 && std::memcmp(h.magic, "SCLBPRF1", 8) == 0 &&
              h.version == 1 && h.kind == kind && h.p0 == p0 && h.p1 == p1 && h.length > 0 &&
              h.length < (1ull << 24);
    if (ok) {
        out.resize(h.length);
        ok = std::fread(out.data(), sizeof(T), h.length, f) == h.length;
        ds = h.ds;
    }
    std::fclose(f);
    if (!ok) std::fprintf(stderr, "sclab: ignoring unreadable profile cache %s\n", path.c_str());
    return ok;
}

template <typename T>
void store_sidecar(const std::string& path, std::uint32_t kind, double p0, double p1,
                   const std::vector<T>& tab, double ds) {
    std::FILE* f = std::fopen((path + ".tmp").c_str(), "wb");
    if (!f) return;
    SidecarHeader h{};
    std::memcpy(h.magic, "SCLBPRF1", 8);
    h.version = 1;
    h.kind = kind;
    h.p0 = p0;
    h.p1 = p1;
    h.length = tab.size();
    h.ds = ds;
    bool ok = std::fwrite(&h, sizeof h, 1, f) == 1 &&
              std::fwrite(tab.data(), sizeof(T), tab.size(), f) == tab.size();
    std::fclose(f);
    if (ok)
        std::filesystem::rename(path + ".tmp", path);
    else
        std::filesystem::remove(path + ".tmp");
}

// Trapezoid discretization of  f(s) = integral of w(t) e^{ist} dt  sampled
// on s_n = n * (2*pi / (L*dt)), evaluated as a single backward FFT.  The
// integrand is smooth and compactly supported well inside the sampled
// t-range, so the trapezoid rule converges super-algebraically; aliasing is
// below the profile's own tabulated floor.
std::vector<std::complex<double>> fourier_table(const std::function<double(double)>& w,
                                                std::size_t logL, double dt, double& ds) {
    const std::size_t L = std::size_t(1) << logL;
    ds = 2.0 * M_PI / (double(L) * dt);
    fftw_complex* buf = fftw_alloc_complex(L);
    for (std::size_t j = 0; j < L; ++j) {
        double t = (double(j) - double(L) / 2.0) * dt;
        buf[j][0] = w(t) * dt;
        buf[j][1] = 0.0;
    }
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(L), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    std::vector<std::complex<double>> out(L / 2 + 1);
    for (std::size_t n = 0; n <= L / 2; ++n) {
        double sign = (n % 2 == 0) ? 1.0 : -1.0; // e^{-i pi n} from the t-grid offset
        out[n] = sign * std::complex<double>(buf[n][0], buf[n][1]);
    }
    fftw_free(buf);
    return out;
}

} // namespace

double bump_integral() { return step_table().integral; }

double smoothstep(double u) {
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const auto& tbl = step_table();
    double x = (u + 1.0) / 2.0 * kStepNodes;
    return std::min(1.0, std::max(0.0, interp_cubic(tbl.g, x, 1.0)));
}

double a_profile(double s) {
    double t = std::abs(s);
    if (t <= 0.5) return 1.0;
    if (t >= 1.0) return 0.0;
    return smoothstep(3.0 - 4.0 * t); // falls smoothly from 1 at t=1/2 to 0 at t=1
}

double beta_profile(double s) {
    if (s <= 0.25 || s >= 4.0) return 0.0;
    if (s <= 0.5) return smoothstep(8.0 * s - 3.0);  // rise on (1/4, 1/2)
    if (s < 2.0) return 1.0;
    return smoothstep(3.0 - s);                      // fall on (2, 4)
}

void set_profile_cache_dir(const std::string& dir) {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    g_cache_dir = dir;
    if (!dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
    }
}

std::string profile_cache_dir() {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    return g_cache_dir;
}

// ------------------------------------------------------------------ eta --

EtaProfile::EtaProfile(double c0) {
    if (!(c0 > 0.0 && c0 < 1.0)) throw validation_error("eta profile needs c0 in (0,1)");
    c0_ = c0;
    build();
}

EtaProfile EtaProfile::zero_surrogate(double c0) {
    EtaProfile p;
    p.c0_ = c0;
    p.zero_ = true;
    p.ds_ = 1.0;
    p.table_ = std::make_shared<const std::vector<double>>(std::vector<double>(4, 0.0));
    return p;
}

void EtaProfile::build() {
    constexpr std::size_t kLogL = 18;
    const double smax = 1024.0 / c0_;
    const double dt = M_PI / smax;

    std::string cache = profile_cache_dir();
    std::string path;
    if (!cache.empty()) {
        path = cache + "/eta_c0_" + hex64(fnv1a(format_double(c0_))) + "_L18.prof";
        std::vector<double> tab;
        double ds = 0.0;
        if (load_sidecar(path, 1, c0_, double(kLogL), tab, ds)) {
            ds_ = ds;
            table_ = std::make_shared<const std::vector<double>>(std::move(tab));
            return;
        }
    }

    double inv = 1.0 / (c0_ * bump_integral());
    double c0 = c0_;
    double ds = 0.0;
    auto cplx = fourier_table([c0, inv](double t) { return bump(t / c0) * inv; }, kLogL, dt, ds);
    std::vector<double> tab(cplx.size());
    for (std::size_t i = 0; i < cplx.size(); ++i) tab[i] = cplx[i].real();
    // pin the normalization: eta(0) = 1 exactly
    double z = tab[0];
    for (auto& v : tab) v /= z;
    ds_ = ds;
    if (!path.empty()) store_sidecar(path, 1, c0_, double(kLogL), tab, ds);
    table_ = std::make_shared<const std::vector<double>>(std::move(tab));
}

double EtaProfile::hat(double t) const {
    if (zero_) return 0.0;
    return bump(t / c0_) / (c0_ * bump_integral());
}

double EtaProfile::operator()(double s) const {
    if (zero_) return 0.0;
    double x = std::abs(s) / ds_;
    const auto& tab = *table_;
    if (x >= double(tab.size() - 2)) return 0.0;
    return interp_cubic(tab, x, 1.0);
}

double EtaProfile::support_radius() const {
    return ds_ * double(table_->size() - 2);
}

double EtaProfile::reach(double rel) const {
    if (zero_) return 0.0;
    const auto& tab = *table_;
    double running = 0.0;
    std::size_t idx = tab.size();
    for (std::size_t i = tab.size(); i-- > 0;) {
        running = std::max(running, std::abs(tab[i]));
        if (running >= rel) {
            idx = i + 1;
            break;
        }
    }
    if (idx >= tab.size()) idx = tab.size() - 1;
    return ds_ * double(idx);
}

// ------------------------------------------------------------------ rho --

WindowProfile::WindowProfile(double delta, double delta0) {
    if (!(delta > 0.0 && delta <= 1.0)) throw validation_error("window profile needs delta in (0,1]");
    if (!(delta0 > 0.0 && delta0 < 1.0)) throw validation_error("window profile needs delta0 in (0,1)");
    delta_ = delta;
    delta0_ = delta0;
    build();
}

void WindowProfile::build() {
    constexpr std::size_t kLogL = 20;
    const double smax = 65536.0;
    const double dt = M_PI / smax;

    std::string cache = profile_cache_dir();
    std::string path;
    if (!cache.empty()) {
        path = cache + "/rho_" +
               hex64(fnv1a(format_double(delta_) + "," + format_double(delta0_))) + "_L20.prof";
        std::vector<std::complex<double>> tab;
        double ds = 0.0;
        if (load_sidecar(path, 2, delta_, delta0_, tab, ds)) {
            ds_ = ds;
            table_ = std::make_shared<const std::vector<std::complex<double>>>(std::move(tab));
            return;
        }
    }

    // mollifier scaled onto [delta(1-delta0), delta(1+delta0)]
    double center = delta_, half = delta_ * delta0_;
    double inv = 1.0 / (half * bump_integral());
    double ds = 0.0;
    auto tab = fourier_table(
        [center, half, inv](double t) { return bump((t - center) / half) * inv; }, kLogL, dt, ds);
    std::complex<double> z = tab[0];
    for (auto& v : tab) v /= z; // rho(0) = 1 exactly
    tab[0] = 1.0;
    ds_ = ds;
    if (!path.empty()) store_sidecar(path, 2, delta_, delta0_, tab, ds);
    table_ = std::make_shared<const std::vector<std::complex<double>>>(std::move(tab));
}

double WindowProfile::hat(double t) const {
    double half = delta_ * delta0_;
    return bump((t - delta_) / half) / (half * bump_integral());
}

std::complex<double> WindowProfile::value(double s) const {
    const auto& tab = *table_;
    double x = std::abs(s) / ds_;
    if (x >= double(tab.size() - 2)) return 0.0;
    double u = x;
    long i = static_cast<long>(std::floor(u));
    long n = static_cast<long>(tab.size());
    if (i < 0) i = 0;
    if (i > n - 3) i = n - 3;
    double f = u - i;
    auto cr = [f](std::complex<double> p0, std::complex<double> p1, std::complex<double> p2,
                  std::complex<double> p3) {
        return p1 + 0.5 * f *
                        (p2 - p0 +
                         f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
    };
    std::complex<double> p0 = (i >= 1) ? tab[i - 1] : std::conj(tab[1]);
    std::complex<double> v = cr(p0, tab[i], tab[i + 1], tab[i + 2]);
    return s >= 0.0 ? v : std::conj(v);
}

double WindowProfile::support_radius() const { return ds_ * double(table_->size() - 2); }

std::string WindowProfile::descriptor() const {
    return "bump[delta=" + format_double(delta_) + ",delta0=" + format_double(delta0_) + "]";
}

} // namespace sclab
