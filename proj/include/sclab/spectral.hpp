#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sclab/manifold.hpp"
#include "sclab/profiles.hpp"

namespace sclab {

// ----------------------------------------------------------- windows -----

// Width policy for spectral windows [lambda, lambda + delta(lambda)].
struct WidthPolicy {
    enum class Kind { unit, log_width, custom };
    Kind kind = Kind::unit;
    std::function<double(double)> fn; // custom only

    static WidthPolicy unit() { return {Kind::unit, nullptr}; }
    static WidthPolicy log_width() { return {Kind::log_width, nullptr}; }
    static WidthPolicy custom(std::function<double(double)> f) { return {Kind::custom, std::move(f)}; }
    std::string name() const;
};

// delta(lambda) under the policy.  log needs lambda > e; a custom width
// must land in (0, 1].
double window_width(double lambda, const WidthPolicy& policy);

// Checks a custom policy on the sampled lambda values of a run: every width
// in (0, 1] and lambda * delta(lambda) non-decreasing along the samples.
void validate_width_policy(const WidthPolicy& policy, const std::vector<double>& lambda_samples);

class SpectralWindow {
  public:
    SpectralWindow(double lambda, const WidthPolicy& policy);
    // raw interval [lo, hi], used for oracle windows and full-spectrum surrogates
    static SpectralWindow interval(double lo, double hi);

    double lambda() const { return lambda_; }
    double delta() const { return delta_; }
    double lo() const { return lambda_; }
    double hi() const { return lambda_ + delta_; }
    bool contains(double freq) const { return freq >= lo() && freq <= hi(); }
    // T = 1/delta, the effective propagation time of the window
    double effective_time() const { return 1.0 / delta_; }
    const std::string& policy_name() const { return policy_name_; }

  private:
    SpectralWindow() = default;
    double lambda_ = 0.0, delta_ = 1.0;
    std::string policy_name_ = "unit";
};

std::vector<EigenIndex> enumerate_window(const ManifoldModel& model, const SpectralWindow& w);

// ------------------------------------------------------ coefficients -----

// A function with spectrum in an enumerated basis slice, stored as a sparse
// label -> coefficient map ordered by (frequency, label).
class CoefficientVector {
  public:
    struct Entry {
        EigenIndex index;
        std::complex<double> value;
    };

    explicit CoefficientVector(const ManifoldModel& model) : model_(model) {}
    // sorts and merges duplicate labels by addition
    static CoefficientVector from_entries(const ManifoldModel& model, std::vector<Entry> entries);

    const ManifoldModel& model() const { return model_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    void set(const EigenIndex& index, std::complex<double> value); // upsert
    std::complex<double> at(const std::array<std::int32_t, 4>& label) const; // 0 when absent

    double norm2() const;                                  // l2 of coefficients
    std::complex<double> dot(const CoefficientVector& g) const; // sum f * conj(g)
    double max_abs() const;
    double min_frequency() const;
    double max_frequency() const;
    void scale(std::complex<double> z);
    void drop_below(double absolute_threshold);

  private:
    ManifoldModel model_;
    std::vector<Entry> entries_;
};

// Window truncation: keeps coefficients with frequency in [lo, hi].
CoefficientVector project(const ManifoldModel& model, const SpectralWindow& window,
                          const CoefficientVector& coeffs);

// Smoothed multiplier: coefficient at frequency f scaled by rho(T (lambda - f)).
CoefficientVector smooth_project(const ManifoldModel& model, const WindowProfile& profile,
                                 double T, double lambda, const CoefficientVector& coeffs);

// ---------------------------------------------------------- evaluators ---

// Scratch space for fast row synthesis (FFT buffers and plans); one per
// worker thread.
struct RowWorkspace {
    virtual ~RowWorkspace() = default;
};

// A pointwise-evaluable mode.  value() is the always-available reference
// path; synthesize_row() is the fast path used by norm measurement, and
// falls back to value() when an evaluator provides no workspace.
class QuasimodeEvaluator {
  public:
    virtual ~QuasimodeEvaluator() = default;
    const ManifoldModel& model() const { return model_; }
    double nominal_frequency() const { return lambda_; }

    virtual std::complex<double> value(const Point& y) const = 0;
    virtual std::unique_ptr<RowWorkspace> make_workspace(const QuadratureGrid& grid) const;
    virtual void synthesize_row(const QuadratureGrid& grid, long row, RowWorkspace* ws,
                                std::complex<double>* out) const;

    virtual bool coefficient_backed() const { return false; }
    virtual double max_frequency() const { return lambda_; }
    // resolution demanded by the hard anti-aliasing gate: 4 * fmax / (2 pi)
    long strict_resolution() const;
    // resolution that makes grid L^q quadrature exact through the modulus
    // envelope (per-axis coefficient span); q <= 0 means the sup-norm case
    virtual long envelope_resolution(double q) const;

  protected:
    QuasimodeEvaluator(const ManifoldModel& model, double lambda) : model_(model), lambda_(lambda) {}
    ManifoldModel model_;
    double lambda_ = 0.0;
};

// Coefficient-backed evaluator with FFT row synthesis on all three models.
class CoefficientEvaluator final : public QuasimodeEvaluator {
  public:
    explicit CoefficientEvaluator(CoefficientVector coeffs);
    CoefficientEvaluator(CoefficientVector coeffs, double nominal_lambda);
    const CoefficientVector& coefficients() const { return coeffs_; }

    std::complex<double> value(const Point& y) const override;
    std::unique_ptr<RowWorkspace> make_workspace(const QuadratureGrid& grid) const override;
    void synthesize_row(const QuadratureGrid& grid, long row, RowWorkspace* ws,
                        std::complex<double>* out) const override;
    bool coefficient_backed() const override { return true; }
    double max_frequency() const override;
    long envelope_resolution(double q) const override;

  private:
    CoefficientVector coeffs_;
};

// --------------------------------------------------------------- norms ---

enum class AliasPolicy {
    strict,  // resolution >= 4 * fmax / (2 pi), the documented precondition
    envelope // resolution >= per-axis span requirement (exact for even q)
};

struct NormOptions {
    AliasPolicy alias = AliasPolicy::strict;
    int threads = 0;      // 0: library default
    int refine_passes = 2; // local refinement sweeps for sup norms
};

// (sum_i w_i |psi(x_i)|^q)^{1/q}; q may be infinity (grid max plus local
// golden-section refinement).  Throws resolution_error when a
// coefficient-backed evaluator fails the aliasing gate.
double lq_norm(const QuasimodeEvaluator& psi, double q, const QuadratureGrid& grid,
               const NormOptions& opts = {});

// One synthesis pass measuring several q-norms and optionally the L^2 mass
// restricted to a tube.  qs entries may be infinity.
struct GridMeasurement {
    std::vector<double> norms;
    double grid_max = 0.0;
    Point argmax{};
    double tube_mass = 0.0;
    bool tube_requested = false;
};
GridMeasurement grid_measure(const QuasimodeEvaluator& psi, const QuadratureGrid& grid,
                             const std::vector<double>& qs, const TubeSpec* tube,
                             const NormOptions& opts = {});

// Exact 2 -> infinity norm of the window projector: sup_x sqrt(diagonal
// kernel).  Empty windows give 0.
double opnorm_2_to_inf(const ManifoldModel& model, const SpectralWindow& window);
struct KernelMax {
    double value = 0.0;
    Point argmax{};
    long modes = 0;
};
KernelMax opnorm_2_to_inf_argmax(const ManifoldModel& model, const SpectralWindow& window);

// Certified lower bound for the 2 -> q projector norm from candidate
// functions; empty = true when every candidate projects to numerical zero,
// which is distinct from a genuine 0 value.
struct OperatorLowerBound {
    double value = 0.0;
    bool empty = true;
};
OperatorLowerBound opnorm_lower_bound(const ManifoldModel& model, const SpectralWindow& window,
                                      double q, const std::vector<CoefficientVector>& candidates,
                                      const QuadratureGrid& grid, const NormOptions& opts = {});

} // namespace sclab
