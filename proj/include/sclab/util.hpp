#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sclab {

// ---------------------------------------------------------------- rng ----
//
// Counter-based generator: value = mix(seed, stream, counter).  Stateless,
// so any sample is reproducible from its coordinates alone and parallel
// consumers never contend over shared state.

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    // uniform in [0,1)
    double uniform(std::uint64_t counter) const;
    // uniform in [lo,hi)
    double uniform(std::uint64_t counter, double lo, double hi) const;
    // standard normal (Box-Muller on two derived uniforms)
    double normal(std::uint64_t counter) const;
    std::uint64_t bits(std::uint64_t counter) const;

  private:
    std::uint64_t seed_, stream_;
};

// ------------------------------------------------------------- sums ------

// Pairwise tree reduction in slot order.  Used everywhere a parallel stage
// accumulates per-chunk partials: the tree shape depends only on the slot
// count, so totals are bit-identical for any thread count.
double pairwise_sum(const double* v, std::size_t n);
double pairwise_sum(const std::vector<double>& v);

// ---------------------------------------------------------- parallel -----

// Static block partition of [0,n).  Worker w handles one contiguous range
// body(lo, hi, worker); results must be written to caller-owned slots
// indexed by iteration or worker, never accumulated across workers.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t, int)>& body);

int default_thread_count();
void set_default_thread_count(int n);

// ------------------------------------------------------------ hashing ----

// FNV-1a, used for config hashes and output digests (stability, not
// cryptography).
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull);
std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);

// ------------------------------------------------------------ numbers ----

// Shortest-round-trip style fixed formatting: 17 significant digits, so
// re-parsing reproduces the exact double and reruns are byte-identical.
std::string format_double(double v);
double parse_double(const std::string& s);

} // namespace sclab
