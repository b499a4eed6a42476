#pragma once

#include <stdexcept>
#include <string>

namespace sclab {

// Error taxonomy shared by every module.  The CLI maps these onto process
// exit codes: anything a user can fix in the config or call site is a
// validation failure (2), a quadrature or refinement breakdown is an
// accuracy failure (3), and asking for something the build does not
// support is a capability failure (4).

enum class error_kind {
    validation,   // bad argument, bad config, violated precondition
    contract,     // objects from different manifolds mixed, invalid label
    domain,       // mathematical domain violation (e.g. log window at lambda <= e)
    resolution,   // grid too coarse for the requested measurement
    accuracy,     // quadrature/refinement failed to converge
    conditioning, // degenerate fit design
    capability,   // unsupported manifold/dimension/operation
    io            // cache or file problem
};

class error : public std::runtime_error {
  public:
    error(error_kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    error_kind kind() const { return kind_; }

  private:
    error_kind kind_;
};

struct validation_error : error {
    explicit validation_error(const std::string& w) : error(error_kind::validation, w) {}
};
struct contract_error : error {
    explicit contract_error(const std::string& w) : error(error_kind::contract, w) {}
};
struct domain_error : error {
    explicit domain_error(const std::string& w) : error(error_kind::domain, w) {}
};
struct accuracy_error : error {
    explicit accuracy_error(const std::string& w) : error(error_kind::accuracy, w) {}
};
struct conditioning_error : error {
    explicit conditioning_error(const std::string& w) : error(error_kind::conditioning, w) {}
};
struct capability_error : error {
    explicit capability_error(const std::string& w) : error(error_kind::capability, w) {}
};
struct io_error : error {
    explicit io_error(const std::string& w) : error(error_kind::io, w) {}
};

// Carries the resolution that would have satisfied the anti-aliasing rule,
// so callers can rebuild the grid instead of guessing.
class resolution_error : public error {
  public:
    resolution_error(const std::string& what, long required)
        : error(error_kind::resolution, what), required_(required) {}
    long required_resolution() const { return required_; }

  private:
    long required_;
};

int exit_code_for(error_kind kind);

} // namespace sclab
