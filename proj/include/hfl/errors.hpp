#pragma once

#include <stdexcept>
#include <string>

namespace hfl {

/// Base of every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. T at x = 0).
class domain_error : public error {
public:
    using error::error;
};

/// Derivative order above what the weight was built for.
class unsupported_order : public error {
public:
    using error::error;
};

/// Bad argument that is not a domain issue (empty grid, n out of range).
class argument_error : public error {
public:
    using error::error;
};

/// Value exceeds the representable range of the family or evaluator.
class overflow_error : public error {
public:
    using error::error;
};

/// An iterative method failed to reach its tolerance.
class convergence_error : public error {
public:
    convergence_error(const std::string& what, double residual)
        : error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Discretization did not settle at the requested working precision.
class precision_error : public error {
public:
    using error::error;
};

/// Request beyond the degree the recurrence generator is known to handle.
class stability_error : public error {
public:
    stability_error(const std::string& what, int largest_stable)
        : error(what + " (largest stable N = " + std::to_string(largest_stable) + ")"),
          largest_stable_(largest_stable) {}
    int largest_stable() const noexcept { return largest_stable_; }

private:
    int largest_stable_;
};

/// Malformed or inconsistent run configuration.
class config_error : public error {
public:
    using error::error;
};

/// A test function or norm setup rejected by the admissibility gate.
class gate_rejection : public error {
public:
    gate_rejection(std::string condition, const std::string& what)
        : error(what), condition_(std::move(condition)) {}
    const std::string& condition() const noexcept { return condition_; }

private:
    std::string condition_;
};

}  // namespace hfl
