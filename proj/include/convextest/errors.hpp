#ifndef CONVEXTEST_ERRORS_HPP
#define CONVEXTEST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace convextest {

// A pmf (or vector) failed a shape requirement, e.g. a non-convex input
// where convexity is a precondition.
class ShapeViolationError : public std::runtime_error {
public:
    explicit ShapeViolationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A matrix expected to be positive semidefinite is not, beyond tolerance.
class NotPsdError : public std::runtime_error {
public:
    explicit NotPsdError(const std::string& msg) : std::runtime_error(msg) {}
};

// The sample has S_n = 0: every observation equals 0, the test is undefined.
class DegenerateSupportError : public std::runtime_error {
public:
    explicit DegenerateSupportError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace convextest

#endif
