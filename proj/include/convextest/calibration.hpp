#ifndef CONVEXTEST_CALIBRATION_HPP
#define CONVEXTEST_CALIBRATION_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "convextest/pmf.hpp"
#include "convextest/projection.hpp"

namespace convextest {

// Threshold sequence separating estimated knots from non-knots when building
// the constraint set of the knot-calibrated test.
class VnRule {
public:
    enum class Kind { zero, sqrt_loglog, quarter, constant, callable };

    static VnRule zero() { return VnRule(Kind::zero); }
    // sqrt(log(log n)) / sqrt(n); defined for n >= 3.
    static VnRule sqrt_loglog() { return VnRule(Kind::sqrt_loglog); }
    // n^(-1/4).
    static VnRule quarter() { return VnRule(Kind::quarter); }
    static VnRule constant(double value);
    static VnRule callable(std::function<double(int)> fn);

    Kind kind() const { return kind_; }
    double constant_value() const { return constant_; }

    // Stable identifier used in CSV output and plan files:
    // "zero", "loglog", "quarter", a decimal constant, or "custom".
    std::string label() const;

    // Parses a label back into a rule; accepts the names above or a
    // nonnegative decimal constant.
    static VnRule parse(const std::string& label);

private:
    explicit VnRule(Kind kind) : kind_(kind) {}

    Kind kind_;
    double constant_ = 0.0;
    std::function<double(int)> fn_;

    friend double vn_value(const VnRule& rule, int n);
};

// Evaluates the rule at sample size n; throws std::invalid_argument when the
// rule is undefined there (the loglog rule needs n >= 3).
double vn_value(const VnRule& rule, int n);

enum class Method { knot, lfh };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct CalibrationConfig {
    double alpha = 0.05;
    int draws = 1000;                  // Monte Carlo copies per test
    Method method = Method::lfh;
    VnRule vn = VnRule::quarter();     // knot method only
    std::uint64_t seed = 0;
};

// Outcome of one calibrated test.
struct TestReport {
    double statistic = 0.0;        // n * sum of squared deviations from the LSE
    double critical_value = 0.0;   // empirical (1-alpha)-quantile of the draws
    double p_value = 1.0;          // add-one Monte Carlo p-value
    bool reject = false;           // statistic > critical_value
    int s_n = 0;                   // max observation
    std::vector<int> constrained_positions;  // where convexity was imposed
    std::vector<double> mc_statistics;       // the calibration draws, sorted

    // Calibration metadata.
    int n = 0;
    Method method = Method::lfh;
    double alpha = 0.0;
    int draws = 0;
    std::optional<double> vn_threshold;  // evaluated v_n (knot method)
    std::uint64_t seed = 0;
    double max_kkt_residual = 0.0;  // worst optimality certificate seen
};

// The squared-scale test statistic n * sum_j (p_n(j) - fit(j))^2 together
// with the LSE it came from.
std::pair<double, ConvexLseResult> test_statistic(const Sample& s);

// Constraint set of the knot-calibrated test: positions x in {1..S} where
// the empirical second difference is at most the threshold (inclusive).
// Thresholding the empirical differences rather than the fitted ones is what
// reproduces the reference rejection rates; with thresholds dominating the
// n^(-1/2) noise the two detectors agree asymptotically.
ConeSpec knot_constraint_set(const Pmf& empirical, double vn_threshold);

// Runs the full calibrated test: computes the statistic, draws `draws`
// Gaussian vectors with the empirical dispersion, projects each onto the
// constraint cone (knot method: knots of the LSE exempted; lfh: convexity
// imposed everywhere), and compares the statistic against the empirical
// quantile. Throws DegenerateSupportError when every observation is 0.
TestReport calibrate(const Sample& s, const CalibrationConfig& cfg);

}  // namespace convextest

#endif
