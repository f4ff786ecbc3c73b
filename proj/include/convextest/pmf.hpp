#ifndef CONVEXTEST_PMF_HPP
#define CONVEXTEST_PMF_HPP

#include <span>
#include <string_view>
#include <vector>

#include "convextest/rng.hpp"

namespace convextest {

// Tolerance on sums that must equal 1 (probability mass, mixture weights).
inline constexpr double kMassTol = 1e-12;

// Second differences above this count as a strict change of slope.
inline constexpr double kKnotTol = 1e-10;

// Probability mass function with finite support {0,...,S}. Stored densely;
// indices past S read as 0. The support end is tight: mass(S) > 0 unless
// S = 0.
class Pmf {
public:
    // Validates: entries nonnegative, sum within kMassTol of 1. Trailing
    // exact zeros are trimmed so support_end() is tight.
    explicit Pmf(std::vector<double> mass);

    int support_end() const { return static_cast<int>(mass_.size()) - 1; }

    // mass(i), with i < 0 or i > support_end() reading as 0.
    double operator()(int i) const {
        return (i < 0 || i >= static_cast<int>(mass_.size())) ? 0.0 : mass_[static_cast<size_t>(i)];
    }

    const std::vector<double>& mass() const { return mass_; }

    bool operator==(const Pmf&) const = default;

private:
    std::vector<double> mass_;
};

// An i.i.d. sample of nonnegative integers.
class Sample {
public:
    // Validates: at least one observation, all values >= 0.
    explicit Sample(std::vector<int> values);

    int n() const { return static_cast<int>(values_.size()); }
    int max_value() const { return max_; }
    const std::vector<int>& values() const { return values_; }

private:
    std::vector<int> values_;
    int max_;
};

// Weights pi_1..pi_K of a mixture of triangular pmfs; weights[k-1] multiplies
// the triangular pmf on {0,...,k-1}.
class TriangularMixture {
public:
    // Validates: entries in [0,1], sum within kMassTol of 1.
    explicit TriangularMixture(std::vector<double> weights);

    int size() const { return static_cast<int>(weights_.size()); }

    // pi_k for k >= 1; k past the stored range reads as 0.
    double weight(int k) const {
        return (k < 1 || k > size()) ? 0.0 : weights_[static_cast<size_t>(k - 1)];
    }

    const std::vector<double>& weights() const { return weights_; }

    bool operator==(const TriangularMixture&) const = default;

private:
    std::vector<double> weights_;
};

// Triangular pmf on {0,...,k-1}: mass(i) = 2(k-i)/(k(k+1)) for i < k.
// These are the extreme points of the set of convex pmfs.
Pmf triangular(int k);

// Second difference p(k+1) - 2p(k) + p(k-1), k >= 1. A pmf is convex on the
// nonnegative integers iff this is >= 0 for every k >= 1.
double delta(const Pmf& p, int k);
double delta(std::span<const double> values, int k);

// Positions k in {1,...,S} where the slope strictly changes,
// i.e. delta(p,k) > kKnotTol.
std::vector<int> knots(const Pmf& p);

// Convex combination sum_k pi_k * triangular(k); always a convex pmf.
Pmf mixture_to_pmf(const TriangularMixture& m);

// Inverse of mixture_to_pmf: pi_k = k(k+1) * delta(p,k) / 2, with the second
// difference extended one index past the support. Requires p convex
// (delta >= -kKnotTol everywhere); throws ShapeViolationError otherwise.
TriangularMixture pmf_to_mixture(const Pmf& p);

// Empirical pmf of a sample: mass(j) = count(j)/n, support end = max value.
Pmf empirical_pmf(const Sample& s);

// Poisson(rate) conditioned on {0,...,upper}, renormalized.
Pmf truncated_poisson(double rate, int upper);

// The triangular pmf on {0,...,5} with 0.008 moved from index 1 to index 0;
// a valid pmf with a single small convexity violation at 2.
Pmf perturbed_triangular();

// n i.i.d. draws from p by inversion of the cumulative masses; deterministic
// given the stream state.
Sample sample_from(const Pmf& p, int n, RngStream& rng);

// Named benchmark distributions used by the simulation presets:
//   p0_1  triangular pmf on {0..5} (convex, no interior knots)
//   p0_2  triangular mixture with knots at 2, 3 and 5 (convex)
//   p1_1  truncated Poisson(1.5) on {0..5} (clearly non-convex)
//   p1_2  perturbed triangular (non-convex, slope flaw of -0.008 at 2)
Pmf benchmark_pmf(std::string_view name);

}  // namespace convextest

#endif
