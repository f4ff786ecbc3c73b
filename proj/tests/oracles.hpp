// Brute-force reference solvers used only by tests. They share no code with
// the production projections: both are exhaustive enumerations over active
// sets, exact up to the linear solves.

#ifndef CONVEXTEST_TESTS_ORACLES_HPP
#define CONVEXTEST_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <vector>

#include "convextest/pmf.hpp"
#include "convextest/projection.hpp"

namespace convextest::oracles {

// Projection onto a ConeSpec cone by trying every subset of the constraints
// as the active (equality) set and keeping the feasible candidate with the
// smallest distance. Exact for any dimension, exponential in the number of
// constraints.
Eigen::VectorXd cone_project_enumerate(const Eigen::VectorXd& g, const ConeSpec& cone);

// min ||basis w - target||^2 over the probability simplex by enumerating
// every nonempty support; returns the feasible face minimizer with the
// smallest objective.
Eigen::VectorXd simplex_ls_enumerate(const Eigen::MatrixXd& basis, const Eigen::VectorXd& target);

// Face-enumeration version of the convex least-squares fit over mixtures of
// the triangular pmfs of sizes 1..k_count.
std::vector<double> convex_lse_enumerate(const Pmf& p, int k_count);

// Dense simplex-QP version of the convex least-squares fit: accelerated
// projected gradient over the mixture simplex, with the vertex set grown
// until the variational certificate covers every triangular pmf. Fully
// independent of the active-set path.
std::vector<double> convex_lse_qp(const Pmf& p);

// Two-sample Kolmogorov-Smirnov statistic (sup distance of the empirical
// cdfs).
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Asymptotic two-sample KS critical value at level alpha:
// c(alpha) * sqrt((m+n)/(m n)).
double ks_critical_value(double alpha, size_t m, size_t n);

}  // namespace convextest::oracles

#endif
