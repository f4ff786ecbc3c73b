#ifndef CONVEXTEST_PROJECTION_HPP
#define CONVEXTEST_PROJECTION_HPP

#include <Eigen/Dense>
#include <vector>

#include "convextest/pmf.hpp"
#include "convextest/rng.hpp"

namespace convextest {

// Optimality conditions must hold within this bound for every projection.
inline constexpr double kKktTol = 1e-8;
// Constraint feasibility slack for the projections.
inline constexpr double kFeasTol = 1e-10;
// Eigenvalues above -kPsdClamp are treated as nonnegative roundoff.
inline constexpr double kPsdClamp = 1e-10;

// Polyhedral cone {g in R^dim : g(x-1) - 2g(x) + g(x+1) >= 0 for x in
// constrained}. An empty constraint set means the whole space.
class ConeSpec {
public:
    ConeSpec(int dim, std::vector<int> constrained);

    int dim() const { return dim_; }
    const std::vector<int>& constrained() const { return constrained_; }

    // The cone of vectors convex at every interior position 1..dim-2.
    static ConeSpec full(int dim);

private:
    int dim_;
    std::vector<int> constrained_;  // sorted, unique
};

// Least-squares projection of a pmf onto the convex pmfs, expressed in the
// triangular-mixture parameterization.
struct ConvexLseResult {
    Pmf fit;                    // the projected pmf
    TriangularMixture weights;  // mixture weights of the fit
    double sq_distance;         // full squared distance between input and fit
    double kkt_residual;        // max violation of the optimality conditions
    int input_support_end = 0;  // S of the projected pmf
};

// Projects p onto the set of all convex pmfs by minimizing the squared
// distance over mixtures of triangular pmfs. The parameterization starts
// with sizes 1..S+2 (the fit usually ends within one index of the input
// support) and grows whenever the variational certificate demands it, so the
// returned fit satisfies <p - fit, T_k - fit> <= 0 for every triangular pmf,
// however large. Throws if the final certificate exceeds kKktTol.
ConvexLseResult convex_lse(const Pmf& p);

// Euclidean projection onto a ConeSpec cone. Precomputes the constraint
// matrix once so repeated projections onto the same cone are cheap; project()
// is const and safe to call concurrently.
class ConeProjector {
public:
    explicit ConeProjector(ConeSpec spec);

    const ConeSpec& spec() const { return spec_; }

    Eigen::VectorXd project(const Eigen::VectorXd& g) const;

private:
    ConeSpec spec_;
    Eigen::MatrixXd constraint_;  // rows: second difference at each position
    Eigen::MatrixXd gram_;        // constraint_ * constraint_^T
};

// One-shot projection; throws std::invalid_argument on dimension mismatch.
Eigen::VectorXd cone_project(const Eigen::VectorXd& g, const ConeSpec& cone);

// Max violation of the projection optimality system: constraint feasibility,
// orthogonality <g - ghat, ghat> = 0, and <g - ghat, h> <= 0 for every
// generator h of the cone (constants, the linear ramp, and hinge directions).
double cone_kkt_residual(const ConeSpec& cone, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& ghat);

// Multinomial dispersion matrix: entry (i,j) = 1{i=j} p(i) - p(i) p(j) for
// i,j in 0..dim-1, with p read as 0 past its support.
struct DispersionMatrix {
    Eigen::MatrixXd matrix;

    int dim() const { return static_cast<int>(matrix.rows()); }
};

DispersionMatrix dispersion_matrix(const Pmf& p, int dim);

// Factor L with L L^T equal to the dispersion matrix; the Gaussian law drawn
// from it depends only on the product, so any factor is admissible.
struct GaussianFactor {
    Eigen::MatrixXd factor;

    int dim() const { return static_cast<int>(factor.rows()); }
};

// Symmetric eigendecomposition square root, with negative roundoff
// eigenvalues clamped to zero. Throws NotPsdError if an eigenvalue is below
// -1e-8.
GaussianFactor factor_psd(const DispersionMatrix& m);

// L z with z i.i.d. standard normal; deterministic given the stream.
Eigen::VectorXd sample_gaussian(const GaussianFactor& f, RngStream& rng);

// Numerical rank of V = B Sigma B^T where B maps a vector on {0..S} to its
// second differences at 1..S (with the value at S+1 read as 0) and Sigma is
// the dispersion matrix of p on {0..S}. Equals S whenever p is strictly
// positive on its support.
int rank_diagnostic(const Pmf& p);

}  // namespace convextest

#endif
