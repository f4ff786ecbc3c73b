#include "convextest/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "convextest/errors.hpp"

namespace convextest {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ConeSpec::ConeSpec(int dim, std::vector<int> constrained)
    : dim_(dim), constrained_(std::move(constrained)) {
    if (dim_ < 1) throw std::invalid_argument("ConeSpec: dim must be >= 1");
    std::sort(constrained_.begin(), constrained_.end());
    constrained_.erase(std::unique(constrained_.begin(), constrained_.end()),
                       constrained_.end());
    for (int x : constrained_) {
        if (x < 1 || x > dim_ - 2)
            throw std::invalid_argument("ConeSpec: constrained position " + std::to_string(x) +
                                        " outside {1.." + std::to_string(dim_ - 2) + "}");
    }
}

ConeSpec ConeSpec::full(int dim) {
    std::vector<int> all;
    for (int x = 1; x <= dim - 2; ++x) all.push_back(x);
    return ConeSpec(dim, std::move(all));
}

namespace {

// Lawson-Hanson active set for min 0.5 l^T Q l + q^T l over l >= 0, with Q
// symmetric positive definite. The gradient Q l + q equals the constraint
// values of the projected point, so the stopping tolerance is a feasibility
// tolerance on the primal.
VectorXd nnls_nonneg_quadratic(const MatrixXd& q_mat, const VectorXd& q_vec) {
    const int m = static_cast<int>(q_vec.size());
    const double tol = kFeasTol * std::max(1.0, q_vec.lpNorm<Eigen::Infinity>());

    VectorXd lambda = VectorXd::Zero(m);
    std::vector<int> passive;
    std::vector<char> in_passive(static_cast<size_t>(m), 0);

    const int max_outer = 4 * m + 16;
    for (int outer = 0; outer < max_outer; ++outer) {
        VectorXd grad = q_mat * lambda + q_vec;
        int enter = -1;
        double worst = -tol;
        for (int j = 0; j < m; ++j) {
            if (!in_passive[static_cast<size_t>(j)] && grad(j) < worst) {
                worst = grad(j);
                enter = j;
            }
        }
        if (enter < 0) return lambda;
        passive.push_back(enter);
        in_passive[static_cast<size_t>(enter)] = 1;

        for (int inner = 0; inner <= m + 1; ++inner) {
            const int np = static_cast<int>(passive.size());
            MatrixXd qpp(np, np);
            VectorXd rhs(np);
            for (int a = 0; a < np; ++a) {
                rhs(a) = -q_vec(passive[static_cast<size_t>(a)]);
                for (int b = 0; b < np; ++b)
                    qpp(a, b) = q_mat(passive[static_cast<size_t>(a)],
                                      passive[static_cast<size_t>(b)]);
            }
            VectorXd z = qpp.llt().solve(rhs);

            bool interior = true;
            for (int a = 0; a < np; ++a)
                if (z(a) <= 0.0) interior = false;
            if (interior) {
                lambda.setZero();
                for (int a = 0; a < np; ++a) lambda(passive[static_cast<size_t>(a)]) = z(a);
                break;
            }

            double alpha = 1.0;
            for (int a = 0; a < np; ++a) {
                if (z(a) <= 0.0) {
                    const double li = lambda(passive[static_cast<size_t>(a)]);
                    alpha = std::min(alpha, li / (li - z(a)));
                }
            }
            for (int a = 0; a < np; ++a) {
                const int j = passive[static_cast<size_t>(a)];
                lambda(j) += alpha * (z(a) - lambda(j));
            }
            std::vector<int> kept;
            for (int a = 0; a < np; ++a) {
                const int j = passive[static_cast<size_t>(a)];
                if (z(a) <= 0.0 && lambda(j) <= tol) {
                    lambda(j) = 0.0;
                    in_passive[static_cast<size_t>(j)] = 0;
                } else {
                    kept.push_back(j);
                }
            }
            passive = std::move(kept);
        }
    }
    throw std::runtime_error("cone projection: active set did not converge");
}

}  // namespace

ConeProjector::ConeProjector(ConeSpec spec) : spec_(std::move(spec)) {
    const int m = static_cast<int>(spec_.constrained().size());
    const int d = spec_.dim();
    constraint_ = MatrixXd::Zero(m, d);
    for (int r = 0; r < m; ++r) {
        const int x = spec_.constrained()[static_cast<size_t>(r)];
        constraint_(r, x - 1) = 1.0;
        constraint_(r, x) = -2.0;
        constraint_(r, x + 1) = 1.0;
    }
    gram_ = constraint_ * constraint_.transpose();
}

VectorXd ConeProjector::project(const VectorXd& g) const {
    if (g.size() != spec_.dim())
        throw std::invalid_argument("ConeProjector: vector length " + std::to_string(g.size()) +
                                    " does not match cone dim " + std::to_string(spec_.dim()));
    if (spec_.constrained().empty()) return g;
    // Dual of the projection: ghat = g + C^T lambda with
    // lambda = argmin_{l >= 0} 0.5 l^T (C C^T) l + (C g)^T l.
    const VectorXd lambda = nnls_nonneg_quadratic(gram_, constraint_ * g);
    return g + constraint_.transpose() * lambda;
}

VectorXd cone_project(const VectorXd& g, const ConeSpec& cone) {
    return ConeProjector(cone).project(g);
}

double cone_kkt_residual(const ConeSpec& cone, const VectorXd& g, const VectorXd& ghat) {
    const int d = cone.dim();
    const VectorXd r = g - ghat;
    double resid = 0.0;

    std::vector<char> constrained(static_cast<size_t>(d), 0);
    for (int x : cone.constrained()) {
        constrained[static_cast<size_t>(x)] = 1;
        const double second_diff = ghat(x - 1) - 2.0 * ghat(x) + ghat(x + 1);
        resid = std::max(resid, -second_diff);
    }

    resid = std::max(resid, std::abs(r.dot(ghat)) / std::max(1.0, g.squaredNorm()));

    // The cone is generated by +-constants, +-the linear ramp, hinge
    // directions (i-x)_+ at unconstrained positions (both signs) and at
    // constrained positions (positive sign only).
    double dot_ones = 0.0, dot_ramp = 0.0;
    for (int i = 0; i < d; ++i) {
        dot_ones += r(i);
        dot_ramp += i * r(i);
    }
    resid = std::max(resid, std::abs(dot_ones));
    resid = std::max(resid, std::abs(dot_ramp));
    for (int x = 1; x <= d - 2; ++x) {
        double dot_hinge = 0.0;
        for (int i = x + 1; i < d; ++i) dot_hinge += (i - x) * r(i);
        if (constrained[static_cast<size_t>(x)])
            resid = std::max(resid, dot_hinge);
        else
            resid = std::max(resid, std::abs(dot_hinge));
    }
    return resid;
}

namespace {

// Active set for min ||M w - t||^2 over the probability simplex. The equality
// constraint sum(w) = 1 stays in the working set; nonnegativity is handled
// Lawson-Hanson style.
VectorXd simplex_ls(const MatrixXd& basis, const VectorXd& target) {
    const int k = static_cast<int>(basis.cols());
    const MatrixXd gram = basis.transpose() * basis;
    const VectorXd proj = basis.transpose() * target;
    const double tol = kFeasTol * std::max(1.0, proj.lpNorm<Eigen::Infinity>());

    // Start at the closest vertex.
    int start = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
        const double dist = (basis.col(j) - target).squaredNorm();
        if (dist < best) {
            best = dist;
            start = j;
        }
    }
    VectorXd w = VectorXd::Zero(k);
    w(start) = 1.0;
    std::vector<int> passive{start};
    std::vector<char> in_passive(static_cast<size_t>(k), 0);
    in_passive[static_cast<size_t>(start)] = 1;

    // Solves the equality-constrained subproblem on the passive columns.
    auto solve_passive = [&](const std::vector<int>& idx) {
        const int np = static_cast<int>(idx.size());
        MatrixXd kkt = MatrixXd::Zero(np + 1, np + 1);
        VectorXd rhs(np + 1);
        for (int a = 0; a < np; ++a) {
            rhs(a) = proj(idx[static_cast<size_t>(a)]);
            kkt(a, np) = 1.0;
            kkt(np, a) = 1.0;
            for (int b = 0; b < np; ++b)
                kkt(a, b) = gram(idx[static_cast<size_t>(a)], idx[static_cast<size_t>(b)]);
        }
        rhs(np) = 1.0;
        const VectorXd sol = kkt.partialPivLu().solve(rhs);
        return VectorXd(sol.head(np));
    };

    const int max_outer = 4 * k + 16;
    for (int outer = 0; outer < max_outer; ++outer) {
        bool settled = false;
        for (int inner = 0; inner <= k + 1; ++inner) {
            const VectorXd z = solve_passive(passive);
            bool feasible = true;
            for (int a = 0; a < static_cast<int>(passive.size()); ++a)
                if (z(a) < 0.0) feasible = false;
            if (feasible) {
                w.setZero();
                for (int a = 0; a < static_cast<int>(passive.size()); ++a)
                    w(passive[static_cast<size_t>(a)]) = z(a);
                settled = true;
                break;
            }
            double alpha = 1.0;
            for (int a = 0; a < static_cast<int>(passive.size()); ++a) {
                if (z(a) < 0.0) {
                    const double wi = w(passive[static_cast<size_t>(a)]);
                    alpha = std::min(alpha, wi / (wi - z(a)));
                }
            }
            for (int a = 0; a < static_cast<int>(passive.size()); ++a) {
                const int j = passive[static_cast<size_t>(a)];
                w(j) += alpha * (z(a) - w(j));
            }
            std::vector<int> kept;
            for (int a = 0; a < static_cast<int>(passive.size()); ++a) {
                const int j = passive[static_cast<size_t>(a)];
                if (z(a) < 0.0 && w(j) <= tol) {
                    w(j) = 0.0;
                    in_passive[static_cast<size_t>(j)] = 0;
                } else {
                    kept.push_back(j);
                }
            }
            passive = std::move(kept);
        }
        if (!settled) break;

        // Entering test: gradient components below the equality multiplier
        // signal an improving vertex. On the passive set the gradient equals
        // the multiplier, so read it off there.
        const VectorXd grad = gram * w - proj;
        double nu = 0.0;
        for (int j : passive) nu += grad(j);
        nu /= static_cast<double>(passive.size());
        int enter = -1;
        double worst = -tol;
        for (int j = 0; j < k; ++j) {
            if (!in_passive[static_cast<size_t>(j)] && grad(j) - nu < worst) {
                worst = grad(j) - nu;
                enter = j;
            }
        }
        if (enter < 0) return w;
        passive.push_back(enter);
        in_passive[static_cast<size_t>(enter)] = 1;
    }
    throw std::runtime_error("convex_lse: active set did not converge");
}

}  // namespace

namespace {

// <target - fit, T_j> for a triangular pmf of any size j, summed over the
// vectors' common length.
double vertex_inner(const VectorXd& resid, int j) {
    const double denom = static_cast<double>(j) * (j + 1);
    double dot = 0.0;
    const int top = std::min<int>(j, static_cast<int>(resid.size()));
    for (int i = 0; i < top; ++i) dot += resid(i) * 2.0 * (j - i) / denom;
    return dot;
}

}  // namespace

ConvexLseResult convex_lse(const Pmf& p) {
    const int s = p.support_end();
    // The fit usually lives on {0..S+1}, but the true projection onto all
    // convex pmfs can extend further on awkward inputs; grow the vertex set
    // until the variational certificate covers every triangular pmf. Past
    // the vectors' length <resid, T_j> shrinks like 1/j^2 (the residual sums
    // to ~0), so checking a few sizes beyond the basis plus the j -> infinity
    // limit certifies the rest.
    int k_count = s + 2;
    const int k_limit = std::max(64, 16 * (s + 2));
    constexpr double kExtendTol = 1e-11;

    for (;;) {
        const int d = k_count;  // rows cover the largest vertex's support
        MatrixXd basis = MatrixXd::Zero(d, k_count);
        for (int j = 1; j <= k_count; ++j) {
            const double denom = static_cast<double>(j) * (j + 1);
            for (int i = 0; i < j; ++i) basis(i, j - 1) = 2.0 * (j - i) / denom;
        }
        VectorXd target = VectorXd::Zero(d);
        for (int i = 0; i <= s; ++i) target(i) = p(i);

        const VectorXd w = simplex_ls(basis, target);
        const VectorXd fit_vec = basis * w;
        const VectorXd resid_vec = target - fit_vec;
        const double nu = resid_vec.dot(fit_vec);

        double kkt = std::max(0.0, -nu);  // the j -> infinity limit of the conditions
        int extend_to = 0;
        for (int j = 1; j <= k_count + 8; ++j) {
            const double v = vertex_inner(resid_vec, j) - nu;
            const bool active = j <= k_count && w(j - 1) > 0.0;
            kkt = std::max(kkt, active ? std::abs(v) : v);
            if (j > k_count && v > kExtendTol) extend_to = std::max(extend_to, j);
        }
        if (-nu > kExtendTol) extend_to = std::max(extend_to, k_count + 8);

        if (extend_to > 0 && k_count < k_limit) {
            k_count = std::min(k_limit, std::max(extend_to + 2, k_count + 4));
            continue;
        }
        if (kkt > kKktTol)
            throw std::runtime_error("convex_lse: optimality certificate " + std::to_string(kkt) +
                                     " exceeds tolerance");

        std::vector<double> fit_mass(fit_vec.data(), fit_vec.data() + d);
        for (double& v : fit_mass) v = std::max(v, 0.0);
        std::vector<double> weights(w.data(), w.data() + k_count);
        for (double& v : weights) v = std::max(v, 0.0);
        return ConvexLseResult{Pmf(std::move(fit_mass)), TriangularMixture(std::move(weights)),
                               resid_vec.squaredNorm(), kkt, s};
    }
}

DispersionMatrix dispersion_matrix(const Pmf& p, int dim) {
    if (dim < 1) throw std::invalid_argument("dispersion_matrix: dim must be >= 1");
    MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        const double pi = p(i);
        for (int j = 0; j <= i; ++j) {
            const double v = (i == j ? pi : 0.0) - pi * p(j);
            m(i, j) = v;
            m(j, i) = v;
        }
    }
    return DispersionMatrix{std::move(m)};
}

GaussianFactor factor_psd(const DispersionMatrix& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m.matrix);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("factor_psd: eigendecomposition failed");
    VectorXd vals = eig.eigenvalues();
    if (vals.minCoeff() < -1e-8)
        throw NotPsdError("factor_psd: eigenvalue " + std::to_string(vals.minCoeff()) +
                          " below PSD tolerance");
    for (int i = 0; i < vals.size(); ++i) vals(i) = std::sqrt(std::max(vals(i), 0.0));
    MatrixXd factor = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    const double err = (factor * factor.transpose() - m.matrix).lpNorm<Eigen::Infinity>();
    if (err > 1e-9)
        throw std::runtime_error("factor_psd: reconstruction error " + std::to_string(err));
    return GaussianFactor{std::move(factor)};
}

VectorXd sample_gaussian(const GaussianFactor& f, RngStream& rng) {
    VectorXd z(f.dim());
    for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return f.factor * z;
}

int rank_diagnostic(const Pmf& p) {
    const int s = p.support_end();
    if (s < 1) throw std::invalid_argument("rank_diagnostic: support end must be >= 1");
    // B maps (g(0),...,g(S)) to the second differences at 1..S with g(S+1)
    // read as 0.
    MatrixXd b = MatrixXd::Zero(s, s + 1);
    for (int j = 1; j <= s; ++j) {
        b(j - 1, j - 1) = 1.0;
        b(j - 1, j) = -2.0;
        if (j + 1 <= s) b(j - 1, j + 1) = 1.0;
    }
    const MatrixXd sigma = dispersion_matrix(p, s + 1).matrix;
    const MatrixXd v = b * sigma * b.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(v);
    const VectorXd vals = eig.eigenvalues();
    const double cutoff = kPsdClamp * std::max(vals.maxCoeff(), 0.0);
    int rank = 0;
    for (int i = 0; i < vals.size(); ++i)
        if (vals(i) > cutoff && vals(i) > 0.0) ++rank;
    return rank;
}

}  // namespace convextest
