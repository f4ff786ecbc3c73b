#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace convextest::oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd cone_project_enumerate(const VectorXd& g, const ConeSpec& cone) {
    const auto& positions = cone.constrained();
    const int m = static_cast<int>(positions.size());
    if (m > 20) throw std::invalid_argument("cone_project_enumerate: too many constraints");
    const int d = cone.dim();

    MatrixXd c_all = MatrixXd::Zero(m, d);
    for (int r = 0; r < m; ++r) {
        const int x = positions[static_cast<size_t>(r)];
        c_all(r, x - 1) = 1.0;
        c_all(r, x) = -2.0;
        c_all(r, x + 1) = 1.0;
    }

    VectorXd best = g;
    double best_dist = std::numeric_limits<double>::infinity();
    const bool g_feasible = m == 0 || (c_all * g).minCoeff() >= 0.0;
    if (g_feasible) {
        best_dist = 0.0;
    }
    for (unsigned mask = 1; mask < (1u << m); ++mask) {
        std::vector<int> active;
        for (int r = 0; r < m; ++r)
            if (mask & (1u << r)) active.push_back(r);
        const int na = static_cast<int>(active.size());
        MatrixXd c(na, d);
        for (int a = 0; a < na; ++a) c.row(a) = c_all.row(active[static_cast<size_t>(a)]);
        // Equality-constrained projection: candidate = g - C^T (C C^T)^-1 C g.
        const MatrixXd gram = c * c.transpose();
        const VectorXd mult = gram.ldlt().solve(c * g);
        const VectorXd candidate = g - c.transpose() * mult;
        if ((c_all * candidate).minCoeff() < -1e-9) continue;
        const double dist = (candidate - g).squaredNorm();
        if (dist < best_dist) {
            best_dist = dist;
            best = candidate;
        }
    }
    return best;
}

VectorXd simplex_ls_enumerate(const MatrixXd& basis, const VectorXd& target) {
    const int k = static_cast<int>(basis.cols());
    if (k > 20) throw std::invalid_argument("simplex_ls_enumerate: too many columns");
    const MatrixXd gram = basis.transpose() * basis;
    const VectorXd proj = basis.transpose() * target;

    VectorXd best = VectorXd::Zero(k);
    double best_obj = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
        std::vector<int> support;
        for (int j = 0; j < k; ++j)
            if (mask & (1u << j)) support.push_back(j);
        const int ns = static_cast<int>(support.size());
        // Minimize on the affine hull of the face: bordered system with the
        // sum-to-one constraint.
        MatrixXd kkt = MatrixXd::Zero(ns + 1, ns + 1);
        VectorXd rhs(ns + 1);
        for (int a = 0; a < ns; ++a) {
            rhs(a) = proj(support[static_cast<size_t>(a)]);
            kkt(a, ns) = 1.0;
            kkt(ns, a) = 1.0;
            for (int b = 0; b < ns; ++b)
                kkt(a, b) = gram(support[static_cast<size_t>(a)], support[static_cast<size_t>(b)]);
        }
        rhs(ns) = 1.0;
        const Eigen::FullPivLU<MatrixXd> lu(kkt);
        if (!lu.isInvertible()) continue;
        const VectorXd sol = lu.solve(rhs);
        bool feasible = true;
        for (int a = 0; a < ns; ++a)
            if (sol(a) < -1e-12) feasible = false;
        if (!feasible) continue;
        VectorXd w = VectorXd::Zero(k);
        for (int a = 0; a < ns; ++a) w(support[static_cast<size_t>(a)]) = std::max(0.0, sol(a));
        const double obj = (basis * w - target).squaredNorm();
        if (obj < best_obj - 1e-15) {
            best_obj = obj;
            best = w;
        }
    }
    return best;
}

namespace {

MatrixXd triangular_basis(int k_count) {
    MatrixXd basis = MatrixXd::Zero(k_count, k_count);
    for (int j = 1; j <= k_count; ++j) {
        const double denom = static_cast<double>(j) * (j + 1);
        for (int i = 0; i < j; ++i) basis(i, j - 1) = 2.0 * (j - i) / denom;
    }
    return basis;
}

VectorXd padded_target(const Pmf& p, int len) {
    VectorXd target = VectorXd::Zero(len);
    for (int i = 0; i <= p.support_end(); ++i) target(i) = p(i);
    return target;
}

// Euclidean projection onto the probability simplex (sort-based).
VectorXd project_simplex(const VectorXd& v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumulative = 0.0;
    double tau = 0.0;
    for (int j = 0; j < static_cast<int>(u.size()); ++j) {
        cumulative += u[static_cast<size_t>(j)];
        const double candidate = (cumulative - 1.0) / (j + 1);
        if (u[static_cast<size_t>(j)] - candidate > 0.0) tau = candidate;
    }
    VectorXd out(v.size());
    for (int i = 0; i < v.size(); ++i) out(i) = std::max(v(i) - tau, 0.0);
    return out;
}

double oracle_vertex_inner(const VectorXd& resid, int j) {
    const double denom = static_cast<double>(j) * (j + 1);
    double dot = 0.0;
    const int top = std::min<int>(j, static_cast<int>(resid.size()));
    for (int i = 0; i < top; ++i) dot += resid(i) * 2.0 * (j - i) / denom;
    return dot;
}

}  // namespace

std::vector<double> convex_lse_enumerate(const Pmf& p, int k_count) {
    const MatrixXd basis = triangular_basis(k_count);
    const VectorXd target = padded_target(p, k_count);
    const VectorXd w = simplex_ls_enumerate(basis, target);
    const VectorXd fit = basis * w;
    return std::vector<double>(fit.data(), fit.data() + k_count);
}

std::vector<double> convex_lse_qp(const Pmf& p) {
    int k_count = p.support_end() + 2;
    const int k_limit = 128;
    for (;;) {
        const MatrixXd basis = triangular_basis(k_count);
        const VectorXd target = padded_target(p, k_count);
        const MatrixXd gram = basis.transpose() * basis;
        const VectorXd lin = basis.transpose() * target;
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
        const double lip = eig.eigenvalues().maxCoeff();

        VectorXd w = VectorXd::Constant(k_count, 1.0 / k_count);
        VectorXd y = w;
        double theta = 1.0;
        VectorXd prev = w;
        for (int iter = 0; iter < 200000; ++iter) {
            const VectorXd grad = gram * y - lin;
            const VectorXd next = project_simplex(y - grad / lip);
            const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            VectorXd momentum = next + ((theta - 1.0) / theta_next) * (next - w);
            // Adaptive restart keeps the linear rate on this strongly convex
            // problem.
            if ((y - next).dot(next - w) > 0.0) {
                momentum = next;
                theta = 1.0;
            } else {
                theta = theta_next;
            }
            prev = w;
            w = next;
            y = momentum;
            if (iter % 64 == 63 && (w - prev).lpNorm<Eigen::Infinity>() < 1e-15) break;
        }

        const VectorXd fit = basis * w;
        const VectorXd resid = target - fit;
        const double nu = resid.dot(fit);
        bool extend = -nu > 1e-10;
        for (int j = k_count + 1; j <= k_count + 8; ++j)
            if (oracle_vertex_inner(resid, j) - nu > 1e-10) extend = true;
        if (extend && k_count < k_limit) {
            k_count = std::min(k_limit, k_count + 8);
            continue;
        }
        return std::vector<double>(fit.data(), fit.data() + k_count);
    }
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double ks = 0.0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        ks = std::max(ks, std::abs(i / na - j / nb));
    }
    return ks;
}

double ks_critical_value(double alpha, size_t m, size_t n) {
    // c(alpha) = sqrt(-ln(alpha/2)/2).
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(static_cast<double>(m + n) / (static_cast<double>(m) * n));
}

}  // namespace convextest::oracles
