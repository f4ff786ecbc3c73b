#include "convextest/pmf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "convextest/errors.hpp"

namespace convextest {

Pmf::Pmf(std::vector<double> mass) : mass_(std::move(mass)) {
    if (mass_.empty()) throw std::invalid_argument("Pmf: empty mass vector");
    double sum = 0.0;
    for (double m : mass_) {
        if (!(m >= 0.0)) throw std::invalid_argument("Pmf: negative mass entry");
        sum += m;
    }
    if (std::abs(sum - 1.0) > kMassTol)
        throw std::invalid_argument("Pmf: mass sums to " + std::to_string(sum) + ", not 1");
    while (mass_.size() > 1 && mass_.back() == 0.0) mass_.pop_back();
}

Sample::Sample(std::vector<int> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("Sample: no observations");
    max_ = 0;
    for (int v : values_) {
        if (v < 0) throw std::invalid_argument("Sample: negative observation");
        max_ = std::max(max_, v);
    }
}

TriangularMixture::TriangularMixture(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw std::invalid_argument("TriangularMixture: empty weights");
    double sum = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || w > 1.0 + kMassTol)
            throw std::invalid_argument("TriangularMixture: weight outside [0,1]");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kMassTol)
        throw std::invalid_argument("TriangularMixture: weights sum to " + std::to_string(sum) +
                                    ", not 1");
}

Pmf triangular(int k) {
    if (k < 1) throw std::invalid_argument("triangular: k must be >= 1");
    std::vector<double> mass(static_cast<size_t>(k));
    const double denom = static_cast<double>(k) * (k + 1);
    for (int i = 0; i < k; ++i) mass[static_cast<size_t>(i)] = 2.0 * (k - i) / denom;
    return Pmf(std::move(mass));
}

double delta(const Pmf& p, int k) {
    if (k < 1) throw std::invalid_argument("delta: k must be >= 1");
    return p(k + 1) - 2.0 * p(k) + p(k - 1);
}

double delta(std::span<const double> values, int k) {
    if (k < 1) throw std::invalid_argument("delta: k must be >= 1");
    auto at = [&](int i) {
        return (i < 0 || i >= static_cast<int>(values.size())) ? 0.0
                                                               : values[static_cast<size_t>(i)];
    };
    return at(k + 1) - 2.0 * at(k) + at(k - 1);
}

std::vector<int> knots(const Pmf& p) {
    std::vector<int> out;
    for (int k = 1; k <= p.support_end(); ++k)
        if (delta(p, k) > kKnotTol) out.push_back(k);
    return out;
}

Pmf mixture_to_pmf(const TriangularMixture& m) {
    const int max_k = m.size();
    std::vector<double> mass(static_cast<size_t>(max_k), 0.0);
    for (int k = 1; k <= max_k; ++k) {
        const double w = m.weight(k);
        if (w == 0.0) continue;
        const double denom = static_cast<double>(k) * (k + 1);
        for (int i = 0; i < k; ++i) mass[static_cast<size_t>(i)] += w * 2.0 * (k - i) / denom;
    }
    return Pmf(std::move(mass));
}

TriangularMixture pmf_to_mixture(const Pmf& p) {
    const int s = p.support_end();
    for (int k = 1; k <= s + 1; ++k) {
        if (delta(p, k) < -kKnotTol)
            throw ShapeViolationError("pmf_to_mixture: pmf is not convex at " + std::to_string(k));
    }
    std::vector<double> weights(static_cast<size_t>(s + 1));
    for (int k = 1; k <= s + 1; ++k)
        weights[static_cast<size_t>(k - 1)] =
            std::max(0.0, 0.5 * k * (k + 1) * delta(p, k));
    // The telescoping sum equals sum_j p(j) = 1 exactly; renormalize away the
    // floating-point residue so the mixture invariant holds.
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= sum;
    return TriangularMixture(std::move(weights));
}

Pmf empirical_pmf(const Sample& s) {
    std::vector<double> mass(static_cast<size_t>(s.max_value()) + 1, 0.0);
    const double inv_n = 1.0 / s.n();
    for (int v : s.values()) mass[static_cast<size_t>(v)] += inv_n;
    return Pmf(std::move(mass));
}

Pmf truncated_poisson(double rate, int upper) {
    if (!(rate > 0.0)) throw std::invalid_argument("truncated_poisson: rate must be > 0");
    if (upper < 0) throw std::invalid_argument("truncated_poisson: upper must be >= 0");
    std::vector<double> mass(static_cast<size_t>(upper) + 1);
    double term = std::exp(-rate);
    double sum = 0.0;
    for (int j = 0; j <= upper; ++j) {
        if (j > 0) term *= rate / j;
        mass[static_cast<size_t>(j)] = term;
        sum += term;
    }
    for (double& m : mass) m /= sum;
    return Pmf(std::move(mass));
}

Pmf perturbed_triangular() {
    std::vector<double> mass = triangular(6).mass();
    mass[0] += 0.008;
    mass[1] -= 0.008;
    return Pmf(std::move(mass));
}

Sample sample_from(const Pmf& p, int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_from: n must be >= 1");
    std::vector<double> cum(p.mass().size());
    std::partial_sum(p.mass().begin(), p.mass().end(), cum.begin());
    const int s = p.support_end();
    std::vector<int> values(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        int j = 0;
        while (j < s && u >= cum[static_cast<size_t>(j)]) ++j;
        values[static_cast<size_t>(i)] = j;
    }
    return Sample(std::move(values));
}

Pmf benchmark_pmf(std::string_view name) {
    if (name == "p0_1") return triangular(6);
    if (name == "p0_2") {
        // Mixture with weights 1/6 on sizes 2 and 3, 1/3 on sizes 5 and 6;
        // convex with knots at 2, 3 and 5.
        return mixture_to_pmf(
            TriangularMixture({0.0, 1.0 / 6, 1.0 / 6, 0.0, 1.0 / 3, 1.0 / 3}));
    }
    if (name == "p1_1") return truncated_poisson(1.5, 5);
    if (name == "p1_2") return perturbed_triangular();
    throw std::invalid_argument("benchmark_pmf: unknown name '" + std::string(name) + "'");
}

}  // namespace convextest
