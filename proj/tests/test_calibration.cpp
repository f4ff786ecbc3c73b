#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "convextest/calibration.hpp"
#include "convextest/errors.hpp"
#include "oracles.hpp"

using namespace convextest;

namespace {

Sample random_sample(const Pmf& p, int n, std::uint64_t seed) {
    RngStream rng(seed);
    return sample_from(p, n, rng);
}

}  // namespace

TEST_CASE("vn_value") {
    CHECK(vn_value(VnRule::zero(), 7) == 0.0);
    CHECK(vn_value(VnRule::zero(), 1000000) == 0.0);

    CHECK(vn_value(VnRule::quarter(), 10000) == doctest::Approx(0.1));

    const double expected = std::sqrt(std::log(std::log(5000.0))) / std::sqrt(5000.0);
    CHECK(vn_value(VnRule::sqrt_loglog(), 5000) == doctest::Approx(expected));
    CHECK(expected == doctest::Approx(0.0206983).epsilon(1e-4));
    CHECK_THROWS_AS(vn_value(VnRule::sqrt_loglog(), 2), std::invalid_argument);
    CHECK(vn_value(VnRule::sqrt_loglog(), 3) > 0.0);

    CHECK(vn_value(VnRule::constant(0.25), 99) == 0.25);
    CHECK_THROWS_AS(VnRule::constant(-1.0), std::invalid_argument);

    const VnRule halved = VnRule::callable([](int n) { return 0.5 / n; });
    CHECK(vn_value(halved, 10) == doctest::Approx(0.05));
    const VnRule broken = VnRule::callable([](int) { return -1.0; });
    CHECK_THROWS_AS(vn_value(broken, 10), std::invalid_argument);
}

TEST_CASE("vn rule labels round-trip") {
    for (const VnRule& rule :
         {VnRule::zero(), VnRule::sqrt_loglog(), VnRule::quarter(), VnRule::constant(0.125)}) {
        const VnRule back = VnRule::parse(rule.label());
        CHECK(back.kind() == rule.kind());
        CHECK(vn_value(back, 1000) == vn_value(rule, 1000));
    }
    CHECK_THROWS_AS(VnRule::parse("bogus"), std::invalid_argument);
}

TEST_CASE("test_statistic") {
    // An empirical pmf that is already convex gives a zero statistic.
    std::vector<int> values;
    for (int i = 0; i < 70; ++i) values.push_back(0);
    for (int i = 0; i < 20; ++i) values.push_back(1);
    for (int i = 0; i < 7; ++i) values.push_back(2);
    for (int i = 0; i < 3; ++i) values.push_back(3);
    const auto [stat_convex, lse_convex] = test_statistic(Sample(values));
    CHECK(stat_convex <= 1e-12);

    const Sample s({0, 0, 1, 3});
    const auto [stat, lse] = test_statistic(s);
    CHECK(stat == doctest::Approx(4.0 * lse.sq_distance));
    CHECK(stat > 0.0);

    // Depends only on counts, not order.
    std::vector<int> shuffled{3, 0, 1, 0};
    const auto [stat2, lse2] = test_statistic(Sample(shuffled));
    CHECK(stat2 == doctest::Approx(stat).epsilon(1e-14));
}

TEST_CASE("knot_constraint_set") {
    const Pmf p_n = empirical_pmf(random_sample(benchmark_pmf("p0_2"), 2000, 99));
    const int s_n = p_n.support_end();

    // Huge threshold: every interior position is constrained.
    const ConeSpec all = knot_constraint_set(p_n, 1e6);
    CHECK(all.constrained() == ConeSpec::full(s_n + 2).constrained());

    // Zero threshold with strictly positive second differences everywhere:
    // nothing is constrained.
    std::vector<int> values;
    for (int i = 0; i < 70; ++i) values.push_back(0);
    for (int i = 0; i < 20; ++i) values.push_back(1);
    for (int i = 0; i < 7; ++i) values.push_back(2);
    for (int i = 0; i < 3; ++i) values.push_back(3);
    const Pmf convex_emp = empirical_pmf(Sample(values));
    for (int x = 1; x <= convex_emp.support_end(); ++x) CHECK(delta(convex_emp, x) > 0.0);
    const ConeSpec none = knot_constraint_set(convex_emp, 0.0);
    CHECK(none.constrained().empty());

    CHECK_THROWS_AS(knot_constraint_set(p_n, -0.5), std::invalid_argument);
}

TEST_CASE("knot method at large n exempts the true knots") {
    // p0_2 has knots at 2, 3, 5 with second differences 1/18, 1/36 and 1/45.
    // A threshold below 1/45 that dominates the sampling noise leaves exactly
    // {1, 4} constrained.
    const Pmf p_n = empirical_pmf(random_sample(benchmark_pmf("p0_2"), 50000, 7));
    const ConeSpec cone = knot_constraint_set(p_n, vn_value(VnRule::sqrt_loglog(), 50000));
    CHECK(cone.constrained() == std::vector<int>{1, 4});

    // The quarter rule separates once n^(-1/4) drops below the smallest knot
    // delta: emulate the empirical pmf at such an n.
    RngStream rng(4242);
    std::vector<double> near = benchmark_pmf("p0_2").mass();
    double sum = 0.0;
    for (double& m : near) {
        m = std::max(m + 1e-4 * (rng.uniform() - 0.5), 0.0);
        sum += m;
    }
    for (double& m : near) m /= sum;
    const ConeSpec quarter_cone =
        knot_constraint_set(Pmf(near), vn_value(VnRule::quarter(), 50000000));
    CHECK(quarter_cone.constrained() == std::vector<int>{1, 4});
}

TEST_CASE("calibrate rejects invalid inputs") {
    const Sample s({0, 1, 2, 0, 1});
    CalibrationConfig cfg;
    cfg.seed = 5;

    CalibrationConfig bad_alpha = cfg;
    bad_alpha.alpha = 1.5;
    CHECK_THROWS_AS(calibrate(s, bad_alpha), std::invalid_argument);

    CalibrationConfig bad_b = cfg;
    bad_b.draws = 0;
    CHECK_THROWS_AS(calibrate(s, bad_b), std::invalid_argument);

    CHECK_THROWS_AS(calibrate(Sample(std::vector<int>(10, 0)), cfg), DegenerateSupportError);
}

TEST_CASE("calibrate with a single draw") {
    const Sample s = random_sample(benchmark_pmf("p1_1"), 300, 21);
    CalibrationConfig cfg;
    cfg.draws = 1;
    cfg.method = Method::lfh;
    cfg.seed = 8;
    const TestReport r = calibrate(s, cfg);
    REQUIRE(r.mc_statistics.size() == 1);
    CHECK(r.critical_value == r.mc_statistics[0]);
    CHECK(r.reject == (r.statistic > r.critical_value));
}

TEST_CASE("calibrate determinism and p-value bounds") {
    const Sample s = random_sample(benchmark_pmf("p1_2"), 800, 4);
    CalibrationConfig cfg;
    cfg.method = Method::knot;
    cfg.vn = VnRule::quarter();
    cfg.draws = 400;
    cfg.seed = 31;

    const TestReport a = calibrate(s, cfg);
    const TestReport b = calibrate(s, cfg);
    CHECK(a.statistic == b.statistic);
    CHECK(a.critical_value == b.critical_value);
    CHECK(a.p_value == b.p_value);
    CHECK(a.mc_statistics == b.mc_statistics);
    CHECK(a.constrained_positions == b.constrained_positions);

    CHECK(a.p_value >= 1.0 / (cfg.draws + 1.0));
    CHECK(a.p_value <= 1.0);
    if (a.reject) CHECK(a.p_value <= cfg.alpha + 1.0 / (cfg.draws + 1.0));

    // p-value consistent with the rank of the statistic among the draws.
    int count_ge = 0;
    for (double t : a.mc_statistics)
        if (t >= a.statistic) ++count_ge;
    CHECK(a.p_value == doctest::Approx((1.0 + count_ge) / (cfg.draws + 1.0)));
}

TEST_CASE("lfh dominates the knot method; a huge threshold reduces to lfh") {
    RngStream seeds(505);
    for (int rep = 0; rep < 25; ++rep) {
        const Pmf p = (rep % 2 == 0) ? benchmark_pmf("p0_2") : benchmark_pmf("p1_2");
        const Sample s = random_sample(p, 400, seeds.next_u64());

        CalibrationConfig lfh_cfg;
        lfh_cfg.method = Method::lfh;
        lfh_cfg.draws = 250;
        lfh_cfg.seed = 1000 + static_cast<std::uint64_t>(rep);
        const TestReport lfh_report = calibrate(s, lfh_cfg);

        for (const VnRule& vn : {VnRule::zero(), VnRule::quarter()}) {
            CalibrationConfig knot_cfg = lfh_cfg;
            knot_cfg.method = Method::knot;
            knot_cfg.vn = vn;
            const TestReport knot_report = calibrate(s, knot_cfg);
            CHECK(lfh_report.critical_value >= knot_report.critical_value - 1e-12);
            // Same draws, smaller cone: every calibration value dominates.
            for (size_t b = 0; b < knot_report.mc_statistics.size(); ++b)
                CHECK(knot_report.mc_statistics[b] <= lfh_report.mc_statistics[b] + 1e-10);
        }

        CalibrationConfig huge_cfg = lfh_cfg;
        huge_cfg.method = Method::knot;
        huge_cfg.vn = VnRule::constant(1e6);
        const TestReport huge_report = calibrate(s, huge_cfg);
        CHECK(huge_report.mc_statistics == lfh_report.mc_statistics);
        CHECK(huge_report.critical_value == lfh_report.critical_value);
        CHECK(huge_report.reject == lfh_report.reject);
        CHECK(huge_report.constrained_positions == lfh_report.constrained_positions);
    }
}

TEST_CASE("calibration law depends on the dispersion only through L L^T") {
    // Project draws from two different factors of the same dispersion matrix
    // and compare the distributions of the squared distances.
    const Pmf p = empirical_pmf(random_sample(benchmark_pmf("p0_1"), 2000, 12));
    const int dim = p.support_end() + 2;
    const DispersionMatrix gamma = dispersion_matrix(p, dim);

    const GaussianFactor symmetric = factor_psd(gamma);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gamma.matrix);
    Eigen::VectorXd vals = eig.eigenvalues();
    for (int i = 0; i < vals.size(); ++i) vals(i) = std::sqrt(std::max(vals(i), 0.0));
    const GaussianFactor oneside{eig.eigenvectors() * vals.asDiagonal()};
    REQUIRE((oneside.factor * oneside.factor.transpose() - gamma.matrix)
                .lpNorm<Eigen::Infinity>() <= 1e-12);

    const ConeSpec cone = ConeSpec::full(dim);
    const ConeProjector projector(cone);
    const int draws = 100000;
    std::vector<double> a(draws), b(draws);
    RngStream rng_a(900001), rng_b(900002);
    for (int i = 0; i < draws; ++i) {
        const Eigen::VectorXd ga = sample_gaussian(symmetric, rng_a);
        const Eigen::VectorXd gb = sample_gaussian(oneside, rng_b);
        a[static_cast<size_t>(i)] = (ga - projector.project(ga)).squaredNorm();
        b[static_cast<size_t>(i)] = (gb - projector.project(gb)).squaredNorm();
    }
    const double ks = oracles::ks_statistic(a, b);
    CHECK(ks < oracles::ks_critical_value(0.01, a.size(), b.size()));
}
