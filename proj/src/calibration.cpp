#include "convextest/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "convextest/errors.hpp"

namespace convextest {

VnRule VnRule::constant(double value) {
    if (!(value >= 0.0))
        throw std::invalid_argument("VnRule: constant threshold must be nonnegative");
    VnRule r(Kind::constant);
    r.constant_ = value;
    return r;
}

VnRule VnRule::callable(std::function<double(int)> fn) {
    if (!fn) throw std::invalid_argument("VnRule: empty callable");
    VnRule r(Kind::callable);
    r.fn_ = std::move(fn);
    return r;
}

std::string VnRule::label() const {
    switch (kind_) {
        case Kind::zero: return "zero";
        case Kind::sqrt_loglog: return "loglog";
        case Kind::quarter: return "quarter";
        case Kind::callable: return "custom";
        case Kind::constant: {
            char buf[32];
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), constant_);
            return std::string(buf, end);
        }
    }
    return "?";
}

VnRule VnRule::parse(const std::string& label) {
    if (label == "zero") return zero();
    if (label == "loglog") return sqrt_loglog();
    if (label == "quarter") return quarter();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
    if (ec != std::errc{} || ptr != label.data() + label.size())
        throw std::invalid_argument("VnRule: cannot parse threshold rule '" + label + "'");
    return constant(value);
}

double vn_value(const VnRule& rule, int n) {
    if (n < 1) throw std::invalid_argument("vn_value: n must be >= 1");
    switch (rule.kind()) {
        case VnRule::Kind::zero:
            return 0.0;
        case VnRule::Kind::sqrt_loglog: {
            if (n < 3)
                throw std::invalid_argument("vn_value: loglog rule needs n >= 3");
            return std::sqrt(std::log(std::log(static_cast<double>(n)))) /
                   std::sqrt(static_cast<double>(n));
        }
        case VnRule::Kind::quarter:
            return std::pow(static_cast<double>(n), -0.25);
        case VnRule::Kind::constant:
            return rule.constant_;
        case VnRule::Kind::callable: {
            const double v = rule.fn_(n);
            if (!(v >= 0.0))
                throw std::invalid_argument("vn_value: custom rule returned a negative value");
            return v;
        }
    }
    throw std::logic_error("vn_value: unreachable");
}

std::string method_name(Method m) { return m == Method::knot ? "knot" : "lfh"; }

Method parse_method(const std::string& name) {
    if (name == "knot") return Method::knot;
    if (name == "lfh") return Method::lfh;
    throw std::invalid_argument("unknown method '" + name + "' (expected knot or lfh)");
}

std::pair<double, ConvexLseResult> test_statistic(const Sample& s) {
    ConvexLseResult lse = convex_lse(empirical_pmf(s));
    const double stat = static_cast<double>(s.n()) * lse.sq_distance;
    return {stat, std::move(lse)};
}

ConeSpec knot_constraint_set(const Pmf& empirical, double vn_threshold) {
    if (!(vn_threshold >= 0.0))
        throw std::invalid_argument("knot_constraint_set: threshold must be nonnegative");
    const int s_n = empirical.support_end();
    std::vector<int> constrained;
    for (int x = 1; x <= s_n; ++x)
        if (delta(empirical, x) <= vn_threshold) constrained.push_back(x);
    return ConeSpec(s_n + 2, std::move(constrained));
}

TestReport calibrate(const Sample& s, const CalibrationConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw std::invalid_argument("calibrate: alpha must lie in (0,1)");
    if (cfg.draws < 1) throw std::invalid_argument("calibrate: need at least one draw");
    if (s.max_value() == 0)
        throw DegenerateSupportError(
            "calibrate: all observations are 0; a point mass is trivially convex");

    TestReport report;
    report.n = s.n();
    report.s_n = s.max_value();
    report.method = cfg.method;
    report.alpha = cfg.alpha;
    report.draws = cfg.draws;
    report.seed = cfg.seed;

    const Pmf p_n = empirical_pmf(s);
    const ConvexLseResult lse = convex_lse(p_n);
    report.statistic = static_cast<double>(s.n()) * lse.sq_distance;
    report.max_kkt_residual = lse.kkt_residual;

    const int dim = report.s_n + 2;
    ConeSpec cone = ConeSpec::full(dim);
    if (cfg.method == Method::knot) {
        const double threshold = vn_value(cfg.vn, s.n());
        report.vn_threshold = threshold;
        cone = knot_constraint_set(p_n, threshold);
    }
    report.constrained_positions = cone.constrained();

    const GaussianFactor factor = factor_psd(dispersion_matrix(p_n, dim));
    const ConeProjector projector(cone);

    report.mc_statistics.resize(static_cast<size_t>(cfg.draws));
    const RngStream base(cfg.seed);
    for (int b = 0; b < cfg.draws; ++b) {
        RngStream draw_rng = base.child(static_cast<std::uint64_t>(b));
        const Eigen::VectorXd g = sample_gaussian(factor, draw_rng);
        const Eigen::VectorXd ghat = projector.project(g);
        const double kkt = cone_kkt_residual(cone, g, ghat);
        if (kkt > kKktTol)
            throw std::runtime_error("calibrate: cone projection certificate " +
                                     std::to_string(kkt) + " exceeds tolerance");
        report.max_kkt_residual = std::max(report.max_kkt_residual, kkt);
        report.mc_statistics[static_cast<size_t>(b)] = (g - ghat).squaredNorm();
    }
    std::sort(report.mc_statistics.begin(), report.mc_statistics.end());

    // Order-statistic index ceil((1-alpha) B), guarded against the rounding
    // of 1-alpha landing just above an integer.
    const int idx =
        static_cast<int>(std::ceil((1.0 - cfg.alpha) * cfg.draws - 1e-9));
    const int clamped = std::clamp(idx, 1, cfg.draws);
    report.critical_value = report.mc_statistics[static_cast<size_t>(clamped - 1)];

    int count_ge = 0;
    for (double t : report.mc_statistics)
        if (t >= report.statistic) ++count_ge;
    report.p_value = (1.0 + count_ge) / (cfg.draws + 1.0);
    report.reject = report.statistic > report.critical_value;
    return report;
}

}  // namespace convextest
