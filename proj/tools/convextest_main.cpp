// Command-line front end: test a dataset for convexity of its underlying
// pmf, or estimate rejection probabilities over a simulation plan.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "convextest/calibration.hpp"
#include "convextest/errors.hpp"
#include "convextest/sim.hpp"

namespace {

using convextest::Method;
using convextest::Sample;
using convextest::TestReport;
using nlohmann::json;

constexpr int kExitAccept = 0;  // H0 not rejected
constexpr int kExitReject = 1;
constexpr int kExitError = 2;

std::string read_stream(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string read_input(const std::string& path) {
    if (path == "-") return read_stream(std::cin);
    std::ifstream file(path);
    if (!file) throw std::invalid_argument("cannot open input file '" + path + "'");
    return read_stream(file);
}

long parse_long(const std::string& text, const char* what) {
    size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(text, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string("malformed ") + what + " '" + text + "'");
    }
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r')) ++pos;
    if (pos != text.size())
        throw std::invalid_argument(std::string("malformed ") + what + " '" + text + "'");
    return v;
}

Sample parse_raw(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<int> values;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
        if (trimmed.empty()) continue;
        const long v = parse_long(trimmed, "observation");
        if (v < 0)
            throw std::invalid_argument("line " + std::to_string(lineno) +
                                        ": negative observation");
        values.push_back(static_cast<int>(v));
    }
    if (values.empty()) throw std::invalid_argument("empty dataset");
    return Sample(std::move(values));
}

Sample parse_histogram(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<int> values;
    std::vector<char> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
        if (trimmed.empty()) continue;
        const size_t comma = trimmed.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) +
                                        ": expected 'value,count'");
        const long value = parse_long(trimmed.substr(0, comma), "value");
        const long count = parse_long(trimmed.substr(comma + 1), "count");
        if (value < 0)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": negative value");
        if (count < 1)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": count must be >= 1");
        if (value >= static_cast<long>(seen.size())) seen.resize(static_cast<size_t>(value) + 1, 0);
        if (seen[static_cast<size_t>(value)])
            throw std::invalid_argument("line " + std::to_string(lineno) + ": duplicate value " +
                                        std::to_string(value));
        seen[static_cast<size_t>(value)] = 1;
        for (long i = 0; i < count; ++i) values.push_back(static_cast<int>(value));
    }
    if (values.empty()) throw std::invalid_argument("empty dataset");
    return Sample(std::move(values));
}

json report_to_json(const TestReport& r) {
    json doc{{"statistic", r.statistic},
             {"critical_value", r.critical_value},
             {"p_value", r.p_value},
             {"reject", r.reject},
             {"n", r.n},
             {"s_n", r.s_n},
             {"method", convextest::method_name(r.method)},
             {"alpha", r.alpha},
             {"B", r.draws},
             {"seed", r.seed},
             {"constrained_positions", r.constrained_positions},
             {"max_kkt_residual", r.max_kkt_residual},
             {"mc_statistics", r.mc_statistics}};
    if (r.vn_threshold) doc["vn_threshold"] = *r.vn_threshold;
    return doc;
}

void print_text_report(const TestReport& r, std::ostream& out) {
    out << "convexity test (" << convextest::method_name(r.method) << " calibration)\n";
    out << "  n = " << r.n << ", S_n = " << r.s_n << ", B = " << r.draws
        << ", alpha = " << r.alpha << "\n";
    if (r.vn_threshold) out << "  v_n threshold = " << *r.vn_threshold << "\n";
    out << "  constrained positions = {";
    for (size_t i = 0; i < r.constrained_positions.size(); ++i)
        out << (i ? "," : "") << r.constrained_positions[i];
    out << "}\n";
    out << "  statistic      = " << r.statistic << "\n";
    out << "  critical value = " << r.critical_value << "\n";
    out << "  p-value        = " << r.p_value << "\n";
    out << "  decision       = " << (r.reject ? "reject convexity" : "do not reject convexity")
        << "\n";
}

std::uint64_t entropy_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

int run_test_command(const std::string& input, const std::string& format,
                     const std::string& method, double alpha, int draws, const std::string& vn,
                     std::optional<std::uint64_t> seed, const std::string& output) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::cerr << "error: --alpha must lie strictly between 0 and 1\n";
        return kExitError;
    }
    if (draws < 1) {
        std::cerr << "error: --B must be >= 1\n";
        return kExitError;
    }
    try {
        const std::string text = read_input(input);
        const Sample sample = format == "histogram" ? parse_histogram(text) : parse_raw(text);

        convextest::CalibrationConfig cfg;
        cfg.alpha = alpha;
        cfg.draws = draws;
        cfg.method = convextest::parse_method(method);
        cfg.vn = convextest::VnRule::parse(vn);
        cfg.seed = seed ? *seed : entropy_seed();

        const TestReport report = convextest::calibrate(sample, cfg);
        if (output == "json")
            std::cout << report_to_json(report).dump(2) << "\n";
        else
            print_text_report(report, std::cout);
        return report.reject ? kExitReject : kExitAccept;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int run_simulate_command(const std::string& preset, const std::string& plan_path, int reps,
                         int draws, double alpha, std::optional<std::uint64_t> seed,
                         const std::string& format, const std::string& out_path, int threads,
                         bool reps_set, bool draws_set, bool alpha_set) {
    try {
        convextest::ExperimentPlan plan;
        if (!plan_path.empty()) {
            std::ifstream file(plan_path);
            if (!file) throw std::invalid_argument("cannot open plan file '" + plan_path + "'");
            plan = convextest::plan_from_json(read_stream(file));
        } else {
            plan = convextest::preset_plan(preset);
        }
        if (plan_path.empty() || reps_set) plan.replications = reps;
        if (plan_path.empty() || draws_set) plan.draws = draws;
        if (plan_path.empty() || alpha_set) plan.alpha = alpha;
        plan.master_seed = seed ? *seed : entropy_seed();
        if (plan.replications < 1) throw std::invalid_argument("--N must be >= 1");
        if (plan.draws < 1) throw std::invalid_argument("--B must be >= 1");
        if (!(plan.alpha > 0.0 && plan.alpha < 1.0))
            throw std::invalid_argument("--alpha must lie strictly between 0 and 1");

        const convextest::SimTable table = convextest::run_plan(plan, threads);
        const std::string rendered =
            convextest::emit_table(table, convextest::parse_table_format(format));
        if (out_path.empty() || out_path == "-") {
            std::cout << rendered;
        } else {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw std::invalid_argument("cannot open output file '" + out_path + "'");
            out << rendered;
        }
        for (const convextest::SimCell& c : table.cells)
            if (!c.error.empty())
                std::cerr << "warning: cell " << c.pmf << " n=" << c.n << " failed: " << c.error
                          << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convexity tests for probability mass functions on the nonnegative integers"};
    app.require_subcommand(1);

    // test
    auto* test_cmd = app.add_subcommand("test", "Test a dataset for convexity of its pmf");
    std::string input;
    std::string data_format = "raw";
    std::string method = "lfh";
    double alpha = 0.05;
    int draws = 1000;
    std::string vn = "quarter";
    std::optional<std::uint64_t> seed;
    std::string output = "text";
    test_cmd->add_option("--input", input, "Input file, or - for standard input")->required();
    test_cmd->add_option("--format", data_format, "Input format")
        ->check(CLI::IsMember({"raw", "histogram"}));
    test_cmd->add_option("--method", method, "Calibration method")
        ->check(CLI::IsMember({"knot", "lfh"}));
    test_cmd->add_option("--alpha", alpha, "Test level in (0,1)");
    test_cmd->add_option("--B", draws, "Monte Carlo draws");
    test_cmd->add_option("--vn", vn,
                         "Knot threshold rule: zero, loglog, quarter, or a constant");
    test_cmd->add_option("--seed", seed, "RNG seed (default: system entropy)");
    test_cmd->add_option("--output", output, "Report format")
        ->check(CLI::IsMember({"json", "text"}));

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Estimate rejection rates over a plan");
    std::string preset;
    std::string plan_path;
    int reps = 500;
    int sim_draws = 1000;
    double sim_alpha = 0.05;
    std::optional<std::uint64_t> sim_seed;
    std::string table_format = "csv";
    std::string out_path;
    int threads = 0;
    auto* preset_opt = sim_cmd->add_option("--preset", preset, "Built-in plan")
                           ->check(CLI::IsMember({"table1", "table2"}));
    auto* plan_opt = sim_cmd->add_option("--plan", plan_path, "JSON plan file");
    preset_opt->excludes(plan_opt);
    auto* reps_opt = sim_cmd->add_option("--N", reps, "Replications per cell");
    auto* draws_opt = sim_cmd->add_option("--B", sim_draws, "Monte Carlo draws per replication");
    auto* alpha_opt = sim_cmd->add_option("--alpha", sim_alpha, "Test level in (0,1)");
    sim_cmd->add_option("--seed", sim_seed, "Master seed (default: system entropy)");
    sim_cmd->add_option("--format", table_format, "Output format")
        ->check(CLI::IsMember({"csv", "json", "text"}));
    sim_cmd->add_option("--out", out_path, "Output file (default: standard output)");
    sim_cmd->add_option("--threads", threads, "Worker threads (0 = hardware default)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }

    if (test_cmd->parsed())
        return run_test_command(input, data_format, method, alpha, draws, vn, seed, output);

    if (!preset_opt->count() && !plan_opt->count()) {
        std::cerr << "error: simulate needs --preset or --plan\n";
        return kExitError;
    }
    return run_simulate_command(preset, plan_path, reps, sim_draws, sim_alpha, sim_seed,
                                table_format, out_path, threads, reps_opt->count() > 0,
                                draws_opt->count() > 0, alpha_opt->count() > 0);
}
