#ifndef CONVEXTEST_SIM_HPP
#define CONVEXTEST_SIM_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "convextest/calibration.hpp"
#include "convextest/pmf.hpp"

namespace convextest {

// A test procedure to benchmark: the lfh method, or the knot method paired
// with a threshold rule.
struct MethodSpec {
    Method method = Method::lfh;
    VnRule vn = VnRule::quarter();  // knot method only
};

struct PlanPmf {
    std::string name;
    Pmf pmf;
};

// Full factorial experiment: pmfs x sample sizes x methods, each cell
// estimating the rejection probability over `replications` independent runs.
struct ExperimentPlan {
    std::vector<PlanPmf> pmfs;
    std::vector<int> sample_sizes;
    std::vector<MethodSpec> methods;
    int replications = 500;  // per cell
    int draws = 1000;        // Monte Carlo copies per replication
    double alpha = 0.05;
    std::uint64_t master_seed = 0;
};

// Built-in experiment grids over the benchmark pmfs at n in {500, 5000,
// 50000}: "table1" runs the knot method with thresholds zero, loglog and
// quarter; "table2" runs the lfh method.
ExperimentPlan preset_plan(std::string_view name);

// Parses a JSON plan document mirroring ExperimentPlan field-for-field; see
// README for the schema. Throws std::invalid_argument on malformed input.
ExperimentPlan plan_from_json(const std::string& text);

struct SimCell {
    std::string pmf;
    int n = 0;
    Method method = Method::lfh;
    std::string vn;      // rule label; empty for lfh
    double rate = 0.0;   // rejections / replications
    double se = 0.0;     // sqrt(rate (1-rate) / replications)
    int replications = 0;
    std::string error;   // nonempty if the cell failed

    bool operator==(const SimCell&) const = default;
};

struct SimTable {
    std::vector<SimCell> cells;
    ExperimentPlan plan;             // echo of what ran
    double wall_seconds = 0.0;
    double max_kkt_residual = 0.0;
};

struct RunCellResult {
    double rate = 0.0;
    double se = 0.0;
    double max_kkt_residual = 0.0;
};

// One cell: `replications` times, draw a sample of size n from the pmf and
// run the calibrated test. Deterministic given the seed; replications run in
// parallel on `threads` threads (0 = hardware default).
RunCellResult run_cell(const Pmf& pmf, int n, const CalibrationConfig& cfg, int replications,
                       std::uint64_t seed, int threads = 0);

// Per-cell seed, a pure function of the master seed and the cell coordinates
// so any subset of cells reproduces identically.
std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& pmf_name, int n,
                        const MethodSpec& method);

// Runs every cell of the plan. Per-cell failures are recorded in the cell's
// error field rather than aborting the run.
SimTable run_plan(const ExperimentPlan& plan, int threads = 0);

enum class TableFormat { csv, json, text };

TableFormat parse_table_format(const std::string& name);

// Renders the table: csv has one row per cell with columns
// pmf,n,method,vn,rate,se,N; json includes the plan echo and diagnostics;
// text is a grid per method, pmfs down and sample sizes across.
std::string emit_table(const SimTable& t, TableFormat format);

// Parses emit_table's csv output back into a table (cells only; the plan
// echo and wall clock are not part of the csv).
SimTable parse_table_csv(const std::string& text);

}  // namespace convextest

#endif
