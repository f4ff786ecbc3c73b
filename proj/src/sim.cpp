#include "convextest/sim.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "convextest/errors.hpp"

namespace convextest {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

double parse_double(std::string_view text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw std::invalid_argument("cannot parse number '" + std::string(text) + "'");
    return v;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::string vn_label_for(const MethodSpec& m) {
    return m.method == Method::knot ? m.vn.label() : std::string();
}

void validate_cell_name(const std::string& name) {
    if (name.empty()) throw std::invalid_argument("plan: pmf name must be nonempty");
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
        if (!ok)
            throw std::invalid_argument("plan: pmf name '" + name +
                                        "' may only contain [A-Za-z0-9_.-]");
    }
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& pmf_name, int n,
                        const MethodSpec& method) {
    std::uint64_t h = mix_seed(master_seed, fnv1a(pmf_name));
    h = mix_seed(h, static_cast<std::uint64_t>(n));
    h = mix_seed(h, method.method == Method::knot ? 1 : 2);
    if (method.method == Method::knot) {
        h = mix_seed(h, static_cast<std::uint64_t>(method.vn.kind()));
        if (method.vn.kind() == VnRule::Kind::constant)
            h = mix_seed(h, std::bit_cast<std::uint64_t>(method.vn.constant_value()));
    }
    return h;
}

RunCellResult run_cell(const Pmf& pmf, int n, const CalibrationConfig& cfg, int replications,
                       std::uint64_t seed, int threads) {
    if (replications < 1) throw std::invalid_argument("run_cell: need at least one replication");
    if (n < 1) throw std::invalid_argument("run_cell: n must be >= 1");

    std::atomic<int> rejections{0};
    std::vector<double> kkt(static_cast<size_t>(replications), 0.0);
    parallel_for(replications, threads, [&](int r) {
        const std::uint64_t rep_seed = mix_seed(seed, static_cast<std::uint64_t>(r));
        RngStream sample_rng(mix_seed(rep_seed, 0));
        const Sample sample = sample_from(pmf, n, sample_rng);
        CalibrationConfig rep_cfg = cfg;
        rep_cfg.seed = mix_seed(rep_seed, 1);
        const TestReport report = calibrate(sample, rep_cfg);
        kkt[static_cast<size_t>(r)] = report.max_kkt_residual;
        if (report.reject) rejections.fetch_add(1);
    });

    RunCellResult out;
    out.rate = static_cast<double>(rejections.load()) / replications;
    out.se = std::sqrt(out.rate * (1.0 - out.rate) / replications);
    out.max_kkt_residual = *std::max_element(kkt.begin(), kkt.end());
    return out;
}

ExperimentPlan preset_plan(std::string_view name) {
    ExperimentPlan plan;
    for (const char* pmf : {"p0_1", "p0_2", "p1_1", "p1_2"})
        plan.pmfs.push_back(PlanPmf{pmf, benchmark_pmf(pmf)});
    plan.sample_sizes = {500, 5000, 50000};
    if (name == "table1") {
        plan.methods = {MethodSpec{Method::knot, VnRule::zero()},
                        MethodSpec{Method::knot, VnRule::sqrt_loglog()},
                        MethodSpec{Method::knot, VnRule::quarter()}};
    } else if (name == "table2") {
        plan.methods = {MethodSpec{Method::lfh, VnRule::quarter()}};
    } else {
        throw std::invalid_argument("unknown preset '" + std::string(name) +
                                    "' (expected table1 or table2)");
    }
    return plan;
}

ExperimentPlan plan_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("plan: invalid JSON: ") + e.what());
    }
    try {
        ExperimentPlan plan;
        for (const auto& entry : doc.at("pmfs")) {
            if (entry.is_string()) {
                const std::string name = entry.get<std::string>();
                plan.pmfs.push_back(PlanPmf{name, benchmark_pmf(name)});
            } else {
                const std::string name = entry.at("name").get<std::string>();
                validate_cell_name(name);
                plan.pmfs.push_back(PlanPmf{name, Pmf(entry.at("mass").get<std::vector<double>>())});
            }
        }
        plan.sample_sizes = doc.at("sample_sizes").get<std::vector<int>>();
        for (const auto& entry : doc.at("methods")) {
            MethodSpec spec;
            spec.method = parse_method(entry.at("method").get<std::string>());
            if (spec.method == Method::knot) {
                const auto& vn = entry.at("vn");
                spec.vn = vn.is_number() ? VnRule::constant(vn.get<double>())
                                         : VnRule::parse(vn.get<std::string>());
            }
            plan.methods.push_back(std::move(spec));
        }
        plan.replications = doc.value("N", 500);
        plan.draws = doc.value("B", 1000);
        plan.alpha = doc.value("alpha", 0.05);
        plan.master_seed = doc.value("master_seed", std::uint64_t{0});

        if (plan.pmfs.empty() || plan.sample_sizes.empty() || plan.methods.empty())
            throw std::invalid_argument("plan: pmfs, sample_sizes and methods must be nonempty");
        if (plan.replications < 1) throw std::invalid_argument("plan: N must be >= 1");
        if (plan.draws < 1) throw std::invalid_argument("plan: B must be >= 1");
        if (!(plan.alpha > 0.0 && plan.alpha < 1.0))
            throw std::invalid_argument("plan: alpha must lie in (0,1)");
        for (int n : plan.sample_sizes)
            if (n < 3) throw std::invalid_argument("plan: sample sizes must be >= 3");
        return plan;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("plan: ") + e.what());
    }
}

SimTable run_plan(const ExperimentPlan& plan, int threads) {
    const auto start = std::chrono::steady_clock::now();
    SimTable table;
    table.plan = plan;
    for (const PlanPmf& pmf : plan.pmfs) {
        for (int n : plan.sample_sizes) {
            for (const MethodSpec& method : plan.methods) {
                SimCell cell;
                cell.pmf = pmf.name;
                cell.n = n;
                cell.method = method.method;
                cell.vn = vn_label_for(method);
                cell.replications = plan.replications;
                CalibrationConfig cfg;
                cfg.alpha = plan.alpha;
                cfg.draws = plan.draws;
                cfg.method = method.method;
                cfg.vn = method.vn;
                try {
                    const RunCellResult r =
                        run_cell(pmf.pmf, n, cfg, plan.replications,
                                 cell_seed(plan.master_seed, pmf.name, n, method), threads);
                    cell.rate = r.rate;
                    cell.se = r.se;
                    table.max_kkt_residual = std::max(table.max_kkt_residual, r.max_kkt_residual);
                } catch (const std::exception& e) {
                    cell.rate = std::numeric_limits<double>::quiet_NaN();
                    cell.se = std::numeric_limits<double>::quiet_NaN();
                    cell.error = e.what();
                }
                table.cells.push_back(std::move(cell));
            }
        }
    }
    table.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return table;
}

TableFormat parse_table_format(const std::string& name) {
    if (name == "csv") return TableFormat::csv;
    if (name == "json") return TableFormat::json;
    if (name == "text") return TableFormat::text;
    throw std::invalid_argument("unknown table format '" + name +
                                "' (expected csv, json or text)");
}

namespace {

std::string emit_csv(const SimTable& t) {
    std::string out = "pmf,n,method,vn,rate,se,N\n";
    for (const SimCell& c : t.cells) {
        out += c.pmf;
        out += ',';
        out += std::to_string(c.n);
        out += ',';
        out += method_name(c.method);
        out += ',';
        out += c.vn;
        out += ',';
        out += format_double(c.rate);
        out += ',';
        out += format_double(c.se);
        out += ',';
        out += std::to_string(c.replications);
        out += '\n';
    }
    return out;
}

json plan_to_json(const ExperimentPlan& plan) {
    json methods = json::array();
    for (const MethodSpec& m : plan.methods) {
        json entry;
        entry["method"] = method_name(m.method);
        if (m.method == Method::knot) entry["vn"] = m.vn.label();
        methods.push_back(std::move(entry));
    }
    json pmfs = json::array();
    for (const PlanPmf& p : plan.pmfs)
        pmfs.push_back(json{{"name", p.name}, {"mass", p.pmf.mass()}});
    return json{{"pmfs", std::move(pmfs)},
                {"sample_sizes", plan.sample_sizes},
                {"methods", std::move(methods)},
                {"N", plan.replications},
                {"B", plan.draws},
                {"alpha", plan.alpha},
                {"master_seed", plan.master_seed}};
}

std::string emit_json(const SimTable& t) {
    json cells = json::array();
    for (const SimCell& c : t.cells) {
        json cell{{"pmf", c.pmf},          {"n", c.n},   {"method", method_name(c.method)},
                  {"vn", c.vn},            {"rate", c.rate}, {"se", c.se},
                  {"N", c.replications}};
        if (std::isnan(c.rate)) {
            cell["rate"] = nullptr;
            cell["se"] = nullptr;
        }
        if (!c.error.empty()) cell["error"] = c.error;
        cells.push_back(std::move(cell));
    }
    json doc{{"plan", plan_to_json(t.plan)},
             {"wall_seconds", t.wall_seconds},
             {"max_kkt_residual", t.max_kkt_residual},
             {"cells", std::move(cells)}};
    return doc.dump(2) + "\n";
}

std::string emit_text(const SimTable& t) {
    // One block per (method, vn): pmfs down, sample sizes across.
    std::vector<std::pair<Method, std::string>> groups;
    std::vector<std::string> pmfs;
    std::vector<int> sizes;
    for (const SimCell& c : t.cells) {
        if (std::find(groups.begin(), groups.end(), std::make_pair(c.method, c.vn)) == groups.end())
            groups.emplace_back(c.method, c.vn);
        if (std::find(pmfs.begin(), pmfs.end(), c.pmf) == pmfs.end()) pmfs.push_back(c.pmf);
        if (std::find(sizes.begin(), sizes.end(), c.n) == sizes.end()) sizes.push_back(c.n);
    }
    std::sort(sizes.begin(), sizes.end());

    auto find_cell = [&](const std::string& pmf, int n, const std::pair<Method, std::string>& g)
        -> const SimCell* {
        for (const SimCell& c : t.cells)
            if (c.pmf == pmf && c.n == n && c.method == g.first && c.vn == g.second) return &c;
        return nullptr;
    };

    std::ostringstream out;
    out << "rejection rates (alpha=" << t.plan.alpha << ", N=" << t.plan.replications
        << ", B=" << t.plan.draws << ")\n";
    for (const auto& g : groups) {
        out << "\nmethod=" << method_name(g.first);
        if (!g.second.empty()) out << " vn=" << g.second;
        out << "\n";
        out << "  " << std::left << std::setw(12) << "pmf";
        for (int n : sizes) out << std::setw(16) << ("n=" + std::to_string(n));
        out << "\n";
        for (const std::string& pmf : pmfs) {
            out << "  " << std::left << std::setw(12) << pmf;
            for (int n : sizes) {
                const SimCell* c = find_cell(pmf, n, g);
                std::string field = "-";
                if (c && c->error.empty()) {
                    char buf[64];
                    std::snprintf(buf, sizeof(buf), "%.3f (%.3f)", c->rate, c->se);
                    field = buf;
                } else if (c) {
                    field = "error";
                }
                out << std::setw(16) << field;
            }
            out << "\n";
        }
    }
    return out.str();
}

}  // namespace

std::string emit_table(const SimTable& t, TableFormat format) {
    switch (format) {
        case TableFormat::csv: return emit_csv(t);
        case TableFormat::json: return emit_json(t);
        case TableFormat::text: return emit_text(t);
    }
    throw std::invalid_argument("emit_table: unknown format");
}

SimTable parse_table_csv(const std::string& text) {
    SimTable table;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "pmf,n,method,vn,rate,se,N")
        throw std::invalid_argument("csv: missing or unexpected header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        size_t start = 0;
        for (size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                fields.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (fields.size() != 7)
            throw std::invalid_argument("csv: expected 7 fields, got line '" + line + "'");
        SimCell cell;
        cell.pmf = fields[0];
        cell.n = static_cast<int>(parse_double(fields[1]));
        cell.method = parse_method(fields[2]);
        cell.vn = fields[3];
        cell.rate = parse_double(fields[4]);
        cell.se = parse_double(fields[5]);
        cell.replications = static_cast<int>(parse_double(fields[6]));
        table.cells.push_back(std::move(cell));
    }
    return table;
}

}  // namespace convextest
