#include "vanetsim/runner.hpp"

#include "vanetsim/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

namespace vanetsim {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
    return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError(fmt::format("cannot create output directory '{}'", dir.string()));
}

QueueSummary summarize(const LaneQueueStats& s) {
    QueueSummary q;
    q.lane_id = s.lane_id;
    q.mean = s.mean;
    q.max = s.max;
    const std::size_t n = s.series.size();
    if (n >= 4) {
        const auto quarter = [&](std::size_t k) {
            const auto lo = s.series.begin() + static_cast<std::ptrdiff_t>(k * n / 4);
            const auto hi = s.series.begin() + static_cast<std::ptrdiff_t>((k + 1) * n / 4);
            return static_cast<std::size_t>(*std::max_element(lo, hi));
        };
        q.first_quarter_max = quarter(0);
        q.final_quarter_max = quarter(3);
    } else {
        q.first_quarter_max = q.final_quarter_max = s.max;
    }
    return q;
}

std::vector<std::string> approach_lanes(const RoadNetwork& net) {
    std::set<std::string> lanes;
    for (const auto& c : net.connections()) {
        if (c.tl_id) lanes.insert(fmt::format("{}_{}", c.from_edge, c.from_lane));
    }
    return {lanes.begin(), lanes.end()};
}

std::string_view mode_name(SignalMode mode) { return mode == SignalMode::adaptive ? "adaptive" : "static"; }

nlohmann::json metrics_json(const NetMetrics& m) {
    return {{"sent", m.sent},
            {"received", m.received},
            {"pdf", m.pdf},
            {"avg_pkts_s", m.avg_packets_per_s},
            {"avg_bits_s", m.avg_bits_per_s}};
}

nlohmann::json run_json(const RunReport& r) {
    nlohmann::json queues = nlohmann::json::array();
    for (const auto& q : r.queues) {
        queues.push_back({{"lane", q.lane_id},
                          {"mean", q.mean},
                          {"max", q.max},
                          {"first_quarter_max", q.first_quarter_max},
                          {"final_quarter_max", q.final_quarter_max}});
    }
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [name, path] : r.files) files[name] = path.string();
    return {{"scenario", r.scenario_id},
            {"seed", r.seed},
            {"duration", r.duration},
            {"signals", mode_name(r.mode)},
            {"total_waiting_time", r.total_waiting_time},
            {"inserted", r.inserted},
            {"arrived", r.arrived},
            {"pending", r.pending},
            {"controller_decisions", r.decisions},
            {"approach_lanes", r.approach_lanes},
            {"queues", queues},
            {"network", metrics_json(r.net)},
            {"files", files}};
}

double parse_cell(std::string_view cell, std::size_t line, std::string_view column) {
    double value = 0.0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc{} || ptr != end) {
        throw SchemaError(fmt::format("metrics CSV line {}: column '{}' is not numeric: '{}'", line, column, cell));
    }
    return value;
}

}  // namespace

const QueueSummary& RunReport::queue(std::string_view lane_id) const {
    for (const auto& q : queues) {
        if (q.lane_id == lane_id) return q;
    }
    throw std::out_of_range(fmt::format("no lane '{}'", lane_id));
}

std::string format_metrics_row(const MetricsRow& row) {
    const auto& m = row.metrics;
    return fmt::format("{},{},{},{:.6f},{:.6f},{:.6f}", row.nodes, m.sent, m.received, m.pdf, m.avg_packets_per_s,
                       m.avg_bits_per_s);
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("metrics CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsHeader) throw SchemaError(fmt::format("metrics CSV header must be '{}'", kMetricsHeader));
    static constexpr std::string_view names[] = {"nodes", "sent", "received", "pdf", "avg_pkts_s", "avg_bits_s"};
    std::vector<MetricsRow> rows;
    for (std::size_t number = 2; std::getline(in, line); ++number) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view rest = line;
        for (;;) {
            const auto comma = rest.find(',');
            cells.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (cells.size() != 6) throw SchemaError(fmt::format("metrics CSV line {}: expected 6 cells", number));
        double v[6];
        for (std::size_t i = 0; i < 6; ++i) v[i] = parse_cell(cells[i], number, names[i]);
        if (v[0] < 0 || v[1] < 0 || v[2] < 0) throw SchemaError(fmt::format("metrics CSV line {}: negative count", number));
        MetricsRow row;
        row.nodes = static_cast<std::size_t>(v[0]);
        row.metrics.sent = static_cast<std::uint64_t>(v[1]);
        row.metrics.received = static_cast<std::uint64_t>(v[2]);
        row.metrics.pdf = v[3];
        row.metrics.avg_packets_per_s = v[4];
        row.metrics.avg_bits_per_s = v[5];
        rows.push_back(row);
    }
    return rows;
}

RunReport run_scenario(std::shared_ptr<const Scenario> scenario, const RunRequest& request, const Driver& driver) {
    RunReport report;
    report.scenario_id = scenario->config.id;
    report.mode = request.mode;

    std::ofstream trace;
    std::ofstream controller;
    fs::path trace_path;
    fs::path controller_path;
    SimulationOptions options;
    options.mode = request.mode;
    options.seed = request.seed;
    options.end = request.end;
    if (request.out_dir) {
        prepare_dir(*request.out_dir);
        controller_path = *request.out_dir / "controller.csv";
        controller = open_output(controller_path);
        options.controller_log = &controller;
        if (request.trace) {
            trace_path = *request.out_dir / "trace.csv";
            trace = open_output(trace_path);
            options.trace = &trace;
        }
    }

    Simulation sim(scenario, options);
    if (driver) driver(sim);
    sim.run();

    const Traffic& traffic = sim.traffic();
    report.seed = sim.seed();
    report.duration = sim.clock() - sim.begin();
    for (const auto& lane : sim.lane_queues()) report.queues.push_back(summarize(lane));
    report.approach_lanes = approach_lanes(scenario->network);
    report.total_waiting_time = traffic.total_waiting_time();
    report.inserted = traffic.inserted();
    report.arrived = traffic.arrived();
    report.pending = traffic.pending();
    report.net = sim.metrics();
    report.insertion_order = traffic.insertion_order();
    report.decisions = sim.decisions().size();

    if (request.out_dir) {
        const fs::path& dir = *request.out_dir;
        finish_output(controller, controller_path);
        report.files["controller"] = controller_path;
        if (request.trace) {
            finish_output(trace, trace_path);
            report.files["trace"] = trace_path;
        }
        const fs::path events_path = dir / "events.csv";
        auto events = open_output(events_path);
        write_event_log(events, sim.network().events());
        finish_output(events, events_path);
        report.files["events"] = events_path;

        const fs::path metrics_path = dir / "metrics.csv";
        auto metrics = open_output(metrics_path);
        metrics << kMetricsHeader << '\n' << format_metrics_row(MetricsRow{report.inserted, report.net}) << '\n';
        finish_output(metrics, metrics_path);
        report.files["metrics"] = metrics_path;

        const fs::path report_path = dir / "report.json";
        report.files["report"] = report_path;
        auto json = open_output(report_path);
        json << report_json(report);
        finish_output(json, report_path);
    }
    return report;
}

ComparisonReport compare_scenario(std::shared_ptr<const Scenario> scenario, std::optional<std::uint64_t> seed,
                                  std::optional<double> end, std::optional<fs::path> out_dir) {
    if (scenario->network.link_counts().empty()) throw ValidationError("comparison needs at least one traffic light");
    if (scenario->config.adaptive.empty()) throw ValidationError("comparison needs an <adaptive> configuration");

    auto request = [&](SignalMode mode) {
        RunRequest r;
        r.seed = seed;
        r.end = end;
        r.mode = mode;
        if (out_dir) r.out_dir = *out_dir / std::string(mode_name(mode));
        return r;
    };
    const RunRequest static_request = request(SignalMode::static_programs);
    const RunRequest adaptive_request = request(SignalMode::adaptive);
    auto static_future = std::async(std::launch::async, [&] { return run_scenario(scenario, static_request); });
    ComparisonReport c;
    c.adaptive_run = run_scenario(scenario, adaptive_request);
    c.static_run = static_future.get();
    const double base = c.static_run.total_waiting_time;
    c.waiting_change_percent = base > 0 ? (c.adaptive_run.total_waiting_time - base) / base * 100.0 : 0.0;
    c.same_insertions = c.static_run.insertion_order == c.adaptive_run.insertion_order;

    if (out_dir) {
        const fs::path path = *out_dir / "compare.json";
        auto out = open_output(path);
        out << comparison_json(c);
        finish_output(out, path);
    }
    return c;
}

std::string report_json(const RunReport& report) { return run_json(report).dump(2) + "\n"; }

std::string comparison_json(const ComparisonReport& c) {
    nlohmann::json approaches = nlohmann::json::array();
    for (const auto& lane : c.static_run.approach_lanes) {
        const auto& s = c.static_run.queue(lane);
        const auto& a = c.adaptive_run.queue(lane);
        approaches.push_back({{"lane", lane},
                              {"static_max_queue", s.max},
                              {"adaptive_max_queue", a.max},
                              {"static_first_quarter_max", s.first_quarter_max},
                              {"static_final_quarter_max", s.final_quarter_max},
                              {"adaptive_first_quarter_max", a.first_quarter_max},
                              {"adaptive_final_quarter_max", a.final_quarter_max}});
    }
    nlohmann::json j = {{"scenario", c.static_run.scenario_id},
                        {"seed", c.static_run.seed},
                        {"static", {{"total_waiting_time", c.static_run.total_waiting_time},
                                    {"arrived", c.static_run.arrived},
                                    {"inserted", c.static_run.inserted}}},
                        {"adaptive", {{"total_waiting_time", c.adaptive_run.total_waiting_time},
                                      {"arrived", c.adaptive_run.arrived},
                                      {"inserted", c.adaptive_run.inserted}}},
                        {"waiting_change_percent", c.waiting_change_percent},
                        {"same_insertions", c.same_insertions},
                        {"approaches", approaches}};
    return j.dump(2) + "\n";
}

}  // namespace vanetsim
