#pragma once

#include "vanetsim/scenario.hpp"
#include "vanetsim/simulation.hpp"
#include "vanetsim/vanet.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vanetsim {

struct RunRequest {
    std::optional<std::uint64_t> seed;
    std::optional<double> end;
    SignalMode mode = SignalMode::adaptive;
    bool trace = false;
    /// When set, trace/controller/event/metrics CSVs and report.json go here.
    std::optional<std::filesystem::path> out_dir;
};

/// Queue statistics of one lane, with the maxima of the first and last
/// quarter of the run for growth checks.
struct QueueSummary {
    std::string lane_id;
    double mean = 0.0;
    std::size_t max = 0;
    std::size_t first_quarter_max = 0;
    std::size_t final_quarter_max = 0;
};

struct RunReport {
    std::string scenario_id;
    std::uint64_t seed = 0;
    double duration = 0.0;
    SignalMode mode = SignalMode::adaptive;
    std::vector<QueueSummary> queues;  // every lane
    std::vector<std::string> approach_lanes;  // lanes entering a traffic light
    double total_waiting_time = 0.0;
    std::size_t inserted = 0;
    std::size_t arrived = 0;
    std::size_t pending = 0;
    NetMetrics net;
    std::vector<std::string> insertion_order;
    std::size_t decisions = 0;
    std::map<std::string, std::filesystem::path> files;

    const QueueSummary& queue(std::string_view lane_id) const;
};

/// Hook that drives a freshly built simulation before the run completes,
/// e.g. a control session. The remaining steps run afterwards.
using Driver = std::function<void(Simulation&)>;

/// Runs the scenario from begin to end. Throws IoError when an output cannot
/// be written.
RunReport run_scenario(std::shared_ptr<const Scenario> scenario, const RunRequest& request, const Driver& driver = {});

struct ComparisonReport {
    RunReport static_run;
    RunReport adaptive_run;
    /// (adaptive - static) / static * 100; zero when static waited nothing.
    double waiting_change_percent = 0.0;
    bool same_insertions = false;
};

/// Runs static programs and the adaptive controller on the same scenario and
/// seed, concurrently. Requires a traffic light with adaptive settings.
ComparisonReport compare_scenario(std::shared_ptr<const Scenario> scenario, std::optional<std::uint64_t> seed,
                                  std::optional<double> end, std::optional<std::filesystem::path> out_dir);

/// Metrics CSV: `nodes,sent,received,pdf,avg_pkts_s,avg_bits_s`.
inline constexpr std::string_view kMetricsHeader = "nodes,sent,received,pdf,avg_pkts_s,avg_bits_s";

struct MetricsRow {
    std::size_t nodes = 0;
    NetMetrics metrics;
};

std::string format_metrics_row(const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

std::string report_json(const RunReport& report);
std::string comparison_json(const ComparisonReport& report);

}  // namespace vanetsim
