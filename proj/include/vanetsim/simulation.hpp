#pragma once

#include "vanetsim/adaptive.hpp"
#include "vanetsim/mobility.hpp"
#include "vanetsim/scenario.hpp"
#include "vanetsim/signals.hpp"
#include "vanetsim/vanet.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vanetsim {

enum class SignalMode { static_programs, adaptive };

struct SimulationOptions {
    SignalMode mode = SignalMode::adaptive;
    std::optional<std::uint64_t> seed;  // overrides the config seed
    std::optional<double> end;          // overrides the config end
    std::ostream* trace = nullptr;      // `t,vehicle_id,edge,lane,pos,speed`
    std::ostream* controller_log = nullptr;  // `t,tl_id,loads,green_splits`
};

inline constexpr std::string_view kTraceHeader = "t,vehicle_id,edge,lane,pos,speed";
inline constexpr std::string_view kControllerHeader = "t,tl_id,loads,green_splits";

/// Halting-vehicle statistics of one lane, sampled after every step.
struct LaneQueueStats {
    std::string lane_id;
    double mean = 0.0;
    std::size_t max = 0;
    std::vector<std::uint32_t> series;  // one sample per step
};

/// Traffic, signals, detectors, controllers and the V2V layer advanced in
/// lockstep. Each step: controllers read the detectors, pending programs are
/// installed at cycle boundaries, the network layer runs over current
/// positions, vehicles move under the current signals, and detectors record
/// the crossings.
class Simulation {
public:
    Simulation(std::shared_ptr<const Scenario> scenario, SimulationOptions options = {});

    const Scenario& scenario() const { return *scenario_; }
    double clock() const { return traffic_->clock(); }
    double begin() const { return begin_; }
    double end() const { return end_; }
    std::uint64_t seed() const { return seed_; }
    bool finished() const;

    void step();
    /// Runs up to `n` steps without passing the end; returns the steps taken.
    std::uint64_t advance(std::uint64_t n);
    void run();

    const Traffic& traffic() const { return *traffic_; }
    const NetworkLayer& network() const { return network_; }
    const DetectorBank& detectors() const { return detectors_; }
    const std::vector<ControllerDecision>& decisions() const { return decisions_; }

    bool has_light(std::string_view tl_id) const { return find_head(tl_id) != nullptr; }
    /// Commanded state while overridden, otherwise the schedule's state now.
    std::string light_state(std::string_view tl_id) const;
    const PhaseProgram& active_program(std::string_view tl_id) const;
    std::size_t link_count(std::string_view tl_id) const;
    /// Replaces schedule evaluation for the light until the next SET.
    void override_state(std::string_view tl_id, std::string state);
    /// Queues a program from the scenario; it starts at the next cycle
    /// boundary and ends any override. Returns false when no such program exists.
    bool request_program(std::string_view tl_id, std::string_view program_id);

    /// Metrics over the elapsed time; zero rates before the first step.
    NetMetrics metrics() const;
    std::vector<LaneQueueStats> lane_queues() const;

private:
    struct SignalHead {
        std::string tl_id;
        PhaseProgram active;
        double anchor = 0.0;  // schedule time 0 of `active`
        std::optional<PhaseProgram> pending;
        long long pending_cycle = 0;
        std::optional<std::string> override;
        std::optional<GreenController> controller;
        std::string current;  // state used by the step in progress

        long long cycle_index(double t) const;
        std::string scheduled(double t) const;
    };

    const SignalHead* find_head(std::string_view tl_id) const;
    SignalHead& head(std::string_view tl_id);
    void update_signals(double t);
    void queue_program(SignalHead& h, PhaseProgram program, double t);
    void sample_queues();
    void write_trace() const;

    std::shared_ptr<const Scenario> scenario_;
    SimulationOptions options_;
    double begin_;
    double end_;
    std::uint64_t seed_;
    std::unique_ptr<Traffic> traffic_;
    DetectorBank detectors_;
    NetworkLayer network_;
    std::vector<SignalHead> heads_;
    // Per connection: (head index, link index), or none when unsignalised.
    std::vector<std::optional<std::pair<std::size_t, std::size_t>>> link_of_;
    std::vector<ControllerDecision> decisions_;
    std::vector<std::size_t> queue_max_;
    std::vector<double> queue_sum_;
    std::vector<std::vector<std::uint32_t>> queue_series_;
    std::uint64_t samples_ = 0;
};

}  // namespace vanetsim
