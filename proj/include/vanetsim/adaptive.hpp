#pragma once

#include "vanetsim/mobility.hpp"
#include "vanetsim/signals.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vanetsim {

enum class LoadMetric { queue_length, occupancy, count };

/// Road-side controller settings for one traffic light.
struct AdaptiveConfig {
    std::string tl_id;
    std::string template_program = "0";
    double control_interval = 120.0;  // seconds
    int g_min = 5;
    int g_max = 60;
    double yellow = 9.0;
    /// Whole seconds of green per cycle; defaults to the template's total green.
    std::optional<int> cycle_green_budget;
    LoadMetric load_metric = LoadMetric::queue_length;
    /// Template green-phase index -> detectors measuring that approach.
    std::map<std::size_t, std::vector<std::string>> approach_detectors;
};

struct ApproachLoad {
    std::size_t phase_index = 0;
    double load = 0.0;
};

LoadMetric parse_load_metric(std::string_view name);
std::string_view to_string(LoadMetric metric);

/// Indices of the green phases of a template that strictly alternates
/// green and yellow phases, starting with green. Throws ValidationError otherwise.
std::vector<std::size_t> green_phases(const PhaseProgram& program);

/// Green budget in whole seconds: the configured one, else the template's total green.
int green_budget(const AdaptiveConfig& config, const PhaseProgram& templ);

/// Proportional split of `budget` whole seconds over approaches by load,
/// clamped to [g_min, g_max] with the excess redistributed by load among the
/// unclamped approaches, then rounded by largest remainder (lower index wins
/// ties) so the result sums to `budget` exactly. Zero total load splits equally.
std::vector<int> split_green(std::span<const double> loads, int budget, int g_min, int g_max);

/// Template copy whose green phases carry the split and whose yellow phases
/// carry config.yellow. Throws ValidationError on an unusable template or budget.
PhaseProgram reallocate_green(std::span<const ApproachLoad> loads, const AdaptiveConfig& config,
                              const PhaseProgram& templ);

/// Current load per template green phase, summing the configured metric over
/// the approach's detectors.
std::vector<ApproachLoad> measure_loads(const AdaptiveConfig& config, const PhaseProgram& templ,
                                        const DetectorBank& detectors, const Traffic& traffic);

struct ControllerDecision {
    double t = 0.0;
    std::string tl_id;
    std::vector<double> loads;
    std::vector<int> greens;
    PhaseProgram program;
};

/// Re-evaluates loads at every control-interval boundary after `begin`.
class GreenController {
public:
    GreenController(AdaptiveConfig config, PhaseProgram templ, double begin);

    const AdaptiveConfig& config() const { return config_; }
    const PhaseProgram& template_program() const { return template_; }

    /// Call once per step; returns a new program at interval boundaries only.
    std::optional<ControllerDecision> tick(double clock, const DetectorBank& detectors, const Traffic& traffic);

private:
    AdaptiveConfig config_;
    PhaseProgram template_;
    double begin_;
    long long last_boundary_ = 0;
};

}  // namespace vanetsim
