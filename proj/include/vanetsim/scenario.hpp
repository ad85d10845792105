#pragma once

#include "vanetsim/adaptive.hpp"
#include "vanetsim/mobility.hpp"
#include "vanetsim/netmodel.hpp"
#include "vanetsim/signals.hpp"
#include "vanetsim/vanet.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vanetsim {

struct ScenarioPaths {
    std::filesystem::path nodes;
    std::filesystem::path edges;
    std::filesystem::path connections;
    std::filesystem::path routes;
    std::optional<std::filesystem::path> detectors;
    std::optional<std::filesystem::path> tllogic;
};

/// Contents of a `<scenario>` document. Paths are resolved against the
/// directory of the config file.
struct ScenarioConfig {
    std::string id = "scenario";
    ScenarioPaths paths;
    double begin = 0.0;
    double end = 0.0;
    double step_length = 0.1;
    std::uint64_t seed = 0;
    RadioConfig radio;
    std::vector<CbrPair> cbr;
    std::vector<AdaptiveConfig> adaptive;
    bool adaptive_enabled = true;
    LengthMode length_mode = LengthMode::strict;
};

/// Parses the config document only; referenced files are not opened.
/// Throws ParseError, SchemaError or ValidationError.
ScenarioConfig parse_scenario_config(std::string_view text, const std::filesystem::path& base_dir,
                                     std::string_view source = "scenario");

/// A config with every referenced file parsed and cross-checked.
struct Scenario {
    ScenarioConfig config;
    RoadNetwork network;
    RouteFile routes;
    std::vector<PlannedRoute> planned;
    std::vector<std::size_t> flow_routes;  // planned route index per flow
    std::vector<Detector> detectors;
    std::vector<PhaseProgram> programs;    // every program, document order
    std::vector<std::string> warnings;

    /// First program listed for `tl_id`, which starts active.
    const PhaseProgram& initial_program(std::string_view tl_id) const;
    const PhaseProgram* find_program(std::string_view tl_id, std::string_view program_id) const;
};

/// Reads and validates everything a config references: route edges and
/// connections, detector lanes, tlLogic state lengths against link counts,
/// a program for every light, weak connectivity of routed edges and the
/// adaptive settings. Throws ValidationError (or the parse errors).
std::shared_ptr<const Scenario> load_scenario(ScenarioConfig config);
std::shared_ptr<const Scenario> load_scenario_file(const std::filesystem::path& path);

/// Whole-file read; throws ValidationError naming `what` when unreadable.
std::string read_text_file(const std::filesystem::path& path, std::string_view what);

}  // namespace vanetsim
