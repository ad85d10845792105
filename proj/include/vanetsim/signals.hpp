#pragma once

#include "vanetsim/mobility.hpp"
#include "vanetsim/netmodel.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vanetsim {

enum class LinkPermission { green_priority, green_yield, yellow, red };

/// Maps a state character to its permission. Throws std::invalid_argument
/// for characters outside {G, g, y, r}.
LinkPermission link_permission(char c);
bool is_state_char(char c);
char state_char(LinkPermission permission);

struct Phase {
    double duration = 0.0;  // seconds
    std::string state;

    bool operator==(const Phase&) const = default;
};

enum class ProgramOrigin { static_file, adaptive };

struct PhaseProgram {
    std::string tl_id;
    std::string program_id;
    double offset = 0.0;
    std::vector<Phase> phases;
    ProgramOrigin origin = ProgramOrigin::static_file;

    double cycle() const;
    std::size_t link_count() const { return phases.empty() ? 0 : phases.front().state.size(); }
    /// Index of the phase active at schedule time t (offset applied).
    std::size_t phase_index_at(double t) const;

    bool operator==(const PhaseProgram&) const = default;
};

/// How to treat state strings whose length disagrees with the expected one.
/// Strict rejects; permissive pads with 'r' or truncates and records a warning.
enum class LengthMode { strict, permissive };

struct ProgramSet {
    std::vector<PhaseProgram> programs;
    std::vector<std::string> warnings;
};

/// Parses `<tlLogic>` blocks in document order. In strict mode every phase of
/// a program must have the same state length; permissive mode normalises to
/// the first phase's length. Throws SchemaError.
ProgramSet parse_tl_programs(std::string_view text, LengthMode mode = LengthMode::strict,
                             std::string_view source = "tllogic");
std::string write_tl_programs(std::span<const PhaseProgram> programs);

/// Brings every phase of `program` to `links` characters. Throws
/// ValidationError in strict mode when any length differs.
void fit_program(PhaseProgram& program, std::size_t links, LengthMode mode, std::vector<std::string>& warnings);

/// State string active at time t: the phase whose half-open interval
/// [start, end) contains (t + offset) mod cycle.
const std::string& state_at(const PhaseProgram& program, double t);

struct Detector {
    std::string id;
    std::string lane_id;
    LaneRef lane;
    double pos = 0.0;          // meters from lane start
    double window = 60.0;      // seconds
    double queue_zone = 50.0;  // meters upstream of pos

    bool operator==(const Detector&) const = default;
};

struct DetectorReading {
    std::size_t count = 0;
    double mean_speed = 0.0;
    double occupancy = 0.0;
    std::size_t queue_length = 0;
};

/// Parses `<detector>` (alias `<e1Detector>`) elements. Lanes are resolved
/// later against the network.
std::vector<Detector> parse_detectors(std::string_view text, std::string_view source = "detectors");

/// Resolves lane ids and checks positions. Throws ValidationError.
void resolve_detectors(std::vector<Detector>& detectors, const RoadNetwork& network, std::string_view source);

/// Detectors plus the crossing times they have observed.
class DetectorBank {
public:
    DetectorBank(std::vector<Detector> detectors, const RoadNetwork& network);

    const std::vector<Detector>& detectors() const { return detectors_; }
    std::optional<std::size_t> find(std::string_view id) const;

    /// Records front-bumper crossings from one step's moves at time `t`.
    void observe(std::span<const Move> moves, double t);

    DetectorReading read(std::size_t index, const Traffic& traffic) const;

private:
    const RoadNetwork* network_;
    std::vector<Detector> detectors_;
    std::vector<std::vector<std::size_t>> by_lane_;
    std::vector<std::vector<double>> crossings_;
};

/// Reading for a detector given its crossing log: count over (t - window, t],
/// and speed/occupancy/queue over vehicles whose front lies in [pos - zone, pos].
DetectorReading read_detector(const Detector& d, std::span<const double> crossings, const Traffic& state);

/// Halting vehicles on `lane` whose front is within `zone` meters of the lane end.
std::size_t queue_length(LaneRef lane, const Traffic& state, double zone = 50.0);

}  // namespace vanetsim
