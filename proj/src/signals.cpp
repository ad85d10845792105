#include "vanetsim/signals.hpp"

#include "vanetsim/error.hpp"
#include "xml.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace vanetsim {

namespace {

// Boundary tolerance for schedule lookups at step-accumulated times.
constexpr double kScheduleEps = 1e-9;

}  // namespace

LinkPermission link_permission(char c) {
    switch (c) {
        case 'G': return LinkPermission::green_priority;
        case 'g': return LinkPermission::green_yield;
        case 'y': return LinkPermission::yellow;
        case 'r': return LinkPermission::red;
        default: throw std::invalid_argument(fmt::format("'{}' is not a signal state character", c));
    }
}

bool is_state_char(char c) { return c == 'G' || c == 'g' || c == 'y' || c == 'r'; }

char state_char(LinkPermission permission) {
    switch (permission) {
        case LinkPermission::green_priority: return 'G';
        case LinkPermission::green_yield: return 'g';
        case LinkPermission::yellow: return 'y';
        case LinkPermission::red: return 'r';
    }
    return 'r';
}

double PhaseProgram::cycle() const {
    double total = 0.0;
    for (const auto& p : phases) total += p.duration;
    return total;
}

std::size_t PhaseProgram::phase_index_at(double t) const {
    const double cycle_length = cycle();
    double u = std::fmod(t + offset, cycle_length);
    if (u < 0) u += cycle_length;
    double end = 0.0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        end += phases[i].duration;
        if (u < end - kScheduleEps) return i;
    }
    return 0;  // u sits on the cycle boundary
}

const std::string& state_at(const PhaseProgram& program, double t) {
    return program.phases.at(program.phase_index_at(t)).state;
}

void fit_program(PhaseProgram& program, std::size_t links, LengthMode mode, std::vector<std::string>& warnings) {
    for (std::size_t i = 0; i < program.phases.size(); ++i) {
        std::string& state = program.phases[i].state;
        if (state.size() == links) continue;
        if (mode == LengthMode::strict) {
            throw ValidationError(fmt::format(
                "traffic light '{}' program '{}': phase {} state \"{}\" has length {} but the light controls {} links",
                program.tl_id, program.program_id, i, state, state.size(), links));
        }
        warnings.push_back(fmt::format("traffic light '{}' program '{}': phase {} state \"{}\" {} to {} links",
                                       program.tl_id, program.program_id, i, state,
                                       state.size() < links ? "padded with 'r'" : "truncated", links));
        state.resize(links, 'r');
    }
}

ProgramSet parse_tl_programs(std::string_view text, LengthMode mode, std::string_view source) {
    ProgramSet set;
    std::set<std::pair<std::string, std::string>> seen;
    xml::for_each(xml::parse(text, source), "tlLogic", source, [&](const xml::Element& e) {
        PhaseProgram program;
        program.tl_id = e.required("id");
        if (program.tl_id.empty()) e.fail("attribute 'id' must not be empty");
        program.program_id = e.attr("programID").value_or("0");
        program.offset = e.number("offset").value_or(0.0);
        for (const auto& [key, child] : e.tree()) {
            if (key != "phase") continue;
            const xml::Element phase(key, child, source);
            Phase p;
            p.duration = phase.required_number("duration");
            p.state = phase.required("state");
            const std::size_t index = program.phases.size();
            if (!(p.duration > 0)) {
                e.fail(fmt::format("phase {} has non-positive duration {}", index, p.duration));
            }
            if (p.state.empty()) e.fail(fmt::format("phase {} has an empty state", index));
            for (char c : p.state) {
                if (!is_state_char(c)) {
                    e.fail(fmt::format("phase {} state \"{}\" has bad state character '{}'", index, p.state, c));
                }
            }
            program.phases.push_back(std::move(p));
        }
        if (program.phases.empty()) e.fail("empty phase list");
        if (!seen.emplace(program.tl_id, program.program_id).second) {
            e.fail(fmt::format("duplicate program '{}' for this traffic light", program.program_id));
        }

        const std::size_t expected = program.phases.front().state.size();
        for (std::size_t i = 1; i < program.phases.size(); ++i) {
            const std::string& state = program.phases[i].state;
            if (state.size() == expected) continue;
            if (mode == LengthMode::strict) {
                e.fail(fmt::format("phase {} state \"{}\" has length {}, phase 0 state \"{}\" has length {}", i, state,
                                   state.size(), program.phases.front().state, expected));
            }
        }
        if (mode == LengthMode::permissive) fit_program(program, expected, mode, set.warnings);
        set.programs.push_back(std::move(program));
    });
    return set;
}

std::string write_tl_programs(std::span<const PhaseProgram> programs) {
    std::string out = "<tlLogics>\n";
    for (const auto& p : programs) {
        out += fmt::format("    <tlLogic id=\"{}\" type=\"static\" programID=\"{}\" offset=\"{}\">\n", xml::escape(p.tl_id),
                           xml::escape(p.program_id), p.offset);
        for (const auto& phase : p.phases) {
            out += fmt::format("        <phase duration=\"{}\" state=\"{}\"/>\n", phase.duration, phase.state);
        }
        out += "    </tlLogic>\n";
    }
    return out + "</tlLogics>\n";
}

std::vector<Detector> parse_detectors(std::string_view text, std::string_view source) {
    std::vector<Detector> detectors;
    std::set<std::string> ids;
    const auto doc = xml::parse(text, source);
    auto visit = [&](const xml::Element& e) {
        Detector d;
        d.id = e.required("id");
        if (d.id.empty() || d.id.find_first_of(" \t\r\n") != std::string::npos) {
            e.fail("attribute 'id' must be non-empty without whitespace");
        }
        d.lane_id = e.required("lane");
        d.pos = e.required_number("pos");
        d.window = e.number("window").value_or(d.window);
        d.queue_zone = e.number("queueZone").value_or(d.queue_zone);
        if (!(d.window > 0)) e.fail("attribute 'window' must be positive");
        if (!(d.queue_zone > 0)) e.fail("attribute 'queueZone' must be positive");
        if (!ids.insert(d.id).second) e.fail("duplicate detector id");
        detectors.push_back(std::move(d));
    };
    xml::for_each(doc, "detector", source, visit);
    xml::for_each(doc, "e1Detector", source, visit);
    return detectors;
}

void resolve_detectors(std::vector<Detector>& detectors, const RoadNetwork& network, std::string_view source) {
    for (auto& d : detectors) {
        auto lane = network.find_lane(d.lane_id);
        if (!lane) throw ValidationError(fmt::format("{}: detector '{}' references unknown lane '{}'", source, d.id, d.lane_id));
        d.lane = *lane;
        const double length = network.edge(lane->edge).length;
        if (d.pos < 0 || d.pos > length) {
            throw ValidationError(fmt::format("{}: detector '{}' position {} outside lane '{}' of length {}", source, d.id,
                                              d.pos, d.lane_id, length));
        }
    }
}

DetectorBank::DetectorBank(std::vector<Detector> detectors, const RoadNetwork& network)
    : network_(&network), detectors_(std::move(detectors)), by_lane_(network.lane_total()), crossings_(detectors_.size()) {
    for (std::size_t i = 0; i < detectors_.size(); ++i) by_lane_.at(network.lane_slot(detectors_[i].lane)).push_back(i);
}

std::optional<std::size_t> DetectorBank::find(std::string_view id) const {
    for (std::size_t i = 0; i < detectors_.size(); ++i) {
        if (detectors_[i].id == id) return i;
    }
    return std::nullopt;
}

void DetectorBank::observe(std::span<const Move> moves, double t) {
    for (const Move& m : moves) {
        for (std::size_t i : by_lane_[network_->lane_slot(m.from_lane)]) {
            const bool left_lane = !m.to_lane || *m.to_lane != m.from_lane;
            const double reached = left_lane ? std::numeric_limits<double>::infinity() : m.to_pos;
            if (m.from_pos < detectors_[i].pos && detectors_[i].pos <= reached) crossings_[i].push_back(t);
        }
        if (m.to_lane && *m.to_lane != m.from_lane) {
            for (std::size_t i : by_lane_[network_->lane_slot(*m.to_lane)]) {
                if (detectors_[i].pos <= m.to_pos) crossings_[i].push_back(t);
            }
        }
    }
    for (std::size_t i = 0; i < detectors_.size(); ++i) {
        auto& log = crossings_[i];
        const auto stale = std::find_if(log.begin(), log.end(), [&](double c) { return c > t - detectors_[i].window; });
        log.erase(log.begin(), stale);
    }
}

DetectorReading DetectorBank::read(std::size_t index, const Traffic& traffic) const {
    return read_detector(detectors_.at(index), crossings_.at(index), traffic);
}

DetectorReading read_detector(const Detector& d, std::span<const double> crossings, const Traffic& state) {
    DetectorReading r;
    const double t = state.clock();
    r.count = static_cast<std::size_t>(
        std::count_if(crossings.begin(), crossings.end(), [&](double c) { return c > t - d.window && c <= t; }));
    double speed_sum = 0.0;
    double covered = 0.0;
    std::size_t in_zone = 0;
    for (std::size_t idx : state.lane_vehicles(d.lane)) {
        const Vehicle& v = state.vehicles()[idx];
        if (v.pos < d.pos - d.queue_zone || v.pos > d.pos) continue;
        ++in_zone;
        speed_sum += v.speed;
        covered += v.type->length;
        if (v.speed < kHaltingSpeed) ++r.queue_length;
    }
    if (in_zone > 0) r.mean_speed = speed_sum / static_cast<double>(in_zone);
    r.occupancy = std::min(1.0, covered / d.queue_zone);
    return r;
}

std::size_t queue_length(LaneRef lane, const Traffic& state, double zone) {
    const double length = state.network().edge(lane.edge).length;
    std::size_t n = 0;
    for (std::size_t idx : state.lane_vehicles(lane)) {
        const Vehicle& v = state.vehicles()[idx];
        if (v.speed < kHaltingSpeed && v.pos >= length - zone) ++n;
    }
    return n;
}

}  // namespace vanetsim
