#include "vanetsim/simulation.hpp"

#include "vanetsim/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <ostream>

namespace vanetsim {

namespace {

constexpr double kTimeEps = 1e-9;

std::string join_loads(std::span<const double> loads) {
    std::string out;
    for (double l : loads) out += fmt::format("{}{:.3f}", out.empty() ? "" : ";", l);
    return out;
}

std::string join_greens(std::span<const int> greens) {
    std::string out;
    for (int g : greens) out += fmt::format("{}{}", out.empty() ? "" : ";", g);
    return out;
}

}  // namespace

long long Simulation::SignalHead::cycle_index(double t) const {
    return static_cast<long long>(std::floor((t - anchor + active.offset) / active.cycle() + kTimeEps));
}

std::string Simulation::SignalHead::scheduled(double t) const { return state_at(active, t - anchor); }

Simulation::Simulation(std::shared_ptr<const Scenario> scenario, SimulationOptions options)
    : scenario_(std::move(scenario)),
      options_(options),
      begin_(scenario_->config.begin),
      end_(options.end.value_or(scenario_->config.end)),
      seed_(options.seed.value_or(scenario_->config.seed)),
      detectors_(scenario_->detectors, scenario_->network),
      network_(scenario_->config.radio, scenario_->config.cbr, scenario_->config.begin, seed_) {
    if (!(begin_ < end_)) throw ValidationError(fmt::format("begin {} must be before end {}", begin_, end_));
    const Scenario& s = *scenario_;
    traffic_ = std::make_unique<Traffic>(s.network, s.planned, s.routes.types, s.routes.flows, s.flow_routes, begin_,
                                         s.config.step_length, seed_);

    const bool adaptive = options_.mode == SignalMode::adaptive && s.config.adaptive_enabled;
    for (const auto& [tl, _] : s.network.link_counts()) {
        SignalHead h;
        h.tl_id = tl;
        h.active = s.initial_program(tl);
        for (const auto& a : s.config.adaptive) {
            if (adaptive && a.tl_id == tl) h.controller.emplace(a, *s.find_program(tl, a.template_program), begin_);
        }
        heads_.push_back(std::move(h));
    }
    for (const auto& c : s.network.connections()) {
        if (!c.tl_id) {
            link_of_.emplace_back();
            continue;
        }
        for (std::size_t i = 0; i < heads_.size(); ++i) {
            if (heads_[i].tl_id == *c.tl_id) link_of_.emplace_back(std::pair{i, static_cast<std::size_t>(*c.link_index)});
        }
    }

    const std::size_t lanes = s.network.lane_total();
    queue_max_.assign(lanes, 0);
    queue_sum_.assign(lanes, 0.0);
    queue_series_.resize(lanes);

    if (options_.trace) *options_.trace << kTraceHeader << '\n';
    if (options_.controller_log) *options_.controller_log << kControllerHeader << '\n';
    traffic_->insert_due();
    write_trace();
}

bool Simulation::finished() const { return clock() + kTimeEps >= end_; }

const Simulation::SignalHead* Simulation::find_head(std::string_view tl_id) const {
    for (const auto& h : heads_) {
        if (h.tl_id == tl_id) return &h;
    }
    return nullptr;
}

Simulation::SignalHead& Simulation::head(std::string_view tl_id) {
    for (auto& h : heads_) {
        if (h.tl_id == tl_id) return h;
    }
    throw std::out_of_range(fmt::format("unknown traffic light '{}'", tl_id));
}

void Simulation::queue_program(SignalHead& h, PhaseProgram program, double t) {
    h.pending = std::move(program);
    h.pending_cycle = h.cycle_index(t);
    const double into_cycle = t - h.anchor + h.active.offset - static_cast<double>(h.pending_cycle) * h.active.cycle();
    if (std::abs(into_cycle) < 1e-6) --h.pending_cycle;  // already on a boundary: install now
}

void Simulation::update_signals(double t) {
    for (auto& h : heads_) {
        if (h.controller) {
            if (auto decision = h.controller->tick(t, detectors_, *traffic_)) {
                if (options_.controller_log) {
                    *options_.controller_log << fmt::format("{:.3f},{},{},{}\n", decision->t, decision->tl_id,
                                                            join_loads(decision->loads), join_greens(decision->greens));
                }
                queue_program(h, decision->program, t);
                decisions_.push_back(std::move(*decision));
            }
        }
        if (h.pending && h.cycle_index(t) > h.pending_cycle) {
            h.active = std::move(*h.pending);
            h.pending.reset();
            h.anchor = t + h.active.offset;
        }
        h.current = h.override ? *h.override : h.scheduled(t);
    }
}

void Simulation::step() {
    if (finished()) return;
    const double t = clock();
    update_signals(t);

    std::map<std::string, NodePosition> positions;
    std::vector<std::string> active;
    for (const auto& v : traffic_->vehicles()) {
        const Point p = scenario_->network.position(v.lane.edge, v.pos);
        positions.emplace(v.id, NodePosition{p.x, p.y});
        active.push_back(v.id);
    }
    network_.network_step(t, traffic_->step_length(), positions, active);

    const SignalView view = [this](std::size_t connection) {
        const auto& link = link_of_[connection];
        if (!link) return 'G';
        return heads_[link->first].current[link->second];
    };
    const auto moves = traffic_->step(view);
    detectors_.observe(moves, clock());
    sample_queues();
    write_trace();
}

std::uint64_t Simulation::advance(std::uint64_t n) {
    std::uint64_t taken = 0;
    while (taken < n && !finished()) {
        step();
        ++taken;
    }
    return taken;
}

void Simulation::run() {
    while (!finished()) step();
}

std::string Simulation::light_state(std::string_view tl_id) const {
    const SignalHead* h = find_head(tl_id);
    if (!h) throw std::out_of_range(fmt::format("unknown traffic light '{}'", tl_id));
    return h->override ? *h->override : h->scheduled(clock());
}

const PhaseProgram& Simulation::active_program(std::string_view tl_id) const {
    const SignalHead* h = find_head(tl_id);
    if (!h) throw std::out_of_range(fmt::format("unknown traffic light '{}'", tl_id));
    return h->active;
}

std::size_t Simulation::link_count(std::string_view tl_id) const {
    auto it = scenario_->network.link_counts().find(std::string(tl_id));
    if (it == scenario_->network.link_counts().end()) throw std::out_of_range(fmt::format("unknown traffic light '{}'", tl_id));
    return static_cast<std::size_t>(it->second);
}

void Simulation::override_state(std::string_view tl_id, std::string state) {
    SignalHead& h = head(tl_id);
    if (state.size() != link_count(tl_id)) {
        throw std::invalid_argument(fmt::format("state length {} differs from {} links", state.size(), link_count(tl_id)));
    }
    for (char c : state) {
        if (!is_state_char(c)) throw std::invalid_argument(fmt::format("bad state character '{}'", c));
    }
    h.override = std::move(state);
}

bool Simulation::request_program(std::string_view tl_id, std::string_view program_id) {
    SignalHead& h = head(tl_id);
    const PhaseProgram* program = scenario_->find_program(tl_id, program_id);
    if (!program) return false;
    h.override.reset();
    queue_program(h, *program, clock());
    return true;
}

NetMetrics Simulation::metrics() const {
    const double elapsed = clock() - begin_;
    if (elapsed > kTimeEps) return network_.metrics(elapsed);
    NetMetrics m = compute_metrics(network_.events(), 1.0);
    m.avg_packets_per_s = 0.0;
    m.avg_bits_per_s = 0.0;
    return m;
}

void Simulation::sample_queues() {
    const auto& net = scenario_->network;
    for (std::size_t slot = 0; slot < queue_series_.size(); ++slot) {
        const LaneRef lane = net.lane_at_slot(slot);
        const std::size_t n = queue_length(lane, *traffic_, net.edge(lane.edge).length);
        queue_max_[slot] = std::max(queue_max_[slot], n);
        queue_sum_[slot] += static_cast<double>(n);
        queue_series_[slot].push_back(static_cast<std::uint32_t>(n));
    }
    ++samples_;
}

std::vector<LaneQueueStats> Simulation::lane_queues() const {
    std::vector<LaneQueueStats> out;
    const auto& net = scenario_->network;
    for (std::size_t slot = 0; slot < queue_series_.size(); ++slot) {
        LaneQueueStats s;
        s.lane_id = net.lane_id(net.lane_at_slot(slot));
        s.mean = samples_ > 0 ? queue_sum_[slot] / static_cast<double>(samples_) : 0.0;
        s.max = queue_max_[slot];
        s.series = queue_series_[slot];
        out.push_back(std::move(s));
    }
    return out;
}

void Simulation::write_trace() const {
    if (!options_.trace) return;
    const auto& net = scenario_->network;
    for (const auto& v : traffic_->vehicles()) {
        *options_.trace << fmt::format("{:.3f},{},{},{},{:.4f},{:.4f}\n", clock(), v.id, net.edge(v.lane.edge).id,
                                       v.lane.lane, v.pos, v.speed);
    }
}

}  // namespace vanetsim
