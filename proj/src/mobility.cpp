#include "vanetsim/mobility.hpp"

#include "vanetsim/error.hpp"
#include "xml.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace vanetsim {

namespace {

constexpr double kTimeEps = 1e-9;

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x00000100000001b3ull;
    }
    return hash;
}

void check_id(const xml::Element& e, const std::string& id) {
    if (id.empty()) e.fail("attribute 'id' must not be empty");
    if (id.find_first_of(", \t\r\n") != std::string::npos) e.fail("ids must not contain commas or whitespace");
}

}  // namespace

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double safe_speed(double v, double v_leader, double gap, double decel, double tau) {
    const double vsafe = v_leader + (gap - v_leader * tau) / (tau + (v + v_leader) / (2.0 * decel));
    return std::max(0.0, vsafe);
}

RouteFile parse_routes(std::string_view text, std::string_view source) {
    const auto doc = xml::parse(text, source);
    RouteFile file;
    std::set<std::string> type_ids{"DEFAULT_VEHTYPE"};
    xml::for_each(doc, "vType", source, [&](const xml::Element& e) {
        VehicleType t;
        t.id = e.required("id");
        check_id(e, t.id);
        t.accel = e.number("accel").value_or(t.accel);
        t.decel = e.number("decel").value_or(t.decel);
        t.tau = e.number("tau").value_or(t.tau);
        t.length = e.number("length").value_or(t.length);
        t.min_gap = e.number("minGap").value_or(t.min_gap);
        t.max_speed = e.number("maxSpeed").value_or(t.max_speed);
        t.sigma = e.number("sigma").value_or(t.sigma);
        if (t.accel <= 0 || t.decel <= 0 || t.tau <= 0 || t.length <= 0 || t.max_speed <= 0) {
            e.fail("accel, decel, tau, length and maxSpeed must be positive");
        }
        if (t.min_gap < 0) e.fail("attribute 'minGap' must be non-negative");
        if (t.sigma < 0 || t.sigma > 1) e.fail("attribute 'sigma' must lie in [0,1]");
        if (t.id != "DEFAULT_VEHTYPE" && !type_ids.insert(t.id).second) e.fail("duplicate vType id");
        file.types.push_back(std::move(t));
    });

    std::set<std::string> route_ids;
    xml::for_each(doc, "route", source, [&](const xml::Element& e) {
        VehicleRoute r;
        r.id = e.required("id");
        check_id(e, r.id);
        std::istringstream edges(e.required("edges"));
        for (std::string edge; edges >> edge;) r.edges.push_back(edge);
        if (r.edges.empty()) e.fail("route has an empty edge list");
        if (!route_ids.insert(r.id).second) e.fail("duplicate route id");
        file.routes.push_back(std::move(r));
    });

    std::set<std::string> flow_ids;
    xml::for_each(doc, "flow", source, [&](const xml::Element& e) {
        Flow f;
        f.id = e.required("id");
        check_id(e, f.id);
        f.route = e.required("route");
        f.type = e.attr("type").value_or(f.type);
        f.begin = e.required_number("begin");
        f.end = e.required_number("end");
        f.vehicles_per_hour = e.required_number("vehsPerHour");
        if (!route_ids.contains(f.route)) e.fail(fmt::format("references unknown route '{}'", f.route));
        if (!type_ids.contains(f.type)) e.fail(fmt::format("references unknown vType '{}'", f.type));
        if (!(f.begin < f.end)) e.fail("begin must be before end");
        if (!(f.vehicles_per_hour > 0)) e.fail("attribute 'vehsPerHour' must be positive");
        if (!flow_ids.insert(f.id).second) e.fail("duplicate flow id");
        file.flows.push_back(std::move(f));
    });
    return file;
}

std::string write_routes(const RouteFile& routes) {
    std::string out = "<routes>\n";
    for (const auto& t : routes.types) {
        out += fmt::format(
            "    <vType id=\"{}\" accel=\"{}\" decel=\"{}\" tau=\"{}\" length=\"{}\" minGap=\"{}\" maxSpeed=\"{}\" sigma=\"{}\"/>\n",
            xml::escape(t.id), t.accel, t.decel, t.tau, t.length, t.min_gap, t.max_speed, t.sigma);
    }
    for (const auto& r : routes.routes) {
        out += fmt::format("    <route id=\"{}\" edges=\"{}\"/>\n", xml::escape(r.id), xml::escape(fmt::format("{}", fmt::join(r.edges, " "))));
    }
    for (const auto& f : routes.flows) {
        out += fmt::format("    <flow id=\"{}\" route=\"{}\" type=\"{}\" begin=\"{}\" end=\"{}\" vehsPerHour=\"{}\"/>\n",
                           xml::escape(f.id), xml::escape(f.route), xml::escape(f.type), f.begin, f.end,
                           f.vehicles_per_hour);
    }
    return out + "</routes>\n";
}

PlannedRoute plan_route(const RoadNetwork& network, const VehicleRoute& route) {
    PlannedRoute plan;
    plan.id = route.id;
    for (const auto& id : route.edges) {
        auto edge = network.edge_index(id);
        if (!edge) throw ValidationError(fmt::format("route '{}' references unknown edge '{}'", route.id, id));
        plan.edges.push_back(*edge);
    }
    const std::size_t n = plan.edges.size();
    if (n == 0) throw ValidationError(fmt::format("route '{}' is empty", route.id));

    // feasible[k][lane]: the rest of the route can be driven from this lane without lane changes.
    std::vector<std::vector<bool>> feasible(n);
    feasible[n - 1].assign(static_cast<std::size_t>(network.edge(plan.edges[n - 1]).lane_count), true);
    for (std::size_t k = n - 1; k-- > 0;) {
        feasible[k].assign(static_cast<std::size_t>(network.edge(plan.edges[k]).lane_count), false);
        bool joined = false;
        for (std::size_t ci : network.outgoing(plan.edges[k])) {
            const Connection& c = network.connections()[ci];
            if (c.to_edge != route.edges[k + 1]) continue;
            joined = true;
            if (feasible[k + 1][static_cast<std::size_t>(c.to_lane)]) feasible[k][static_cast<std::size_t>(c.from_lane)] = true;
        }
        if (!joined) {
            throw ValidationError(fmt::format("route '{}': no connection from edge '{}' to edge '{}'", route.id,
                                              route.edges[k], route.edges[k + 1]));
        }
    }
    auto first = std::find(feasible[0].begin(), feasible[0].end(), true);
    if (first == feasible[0].end()) {
        throw ValidationError(fmt::format("route '{}' cannot be driven without lane changes", route.id));
    }
    plan.lanes.push_back(static_cast<int>(std::distance(feasible[0].begin(), first)));
    for (std::size_t k = 0; k + 1 < n; ++k) {
        for (std::size_t ci : network.outgoing(plan.edges[k])) {
            const Connection& c = network.connections()[ci];
            if (c.to_edge == route.edges[k + 1] && c.from_lane == plan.lanes[k] &&
                feasible[k + 1][static_cast<std::size_t>(c.to_lane)]) {
                plan.links.push_back(ci);
                plan.lanes.push_back(c.to_lane);
                break;
            }
        }
    }
    return plan;
}

std::vector<Departure> spawn_from_flows(std::span<const Flow> flows, double from, double to) {
    std::vector<Departure> out;
    for (std::size_t f = 0; f < flows.size(); ++f) {
        const Flow& flow = flows[f];
        const double period = flow.period();
        auto i = static_cast<std::size_t>(std::max(0.0, std::ceil((from - flow.begin) / period - kTimeEps)));
        for (;; ++i) {
            const double t = flow.begin + static_cast<double>(i) * period;
            if (t >= to - kTimeEps || t >= flow.end - kTimeEps) break;
            if (t < from - kTimeEps) continue;
            out.push_back(Departure{fmt::format("{}.{}", flow.id, i), f, t});
        }
    }
    return out;
}

Traffic::Traffic(const RoadNetwork& network, std::vector<PlannedRoute> routes, std::vector<VehicleType> types,
                 std::vector<Flow> flows, std::vector<std::size_t> flow_routes, double begin, double step_length,
                 std::uint64_t seed)
    : network_(&network),
      routes_(std::move(routes)),
      types_(std::move(types)),
      flows_(std::move(flows)),
      flow_routes_(std::move(flow_routes)),
      begin_(begin),
      clock_(begin),
      step_length_(step_length),
      seed_(seed) {
    if (flow_routes_.size() != flows_.size()) throw std::invalid_argument("one route index per flow required");
    if (std::none_of(types_.begin(), types_.end(), [](const VehicleType& t) { return t.id == "DEFAULT_VEHTYPE"; })) {
        types_.push_back(VehicleType{});
    }
    for (const auto& t : types_) {
        if (step_length_ > t.tau + kTimeEps) {
            throw ValidationError(fmt::format("step length {} exceeds tau {} of vType '{}'", step_length_, t.tau, t.id));
        }
    }
    for (const auto& r : routes_) {
        for (std::size_t edge : r.edges) {
            for (const auto& t : types_) {
                if (network.edge(edge).length < t.length) {
                    throw ValidationError(fmt::format("edge '{}' is shorter than vehicles of type '{}'",
                                                      network.edge(edge).id, t.id));
                }
            }
        }
    }
    for (const auto& f : flows_) flow_types_.push_back(type_index(f.type));
    flow_next_.assign(flows_.size(), 0);
    flow_pending_.resize(flows_.size());
    lanes_.resize(network.lane_total());
}

std::size_t Traffic::type_index(std::string_view id) const {
    for (std::size_t i = 0; i < types_.size(); ++i) {
        if (types_[i].id == id) return i;
    }
    throw ValidationError(fmt::format("unknown vType '{}'", id));
}

std::size_t Traffic::pending() const {
    std::size_t n = 0;
    for (const auto& q : flow_pending_) n += q.size();
    return n;
}

double Traffic::total_waiting_time() const {
    double total = arrived_wait_;
    for (const auto& v : vehicles_) total += v.accumulated_wait;
    return total;
}

std::span<const std::size_t> Traffic::lane_vehicles(LaneRef lane) const { return lanes_.at(network_->lane_slot(lane)); }

std::optional<std::size_t> Traffic::tail_of(LaneRef lane) const {
    const auto& on_lane = lanes_[network_->lane_slot(lane)];
    if (on_lane.empty()) return std::nullopt;
    return on_lane.back();
}

void Traffic::add_vehicle(Vehicle vehicle) {
    vehicle.rng = SplitMix64(seed_ ^ fnv1a(vehicle.id));
    insertion_order_.push_back(vehicle.id);
    vehicles_.push_back(std::move(vehicle));
    ++inserted_;
    rebuild_lanes();
}

bool Traffic::place(std::string id, std::size_t route, double pos, double speed, std::string_view type) {
    const PlannedRoute& plan = routes_.at(route);
    const VehicleType& vt = types_[type_index(type)];
    const LaneRef lane{plan.edges[0], plan.lanes[0]};
    if (pos < vt.length || pos > network_->edge(lane.edge).length) return false;
    for (std::size_t idx : lanes_[network_->lane_slot(lane)]) {
        const Vehicle& o = vehicles_[idx];
        const bool clear = (o.pos - o.type->length >= pos) || (pos - vt.length >= o.pos);
        if (!clear) return false;
    }
    Vehicle v;
    v.id = std::move(id);
    v.flow = std::numeric_limits<std::size_t>::max();
    v.route = route;
    v.lane = lane;
    v.pos = pos;
    v.speed = speed;
    v.depart = clock_;
    v.type = &vt;
    add_vehicle(std::move(v));
    return true;
}

void Traffic::insert_due() {
    for (std::size_t f = 0; f < flows_.size(); ++f) {
        const Flow& flow = flows_[f];
        for (;;) {
            const double t = flow.begin + static_cast<double>(flow_next_[f]) * flow.period();
            if (t > clock_ + kTimeEps || t >= flow.end - kTimeEps) break;
            flow_pending_[f].push_back(Departure{fmt::format("{}.{}", flow.id, flow_next_[f]), f, t});
            ++flow_next_[f];
        }
        while (!flow_pending_[f].empty()) {
            const PlannedRoute& plan = routes_[flow_routes_[f]];
            const VehicleType& vt = types_[flow_types_[f]];
            const LaneRef lane{plan.edges[0], plan.lanes[0]};
            if (auto tail = tail_of(lane)) {
                const Vehicle& t = vehicles_[*tail];
                if (t.pos - t.type->length < vt.length + vt.min_gap) break;
            }
            Vehicle v;
            v.id = flow_pending_[f].front().vehicle_id;
            v.flow = f;
            v.route = flow_routes_[f];
            v.lane = lane;
            v.pos = vt.length;
            v.speed = 0.0;
            v.depart = clock_;
            v.type = &vt;
            flow_pending_[f].pop_front();
            add_vehicle(std::move(v));
        }
    }
}

void Traffic::rebuild_lanes() {
    for (auto& lane : lanes_) lane.clear();
    for (std::size_t i = 0; i < vehicles_.size(); ++i) lanes_[network_->lane_slot(vehicles_[i].lane)].push_back(i);
    for (auto& lane : lanes_) {
        std::stable_sort(lane.begin(), lane.end(),
                         [&](std::size_t a, std::size_t b) { return vehicles_[a].pos > vehicles_[b].pos; });
    }
}

bool Traffic::may_pass(const Vehicle& v, char signal, double distance_to_line) const {
    switch (signal) {
        case 'G':
        case 'g':
            return true;
        case 'y':
            // Dilemma zone: only a vehicle unable to stop at comfortable decel keeps going.
            return v.speed * v.speed / (2.0 * v.type->decel) > distance_to_line;
        default:
            return false;
    }
}

double Traffic::desired_speed(const Vehicle& v, std::size_t lane_rank, const SignalView& signals) const {
    const VehicleType& t = *v.type;
    const PlannedRoute& plan = routes_[v.route];
    const Edge& edge = network_->edge(v.lane.edge);
    const auto& on_lane = lanes_[network_->lane_slot(v.lane)];

    double vdes = std::min({v.speed + t.accel * step_length_, t.max_speed, edge.speed_limit});
    if (lane_rank > 0) {
        const Vehicle& leader = vehicles_[on_lane[lane_rank - 1]];
        const double gap = leader.pos - leader.type->length - v.pos - t.min_gap;
        vdes = std::min(vdes, safe_speed(v.speed, leader.speed, std::max(0.0, gap), t.decel, t.tau));
    }
    if (v.route_pos + 1 < plan.edges.size()) {
        const double to_line = edge.length - v.pos;
        const char signal = signals ? signals(plan.links[v.route_pos]) : 'G';
        if (!may_pass(v, signal, to_line)) {
            vdes = std::min(vdes, safe_speed(v.speed, 0.0, to_line, t.decel, t.tau));
        } else if (lane_rank == 0) {
            const LaneRef next{plan.edges[v.route_pos + 1], plan.lanes[v.route_pos + 1]};
            if (auto tail = tail_of(next)) {
                const Vehicle& leader = vehicles_[*tail];
                const double gap = to_line + leader.pos - leader.type->length - t.min_gap;
                vdes = std::min(vdes, safe_speed(v.speed, leader.speed, std::max(0.0, gap), t.decel, t.tau));
            }
        }
    }
    return std::max(0.0, vdes);
}

std::vector<Move> Traffic::step(const SignalView& signals) {
    const double dt = step_length_;
    const std::size_t n = vehicles_.size();

    std::vector<double> desired(n, 0.0);
    for (const auto& on_lane : lanes_) {
        for (std::size_t rank = 0; rank < on_lane.size(); ++rank) {
            desired[on_lane[rank]] = desired_speed(vehicles_[on_lane[rank]], rank, signals);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        Vehicle& v = vehicles_[i];
        if (v.type->sigma > 0.0) {
            desired[i] = std::max(0.0, desired[i] - v.type->sigma * v.type->accel * dt * v.rng.uniform());
        }
    }

    // Lanes are processed in slot order and front to back, against the live
    // occupancy, so every leader is either already moved or still behind its
    // final position. The hard caps below therefore exclude any overlap.
    std::vector<Move> moves;
    moves.reserve(n);
    std::vector<bool> arrived(n, false);
    auto live = lanes_;
    const auto snapshot = lanes_;
    for (std::size_t slot = 0; slot < snapshot.size(); ++slot) {
        for (std::size_t idx : snapshot[slot]) {
            Vehicle& v = vehicles_[idx];
            const PlannedRoute& plan = routes_[v.route];
            const Edge& edge = network_->edge(v.lane.edge);
            const bool last_edge = v.route_pos + 1 == plan.edges.size();
            auto& here = live[slot];
            const auto rank = static_cast<std::size_t>(std::find(here.begin(), here.end(), idx) - here.begin());

            double room = std::numeric_limits<double>::infinity();
            std::optional<LaneRef> next;
            if (rank > 0) {
                const Vehicle& leader = vehicles_[here[rank - 1]];
                room = leader.pos - leader.type->length - v.pos;
            } else if (!last_edge) {
                const double to_line = edge.length - v.pos;
                const char signal = signals ? signals(plan.links[v.route_pos]) : 'G';
                if (!may_pass(v, signal, to_line)) {
                    room = to_line;
                } else {
                    next = LaneRef{plan.edges[v.route_pos + 1], plan.lanes[v.route_pos + 1]};
                    room = to_line + network_->edge(next->edge).length;
                    const auto& ahead = live[network_->lane_slot(*next)];
                    if (!ahead.empty()) {
                        const Vehicle& leader = vehicles_[ahead.back()];
                        room = std::min(room, to_line + leader.pos - leader.type->length);
                    }
                }
            }
            room = std::max(0.0, room);

            double speed = desired[idx];
            double advance = speed * dt;
            if (advance > room) {
                advance = room;
                speed = room / dt;
            }

            Move move{v.id, v.lane, v.pos, v.lane, v.pos + advance, speed};
            double new_pos = v.pos + advance;
            if (last_edge && new_pos >= edge.length) {
                arrived[idx] = true;
                move.to_lane.reset();
                move.to_pos = new_pos - edge.length;
                here.erase(here.begin());
            } else if (!last_edge && next && new_pos > edge.length) {
                const Edge& next_edge = network_->edge(next->edge);
                new_pos -= edge.length;
                here.erase(here.begin());
                live[network_->lane_slot(*next)].push_back(idx);
                ++v.route_pos;
                v.lane = *next;
                speed = std::min({speed, next_edge.speed_limit, v.type->max_speed});
                move.to_lane = v.lane;
                move.to_pos = new_pos;
            } else {
                new_pos = std::min(new_pos, edge.length);
                move.to_pos = new_pos;
            }
            v.pos = new_pos;
            v.speed = speed;
            move.speed = speed;
            if (speed < kHaltingSpeed) v.accumulated_wait += dt;
            moves.push_back(std::move(move));
        }
    }

    std::vector<Vehicle> remaining;
    remaining.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (arrived[i]) {
            ++arrived_;
            arrived_wait_ += vehicles_[i].accumulated_wait;
        } else {
            remaining.push_back(std::move(vehicles_[i]));
        }
    }
    vehicles_ = std::move(remaining);

    ++steps_;
    clock_ = begin_ + static_cast<double>(steps_) * step_length_;
    rebuild_lanes();
    insert_due();
    return moves;
}

}  // namespace vanetsim
