#pragma once

#include "vanetsim/netmodel.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vanetsim {

/// Driver/vehicle parameters of the safe-speed car-following model.
struct VehicleType {
    std::string id = "DEFAULT_VEHTYPE";
    double accel = 2.6;       // m/s^2
    double decel = 4.5;       // m/s^2
    double tau = 1.0;         // s
    double length = 5.0;      // m
    double min_gap = 2.5;     // m
    double max_speed = 55.55; // m/s
    double sigma = 0.0;       // driver imperfection in [0,1]

    bool operator==(const VehicleType&) const = default;
};

struct VehicleRoute {
    std::string id;
    std::vector<std::string> edges;

    bool operator==(const VehicleRoute&) const = default;
};

struct Flow {
    std::string id;
    std::string route;
    std::string type = "DEFAULT_VEHTYPE";
    double begin = 0.0;
    double end = 0.0;
    double vehicles_per_hour = 0.0;

    /// Headway between consecutive departures, seconds.
    double period() const { return 3600.0 / vehicles_per_hour; }

    bool operator==(const Flow&) const = default;
};

struct RouteFile {
    std::vector<VehicleType> types;
    std::vector<VehicleRoute> routes;
    std::vector<Flow> flows;

    bool operator==(const RouteFile&) const = default;
};

/// Parses `<vType>`, `<route>` and `<flow>` elements. Route edges are only
/// checked against a network later, when the scenario is assembled.
RouteFile parse_routes(std::string_view text, std::string_view source = "routes");
std::string write_routes(const RouteFile& routes);

/// A route resolved against a network: edge indices, the lane driven on each
/// edge and the connection used to leave every edge but the last.
struct PlannedRoute {
    std::string id;
    std::vector<std::size_t> edges;
    std::vector<int> lanes;
    std::vector<std::size_t> links;
};

/// Resolves a route to a lane chain without lane changes. Throws
/// ValidationError when an edge is unknown or consecutive edges are not joined
/// by a connection chain.
PlannedRoute plan_route(const RoadNetwork& network, const VehicleRoute& route);

/// Krauss safe speed, floored at zero.
double safe_speed(double v, double v_leader, double gap, double decel, double tau);

/// Speed below which a vehicle counts as halting.
inline constexpr double kHaltingSpeed = 0.1;

/// SplitMix64; portable and cheap to seed per vehicle.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

private:
    std::uint64_t state_;
};

struct Vehicle {
    std::string id;
    std::size_t flow = 0;
    std::size_t route = 0;       // index into the planned routes
    std::size_t route_pos = 0;   // index into the route's edges
    LaneRef lane;
    double pos = 0.0;            // front bumper, meters from edge start
    double speed = 0.0;
    double depart = 0.0;
    double accumulated_wait = 0.0;
    const VehicleType* type = nullptr;
    SplitMix64 rng{0};
};

/// One departure scheduled by a flow.
struct Departure {
    std::string vehicle_id;
    std::size_t flow = 0;
    double time = 0.0;
};

/// Departures from every flow with time in [from, to), flow by flow in
/// document order. Vehicle i of a flow departs at begin + i * period.
std::vector<Departure> spawn_from_flows(std::span<const Flow> flows, double from, double to);

/// Displacement of one vehicle during a step. `to_lane` is empty on arrival.
struct Move {
    std::string vehicle_id;
    LaneRef from_lane;
    double from_pos = 0.0;
    std::optional<LaneRef> to_lane;
    double to_pos = 0.0;
    double speed = 0.0;
};

/// Signal character ('G', 'g', 'y', 'r') for a connection index, or 'G'
/// when the connection is not signalised.
using SignalView = std::function<char(std::size_t connection)>;

/// Microscopic traffic state: clock, active vehicles, pending insertions and
/// the counters behind the conservation invariant.
class Traffic {
public:
    Traffic(const RoadNetwork& network, std::vector<PlannedRoute> routes, std::vector<VehicleType> types,
            std::vector<Flow> flows, std::vector<std::size_t> flow_routes, double begin, double step_length,
            std::uint64_t seed);

    Traffic(const Traffic&) = delete;
    Traffic& operator=(const Traffic&) = delete;

    const RoadNetwork& network() const { return *network_; }
    double clock() const { return clock_; }
    double step_length() const { return step_length_; }
    std::uint64_t steps() const { return steps_; }

    /// Active vehicles in insertion order.
    const std::vector<Vehicle>& vehicles() const { return vehicles_; }
    const PlannedRoute& route(std::size_t index) const { return routes_.at(index); }

    std::size_t inserted() const { return inserted_; }
    std::size_t arrived() const { return arrived_; }
    std::size_t pending() const;
    /// Ids in insertion order, including vehicles that have since arrived.
    const std::vector<std::string>& insertion_order() const { return insertion_order_; }
    /// Accumulated waiting time over active and arrived vehicles.
    double total_waiting_time() const;

    /// Vehicle indices on a lane, front (largest pos) first.
    std::span<const std::size_t> lane_vehicles(LaneRef lane) const;

    /// Adds a vehicle directly on the first edge of `route`; used by fixtures
    /// that need a hand-placed state. Returns false when it would overlap
    /// another vehicle on that lane.
    bool place(std::string id, std::size_t route, double pos, double speed,
               std::string_view type = "DEFAULT_VEHTYPE");

    /// Inserts every due departure whose entry lane is free; blocked ones stay queued.
    void insert_due();

    /// Advances all vehicles by one step and the clock by step_length, then
    /// inserts due departures. Returns the displacement of every vehicle that moved.
    std::vector<Move> step(const SignalView& signals);

private:
    double desired_speed(const Vehicle& v, std::size_t lane_rank, const SignalView& signals) const;
    bool may_pass(const Vehicle& v, char signal, double distance_to_line) const;
    void add_vehicle(Vehicle vehicle);
    std::size_t type_index(std::string_view id) const;
    void rebuild_lanes();
    std::optional<std::size_t> tail_of(LaneRef lane) const;

    const RoadNetwork* network_;
    std::vector<PlannedRoute> routes_;
    std::vector<VehicleType> types_;
    std::vector<Flow> flows_;
    std::vector<std::size_t> flow_routes_;
    std::vector<std::size_t> flow_types_;
    std::vector<std::size_t> flow_next_;
    std::vector<std::deque<Departure>> flow_pending_;
    double begin_;
    double clock_;
    double step_length_;
    std::uint64_t steps_ = 0;
    std::uint64_t seed_;
    std::vector<Vehicle> vehicles_;
    std::vector<std::vector<std::size_t>> lanes_;
    std::vector<std::string> insertion_order_;
    std::size_t inserted_ = 0;
    std::size_t arrived_ = 0;
    double arrived_wait_ = 0.0;
};

/// Convenience wrapper matching the one-step update: advances `state` by one step.
inline std::vector<Move> step_vehicles(Traffic& state, const SignalView& signals) { return state.step(signals); }

}  // namespace vanetsim
