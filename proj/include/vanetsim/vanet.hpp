#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vanetsim {

/// Unit-disk radio with a fixed per-hop latency standing in for 802.11.
struct RadioConfig {
    double range = 250.0;            // meters
    double per_hop_latency = 0.01;   // seconds
    std::uint64_t packet_size = 4096;  // bits
    double cbr_rate = 4.0;           // packets/second
    int rreq_ttl = 16;               // hops
    double route_lifetime = 10.0;    // seconds
    double loss_probability = 0.0;   // per transmission
};

/// Explicit constant-bit-rate source/destination pair, by vehicle id.
struct CbrPair {
    std::string src;
    std::string dst;
};

struct NodePosition {
    double x = 0.0;
    double y = 0.0;
};

/// Sorted neighbor lists keyed by node id.
using Adjacency = std::map<std::string, std::vector<std::string>>;

/// Undirected unit-disk graph: an edge iff Euclidean distance <= range.
Adjacency connectivity_graph(const std::map<std::string, NodePosition>& positions, double range);

struct RouteEntry {
    std::string destination;
    std::string next_hop;
    int hop_count = 0;
    std::uint64_t dest_sequence_number = 0;
    double expires_at = 0.0;
    bool valid = true;
    std::set<std::string> precursors;

    bool operator==(const RouteEntry&) const = default;
};

/// Per-node AODV state.
struct AodvNode {
    std::uint64_t sequence_number = 0;
    std::uint64_t rreq_id = 0;
    std::map<std::string, RouteEntry> routes;

    bool operator==(const AodvNode&) const = default;
};

using RoutingTables = std::map<std::string, AodvNode>;

enum class NetEventKind { sent, forwarded, delivered, dropped, rreq, rrep, rerr };

std::string_view to_string(NetEventKind kind);
std::optional<NetEventKind> parse_net_event_kind(std::string_view text);

struct NetEvent {
    double t = 0.0;
    NetEventKind kind = NetEventKind::sent;
    std::string packet_src;
    std::uint64_t packet_seq = 0;
    std::string node;
    std::string detail;
    std::uint64_t bits = 0;  // delivered payload size; zero for other events
    int hops = 0;

    bool operator==(const NetEvent&) const = default;
};

struct NetMetrics {
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
    double pdf = 0.0;
    double avg_packets_per_s = 0.0;
    double avg_bits_per_s = 0.0;

    bool operator==(const NetMetrics&) const = default;
};

/// Delivery fraction and rates from an event log. pdf is 0 when nothing was sent.
NetMetrics compute_metrics(std::span<const NetEvent> events, double duration);

struct DiscoveryResult {
    bool found = false;
    std::string next_hop;
    int hop_count = 0;
    std::string replier;
};

/// Floods an RREQ breadth-first from `src` over `graph` (duplicates suppressed,
/// TTL-limited, equal-hop ties broken by the lexicographically smallest
/// neighbor), installs reverse routes on the way out and forward routes along
/// the RREP path back. The exchange completes within the current instant.
DiscoveryResult aodv_discover(const std::string& src, const std::string& dst, const Adjacency& graph,
                              RoutingTables& tables, double clock, const RadioConfig& radio,
                              std::vector<NetEvent>* events = nullptr);

/// Event log CSV: `t,event,packet_src,packet_seq,node,detail`.
void write_event_log(std::ostream& out, std::span<const NetEvent> events);
std::vector<NetEvent> read_event_log(std::istream& in);
void write_event_row(std::ostream& out, const NetEvent& e);
inline constexpr std::string_view kEventLogHeader = "t,event,packet_src,packet_seq,node,detail";

/// CBR traffic plus AODV forwarding over a changing unit-disk graph.
class NetworkLayer {
public:
    /// With no explicit pairs, one flow runs from the earliest-inserted to the
    /// latest-inserted active vehicle, re-resolved at every emission.
    NetworkLayer(RadioConfig radio, std::vector<CbrPair> pairs, double begin, std::uint64_t seed);

    const RadioConfig& radio() const { return radio_; }
    const RoutingTables& tables() const { return tables_; }
    const std::vector<NetEvent>& events() const { return events_; }
    std::size_t in_flight() const { return packets_.size(); }

    /// Emits CBR packets due in [t, t + dt) and forwards every in-flight packet
    /// as far as its per-hop latency allows within the window, using the
    /// topology of `positions`. `active` lists vehicles in insertion order.
    /// Returns the number of events appended.
    std::size_t network_step(double t, double dt, const std::map<std::string, NodePosition>& positions,
                             std::span<const std::string> active);

    NetMetrics metrics(double duration) const { return compute_metrics(events_, duration); }

private:
    struct Packet {
        std::string src;
        std::uint64_t seq = 0;
        std::string dst;
        std::uint64_t bits = 0;
        double created_at = 0.0;
        std::string holder;
        double ready_at = 0.0;
        int hops = 0;
        bool rediscovered = false;
    };

    void emit(double t, double dt, std::span<const std::string> active, const std::set<std::string>& present);
    /// Forwards one packet; returns true when it left the network.
    bool advance(Packet& p, double window_end, const Adjacency& graph, const std::set<std::string>& present);
    void drop(const Packet& p, double t, const std::string& node, const std::string& reason);
    void break_link(const std::string& node, const std::string& lost_neighbor, double t, const Packet& cause);
    double next_uniform();

    RadioConfig radio_;
    std::vector<CbrPair> pairs_;
    double begin_;
    std::uint64_t rng_state_;
    std::vector<std::uint64_t> emitted_;  // emission slot counter per pair
    std::map<std::string, std::uint64_t> source_seq_;
    RoutingTables tables_;
    std::vector<Packet> packets_;
    std::vector<NetEvent> events_;
};

}  // namespace vanetsim
