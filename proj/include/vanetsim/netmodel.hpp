#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vanetsim {

enum class NodeKind { plain, traffic_light };

struct Node {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    NodeKind kind = NodeKind::plain;

    bool operator==(const Node&) const = default;
};

struct Edge {
    std::string id;
    std::string from;
    std::string to;
    double length = 0.0;       // meters
    double speed_limit = 0.0;  // m/s
    int lane_count = 1;

    bool operator==(const Edge&) const = default;
};

/// A permitted movement from one lane to another. `tl_id` and `link_index`
/// are set together; the index addresses a character of the light's state string.
struct Connection {
    std::string from_edge;
    int from_lane = 0;
    std::string to_edge;
    int to_lane = 0;
    std::optional<std::string> tl_id;
    std::optional<int> link_index;

    bool operator==(const Connection&) const = default;
};

/// Parsed but not yet cross-checked contents of the node/edge/connection files.
struct PlainNetwork {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<Connection> connections;

    bool operator==(const PlainNetwork&) const = default;
};

/// Index-based lane address inside a RoadNetwork.
struct LaneRef {
    std::size_t edge = 0;
    int lane = 0;

    auto operator<=>(const LaneRef&) const = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Validated, immutable road graph. Only build_network() creates one.
class RoadNetwork {
public:
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Connection>& connections() const { return connections_; }

    /// Number of controlled links per traffic-light id.
    const std::map<std::string, int>& link_counts() const { return link_counts_; }

    std::optional<std::size_t> node_index(std::string_view id) const;
    std::optional<std::size_t> edge_index(std::string_view id) const;

    const Edge& edge(std::size_t index) const { return edges_.at(index); }
    const Node& node(std::size_t index) const { return nodes_.at(index); }

    /// Connection indices leaving `edge`, in document order.
    std::span<const std::size_t> outgoing(std::size_t edge) const { return outgoing_.at(edge); }

    /// Flattened lane numbering: [0, lane_total()).
    std::size_t lane_slot(LaneRef lane) const { return lane_offset_.at(lane.edge) + static_cast<std::size_t>(lane.lane); }
    std::size_t lane_total() const { return lane_total_; }
    LaneRef lane_at_slot(std::size_t slot) const;

    /// "<edge>_<lane>" in the SUMO style, e.g. "60263428#5_0".
    std::string lane_id(LaneRef lane) const;
    /// Resolves "<edge>_<lane>"; nullopt when the edge or lane does not exist.
    std::optional<LaneRef> find_lane(std::string_view lane_id) const;

    /// Planar position of a point `pos` meters along `edge`, interpolated
    /// between the endpoint nodes proportionally to the declared length.
    Point position(std::size_t edge, double pos) const;

private:
    friend RoadNetwork build_network(std::vector<Node>, std::vector<Edge>, std::vector<Connection>);

    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<Connection> connections_;
    std::map<std::string, int> link_counts_;
    std::map<std::string, std::size_t, std::less<>> node_by_id_;
    std::map<std::string, std::size_t, std::less<>> edge_by_id_;
    std::vector<std::vector<std::size_t>> outgoing_;
    std::vector<std::size_t> lane_offset_;
    std::size_t lane_total_ = 0;
    std::vector<std::size_t> edge_from_node_;
    std::vector<std::size_t> edge_to_node_;
};

/// Parses the three plain network documents. Document order is preserved and
/// unknown attributes or elements are ignored.
PlainNetwork parse_plain_network(std::string_view nodes_text, std::string_view edges_text,
                                 std::string_view connections_text);

std::vector<Node> parse_nodes(std::string_view text, std::string_view source = "nodes");
std::vector<Edge> parse_edges(std::string_view text, std::string_view source = "edges");
std::vector<Connection> parse_connections(std::string_view text, std::string_view source = "connections");

std::string write_nodes(std::span<const Node> nodes);
std::string write_edges(std::span<const Edge> edges);
std::string write_connections(std::span<const Connection> connections);

/// Checks references and per-light link indices, then indexes the graph.
/// Throws BuildError.
RoadNetwork build_network(std::vector<Node> nodes, std::vector<Edge> edges, std::vector<Connection> connections);

inline RoadNetwork build_network(PlainNetwork plain) {
    return build_network(std::move(plain.nodes), std::move(plain.edges), std::move(plain.connections));
}

}  // namespace vanetsim
