#include "vanetsim/netmodel.hpp"

#include "vanetsim/error.hpp"
#include "xml.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace vanetsim {

namespace {

int lane_attribute(const xml::Element& e, std::string_view key) {
    const long long lane = e.required_integer(key);
    if (lane < 0) e.fail(fmt::format("attribute '{}' must be a non-negative lane index", key));
    return static_cast<int>(lane);
}

}  // namespace

std::vector<Node> parse_nodes(std::string_view text, std::string_view source) {
    std::vector<Node> nodes;
    xml::for_each(xml::parse(text, source), "node", source, [&](const xml::Element& e) {
        Node node;
        node.id = e.required("id");
        if (node.id.empty()) e.fail("attribute 'id' must not be empty");
        node.x = e.required_number("x");
        node.y = e.required_number("y");
        // Any SUMO traffic_light* type counts as signalised; everything else is plain.
        node.kind = e.attr("type").value_or("").starts_with("traffic_light") ? NodeKind::traffic_light
                                                                            : NodeKind::plain;
        nodes.push_back(std::move(node));
    });
    return nodes;
}

std::vector<Edge> parse_edges(std::string_view text, std::string_view source) {
    std::vector<Edge> edges;
    xml::for_each(xml::parse(text, source), "edge", source, [&](const xml::Element& e) {
        Edge edge;
        edge.id = e.required("id");
        if (edge.id.empty()) e.fail("attribute 'id' must not be empty");
        edge.from = e.required("from");
        edge.to = e.required("to");
        edge.length = e.required_number("length");
        edge.speed_limit = e.required_number("speed");
        edge.lane_count = static_cast<int>(e.integer("numLanes").value_or(1));
        if (edge.from == edge.to) e.fail(fmt::format("self-loop: from and to are both '{}'", edge.from));
        if (edge.length <= 0.0) e.fail("attribute 'length' must be positive");
        if (edge.speed_limit <= 0.0) e.fail("attribute 'speed' must be positive");
        if (edge.lane_count < 1) e.fail("attribute 'numLanes' must be at least 1");
        edges.push_back(std::move(edge));
    });
    return edges;
}

std::vector<Connection> parse_connections(std::string_view text, std::string_view source) {
    std::vector<Connection> connections;
    xml::for_each(xml::parse(text, source), "connection", source, [&](const xml::Element& e) {
        Connection c;
        c.from_edge = e.required("from");
        c.to_edge = e.required("to");
        c.from_lane = lane_attribute(e, "fromLane");
        c.to_lane = lane_attribute(e, "toLane");
        if (auto tl = e.attr("tl")) {
            c.tl_id = *tl;
            const long long index = e.required_integer("linkIndex");
            if (index < 0) e.fail("attribute 'linkIndex' must be non-negative");
            c.link_index = static_cast<int>(index);
        } else if (e.attr("linkIndex")) {
            e.fail("attribute 'linkIndex' given without 'tl'");
        }
        connections.push_back(std::move(c));
    });
    return connections;
}

PlainNetwork parse_plain_network(std::string_view nodes_text, std::string_view edges_text,
                                 std::string_view connections_text) {
    return PlainNetwork{parse_nodes(nodes_text), parse_edges(edges_text), parse_connections(connections_text)};
}

std::string write_nodes(std::span<const Node> nodes) {
    std::string out = "<nodes>\n";
    for (const auto& n : nodes) {
        out += fmt::format("    <node id=\"{}\" x=\"{}\" y=\"{}\"{}/>\n", xml::escape(n.id), n.x, n.y,
                           n.kind == NodeKind::traffic_light ? " type=\"traffic_light\"" : "");
    }
    return out + "</nodes>\n";
}

std::string write_edges(std::span<const Edge> edges) {
    std::string out = "<edges>\n";
    for (const auto& e : edges) {
        out += fmt::format("    <edge id=\"{}\" from=\"{}\" to=\"{}\" length=\"{}\" speed=\"{}\" numLanes=\"{}\"/>\n",
                           xml::escape(e.id), xml::escape(e.from), xml::escape(e.to), e.length, e.speed_limit,
                           e.lane_count);
    }
    return out + "</edges>\n";
}

std::string write_connections(std::span<const Connection> connections) {
    std::string out = "<connections>\n";
    for (const auto& c : connections) {
        out += fmt::format("    <connection from=\"{}\" to=\"{}\" fromLane=\"{}\" toLane=\"{}\"", xml::escape(c.from_edge),
                           xml::escape(c.to_edge), c.from_lane, c.to_lane);
        if (c.tl_id) out += fmt::format(" tl=\"{}\" linkIndex=\"{}\"", xml::escape(*c.tl_id), c.link_index.value_or(0));
        out += "/>\n";
    }
    return out + "</connections>\n";
}

std::optional<std::size_t> RoadNetwork::node_index(std::string_view id) const {
    auto it = node_by_id_.find(id);
    if (it == node_by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> RoadNetwork::edge_index(std::string_view id) const {
    auto it = edge_by_id_.find(id);
    if (it == edge_by_id_.end()) return std::nullopt;
    return it->second;
}

LaneRef RoadNetwork::lane_at_slot(std::size_t slot) const {
    auto it = std::upper_bound(lane_offset_.begin(), lane_offset_.end(), slot);
    const auto edge = static_cast<std::size_t>(std::distance(lane_offset_.begin(), it)) - 1;
    return LaneRef{edge, static_cast<int>(slot - lane_offset_[edge])};
}

std::string RoadNetwork::lane_id(LaneRef lane) const { return fmt::format("{}_{}", edges_.at(lane.edge).id, lane.lane); }

std::optional<LaneRef> RoadNetwork::find_lane(std::string_view lane_id) const {
    const auto split = lane_id.rfind('_');
    if (split == std::string_view::npos) return std::nullopt;
    auto edge = edge_index(lane_id.substr(0, split));
    if (!edge) return std::nullopt;
    const auto digits = lane_id.substr(split + 1);
    int lane = -1;
    auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), lane);
    if (ec != std::errc{} || end != digits.data() + digits.size()) return std::nullopt;
    if (lane < 0 || lane >= edges_[*edge].lane_count) return std::nullopt;
    return LaneRef{*edge, lane};
}

Point RoadNetwork::position(std::size_t edge, double pos) const {
    const Node& a = nodes_[edge_from_node_.at(edge)];
    const Node& b = nodes_[edge_to_node_.at(edge)];
    const double f = std::clamp(pos / edges_[edge].length, 0.0, 1.0);
    return Point{a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f};
}

RoadNetwork build_network(std::vector<Node> nodes, std::vector<Edge> edges, std::vector<Connection> connections) {
    RoadNetwork net;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        if (n.id.empty()) throw BuildError("node with empty id");
        if (!std::isfinite(n.x) || !std::isfinite(n.y)) throw BuildError(fmt::format("node '{}': non-finite coordinates", n.id));
        if (!net.node_by_id_.emplace(n.id, i).second) throw BuildError(fmt::format("duplicate node id '{}'", n.id));
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.id.empty()) throw BuildError("edge with empty id");
        if (!net.edge_by_id_.emplace(e.id, i).second) throw BuildError(fmt::format("duplicate edge id '{}'", e.id));
        auto from = net.node_by_id_.find(e.from);
        auto to = net.node_by_id_.find(e.to);
        if (from == net.node_by_id_.end()) throw BuildError(fmt::format("edge '{}' references unknown node '{}'", e.id, e.from));
        if (to == net.node_by_id_.end()) throw BuildError(fmt::format("edge '{}' references unknown node '{}'", e.id, e.to));
        if (e.from == e.to) throw BuildError(fmt::format("edge '{}' is a self-loop", e.id));
        if (!(e.length > 0.0) || !(e.speed_limit > 0.0) || e.lane_count < 1) {
            throw BuildError(fmt::format("edge '{}': length, speed and lane count must be positive", e.id));
        }
        net.edge_from_node_.push_back(from->second);
        net.edge_to_node_.push_back(to->second);
        net.lane_offset_.push_back(net.lane_total_);
        net.lane_total_ += static_cast<std::size_t>(e.lane_count);
    }

    net.outgoing_.resize(edges.size());
    std::map<std::string, std::set<int>> indices;
    for (std::size_t i = 0; i < connections.size(); ++i) {
        const Connection& c = connections[i];
        auto from = net.edge_by_id_.find(c.from_edge);
        auto to = net.edge_by_id_.find(c.to_edge);
        if (from == net.edge_by_id_.end()) throw BuildError(fmt::format("connection references unknown edge '{}'", c.from_edge));
        if (to == net.edge_by_id_.end()) throw BuildError(fmt::format("connection references unknown edge '{}'", c.to_edge));
        const Edge& fe = edges[from->second];
        const Edge& te = edges[to->second];
        if (c.from_lane < 0 || c.from_lane >= fe.lane_count) {
            throw BuildError(fmt::format("connection {}->{}: fromLane {} out of range (edge has {} lanes)", c.from_edge,
                                         c.to_edge, c.from_lane, fe.lane_count));
        }
        if (c.to_lane < 0 || c.to_lane >= te.lane_count) {
            throw BuildError(fmt::format("connection {}->{}: toLane {} out of range (edge has {} lanes)", c.from_edge,
                                         c.to_edge, c.to_lane, te.lane_count));
        }
        if (fe.to != te.from) {
            throw BuildError(fmt::format("connection {}->{} does not meet at a junction ('{}' ends at '{}', '{}' starts at '{}')",
                                         c.from_edge, c.to_edge, fe.id, fe.to, te.id, te.from));
        }
        if (c.tl_id.has_value() != c.link_index.has_value()) {
            throw BuildError(fmt::format("connection {}->{}: tl and linkIndex must be given together", c.from_edge, c.to_edge));
        }
        if (c.tl_id) {
            auto tl = net.node_by_id_.find(*c.tl_id);
            if (tl == net.node_by_id_.end() || nodes[tl->second].kind != NodeKind::traffic_light) {
                throw BuildError(fmt::format("connection {}->{} references unknown traffic light '{}'", c.from_edge,
                                             c.to_edge, *c.tl_id));
            }
            if (!indices[*c.tl_id].insert(*c.link_index).second) {
                throw BuildError(fmt::format("traffic light '{}': duplicate linkIndex {}", *c.tl_id, *c.link_index));
            }
        }
        net.outgoing_[from->second].push_back(i);
    }

    for (const auto& [tl, used] : indices) {
        const int highest = *used.rbegin();
        std::vector<int> gaps;
        for (int k = 0; k <= highest; ++k) {
            if (!used.contains(k)) gaps.push_back(k);
        }
        if (!gaps.empty()) {
            throw BuildError(fmt::format("traffic light '{}': link indices not contiguous from 0, missing {}", tl,
                                         fmt::join(gaps, ",")));
        }
        net.link_counts_[tl] = highest + 1;
    }
    for (const Node& n : nodes) {
        if (n.kind == NodeKind::traffic_light && !net.link_counts_.contains(n.id)) {
            throw BuildError(fmt::format("traffic light '{}' controls no connection", n.id));
        }
    }

    net.nodes_ = std::move(nodes);
    net.edges_ = std::move(edges);
    net.connections_ = std::move(connections);
    return net;
}

}  // namespace vanetsim
