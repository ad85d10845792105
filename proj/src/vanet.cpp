#include "vanetsim/vanet.hpp"

#include "vanetsim/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace vanetsim {

namespace {

constexpr double kTimeEps = 1e-9;

const std::vector<std::string>& neighbors_of(const Adjacency& graph, const std::string& node) {
    static const std::vector<std::string> none;
    auto it = graph.find(node);
    return it == graph.end() ? none : it->second;
}

bool adjacent(const Adjacency& graph, const std::string& a, const std::string& b) {
    const auto& n = neighbors_of(graph, a);
    return std::binary_search(n.begin(), n.end(), b);
}

std::optional<std::string_view> detail_value(std::string_view detail, std::string_view key) {
    std::size_t start = 0;
    while (start <= detail.size()) {
        std::size_t stop = start;
        while (stop < detail.size() && detail[stop] != ';') ++stop;
        const auto item = detail.substr(start, stop - start);
        if (item.size() > key.size() && item.substr(0, key.size()) == key && item[key.size()] == '=') {
            return item.substr(key.size() + 1);
        }
        start = stop + 1;
    }
    return std::nullopt;
}

template <typename T>
T parse_field(std::string_view text, std::string_view what) {
    T value{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw SchemaError(fmt::format("event log: bad {} '{}'", what, text));
    }
    return value;
}

}  // namespace

Adjacency connectivity_graph(const std::map<std::string, NodePosition>& positions, double range) {
    if (!(range > 0)) throw std::invalid_argument("radio range must be positive");
    Adjacency graph;
    for (const auto& [id, _] : positions) graph[id];
    const double limit = range * range;
    for (auto a = positions.begin(); a != positions.end(); ++a) {
        for (auto b = std::next(a); b != positions.end(); ++b) {
            const double dx = a->second.x - b->second.x;
            const double dy = a->second.y - b->second.y;
            if (dx * dx + dy * dy <= limit) {
                graph[a->first].push_back(b->first);
                graph[b->first].push_back(a->first);
            }
        }
    }
    return graph;
}

std::string_view to_string(NetEventKind kind) {
    switch (kind) {
        case NetEventKind::sent: return "SENT";
        case NetEventKind::forwarded: return "FORWARDED";
        case NetEventKind::delivered: return "DELIVERED";
        case NetEventKind::dropped: return "DROPPED";
        case NetEventKind::rreq: return "RREQ";
        case NetEventKind::rrep: return "RREP";
        case NetEventKind::rerr: return "RERR";
    }
    return "SENT";
}

std::optional<NetEventKind> parse_net_event_kind(std::string_view text) {
    for (auto kind : {NetEventKind::sent, NetEventKind::forwarded, NetEventKind::delivered, NetEventKind::dropped,
                      NetEventKind::rreq, NetEventKind::rrep, NetEventKind::rerr}) {
        if (to_string(kind) == text) return kind;
    }
    return std::nullopt;
}

NetMetrics compute_metrics(std::span<const NetEvent> events, double duration) {
    if (!(duration > 0)) throw std::invalid_argument("metrics duration must be positive");
    NetMetrics m;
    std::uint64_t bits = 0;
    for (const auto& e : events) {
        if (e.kind == NetEventKind::sent) ++m.sent;
        if (e.kind == NetEventKind::delivered) {
            ++m.received;
            bits += e.bits;
        }
    }
    m.pdf = m.sent > 0 ? static_cast<double>(m.received) / static_cast<double>(m.sent) : 0.0;
    m.avg_packets_per_s = static_cast<double>(m.received) / duration;
    m.avg_bits_per_s = static_cast<double>(bits) / duration;
    return m;
}

DiscoveryResult aodv_discover(const std::string& src, const std::string& dst, const Adjacency& graph,
                              RoutingTables& tables, double clock, const RadioConfig& radio,
                              std::vector<NetEvent>* events) {
    if (src == dst) throw std::invalid_argument("route discovery needs distinct endpoints");
    // A failed flood leaves every table as it was: remember what it touches.
    const bool had_origin = tables.contains(src);
    std::vector<std::pair<std::string, std::optional<RouteEntry>>> undo;
    AodvNode& origin = tables[src];
    const AodvNode origin_counters{origin.sequence_number, origin.rreq_id, {}};
    ++origin.sequence_number;
    const std::uint64_t rreq_id = ++origin.rreq_id;
    std::uint64_t known_dst_seq = 0;
    if (auto it = origin.routes.find(dst); it != origin.routes.end()) known_dst_seq = it->second.dest_sequence_number;

    std::map<std::string, std::string> parent;
    std::set<std::string> visited{src};
    std::vector<std::string> frontier{src};
    std::string replier;
    int level = 0;
    int remaining = 0;
    std::uint64_t reply_seq = 0;

    while (!frontier.empty() && level < radio.rreq_ttl && graph.contains(src)) {
        ++level;
        // The frontier is sorted, so the first sender seen is the smallest id.
        std::map<std::string, std::string> reached;
        for (const auto& x : frontier) {
            for (const auto& y : neighbors_of(graph, x)) {
                if (!visited.contains(y)) reached.emplace(y, x);
            }
        }
        std::vector<std::string> next;
        for (const auto& [y, via] : reached) {
            visited.insert(y);
            parent[y] = via;
            next.push_back(y);
            auto& routes = tables[y].routes;
            auto old = routes.find(src);
            undo.emplace_back(y, old == routes.end() ? std::nullopt : std::optional<RouteEntry>(old->second));
            RouteEntry& reverse = routes[src];
            reverse.destination = src;
            reverse.next_hop = via;
            reverse.hop_count = level;
            reverse.dest_sequence_number = origin.sequence_number;
            reverse.expires_at = clock + radio.route_lifetime;
            reverse.valid = true;
        }
        if (reached.contains(dst)) {
            replier = dst;
            AodvNode& target = tables[dst];
            target.sequence_number = std::max(target.sequence_number + 1, known_dst_seq);
            reply_seq = target.sequence_number;
            break;
        }
        // Otherwise the best intermediate holding a fresh route answers.
        std::tuple<int, std::string> best{0, ""};
        for (const auto& y : next) {
            auto& routes = tables[y].routes;
            auto it = routes.find(dst);
            if (it == routes.end()) continue;
            const RouteEntry& r = it->second;
            if (!r.valid || r.expires_at < clock || r.dest_sequence_number < known_dst_seq) continue;
            std::tuple<int, std::string> candidate{level + r.hop_count, y};
            if (replier.empty() || candidate < best) {
                best = candidate;
                replier = y;
            }
        }
        if (!replier.empty()) {
            RouteEntry& r = tables[replier].routes[dst];
            remaining = r.hop_count;
            reply_seq = r.dest_sequence_number;
            r.precursors.insert(parent[replier]);
            break;
        }
        frontier = std::move(next);
    }

    DiscoveryResult result;
    if (replier.empty()) {
        for (auto it = undo.rbegin(); it != undo.rend(); ++it) {
            auto& node = tables[it->first];
            if (it->second) {
                node.routes[src] = *it->second;
            } else {
                node.routes.erase(src);
                if (node.routes.empty() && node.sequence_number == 0 && node.rreq_id == 0) tables.erase(it->first);
            }
        }
        if (had_origin) {
            tables[src].sequence_number = origin_counters.sequence_number;
            tables[src].rreq_id = origin_counters.rreq_id;
        } else {
            tables.erase(src);
        }
        if (events) {
            events->push_back(NetEvent{clock, NetEventKind::rreq, src, rreq_id, src,
                                       fmt::format("dst={};id={};result=failed", dst, rreq_id)});
        }
        return result;
    }

    std::vector<std::string> path{replier};
    while (path.back() != src) path.push_back(parent.at(path.back()));
    std::reverse(path.begin(), path.end());  // src ... replier
    const int hops_to_replier = static_cast<int>(path.size()) - 1;
    if (events) {
        events->push_back(NetEvent{clock, NetEventKind::rreq, src, rreq_id, src,
                                   fmt::format("dst={};id={};result=found;hops={}", dst, rreq_id,
                                               hops_to_replier + remaining)});
    }
    for (int j = hops_to_replier - 1; j >= 0; --j) {
        const auto& node = path[static_cast<std::size_t>(j)];
        const auto& toward = path[static_cast<std::size_t>(j) + 1];
        RouteEntry& forward = tables[node].routes[dst];
        forward.destination = dst;
        forward.next_hop = toward;
        forward.hop_count = hops_to_replier - j + remaining;
        forward.dest_sequence_number = reply_seq;
        forward.expires_at = clock + radio.route_lifetime;
        forward.valid = true;
        if (j > 0) forward.precursors.insert(path[static_cast<std::size_t>(j) - 1]);
        if (events) {
            events->push_back(NetEvent{clock, NetEventKind::rrep, src, rreq_id, toward,
                                       fmt::format("dst={};to={};hops={}", dst, node, forward.hop_count)});
        }
    }
    result.found = true;
    result.next_hop = path[1];
    result.hop_count = hops_to_replier + remaining;
    result.replier = replier;
    return result;
}

void write_event_row(std::ostream& out, const NetEvent& e) {
    out << fmt::format("{:.6f},{},{},{},{},{}\n", e.t, to_string(e.kind), e.packet_src, e.packet_seq, e.node, e.detail);
}

void write_event_log(std::ostream& out, std::span<const NetEvent> events) {
    out << kEventLogHeader << '\n';
    for (const auto& e : events) write_event_row(out, e);
}

std::vector<NetEvent> read_event_log(std::istream& in) {
    std::vector<NetEvent> events;
    std::string line;
    if (!std::getline(in, line) || line != kEventLogHeader) throw SchemaError("event log: missing or wrong header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        for (int i = 0; i < 5; ++i) {
            const auto comma = rest.find(',');
            if (comma == std::string_view::npos) throw SchemaError(fmt::format("event log: short row '{}'", line));
            fields.push_back(rest.substr(0, comma));
            rest.remove_prefix(comma + 1);
        }
        fields.push_back(rest);
        NetEvent e;
        e.t = parse_field<double>(fields[0], "time");
        auto kind = parse_net_event_kind(fields[1]);
        if (!kind) throw SchemaError(fmt::format("event log: unknown event '{}'", fields[1]));
        e.kind = *kind;
        e.packet_src = std::string(fields[2]);
        e.packet_seq = parse_field<std::uint64_t>(fields[3], "sequence");
        e.node = std::string(fields[4]);
        e.detail = std::string(fields[5]);
        if (e.kind == NetEventKind::delivered) {
            if (auto bits = detail_value(e.detail, "bits")) e.bits = parse_field<std::uint64_t>(*bits, "bits");
            if (auto hops = detail_value(e.detail, "hops")) e.hops = parse_field<int>(*hops, "hops");
        }
        events.push_back(std::move(e));
    }
    return events;
}

NetworkLayer::NetworkLayer(RadioConfig radio, std::vector<CbrPair> pairs, double begin, std::uint64_t seed)
    : radio_(radio), pairs_(std::move(pairs)), begin_(begin), rng_state_(seed ^ 0x6a09e667f3bcc909ull) {
    emitted_.assign(std::max<std::size_t>(1, pairs_.size()), 0);
}

double NetworkLayer::next_uniform() {
    std::uint64_t z = (rng_state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

void NetworkLayer::emit(double t, double dt, std::span<const std::string> active, const std::set<std::string>& present) {
    const double period = 1.0 / radio_.cbr_rate;
    struct Due {
        double time;
        std::size_t pair;
    };
    std::vector<Due> due;
    for (std::size_t k = 0; k < emitted_.size(); ++k) {
        for (;;) {
            const double when = begin_ + static_cast<double>(emitted_[k]) * period;
            if (when >= t + dt - kTimeEps) break;
            ++emitted_[k];
            if (when < t - kTimeEps) continue;
            due.push_back(Due{when, k});
        }
    }
    std::stable_sort(due.begin(), due.end(), [](const Due& a, const Due& b) { return a.time < b.time; });

    for (const auto& d : due) {
        std::string src;
        std::string dst;
        if (pairs_.empty()) {
            if (active.size() < 2) continue;
            src = active.front();
            dst = active.back();
        } else {
            const CbrPair& pair = pairs_[d.pair];
            if (!present.contains(pair.src) || !present.contains(pair.dst)) continue;
            src = pair.src;
            dst = pair.dst;
        }
        Packet p;
        p.src = src;
        p.seq = source_seq_[src]++;
        p.dst = dst;
        p.bits = radio_.packet_size;
        p.created_at = d.time;
        p.holder = src;
        p.ready_at = d.time;
        events_.push_back(NetEvent{d.time, NetEventKind::sent, p.src, p.seq, p.src,
                                   fmt::format("dst={};bits={}", p.dst, p.bits)});
        packets_.push_back(std::move(p));
    }
}

void NetworkLayer::drop(const Packet& p, double t, const std::string& node, const std::string& reason) {
    events_.push_back(NetEvent{t, NetEventKind::dropped, p.src, p.seq, node, "reason=" + reason});
}

void NetworkLayer::break_link(const std::string& node, const std::string& lost_neighbor, double t, const Packet& cause) {
    std::vector<std::pair<std::string, std::set<std::string>>> queue;
    std::set<std::string> first;
    for (auto& [dest, entry] : tables_[node].routes) {
        if (entry.valid && entry.next_hop == lost_neighbor) {
            entry.valid = false;
            first.insert(dest);
        }
    }
    queue.emplace_back(node, std::move(first));
    std::set<std::string> notified{node};
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::string at = queue[head].first;
        const std::set<std::string> lost = queue[head].second;
        std::set<std::string> precursors;
        for (const auto& dest : lost) {
            const auto& entry = tables_[at].routes[dest];
            precursors.insert(entry.precursors.begin(), entry.precursors.end());
        }
        if (lost.empty() || precursors.empty()) continue;
        std::string names;
        for (const auto& dest : lost) names += (names.empty() ? "" : "|") + dest;
        events_.push_back(NetEvent{t, NetEventKind::rerr, cause.src, cause.seq, at, "unreachable=" + names});
        for (const auto& q : precursors) {
            std::set<std::string> invalidated;
            for (const auto& dest : lost) {
                auto& routes = tables_[q].routes;
                auto it = routes.find(dest);
                if (it != routes.end() && it->second.valid && it->second.next_hop == at) {
                    it->second.valid = false;
                    invalidated.insert(dest);
                }
            }
            if (!invalidated.empty() && notified.insert(q).second) queue.emplace_back(q, std::move(invalidated));
        }
    }
}

bool NetworkLayer::advance(Packet& p, double window_end, const Adjacency& graph, const std::set<std::string>& present) {
    bool initial_discovery = p.hops == 0 && !p.rediscovered;
    for (;;) {
        if (!present.contains(p.holder)) {
            drop(p, p.ready_at, p.holder, "node_gone");
            return true;
        }
        if (!present.contains(p.dst)) {
            drop(p, p.ready_at, p.holder, "dst_gone");
            return true;
        }
        const double arrival = p.ready_at + radio_.per_hop_latency;
        if (arrival > window_end + kTimeEps) return false;

        auto& routes = tables_[p.holder].routes;
        auto it = routes.find(p.dst);
        const bool usable = it != routes.end() && it->second.valid && it->second.expires_at >= p.ready_at;
        std::string lost;
        if (!usable) {
            if (p.holder == p.src && initial_discovery) {
                initial_discovery = false;
                if (!aodv_discover(p.src, p.dst, graph, tables_, p.ready_at, radio_, &events_).found) {
                    drop(p, p.ready_at, p.holder, "no_route");
                    return true;
                }
                continue;
            }
            if (it != routes.end()) lost = it->second.next_hop;
        } else if (!adjacent(graph, p.holder, it->second.next_hop)) {
            lost = it->second.next_hop;
        } else {
            if (radio_.loss_probability > 0.0 && next_uniform() < radio_.loss_probability) {
                drop(p, arrival, p.holder, "loss");
                return true;
            }
            it->second.expires_at = std::max(it->second.expires_at, arrival + radio_.route_lifetime);
            p.holder = it->second.next_hop;
            p.ready_at = arrival;
            ++p.hops;
            if (p.holder == p.dst) {
                events_.push_back(NetEvent{arrival, NetEventKind::delivered, p.src, p.seq, p.holder,
                                           fmt::format("hops={};bits={};latency={:.6f}", p.hops, p.bits,
                                                       arrival - p.created_at),
                                           p.bits, p.hops});
                return true;
            }
            events_.push_back(NetEvent{arrival, NetEventKind::forwarded, p.src, p.seq, p.holder,
                                       fmt::format("dst={};hops={}", p.dst, p.hops)});
            continue;
        }

        // Broken or missing route mid-path: report upstream, then one
        // source-side rediscovery before giving up on the packet.
        if (!lost.empty()) break_link(p.holder, lost, p.ready_at, p);
        if (p.rediscovered) {
            drop(p, p.ready_at, p.holder, "route_broken");
            return true;
        }
        p.rediscovered = true;
        initial_discovery = false;
        if (!present.contains(p.src)) {
            drop(p, p.ready_at, p.holder, "src_gone");
            return true;
        }
        if (!aodv_discover(p.src, p.dst, graph, tables_, p.ready_at, radio_, &events_).found) {
            drop(p, p.ready_at, p.holder, "rediscovery_failed");
            return true;
        }
        p.holder = p.src;
    }
}

std::size_t NetworkLayer::network_step(double t, double dt, const std::map<std::string, NodePosition>& positions,
                                       std::span<const std::string> active) {
    const std::size_t before = events_.size();
    const std::set<std::string> present(active.begin(), active.end());
    emit(t, dt, active, present);
    if (packets_.empty()) return events_.size() - before;
    const Adjacency graph = connectivity_graph(positions, radio_.range);
    std::vector<Packet> still;
    for (auto& p : packets_) {
        if (!advance(p, t + dt, graph, present)) still.push_back(std::move(p));
    }
    packets_ = std::move(still);
    return events_.size() - before;
}

}  // namespace vanetsim
