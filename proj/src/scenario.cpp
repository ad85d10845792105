#include "vanetsim/scenario.hpp"

#include "vanetsim/error.hpp"
#include "xml.hpp"

#include <fmt/format.h>

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace vanetsim {

namespace {

std::vector<std::string> split_ws(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    for (std::string item; in >> item;) out.push_back(item);
    return out;
}

double positive(const xml::Element& e, std::string_view key, double fallback) {
    const double value = e.number(key).value_or(fallback);
    if (!(value > 0)) e.fail(fmt::format("attribute '{}' must be positive", key));
    return value;
}

int positive_int(const xml::Element& e, std::string_view key, int fallback) {
    const long long value = e.integer(key).value_or(fallback);
    if (value <= 0 || value > 1'000'000'000) e.fail(fmt::format("attribute '{}' must be a positive integer", key));
    return static_cast<int>(value);
}

RadioConfig parse_radio(const xml::Element& e) {
    RadioConfig r;
    r.range = positive(e, "range", r.range);
    r.per_hop_latency = positive(e, "latency", r.per_hop_latency);
    r.packet_size = static_cast<std::uint64_t>(positive_int(e, "packetSize", static_cast<int>(r.packet_size)));
    r.cbr_rate = positive(e, "cbrRate", r.cbr_rate);
    r.rreq_ttl = positive_int(e, "rreqTtl", r.rreq_ttl);
    r.route_lifetime = positive(e, "routeLifetime", r.route_lifetime);
    r.loss_probability = e.number("lossProbability").value_or(0.0);
    if (r.loss_probability < 0 || r.loss_probability >= 1) e.fail("attribute 'lossProbability' must lie in [0, 1)");
    return r;
}

AdaptiveConfig parse_adaptive(const xml::Element& e, std::string_view source) {
    AdaptiveConfig a;
    a.tl_id = e.required("tl");
    a.template_program = e.attr("template").value_or(a.template_program);
    a.control_interval = positive(e, "controlInterval", a.control_interval);
    a.g_min = positive_int(e, "gMin", a.g_min);
    a.g_max = positive_int(e, "gMax", a.g_max);
    a.yellow = positive(e, "yellow", a.yellow);
    if (auto budget = e.integer("budget")) {
        if (*budget <= 0 || *budget > 1'000'000) e.fail("attribute 'budget' must be a positive integer");
        a.cycle_green_budget = static_cast<int>(*budget);
    }
    if (auto metric = e.attr("metric")) {
        try {
            a.load_metric = parse_load_metric(*metric);
        } catch (const ValidationError& err) {
            e.fail(err.what());
        }
    }
    for (const auto& [key, child] : e.tree()) {
        if (key != "approach") continue;
        const xml::Element approach(key, child, source);
        const long long phase = approach.required_integer("phase");
        if (phase < 0) approach.fail("attribute 'phase' must be non-negative");
        auto ids = split_ws(approach.required("detectors"));
        if (ids.empty()) approach.fail("attribute 'detectors' lists no detector");
        auto& slot = a.approach_detectors[static_cast<std::size_t>(phase)];
        slot.insert(slot.end(), ids.begin(), ids.end());
    }
    return a;
}

void check_connected(const Scenario& s) {
    // Union-find over junctions joined by any routed edge.
    const auto& net = s.network;
    std::vector<std::size_t> parent(net.nodes().size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::set<std::size_t> touched;
    for (const auto& r : s.planned) {
        for (std::size_t e : r.edges) {
            const std::size_t a = *net.node_index(net.edge(e).from);
            const std::size_t b = *net.node_index(net.edge(e).to);
            parent[root(a)] = root(b);
            touched.insert(a);
            touched.insert(b);
        }
    }
    std::set<std::size_t> components;
    for (std::size_t n : touched) components.insert(root(n));
    if (components.size() > 1) {
        throw ValidationError(fmt::format("routed edges form {} disconnected parts", components.size()));
    }
}

void check_adaptive(const Scenario& s, const AdaptiveConfig& a) {
    const auto fail = [&](const std::string& msg) {
        throw ValidationError(fmt::format("adaptive control of '{}': {}", a.tl_id, msg));
    };
    if (!s.network.link_counts().contains(a.tl_id)) fail("no such traffic light");
    const PhaseProgram* templ = s.find_program(a.tl_id, a.template_program);
    if (!templ) fail(fmt::format("template program '{}' not found", a.template_program));
    if (a.g_min > a.g_max) fail(fmt::format("gMin {} exceeds gMax {}", a.g_min, a.g_max));
    if (a.control_interval < templ->cycle()) {
        fail(fmt::format("control interval {} s is shorter than the template cycle {} s", a.control_interval,
                         templ->cycle()));
    }
    const auto greens = green_phases(*templ);
    const int budget = green_budget(a, *templ);
    const auto n = static_cast<long long>(greens.size());
    if (budget < n * a.g_min || budget > n * a.g_max) {
        fail(fmt::format("green budget {} s cannot be split over {} phases within [{}, {}] s", budget, n, a.g_min,
                         a.g_max));
    }
    for (std::size_t phase : greens) {
        auto it = a.approach_detectors.find(phase);
        if (it == a.approach_detectors.end()) fail(fmt::format("green phase {} has no detector", phase));
        for (const auto& id : it->second) {
            const bool known =
                std::any_of(s.detectors.begin(), s.detectors.end(), [&](const Detector& d) { return d.id == id; });
            if (!known) fail(fmt::format("unknown detector '{}'", id));
        }
    }
    for (const auto& [phase, _] : a.approach_detectors) {
        if (std::find(greens.begin(), greens.end(), phase) == greens.end()) {
            fail(fmt::format("approach phase {} is not a green phase of the template", phase));
        }
    }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(fmt::format("cannot read {} file '{}'", what, path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

ScenarioConfig parse_scenario_config(std::string_view text, const std::filesystem::path& base_dir,
                                     std::string_view source) {
    const auto doc = xml::parse(text, source);
    auto root = doc.find("scenario");
    if (root == doc.not_found()) throw SchemaError(fmt::format("{}: missing <scenario> element", source));

    ScenarioConfig c;
    const xml::Element scenario("scenario", root->second, source);
    c.id = scenario.attr("id").value_or(c.id);

    bool have_input = false;
    bool have_time = false;
    for (const auto& [key, child] : root->second) {
        const xml::Element e(key, child, source);
        if (key == "input") {
            have_input = true;
            auto path = [&](std::string_view attr) { return base_dir / e.required(attr); };
            auto optional_path = [&](std::string_view attr) -> std::optional<std::filesystem::path> {
                if (auto v = e.attr(attr)) return base_dir / *v;
                return std::nullopt;
            };
            c.paths.nodes = path("nodes");
            c.paths.edges = path("edges");
            c.paths.connections = path("connections");
            c.paths.routes = path("routes");
            c.paths.detectors = optional_path("detectors");
            c.paths.tllogic = optional_path("tllogic");
        } else if (key == "time") {
            have_time = true;
            c.begin = e.number("begin").value_or(0.0);
            c.end = e.required_number("end");
            c.step_length = e.number("step").value_or(c.step_length);
        } else if (key == "seed") {
            const long long seed = e.required_integer("value");
            if (seed < 0) e.fail("attribute 'value' must be non-negative");
            c.seed = static_cast<std::uint64_t>(seed);
        } else if (key == "radio") {
            c.radio = parse_radio(e);
        } else if (key == "cbr") {
            c.cbr.push_back(CbrPair{e.required("src"), e.required("dst")});
            if (c.cbr.back().src == c.cbr.back().dst) e.fail("source and destination must differ");
        } else if (key == "adaptive") {
            c.adaptive.push_back(parse_adaptive(e, source));
        } else if (key == "control") {
            const auto mode = e.required("mode");
            if (mode != "static" && mode != "adaptive") e.fail("attribute 'mode' must be 'static' or 'adaptive'");
            c.adaptive_enabled = mode == "adaptive";
        } else if (key == "validation") {
            const auto mode = e.required("mode");
            if (mode != "strict" && mode != "permissive") e.fail("attribute 'mode' must be 'strict' or 'permissive'");
            c.length_mode = mode == "strict" ? LengthMode::strict : LengthMode::permissive;
        }
    }
    if (!have_input) scenario.fail("missing <input> element");
    if (!have_time) scenario.fail("missing <time> element");
    if (!(c.begin < c.end)) throw ValidationError(fmt::format("begin {} must be before end {}", c.begin, c.end));
    if (!(c.step_length > 0)) throw ValidationError(fmt::format("step length {} must be positive", c.step_length));
    std::set<std::string> adaptive_lights;
    for (const auto& a : c.adaptive) {
        if (!adaptive_lights.insert(a.tl_id).second) {
            throw ValidationError(fmt::format("traffic light '{}' has two adaptive configurations", a.tl_id));
        }
    }
    return c;
}

const PhaseProgram& Scenario::initial_program(std::string_view tl_id) const {
    for (const auto& p : programs) {
        if (p.tl_id == tl_id) return p;
    }
    throw ValidationError(fmt::format("traffic light '{}' has no program", tl_id));
}

const PhaseProgram* Scenario::find_program(std::string_view tl_id, std::string_view program_id) const {
    for (const auto& p : programs) {
        if (p.tl_id == tl_id && p.program_id == program_id) return &p;
    }
    return nullptr;
}

std::shared_ptr<const Scenario> load_scenario(ScenarioConfig config) {
    const auto& paths = config.paths;
    const auto nodes_source = paths.nodes.string();
    const auto edges_source = paths.edges.string();
    const auto connections_source = paths.connections.string();
    auto nodes = parse_nodes(read_text_file(paths.nodes, "nodes"), nodes_source);
    auto edges = parse_edges(read_text_file(paths.edges, "edges"), edges_source);
    auto connections = parse_connections(read_text_file(paths.connections, "connections"), connections_source);

    auto s = std::make_shared<Scenario>(Scenario{std::move(config), build_network(std::move(nodes), std::move(edges),
                                                                                  std::move(connections)),
                                                 {}, {}, {}, {}, {}, {}});
    const auto& net = s->network;

    const auto routes_source = s->config.paths.routes.string();
    s->routes = parse_routes(read_text_file(s->config.paths.routes, "routes"), routes_source);
    for (const auto& r : s->routes.routes) {
        try {
            s->planned.push_back(plan_route(net, r));
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("{}: {}", routes_source, e.what()));
        }
    }
    for (const auto& f : s->routes.flows) {
        for (std::size_t i = 0; i < s->routes.routes.size(); ++i) {
            if (s->routes.routes[i].id == f.route) s->flow_routes.push_back(i);
        }
    }
    check_connected(*s);

    if (const auto& path = s->config.paths.detectors) {
        s->detectors = parse_detectors(read_text_file(*path, "detectors"), path->string());
        resolve_detectors(s->detectors, net, path->string());
    }

    if (const auto& path = s->config.paths.tllogic) {
        auto set = parse_tl_programs(read_text_file(*path, "tllogic"), s->config.length_mode, path->string());
        s->warnings = std::move(set.warnings);
        s->programs = std::move(set.programs);
    }
    for (auto& p : s->programs) {
        auto count = net.link_counts().find(p.tl_id);
        if (count == net.link_counts().end()) {
            throw ValidationError(fmt::format("tlLogic '{}' names no traffic light of the network", p.tl_id));
        }
        fit_program(p, static_cast<std::size_t>(count->second), s->config.length_mode, s->warnings);
    }
    for (const auto& [tl, _] : net.link_counts()) {
        if (std::none_of(s->programs.begin(), s->programs.end(), [&](const PhaseProgram& p) { return p.tl_id == tl; })) {
            throw ValidationError(fmt::format("traffic light '{}' has no tlLogic program", tl));
        }
    }
    for (const auto& a : s->config.adaptive) check_adaptive(*s, a);
    return s;
}

std::shared_ptr<const Scenario> load_scenario_file(const std::filesystem::path& path) {
    const auto text = read_text_file(path, "scenario");
    return load_scenario(parse_scenario_config(text, path.parent_path(), path.string()));
}

}  // namespace vanetsim
