// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// `acceptance N` runs criterion N alone.

#include "support.hpp"

#include "vanetsim/adaptive.hpp"
#include "vanetsim/control.hpp"
#include "vanetsim/error.hpp"
#include "vanetsim/runner.hpp"
#include "vanetsim/signals.hpp"
#include "vanetsim/simulation.hpp"
#include "vanetsim/vanet.hpp"

#include <fmt/format.h>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

using namespace vanetsim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- 1: congestion relief on the heavy E-W fixture ----

Outcome congestion_relief() {
    const auto start = std::chrono::steady_clock::now();
    const auto scenario = load_scenario_file(testing::fixture("cross/heavy_ew.scenario.xml"));
    const std::vector<std::string> ew{"E2C_0", "W2C_0"};
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = compare_scenario(scenario, seed, std::nullopt, std::nullopt);
        std::size_t sf = 0, sl = 0, af = 0, al = 0;
        for (const auto& lane : ew) {
            sf = std::max(sf, c.static_run.queue(lane).first_quarter_max);
            sl = std::max(sl, c.static_run.queue(lane).final_quarter_max);
            af = std::max(af, c.adaptive_run.queue(lane).first_quarter_max);
            al = std::max(al, c.adaptive_run.queue(lane).final_quarter_max);
        }
        const double ratio = c.adaptive_run.total_waiting_time / c.static_run.total_waiting_time;
        const bool seed_ok = ratio <= 0.70 && static_cast<double>(al) <= 1.5 * static_cast<double>(af) && sl > sf;
        ok = ok && seed_ok;
        detail += fmt::format("seed {}: wait ratio {:.3f}, static E-W max {}->{}, adaptive {}->{}{}; ", seed, ratio, sf,
                              sl, af, al, seed_ok ? "" : " (miss)");
    }
    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 30.0;
    return {ok, detail + fmt::format("{:.1f} s", elapsed)};
}

// ---- 2: signal snippets ----

Outcome snippet_fidelity() {
    bool ok = true;
    std::string detail;
    const std::pair<const char*, const char*> expected[] = {
        {"city_a.tll.xml", "phase 1 state \"rrrryyggg\" has length 9, phase 0 state \"rrrrGGGggg\" has length 10"},
        {"city_b.tll.xml", "phase 4 state \"ggggrrrrGGG\" has length 11, phase 0 state \"rrrrGGGrrr\" has length 10"},
    };
    for (const auto& [file, diagnostic] : expected) {
        const std::string text = testing::fixture_text(file);
        const auto set = parse_tl_programs(text, LengthMode::permissive, file);
        const auto it = std::find_if(set.programs.begin(), set.programs.end(),
                                     [](const PhaseProgram& p) { return p.tl_id == "1284510665"; });
        const bool found = it != set.programs.end();
        const bool schedule = found && it->cycle() == 80.0 && state_at(*it, 45.0) == "rrrggg";
        std::string strict_error;
        try {
            parse_tl_programs(text, LengthMode::strict, file);
        } catch (const SchemaError& e) {
            strict_error = e.what();
        }
        const bool precise = strict_error.find(file) != std::string::npos &&
                             strict_error.find("1274361418") != std::string::npos &&
                             strict_error.find(diagnostic) != std::string::npos;
        ok = ok && schedule && precise;
        detail += fmt::format("{}: {} programs, cycle {}, state_at(45) {}, strict: {}; ", file, set.programs.size(),
                              found ? it->cycle() : 0.0, found ? state_at(*it, 45.0) : "-",
                              strict_error.empty() ? "accepted" : strict_error);
    }
    return {ok, detail};
}

// ---- 3: delivery fraction ----

Outcome delivery_fraction() {
    std::vector<NetEvent> log;
    for (std::uint64_t i = 0; i < 10000; ++i) log.push_back({0.0, NetEventKind::sent, "s", i, "s", ""});
    for (std::uint64_t i = 0; i < 8626; ++i) log.push_back({1.0, NetEventKind::delivered, "s", i, "d", "", 4096, 2});
    const NetMetrics fixed = compute_metrics(log, 100.0);
    bool ok = fixed.sent == 10000 && fixed.received == 8626 && fixed.pdf == 0.8626;

    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> packets(0, 300);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<NetEvent> events;
        const int n = packets(rng);
        const double p_deliver = unit(rng);
        std::uint64_t delivered = 0;
        for (int i = 0; i < n; ++i) {
            const auto seq = static_cast<std::uint64_t>(i);
            events.push_back({unit(rng), NetEventKind::sent, "a", seq, "a", ""});
            if (unit(rng) < 0.5) events.push_back({unit(rng), NetEventKind::forwarded, "a", seq, "b", ""});
            if (unit(rng) < p_deliver) {
                events.push_back({unit(rng), NetEventKind::delivered, "a", seq, "c", "", 4096, 2});
                ++delivered;
            } else {
                events.push_back({unit(rng), NetEventKind::dropped, "a", seq, "b", "reason=no_route"});
            }
        }
        std::shuffle(events.begin(), events.end(), rng);
        const NetMetrics m = compute_metrics(events, 10.0);
        const double oracle = n == 0 ? 0.0 : static_cast<double>(delivered) / n;
        if (m.pdf < 0.0 || m.pdf > 1.0 || m.received > m.sent || m.received != delivered || m.pdf != oracle) {
            ++violations;
        }
    }
    ok = ok && violations == 0;
    return {ok, fmt::format("fixture pdf {:.4f} ({} / {}); {} violations over 1000 randomized logs", fixed.pdf,
                            fixed.received, fixed.sent, violations)};
}

// ---- 4: route discovery against BFS ----

Outcome discovery_oracle() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> size(2, 12);
    std::uniform_int_distribution<int> ttl(1, 8);
    std::uniform_real_distribution<double> coord(0.0, 600.0);
    int agree = 0;
    int reachable_cases = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        const int n = size(rng);
        std::map<std::string, NodePosition> pos;
        std::vector<std::string> names;
        for (int i = 0; i < n; ++i) {
            names.push_back(fmt::format("v{:02}", i));
            pos[names.back()] = {coord(rng), coord(rng)};
        }
        std::uniform_int_distribution<int> pick(0, n - 1);
        const std::string src = names[static_cast<std::size_t>(pick(rng))];
        std::string dst = src;
        while (dst == src) dst = names[static_cast<std::size_t>(pick(rng))];
        RadioConfig radio;
        radio.rreq_ttl = ttl(rng);

        // Plain BFS from the destination over pairwise distances.
        std::map<std::string, int> dist{{dst, 0}};
        std::queue<std::string> q;
        q.push(dst);
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (const auto& [v, pv] : pos) {
                if (dist.contains(v)) continue;
                if (std::hypot(pos[u].x - pv.x, pos[u].y - pv.y) <= radio.range) {
                    dist[v] = dist[u] + 1;
                    q.push(v);
                }
            }
        }
        const bool reachable = dist.contains(src) && dist[src] <= radio.rreq_ttl;
        reachable_cases += reachable;

        RoutingTables tables;
        const auto r = aodv_discover(src, dst, connectivity_graph(pos, radio.range), tables, 0.0, radio);
        bool match = r.found == reachable;
        if (match && reachable) {
            const auto& entry = tables.at(src).routes.at(dst);
            match = entry.hop_count == dist[src] && r.hop_count == dist[src] && dist.contains(entry.next_hop) &&
                    dist[entry.next_hop] == dist[src] - 1;
        }
        agree += match;
    }
    const double elapsed = seconds_since(start);
    return {agree == trials && elapsed < 5.0,
            fmt::format("{}/{} topologies agree ({} reachable within TTL), {:.2f} s", agree, trials, reachable_cases,
                        elapsed)};
}

// ---- 5: mobility invariants ----

Outcome mobility_invariants() {
    bool ok = true;
    std::string detail;
    for (const char* name : {"cross/heavy_ew.scenario.xml", "cross/symmetric.scenario.xml", "tee/tee.scenario.xml"}) {
        const auto scenario = load_scenario_file(testing::fixture(name));
        SimulationOptions options;
        options.end = scenario->config.begin + 10000 * scenario->config.step_length;
        Simulation sim(scenario, options);
        std::size_t collisions = 0, leaks = 0, speeding = 0, steps = 0;
        const RoadNetwork& net = scenario->network;
        while (!sim.finished()) {
            sim.step();
            ++steps;
            const Traffic& t = sim.traffic();
            if (t.inserted() != t.vehicles().size() + t.arrived()) ++leaks;
            for (const auto& v : t.vehicles()) {
                const double limit = std::min(v.type->max_speed, net.edge(v.lane.edge).speed_limit);
                if (v.speed < 0.0 || v.speed > limit + 1e-9) ++speeding;
            }
            for (const auto& v : t.vehicles()) {
                for (std::size_t idx : t.lane_vehicles(v.lane)) {
                    const Vehicle& other = t.vehicles()[idx];
                    if (&other == &v || other.pos < v.pos) continue;
                    if (other.pos - other.type->length - v.pos < 0.0) ++collisions;
                }
            }
        }
        const bool fine = steps == 10000 && collisions == 0 && leaks == 0 && speeding == 0;
        ok = ok && fine;
        detail += fmt::format("{}: {} steps, {} inserted, {} collisions, {} conservation breaks, {} speed violations; ",
                              scenario->config.id, steps, sim.traffic().inserted(), collisions, leaks, speeding);
    }

    // Free vehicle with no driver imperfection on an open road.
    const RoadNetwork road = testing::straight_road(1000.0, 30.0);
    Traffic traffic(road, {plan_route(road, VehicleRoute{"r", {"ab", "bc"}})}, {}, {}, {}, 0.0, 0.1, 1);
    traffic.place("v", 0, 0.0, 0.0);
    const double a = 2.6, dt = 0.1, vmax = 30.0;
    const int ramp_steps = static_cast<int>(std::floor(vmax / (a * dt)));
    double worst = 0.0;
    for (int k = 1; k <= 600 && !traffic.vehicles().empty(); ++k) {
        traffic.step({});
        const Vehicle& v = traffic.vehicles()[0];
        const int r = std::min(k, ramp_steps);
        const double x = a * dt * dt * r * (r + 1) / 2.0 + vmax * dt * (k - r);
        const double speed = k <= ramp_steps ? k * a * dt : vmax;
        worst = std::max({worst, std::abs((v.route_pos == 0 ? 0.0 : 1000.0) + v.pos - x), std::abs(v.speed - speed)});
    }
    ok = ok && worst <= 1e-9;
    return {ok, detail + fmt::format("closed-form trajectory max error {:.2e}", worst)};
}

// ---- 6: green reallocation ----

Outcome green_reallocation() {
    const auto a = split_green(std::vector<double>{10, 2}, 62, 5, 60);
    const auto b = split_green(std::vector<double>{0, 0}, 62, 5, 60);
    bool ok = a == std::vector<int>{48, 14} && b == std::vector<int>{31, 31};
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> load(0.0, 50.0);
    std::bernoulli_distribution idle(0.1);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::vector<double> loads{idle(rng) ? 0.0 : load(rng), idle(rng) ? 0.0 : load(rng)};
        const auto g = split_green(loads, 62, 5, 60);
        const bool good = g.size() == 2 && g[0] + g[1] == 62 && g[0] >= 5 && g[0] <= 60 && g[1] >= 5 && g[1] <= 60 &&
                          (loads[0] <= loads[1] || g[0] >= g[1]) && (loads[1] <= loads[0] || g[1] >= g[0]);
        violations += !good;
    }
    ok = ok && violations == 0;
    return {ok, fmt::format("[10,2] -> [{},{}], [0,0] -> [{},{}], {} violations over 1000 random loads", a[0], a[1],
                            b[0], b[1], violations)};
}

// ---- 7: control protocol ----

const std::vector<std::string> kScript{
    "GET SIM_TIME",         "STEP 300",          "GET TL_STATE C",     "GET DETECTOR dE",
    "GET VEHICLES",         "SET TL_STATE C rrrrrrGGgrrr", "STEP 150",   "GET TL_STATE C",
    "GET DETECTOR dN",      "SET TL_PROGRAM C ew_priority", "STEP 1000", "GET TL_STATE C",
    "GET METRICS",          "SET TL_STATE C rrx", "GET DETECTOR nope", "STEP 2500",
    "GET VEHICLES",         "GET DETECTOR qE",   "GET METRICS",        "BYE"};

bool is_get(const std::string& line) { return line.rfind("GET ", 0) == 0; }

struct ScriptRun {
    std::string transcript;
    std::string trace;
};

// Runs a script, then 200 more steps, capturing the vehicle trace throughout.
ScriptRun run_control_script(const std::vector<std::string>& script) {
    static const auto scenario = load_scenario_file(testing::fixture("cross/heavy_ew.scenario.xml"));
    std::ostringstream trace;
    SimulationOptions options;
    options.trace = &trace;
    Simulation sim(scenario, options);
    ScriptRun out;
    out.transcript = run_script(sim, script);
    sim.advance(200);
    out.trace = trace.str();
    return out;
}

Outcome control_protocol() {
    const auto first = run_control_script(kScript);
    bool identical = true;
    for (int i = 0; i < 2; ++i) identical = identical && run_control_script(kScript).transcript == first.transcript;

    std::vector<std::string> no_gets;
    std::copy_if(kScript.begin(), kScript.end(), std::back_inserter(no_gets), [](const auto& l) { return !is_get(l); });
    const auto bare = run_control_script(no_gets);

    // Responses to the non-GET commands must match between the two runs.
    std::vector<std::string> full_replies, bare_replies;
    auto collect = [](const std::string& transcript, std::vector<std::string>& replies) {
        std::istringstream in(transcript);
        std::string request, response;
        while (std::getline(in, request) && std::getline(in, response)) {
            if (!is_get(request.substr(2))) replies.push_back(request + "|" + response);
        }
    };
    collect(first.transcript, full_replies);
    collect(bare.transcript, bare_replies);
    const bool unperturbed = full_replies == bare_replies && first.trace == bare.trace;

    const std::size_t lines = static_cast<std::size_t>(std::count(first.transcript.begin(), first.transcript.end(), '\n'));
    return {identical && unperturbed && kScript.size() == 20,
            fmt::format("{} commands, {} transcript lines, 3 runs {}, GET-free run {} ({} trace bytes)", kScript.size(),
                        lines, identical ? "identical" : "differ", unperturbed ? "matches" : "diverges",
                        first.trace.size())};
}

// ---- 8: determinism of the command-line run ----

Outcome determinism() {
    testing::TempDir dir;
    const std::string config = testing::fixture("cross/heavy_ew.scenario.xml").string();
    bool ok = true;
    for (const char* out : {"a", "b"}) {
        const std::string cmd = fmt::format("{} run --scenario {} --seed 42 --trace --out {} >/dev/null 2>&1",
                                            VANETSIM_CLI, config, (dir.path() / out).string());
        const int status = std::system(cmd.c_str());
        ok = ok && WIFEXITED(status) && WEXITSTATUS(status) == 0;
    }
    std::string detail;
    for (const char* file : {"trace.csv", "events.csv", "metrics.csv"}) {
        const std::string a = read_text_file(dir.path() / "a" / file, "output");
        const std::string b = read_text_file(dir.path() / "b" / file, "output");
        const bool same = !a.empty() && a == b;
        ok = ok && same;
        detail += fmt::format("{} {} ({} bytes); ", file, same ? "identical" : "differs", a.size());
    }
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    // Optional argument: run only the criterion with this number.
    const std::size_t only = argc > 1 ? std::stoul(argv[1]) : 0;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"congestion relief under adaptive signals", congestion_relief},
        {"signal snippet fidelity", snippet_fidelity},
        {"packet delivery fraction", delivery_fraction},
        {"route discovery matches BFS", discovery_oracle},
        {"mobility invariants", mobility_invariants},
        {"green reallocation", green_reallocation},
        {"control protocol transcripts", control_protocol},
        {"run determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && only != i + 1) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        failures += !o.pass;
        std::cout << fmt::format("{} {}. {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail)
                  << std::flush;
    }
    return failures == 0 ? 0 : 1;
}
