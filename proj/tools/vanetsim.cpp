// Command-line front end: run, compare, plot, validate.

#include "vanetsim/control.hpp"
#include "vanetsim/error.hpp"
#include "vanetsim/plot.hpp"
#include "vanetsim/runner.hpp"
#include "vanetsim/scenario.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>

namespace {

using namespace vanetsim;

constexpr int kExitInvalid = 2;
constexpr int kExitIo = 3;

std::shared_ptr<const Scenario> load(const std::string& path) {
    auto scenario = load_scenario_file(path);
    for (const auto& w : scenario->warnings) std::cerr << "warning: " << w << '\n';
    return scenario;
}

void print_run(const RunReport& r) {
    std::cout << fmt::format("scenario {} seed {} duration {:.1f} s\n", r.scenario_id, r.seed, r.duration);
    std::cout << fmt::format("vehicles: inserted {} arrived {} pending {}\n", r.inserted, r.arrived, r.pending);
    std::cout << fmt::format("total waiting time: {:.1f} s\n", r.total_waiting_time);
    for (const auto& lane : r.approach_lanes) {
        const auto& q = r.queue(lane);
        std::cout << fmt::format("queue {}: mean {:.2f} max {}\n", lane, q.mean, q.max);
    }
    std::cout << fmt::format("packets: sent {} received {} pdf {:.4f} ({:.3f} pkt/s, {:.1f} bit/s)\n", r.net.sent,
                             r.net.received, r.net.pdf, r.net.avg_packets_per_s, r.net.avg_bits_per_s);
    for (const auto& [name, path] : r.files) std::cout << fmt::format("{}: {}\n", name, path.string());
}

void print_comparison(const ComparisonReport& c) {
    const auto& s = c.static_run;
    const auto& a = c.adaptive_run;
    std::cout << fmt::format("{:<28}{:>12}{:>12}\n", "", "static", "adaptive");
    std::cout << fmt::format("{:<28}{:>12.1f}{:>12.1f}\n", "total waiting time (s)", s.total_waiting_time,
                             a.total_waiting_time);
    std::cout << fmt::format("{:<28}{:>12}{:>12}\n", "arrived", s.arrived, a.arrived);
    for (const auto& lane : s.approach_lanes) {
        std::cout << fmt::format("{:<28}{:>12}{:>12}\n", "max queue " + lane, s.queue(lane).max, a.queue(lane).max);
    }
    std::cout << fmt::format("waiting time change: {:+.1f}%\n", c.waiting_change_percent);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Signalized-intersection traffic and V2V network co-simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> end;
    std::string out_dir = "out";
    bool trace = false;
    std::optional<std::uint16_t> control_port;

    auto* run = app.add_subcommand("run", "Run a scenario and write its outputs");
    run->add_option("--scenario", scenario_path, "Scenario config")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_flag("--trace", trace, "Write the per-step vehicle trace");
    run->add_option("--control-port", control_port, "Serve one control client on this port before running");
    run->add_option("--end", end, "Override the end time");

    auto* compare = app.add_subcommand("compare", "Run static and adaptive signals side by side");
    compare->add_option("--scenario", scenario_path, "Scenario config")->required();
    compare->add_option("--seed", seed, "Override the config seed");
    compare->add_option("--out", out_dir, "Output directory")->capture_default_str();
    compare->add_option("--end", end, "Override the end time");

    std::string metrics_path;
    std::string column = "pdf";
    std::string svg_path;
    auto* plot = app.add_subcommand("plot", "Bar chart of a metrics CSV");
    plot->add_option("--metrics", metrics_path, "Metrics CSV")->required();
    plot->add_option("--column", column, "pdf or avg_pkts_s")->capture_default_str();
    plot->add_option("--out", svg_path, "SVG output")->required();

    auto* validate = app.add_subcommand("validate", "Load and cross-check a scenario");
    validate->add_option("--scenario", scenario_path, "Scenario config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    try {
        if (run->parsed()) {
            auto scenario = load(scenario_path);
            RunRequest request;
            request.seed = seed;
            request.end = end;
            request.trace = trace;
            request.out_dir = out_dir;
            Driver driver;
            if (control_port) {
                driver = [port = *control_port](Simulation& sim) {
                    ControlServer server(port);
                    std::cerr << fmt::format("control: listening on 127.0.0.1:{}\n", server.port());
                    server.serve_one(sim);
                    std::cerr << fmt::format("control: session ended at t={:.3f}\n", sim.clock());
                };
            }
            print_run(run_scenario(scenario, request, driver));
        } else if (compare->parsed()) {
            auto scenario = load(scenario_path);
            print_comparison(compare_scenario(scenario, seed, end, out_dir));
        } else if (plot->parsed()) {
            const PlotColumn which = parse_plot_column(column);
            std::ifstream in(metrics_path, std::ios::binary);
            if (!in) throw IoError(fmt::format("cannot read '{}'", metrics_path));
            const auto rows = read_metrics_csv(in);
            const std::string svg = bar_chart_svg(rows, which);
            std::ofstream out(svg_path, std::ios::binary | std::ios::trunc);
            if (!out || !(out << svg) || !out.flush()) throw IoError(fmt::format("cannot write '{}'", svg_path));
        } else if (validate->parsed()) {
            auto scenario = load(scenario_path);
            std::cout << fmt::format("{}: {} nodes, {} edges, {} connections, {} flows, {} detectors, {} programs\n",
                                     scenario->config.id, scenario->network.nodes().size(),
                                     scenario->network.edges().size(), scenario->network.connections().size(),
                                     scenario->routes.flows.size(), scenario->detectors.size(),
                                     scenario->programs.size());
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    return 0;
}
