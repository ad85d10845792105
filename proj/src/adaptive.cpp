#include "vanetsim/adaptive.hpp"

#include "vanetsim/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vanetsim {

namespace {

bool has_yellow(const Phase& p) { return p.state.find('y') != std::string::npos; }
bool has_green(const Phase& p) { return p.state.find_first_of("Gg") != std::string::npos; }

}  // namespace

LoadMetric parse_load_metric(std::string_view name) {
    if (name == "queue_length") return LoadMetric::queue_length;
    if (name == "occupancy") return LoadMetric::occupancy;
    if (name == "count") return LoadMetric::count;
    throw ValidationError(fmt::format("unknown load metric '{}' (expected queue_length, occupancy or count)", name));
}

std::string_view to_string(LoadMetric metric) {
    switch (metric) {
        case LoadMetric::queue_length: return "queue_length";
        case LoadMetric::occupancy: return "occupancy";
        case LoadMetric::count: return "count";
    }
    return "queue_length";
}

std::vector<std::size_t> green_phases(const PhaseProgram& program) {
    std::vector<std::size_t> greens;
    for (std::size_t i = 0; i < program.phases.size(); ++i) {
        const Phase& p = program.phases[i];
        const bool want_green = i % 2 == 0;
        const bool ok = want_green ? (has_green(p) && !has_yellow(p)) : has_yellow(p);
        if (!ok) {
            throw ValidationError(fmt::format(
                "traffic light '{}' program '{}': phase {} (\"{}\") breaks the green/yellow alternation", program.tl_id,
                program.program_id, i, p.state));
        }
        if (want_green) greens.push_back(i);
    }
    if (program.phases.size() % 2 != 0) {
        throw ValidationError(fmt::format("traffic light '{}' program '{}': last phase must be yellow", program.tl_id,
                                          program.program_id));
    }
    return greens;
}

int green_budget(const AdaptiveConfig& config, const PhaseProgram& templ) {
    if (config.cycle_green_budget) return *config.cycle_green_budget;
    double total = 0.0;
    for (std::size_t i : green_phases(templ)) total += templ.phases[i].duration;
    const double rounded = std::round(total);
    if (std::abs(total - rounded) > 1e-9) {
        throw ValidationError(fmt::format("traffic light '{}': template green time {} is not whole seconds", templ.tl_id, total));
    }
    return static_cast<int>(rounded);
}

std::vector<int> split_green(std::span<const double> loads, int budget, int g_min, int g_max) {
    const std::size_t n = loads.size();
    if (n == 0) throw ValidationError("green split needs at least one approach");
    if (g_min > g_max) throw ValidationError(fmt::format("g_min {} exceeds g_max {}", g_min, g_max));
    const auto count = static_cast<long long>(n);
    if (budget < count * g_min) {
        throw ValidationError(fmt::format("green budget {} s is below {} approaches x g_min {} s", budget, n, g_min));
    }
    if (budget > count * g_max) {
        throw ValidationError(fmt::format("green budget {} s exceeds {} approaches x g_max {} s", budget, n, g_max));
    }
    for (double l : loads) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("approach loads must be finite and non-negative");
    }

    const double total = std::accumulate(loads.begin(), loads.end(), 0.0);
    const double spare = static_cast<double>(budget) - static_cast<double>(count * g_min);
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        raw[i] = total > 0.0 ? g_min + spare * loads[i] / total : static_cast<double>(budget) / static_cast<double>(n);
    }

    std::vector<bool> clamped(n, false);
    for (;;) {
        double excess = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!clamped[i] && raw[i] > g_max) {
                excess += raw[i] - g_max;
                raw[i] = g_max;
                clamped[i] = true;
            }
        }
        if (excess <= 0.0) break;
        double weight = 0.0;
        std::size_t free = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!clamped[i]) {
                weight += loads[i];
                ++free;
            }
        }
        if (free == 0) break;
        for (std::size_t i = 0; i < n; ++i) {
            if (clamped[i]) continue;
            raw[i] += weight > 0.0 ? excess * loads[i] / weight : excess / static_cast<double>(free);
        }
    }

    std::vector<int> greens(n);
    std::vector<double> remainder(n);
    long long assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double whole = std::floor(raw[i] + 1e-9);
        greens[i] = static_cast<int>(whole);
        remainder[i] = std::max(0.0, raw[i] - whole);
        assigned += greens[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (long long k = 0; k < budget - assigned; ++k) ++greens[order[static_cast<std::size_t>(k) % n]];
    return greens;
}

PhaseProgram reallocate_green(std::span<const ApproachLoad> loads, const AdaptiveConfig& config,
                              const PhaseProgram& templ) {
    const auto greens_at = green_phases(templ);
    if (loads.size() != greens_at.size()) {
        throw ValidationError(fmt::format("traffic light '{}': {} loads for {} green phases", templ.tl_id, loads.size(),
                                          greens_at.size()));
    }
    if (!(config.yellow > 0)) throw ValidationError("yellow duration must be positive");
    std::vector<double> values;
    for (const auto& l : loads) values.push_back(l.load);
    const auto greens = split_green(values, green_budget(config, templ), config.g_min, config.g_max);

    PhaseProgram program = templ;
    program.program_id = "adaptive";
    program.origin = ProgramOrigin::adaptive;
    for (std::size_t i = 0; i < program.phases.size(); ++i) {
        if (i % 2 == 1) program.phases[i].duration = config.yellow;
    }
    for (std::size_t k = 0; k < greens_at.size(); ++k) program.phases[greens_at[k]].duration = greens[k];
    return program;
}

std::vector<ApproachLoad> measure_loads(const AdaptiveConfig& config, const PhaseProgram& templ,
                                        const DetectorBank& detectors, const Traffic& traffic) {
    std::vector<ApproachLoad> loads;
    for (std::size_t phase : green_phases(templ)) {
        auto mapped = config.approach_detectors.find(phase);
        if (mapped == config.approach_detectors.end() || mapped->second.empty()) {
            throw ValidationError(fmt::format("traffic light '{}': green phase {} has no detector", config.tl_id, phase));
        }
        double load = 0.0;
        for (const auto& id : mapped->second) {
            auto index = detectors.find(id);
            if (!index) throw ValidationError(fmt::format("traffic light '{}': unknown detector '{}'", config.tl_id, id));
            const DetectorReading r = detectors.read(*index, traffic);
            switch (config.load_metric) {
                case LoadMetric::queue_length: load += static_cast<double>(r.queue_length); break;
                case LoadMetric::occupancy: load += r.occupancy; break;
                case LoadMetric::count: load += static_cast<double>(r.count); break;
            }
        }
        loads.push_back(ApproachLoad{phase, load});
    }
    return loads;
}

GreenController::GreenController(AdaptiveConfig config, PhaseProgram templ, double begin)
    : config_(std::move(config)), template_(std::move(templ)), begin_(begin) {}

std::optional<ControllerDecision> GreenController::tick(double clock, const DetectorBank& detectors,
                                                        const Traffic& traffic) {
    const auto boundary = static_cast<long long>(std::floor((clock - begin_) / config_.control_interval + 1e-9));
    if (boundary <= last_boundary_) return std::nullopt;
    last_boundary_ = boundary;

    ControllerDecision decision;
    decision.t = clock;
    decision.tl_id = config_.tl_id;
    const auto loads = measure_loads(config_, template_, detectors, traffic);
    decision.program = reallocate_green(loads, config_, template_);
    for (const auto& l : loads) decision.loads.push_back(l.load);
    for (std::size_t i : green_phases(decision.program)) {
        decision.greens.push_back(static_cast<int>(decision.program.phases[i].duration));
    }
    return decision;
}

}  // namespace vanetsim
