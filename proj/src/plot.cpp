#include "vanetsim/plot.hpp"

#include "vanetsim/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace vanetsim {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 30;
constexpr double kBottom = 60;
constexpr int kTicks = 5;

double value_of(const MetricsRow& row, PlotColumn column) {
    return column == PlotColumn::pdf ? row.metrics.pdf : row.metrics.avg_packets_per_s;
}

// Smallest 1/2/5 x 10^k at or above `v`.
double nice_ceiling(double v) {
    if (!(v > 0)) return 1.0;
    const double magnitude = std::pow(10.0, std::floor(std::log10(v)));
    for (double step : {1.0, 2.0, 5.0, 10.0}) {
        if (step * magnitude >= v) return step * magnitude;
    }
    return 10.0 * magnitude;
}

}  // namespace

PlotColumn parse_plot_column(std::string_view name) {
    if (name == "pdf") return PlotColumn::pdf;
    if (name == "avg_pkts_s") return PlotColumn::avg_pkts_s;
    throw ValidationError(fmt::format("unknown column '{}' (expected pdf or avg_pkts_s)", name));
}

std::string bar_chart_svg(std::span<const MetricsRow> rows, PlotColumn column) {
    if (rows.empty()) throw ValidationError("metrics CSV has no rows to plot");
    const std::string_view label = column == PlotColumn::pdf ? "pdf" : "avg_pkts_s";

    double top = 0.0;
    for (const auto& r : rows) {
        const double v = value_of(r, column);
        if (!std::isfinite(v) || v < 0) throw ValidationError(fmt::format("cannot plot {} value {}", label, v));
        top = std::max(top, v);
    }
    top = column == PlotColumn::pdf ? 1.0 : nice_ceiling(top);

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const double base = kTop + plot_h;
    const double slot = plot_w / static_cast<double>(rows.size());
    const double bar = slot * 0.6;

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n",
        kWidth, kHeight);
    svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
    for (int i = 0; i <= kTicks; ++i) {
        const double v = top * i / kTicks;
        const double y = base - plot_h * i / kTicks;
        svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#ddd\"/>\n", kLeft, y,
                           kLeft + plot_w, y);
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n", kLeft - 6, y + 4, v);
    }
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", kLeft,
                       kTop, base);
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{2:.2f}\" x2=\"{1:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", kLeft,
                       kLeft + plot_w, base);

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double v = value_of(rows[i], column);
        const double h = plot_h * v / top;
        const double x = kLeft + slot * static_cast<double>(i) + (slot - bar) / 2;
        svg += fmt::format("<rect class=\"bar\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
                           "fill=\"#4e79a7\"/>\n",
                           x, base - h, bar, h);
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:.4f}</text>\n", x + bar / 2,
                           base - h - 5, v);
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", x + bar / 2, base + 18,
                           rows[i].nodes);
    }
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">nodes</text>\n", kLeft + plot_w / 2,
                       kHeight - 15);
    svg += fmt::format("<text x=\"18\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0:.2f})\">{1}</text>\n",
                       kTop + plot_h / 2, label);
    svg += "</svg>\n";
    return svg;
}

}  // namespace vanetsim
