#pragma once

#include "vanetsim/runner.hpp"

#include <span>
#include <string>
#include <string_view>

namespace vanetsim {

enum class PlotColumn { pdf, avg_pkts_s };

/// Throws ValidationError for names other than "pdf" and "avg_pkts_s".
PlotColumn parse_plot_column(std::string_view name);

/// Self-contained SVG bar chart with one bar per row, labelled by node count
/// and annotated with its value. Identical input gives identical bytes.
/// Throws ValidationError when `rows` is empty.
std::string bar_chart_svg(std::span<const MetricsRow> rows, PlotColumn column);

}  // namespace vanetsim
