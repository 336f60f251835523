// Deterministic SVG line charts: fixed canvas, fixed number formatting, no
// timestamps, so identical input gives byte-identical output.

#ifndef PLAT_SVG_HPP
#define PLAT_SVG_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace plat {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;  // non-positive and non-finite points are dropped
};

inline constexpr int kChartWidth = 640;
inline constexpr int kChartHeight = 400;

/// Empty (or all-dropped) series still produce a valid axes-only chart.
std::string render_line_chart(const ChartSpec& spec, const std::vector<Series>& series);

/// Reads a CSV produced by this tool and plots `y_columns` against `x_column`.
/// Throws CsvError naming the offending line for malformed input.
std::string render_csv_chart(const std::filesystem::path& csv, const std::string& x_column,
                             const std::vector<std::string>& y_columns, const ChartSpec& spec);

struct PlotJob {
    std::filesystem::path csv;
    std::filesystem::path svg;
};

/// Picks the chart layout from the CSV header: energy vs step, ratio vs t
/// (log scale) or accuracy vs epoch. Returns the SVG paths written.
std::vector<std::filesystem::path> render_plots(const std::vector<PlotJob>& jobs);

}  // namespace plat

#endif  // PLAT_SVG_HPP
