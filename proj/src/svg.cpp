#include "plat/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "plat/csv.hpp"

namespace plat {

namespace {

constexpr double kLeft = 70.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string tick_label(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = 0.0, hi = 1.0;
};

Range padded(double lo, double hi) {
    if (!(lo <= hi)) return {0.0, 1.0};
    if (lo == hi) return {lo - 0.5, hi + 0.5};
    return {lo, hi};
}

}  // namespace

std::string render_line_chart(const ChartSpec& spec, const std::vector<Series>& series) {
    // Collect plottable points (log scale works on log10 y).
    std::vector<std::vector<std::pair<double, double>>> pts(series.size());
    double xlo = HUGE_VAL, xhi = -HUGE_VAL, ylo = HUGE_VAL, yhi = -HUGE_VAL;
    for (std::size_t s = 0; s < series.size(); ++s) {
        const std::size_t n = std::min(series[s].x.size(), series[s].y.size());
        for (std::size_t i = 0; i < n; ++i) {
            const double x = series[s].x[i];
            double y = series[s].y[i];
            if (spec.log_y) {
                if (!(y > 0.0)) continue;
                y = std::log10(y);
            }
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            pts[s].emplace_back(x, y);
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
    }
    const Range xr = padded(xlo, xhi);
    const Range yr = padded(ylo, yhi);
    const double pw = kChartWidth - kLeft - kRight;
    const double ph = kChartHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto sy = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kChartWidth << "\" height=\"" << kChartHeight
        << "\" viewBox=\"0 0 " << kChartWidth << ' ' << kChartHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kChartWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"16\">" << escape(spec.title) << "</text>\n";
    svg << "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
        << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + ph) << "\" x2=\"" << fixed(kLeft + pw)
        << "\" y2=\"" << fixed(kTop + ph) << "\"/>\n"
        << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
        << fixed(kTop + ph) << "\"/>\n</g>\n";
    svg << "<g id=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        svg << "<text x=\"" << fixed(sx(fx)) << "\" y=\"" << fixed(kTop + ph + 16) << "\" text-anchor=\"middle\">"
            << tick_label(fx) << "</text>\n";
        svg << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(sy(fy) + 4) << "\" text-anchor=\"end\">"
            << (spec.log_y ? "1e" + tick_label(fy) : tick_label(fy)) << "</text>\n";
    }
    svg << "</g>\n";
    svg << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << kChartHeight - 10
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(spec.x_label)
        << "</text>\n";
    svg << "<text x=\"16\" y=\"" << fixed(kTop + ph / 2) << "\" transform=\"rotate(-90 16 " << fixed(kTop + ph / 2)
        << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape(spec.log_y ? spec.y_label + " (log10)" : spec.y_label) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        if (!pts[s].empty()) {
            svg << "<path class=\"series\" data-label=\"" << escape(series[s].label) << "\" fill=\"none\" stroke=\""
                << color << "\" stroke-width=\"1.5\" d=\"";
            for (std::size_t i = 0; i < pts[s].size(); ++i)
                svg << (i == 0 ? "M" : " L") << fixed(sx(pts[s][i].first), 3) << ','
                    << fixed(sy(pts[s][i].second), 3);
            svg << "\"/>\n";
        }
        svg << "<text x=\"" << fixed(kLeft + pw - 4) << "\" y=\"" << fixed(kTop + 14 + 14.0 * s)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color << "\">"
            << escape(series[s].label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_csv_chart(const std::filesystem::path& csv, const std::string& x_column,
                             const std::vector<std::string>& y_columns, const ChartSpec& spec) {
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw CsvError("cannot open " + csv.string());
    CsvTable table;
    try {
        table = read_csv(in);
    } catch (const CsvError& e) {
        throw CsvError(csv.filename().string() + ": " + e.what());
    }
    const std::size_t xi = table.column(x_column);
    std::vector<Series> series;
    for (const auto& name : y_columns) {
        const std::size_t yi = table.column(name);
        Series s{name, {}, {}};
        for (const auto& row : table.rows) {
            s.x.push_back(row[xi]);
            s.y.push_back(row[yi]);
        }
        series.push_back(std::move(s));
    }
    return render_line_chart(spec, series);
}

std::vector<std::filesystem::path> render_plots(const std::vector<PlotJob>& jobs) {
    std::vector<std::filesystem::path> written;
    for (const auto& job : jobs) {
        std::ifstream probe(job.csv, std::ios::binary);
        if (!probe) throw CsvError("cannot open " + job.csv.string());
        std::string header;
        std::getline(probe, header);
        if (!header.empty() && header.back() == '\r') header.pop_back();

        std::string svg;
        if (header.rfind("step,energy", 0) == 0) {
            svg = render_csv_chart(job.csv, "step", {"energy"}, {"Energy vs step", "step", "J(u)", false});
        } else if (header.rfind("t,ratio", 0) == 0) {
            svg = render_csv_chart(job.csv, "t", {"ratio"}, {"HC/DC ratio vs t", "t", "ratio", true});
        } else if (header.rfind("epoch,", 0) == 0) {
            svg = render_csv_chart(job.csv, "epoch", {"train_acc", "test_acc"},
                                   {"Accuracy vs epoch", "epoch", "accuracy", false});
        } else {
            throw CsvError(job.csv.filename().string() + ": csv line 1: unrecognised header '" + header + "'");
        }
        std::ofstream out(job.svg, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + job.svg.string());
        out << svg;
        written.push_back(job.svg);
    }
    return written;
}

}  // namespace plat
