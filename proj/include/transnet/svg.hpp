#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "transnet/tensor.hpp"

// Small self-contained SVG emitter for the experiment figures: multi-series
// line charts (optionally with error bars) and overlaid histograms.

namespace transnet {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> yerr;  // optional, same length as y
};

namespace detail {

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % 8];
}

inline std::string fmt_tick(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

}  // namespace detail

inline void write_line_chart_svg(const std::string& path, const std::string& title,
                                 const std::string& xlabel, const std::string& ylabel,
                                 const std::vector<PlotSeries>& series) {
    const int W = 640, H = 420;
    const double left = 56, right = W - 20, top = 30, bottom = H - 50;

    double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    bool first = true;
    for (const PlotSeries& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double err = i < s.yerr.size() ? s.yerr[i] : 0.0;
            if (first) {
                xlo = xhi = s.x[i];
                ylo = s.y[i] - err;
                yhi = s.y[i] + err;
                first = false;
            }
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i] - err);
            yhi = std::max(yhi, s.y[i] + err);
        }
    if (xhi == xlo) xhi = xlo + 1;
    if (yhi == ylo) yhi = ylo + 1;
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;

    const auto px = [&](double v) { return left + (v - xlo) / (xhi - xlo) * (right - left); };
    const auto py = [&](double v) { return bottom - (v - ylo) / (yhi - ylo) * (bottom - top); };

    std::ofstream os(path);
    if (!os) throw format_error("cannot open SVG for writing: " + path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\" "
          "font-family=\"sans-serif\">" << title << "</text>\n";

    os << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double tx = xlo + (xhi - xlo) * i / 4.0;
        const double ty = ylo + (yhi - ylo) * i / 4.0;
        os << "<text x=\"" << px(tx) << "\" y=\"" << bottom + 16
           << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">"
           << detail::fmt_tick(tx) << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(ty) + 3
           << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
           << detail::fmt_tick(ty) << "</text>\n";
    }
    os << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 32
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << xlabel
       << "</text>\n";
    os << "<text x=\"14\" y=\"" << (top + bottom) / 2
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" "
          "transform=\"rotate(-90 14 " << (top + bottom) / 2 << ")\">" << ylabel << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const PlotSeries& s = series[si];
        const char* color = detail::series_color(si);
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) pts << px(s.x[i]) << "," << py(s.y[i]) << " ";
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
           << pts.str() << "\"/>\n";
        for (std::size_t i = 0; i < s.yerr.size() && i < s.x.size(); ++i) {
            if (s.yerr[i] <= 0) continue;
            os << "<line x1=\"" << px(s.x[i]) << "\" y1=\"" << py(s.y[i] - s.yerr[i]) << "\" x2=\""
               << px(s.x[i]) << "\" y2=\"" << py(s.y[i] + s.yerr[i]) << "\" stroke=\"" << color
               << "\" stroke-width=\"1\"/>\n";
        }
        os << "<text x=\"" << W - 24 << "\" y=\"" << 36 + 14 * static_cast<double>(si)
           << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" fill=\"" << color
           << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
}

struct HistogramSeries {
    std::string label;
    std::vector<double> values;
};

/// Overlaid step-outline histograms on a shared [0, max] range.
inline void write_histogram_svg(const std::string& path, const std::string& title,
                                const std::string& xlabel,
                                const std::vector<HistogramSeries>& series, int bins = 50) {
    double hi = 0.0;
    for (const HistogramSeries& s : series)
        for (double v : s.values) hi = std::max(hi, v);
    if (hi <= 0.0) hi = 1.0;

    std::vector<PlotSeries> lines;
    for (const HistogramSeries& s : series) {
        std::vector<int> counts(static_cast<std::size_t>(bins), 0);
        for (double v : s.values) {
            int b = static_cast<int>(v / hi * bins);
            b = std::clamp(b, 0, bins - 1);
            ++counts[static_cast<std::size_t>(b)];
        }
        PlotSeries line;
        line.label = s.label;
        for (int b = 0; b < bins; ++b) {
            line.x.push_back(hi * b / bins);
            line.y.push_back(counts[static_cast<std::size_t>(b)]);
            line.x.push_back(hi * (b + 1) / bins);
            line.y.push_back(counts[static_cast<std::size_t>(b)]);
        }
        lines.push_back(std::move(line));
    }
    write_line_chart_svg(path, title, xlabel, "count", lines);
}

}  // namespace transnet
