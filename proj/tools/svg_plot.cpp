#include "svg_plot.hpp"

#include "qiv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace qiv::cli {

namespace {

struct Bar {
    std::string label;
    double value;
};

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

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string short_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// One panel: vertical bars with a y axis and tick labels.
void panel(std::ostringstream& svg, double x0, double y0, double width, double height,
           const std::string& title, const std::vector<Bar>& bars) {
    const double left = 60, bottom = 70, top = 30;
    const double plot_w = width - left - 20;
    const double plot_h = height - top - bottom;
    const double ax = x0 + left, ay = y0 + top + plot_h;

    svg << "<text x=\"" << fixed(x0 + width / 2) << "\" y=\"" << fixed(y0 + 18)
        << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
    svg << "<line x1=\"" << fixed(ax) << "\" y1=\"" << fixed(y0 + top) << "\" x2=\"" << fixed(ax)
        << "\" y2=\"" << fixed(ay) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << fixed(ax) << "\" y1=\"" << fixed(ay) << "\" x2=\""
        << fixed(ax + plot_w) << "\" y2=\"" << fixed(ay) << "\" stroke=\"black\"/>\n";
    if (bars.empty()) {
        svg << "<text x=\"" << fixed(ax + plot_w / 2) << "\" y=\"" << fixed(ay - plot_h / 2)
            << "\" text-anchor=\"middle\" font-size=\"12\">no data</text>\n";
        return;
    }

    double vmax = 0.0;
    for (const auto& b : bars) vmax = std::max(vmax, b.value);
    if (!(vmax > 0.0)) vmax = 1.0;
    for (int t = 0; t <= 4; ++t) {
        const double v = vmax * t / 4.0;
        const double y = ay - plot_h * t / 4.0;
        svg << "<line x1=\"" << fixed(ax - 4) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(ax)
            << "\" y2=\"" << fixed(y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fixed(ax - 6) << "\" y=\"" << fixed(y + 4)
            << "\" text-anchor=\"end\" font-size=\"10\">" << short_value(v) << "</text>\n";
    }

    const double slot = plot_w / static_cast<double>(bars.size());
    const double bar_w = slot * 0.6;
    for (std::size_t k = 0; k < bars.size(); ++k) {
        const double h = plot_h * std::max(0.0, bars[k].value) / vmax;
        const double bx = ax + slot * static_cast<double>(k) + (slot - bar_w) / 2;
        svg << "<rect x=\"" << fixed(bx) << "\" y=\"" << fixed(ay - h) << "\" width=\""
            << fixed(bar_w) << "\" height=\"" << fixed(h) << "\" fill=\"#4a7ab5\"/>\n";
        svg << "<text x=\"" << fixed(bx + bar_w / 2) << "\" y=\"" << fixed(ay - h - 4)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << short_value(bars[k].value)
            << "</text>\n";
        const double lx = bx + bar_w / 2, ly = ay + 12;
        svg << "<text x=\"" << fixed(lx) << "\" y=\"" << fixed(ly)
            << "\" text-anchor=\"end\" font-size=\"10\" transform=\"rotate(-35 " << fixed(lx)
            << ' ' << fixed(ly) << ")\">" << escape(bars[k].label) << "</text>\n";
    }
}

}  // namespace

std::string metrics_svg(const MetricsTable& table, const std::string& title) {
    std::vector<Bar> mse, pe;
    for (const auto& row : table.rows) {
        const std::string label = row.estimator + " / " + row.predictor;
        // MSE is shared by the two predictor rows of one estimator.
        if (row.mse && row.predictor != "working") mse.push_back({row.estimator, *row.mse});
        if (row.pe) pe.push_back({label, *row.pe});
    }
    const double width = 900, height = 380;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height
        << "\" font-family=\"sans-serif\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">"
        << escape(title) << " (" << table.reps_ok << " replications)</text>\n";
    panel(svg, 0, 30, width / 2, height - 30, "mean MSE", mse);
    panel(svg, width / 2, 30, width / 2, height - 30, "mean PE", pe);
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace qiv::cli
