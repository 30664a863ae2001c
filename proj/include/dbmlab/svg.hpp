#pragma once

// Minimal SVG line plots, derived purely from data already written to CSV;
// headless runs skip them entirely.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace dbmlab {

class SvgPlot {
public:
    SvgPlot(std::string title, std::string xlabel, std::string ylabel, bool log_x = false,
            bool log_y = false)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)),
          log_x_(log_x), log_y_(log_y) {}

    void add_series(const std::string& name, std::vector<double> xs, std::vector<double> ys) {
        series_.push_back({name, std::move(xs), std::move(ys)});
    }

    void write(const std::string& path) const {
        const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& s : series_)
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                const double x = tx(s.xs[i]), y = ty(s.ys[i]);
                if (!std::isfinite(x) || !std::isfinite(y)) continue;
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        if (!(xmax > xmin)) { xmin -= 1; xmax += 1; }
        if (!(ymax > ymin)) { ymin -= 1; ymax += 1; }
        const double padx = 0.03 * (xmax - xmin), pady = 0.05 * (ymax - ymin);
        xmin -= padx; xmax += padx; ymin -= pady; ymax += pady;

        auto px = [&](double x) { return ml + (tx(x) - xmin) / (xmax - xmin) * (w - ml - mr); };
        auto py = [&](double y) { return h - mb - (ty(y) - ymin) / (ymax - ymin) * (h - mt - mb); };

        static const char* colors[] = {"#1f6fb2", "#c23b22", "#3a9d4e", "#8c5aa8", "#b28b1f"};
        std::ostringstream svg;
        svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
            << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
        svg << "<rect x='" << ml << "' y='" << mt << "' width='" << (w - ml - mr) << "' height='"
            << (h - mt - mb) << "' fill='none' stroke='#444'/>\n";
        svg << "<text x='" << w / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title_
            << "</text>\n";
        svg << "<text x='" << w / 2 << "' y='" << h - 10 << "' text-anchor='middle' font-size='12'>"
            << xlabel_ << (log_x_ ? " (log)" : "") << "</text>\n";
        svg << "<text x='16' y='" << h / 2 << "' font-size='12' transform='rotate(-90 16 "
            << h / 2 << ")' text-anchor='middle'>" << ylabel_ << (log_y_ ? " (log)" : "")
            << "</text>\n";
        for (int k = 0; k <= 4; ++k) {
            const double fx = xmin + (xmax - xmin) * k / 4.0;
            const double fy = ymin + (ymax - ymin) * k / 4.0;
            const double sx = ml + (w - ml - mr) * k / 4.0;
            const double sy = h - mb - (h - mt - mb) * k / 4.0;
            svg << "<text x='" << sx << "' y='" << h - mb + 16
                << "' text-anchor='middle' font-size='10'>" << label(fx, log_x_) << "</text>\n";
            svg << "<text x='" << ml - 6 << "' y='" << sy + 3
                << "' text-anchor='end' font-size='10'>" << label(fy, log_y_) << "</text>\n";
        }
        int ci = 0;
        double ly = mt + 14;
        for (const auto& s : series_) {
            const char* color = colors[ci % 5];
            svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (!std::isfinite(tx(s.xs[i])) || !std::isfinite(ty(s.ys[i]))) continue;
                svg << px(s.xs[i]) << ',' << py(s.ys[i]) << ' ';
            }
            svg << "'/>\n";
            svg << "<text x='" << w - mr - 6 << "' y='" << ly
                << "' text-anchor='end' font-size='11' fill='" << color << "'>" << s.name
                << "</text>\n";
            ly += 14;
            ++ci;
        }
        svg << "</svg>\n";
        std::ofstream out(path, std::ios::binary);
        out << svg.str();
    }

private:
    struct Series {
        std::string name;
        std::vector<double> xs, ys;
    };

    double tx(double x) const { return log_x_ ? std::log10(std::max(x, 1e-300)) : x; }
    double ty(double y) const { return log_y_ ? std::log10(std::max(y, 1e-300)) : y; }

    static std::string label(double v, bool is_log) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), is_log ? "1e%.1f" : "%.3g", v);
        return buf;
    }

    std::string title_, xlabel_, ylabel_;
    bool log_x_, log_y_;
    std::vector<Series> series_;
};

} // namespace dbmlab
