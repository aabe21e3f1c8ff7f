#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "ppl/dataset.hpp"
#include "ppl/toy.hpp"

namespace ppl {

/// One curve to draw: a polyline in task coordinates.
struct PlotCurve {
    std::vector<ToyPosition> points;
    std::string color = "black";
    double width = 1.5;
    std::string label;
};

/// Render toy-task trajectories as a static SVG: grid lines at the 50 x
/// positions, expert curves in black, policy curves colored.
inline void render_trajectories_svg(const ToyPathEnv& env,
                                    const std::vector<PlotCurve>& curves,
                                    const std::string& path) {
    if (curves.empty()) throw dataset_error("render_trajectories: no curves to draw");
    const double x_min = env.x_grid.front() - 0.05, x_max = env.x_grid.back() + 0.05;
    const double y_min = env.y_low - 0.1, y_max = env.y_high + 0.1;
    const double W = 720, H = 480, margin = 40;
    auto sx = [&](double x) {
        return margin + (x - x_min) / (x_max - x_min) * (W - 2 * margin);
    };
    auto sy = [&](double y) {
        return H - margin - (y - y_min) / (y_max - y_min) * (H - 2 * margin);
    };

    std::ofstream os(path);
    if (!os) throw dataset_error("cannot open svg for writing: " + path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (double gx : env.x_grid)
        os << "<line x1=\"" << sx(gx) << "\" y1=\"" << sy(y_min) << "\" x2=\"" << sx(gx)
           << "\" y2=\"" << sy(y_max) << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    // axes
    os << "<line x1=\"" << sx(x_min) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(x_max)
       << "\" y2=\"" << sy(0) << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";

    double ly = margin;
    for (const auto& c : curves) {
        os << "<polyline fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\""
           << c.width << "\" points=\"";
        for (const auto& p : c.points) os << sx(p.x) << "," << sy(p.y) << " ";
        os << "\"/>\n";
        if (!c.label.empty()) {
            os << "<text x=\"" << W - margin - 160 << "\" y=\"" << ly << "\" fill=\""
               << c.color << "\" font-size=\"13\">" << c.label << "</text>\n";
            ly += 16;
        }
    }
    // start / target markers
    os << "<circle cx=\"" << sx(env.x_grid.front()) << "\" cy=\"" << sy(0)
       << "\" r=\"4\" fill=\"green\"/>\n";
    os << "<circle cx=\"" << sx(env.x_grid.back()) << "\" cy=\"" << sy(0)
       << "\" r=\"4\" fill=\"red\"/>\n";
    os << "</svg>\n";
    if (!os) throw dataset_error("svg write failed: " + path);
}

/// Simple score-curve SVG: one polyline per labelled series.
struct ScoreSeries {
    std::vector<std::pair<double, double>> points;  // (step, score)
    std::string color = "blue";
    std::string label;
};

inline void render_scores_svg(const std::vector<ScoreSeries>& series,
                              const std::string& path) {
    if (series.empty()) throw dataset_error("render_scores: no series to draw");
    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    if (x_max <= x_min) x_max = x_min + 1;
    if (y_max <= y_min) y_max = y_min + 1;
    const double W = 720, H = 480, margin = 50;
    auto sx = [&](double x) {
        return margin + (x - x_min) / (x_max - x_min) * (W - 2 * margin);
    };
    auto sy = [&](double y) {
        return H - margin - (y - y_min) / (y_max - y_min) * (H - 2 * margin);
    };
    std::ofstream os(path);
    if (!os) throw dataset_error("cannot open svg for writing: " + path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    double ly = margin;
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color
           << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points) os << sx(x) << "," << sy(y) << " ";
        os << "\"/>\n";
        if (!s.label.empty()) {
            os << "<text x=\"" << W - margin - 120 << "\" y=\"" << ly << "\" fill=\""
               << s.color << "\" font-size=\"13\">" << s.label << "</text>\n";
            ly += 16;
        }
    }
    os << "</svg>\n";
}

/// Exponential moving average with the given coefficient:
/// ema_t = coef * x_t + (1 - coef) * ema_{t-1}.
inline std::vector<std::pair<double, double>> ema_series(
    const std::vector<std::pair<double, double>>& xs, double coef = 0.3) {
    std::vector<std::pair<double, double>> out;
    out.reserve(xs.size());
    double ema = 0.0;
    bool first = true;
    for (const auto& [x, y] : xs) {
        ema = first ? y : coef * y + (1.0 - coef) * ema;
        first = false;
        out.push_back({x, ema});
    }
    return out;
}

}  // namespace ppl
