#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace verifsim::svg {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal line chart, enough for trace comparisons and detection-rate curves.
inline std::string line_chart(const std::vector<Series>& series, const std::string& title,
                              int width = 720, int height = 360) {
    double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
    bool first = true;
    for (const auto& s : series) {
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                min_x = max_x = s.x[i];
                min_y = max_y = s.y[i];
                first = false;
            }
            min_x = std::min(min_x, s.x[i]);
            max_x = std::max(max_x, s.x[i]);
            min_y = std::min(min_y, s.y[i]);
            max_y = std::max(max_y, s.y[i]);
        }
    }
    if (max_x == min_x) max_x = min_x + 1;
    if (max_y == min_y) max_y = min_y + 1;

    const int margin = 48;
    auto sx = [&](double x) {
        return margin + (x - min_x) / (max_x - min_x) * (width - 2 * margin);
    };
    auto sy = [&](double y) {
        return height - margin - (y - min_y) / (max_y - min_y) * (height - 2 * margin);
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + std::to_string(width / 2) + "\" y=\"20\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"14\">" + title + "</text>\n";
    out += "<line x1=\"" + num(margin) + "\" y1=\"" + num(height - margin) + "\" x2=\"" +
           num(width - margin) + "\" y2=\"" + num(height - margin) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + num(margin) + "\" y1=\"" + num(margin) + "\" x2=\"" + num(margin) +
           "\" y2=\"" + num(height - margin) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(margin) + "\" y=\"" + num(height - margin + 16) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + num(min_x) + "</text>\n";
    out += "<text x=\"" + num(width - margin) + "\" y=\"" + num(height - margin + 16) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(max_x) + "</text>\n";
    out += "<text x=\"" + num(margin - 4) + "\" y=\"" + num(height - margin) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(min_y) + "</text>\n";
    out += "<text x=\"" + num(margin - 4) + "\" y=\"" + num(margin) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(max_y) + "</text>\n";

    int legend_y = margin;
    for (const auto& s : series) {
        if (s.x.empty()) continue;
        std::string points;
        for (size_t i = 0; i < s.x.size(); ++i) {
            points += num(sx(s.x[i])) + "," + num(sy(s.y[i])) + " ";
        }
        out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" +
               points + "\"/>\n";
        out += "<text x=\"" + num(width - margin - 4) + "\" y=\"" + num(legend_y) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + s.color +
               "\">" + s.label + "</text>\n";
        legend_y += 14;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace verifsim::svg
