#pragma once

// Minimal standalone SVG line/scatter plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace kamforge::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    bool line = true;
    double radius = 2.0;
};

struct Plot {
    std::string title;
    std::string xlabel, ylabel;
    bool logx = false, logy = false;
    std::vector<Series> series;
    std::string comment;  // embedded as an XML comment (version, digest)
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '-':
                out += c;
                break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

inline std::string render(const Plot& p, int width = 640, int height = 420) {
    const double left = 70, right = 20, top = 40, bottom = 50;
    auto tx = [&](double v) { return p.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return p.logy ? std::log10(v) : v; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((p.logx && s.x[i] <= 0) || (p.logy && s.y[i] <= 0)) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return top + ph - (ty(v) - y0) / (y1 - y0) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    if (!p.comment.empty()) os << "<!-- " << detail::escape(p.comment) << " -->\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << detail::escape(p.title) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = x0 + (x1 - x0) * t / 4, fy = y0 + (y1 - y0) * t / 4;
        const double sx = left + pw * t / 4, sy = top + ph - ph * t / 4;
        const std::string lx = p.logx ? "1e" + detail::num(fx) : detail::num(fx);
        const std::string ly = p.logy ? "1e" + detail::num(fy) : detail::num(fy);
        os << "<line x1=\"" << sx << "\" y1=\"" << top + ph << "\" x2=\"" << sx << "\" y2=\"" << top + ph + 5
           << "\" stroke=\"black\"/><text x=\"" << sx << "\" y=\"" << top + ph + 18
           << "\" text-anchor=\"middle\">" << lx << "</text>\n";
        os << "<line x1=\"" << left - 5 << "\" y1=\"" << sy << "\" x2=\"" << left << "\" y2=\"" << sy
           << "\" stroke=\"black\"/><text x=\"" << left - 8 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << ly
           << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
       << detail::escape(p.xlabel) << "</text>\n";
    os << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << detail::escape(p.ylabel) << "</text>\n";

    int legend = 0;
    for (const auto& s : p.series) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((p.logx && s.x[i] <= 0) || (p.logy && s.y[i] <= 0)) continue;
            if (s.line) pts << detail::num(px(s.x[i])) << "," << detail::num(py(s.y[i])) << " ";
            else
                os << "<circle cx=\"" << detail::num(px(s.x[i])) << "\" cy=\"" << detail::num(py(s.y[i]))
                   << "\" r=\"" << s.radius << "\" fill=\"" << s.color << "\"/>\n";
        }
        if (s.line)
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
               << "\"/>\n";
        if (!s.label.empty()) {
            const double ly = top + 14 + 16 * legend++;
            os << "<rect x=\"" << left + 10 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << s.color
               << "\"/><text x=\"" << left + 26 << "\" y=\"" << ly << "\">" << detail::escape(s.label) << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace kamforge::svg
