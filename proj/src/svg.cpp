#include "sdnv/svg.hpp"

#include "sdnv/rulemap.hpp"

#include <array>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sdnv {

namespace {

constexpr std::array<const char*, 10> kPalette = {"#8fb3e0", "#e8a3a3", "#a6d49f", "#d9c27a",
                                                  "#c3a6d9", "#8fd1cc", "#e0b48f", "#b8b8b8",
                                                  "#d9a6c8", "#a3c4a3"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

RegionPlot emit_region_svg(const SDNetwork& net, const ClassificationGraph* graph,
                           const std::vector<Finding>& findings, int resolution) {
    if (net.input_dim() != 2) {
        throw std::invalid_argument("region plots need a 2D input space, got dimension " +
                                    std::to_string(net.input_dim()));
    }
    if (resolution < 2) throw std::invalid_argument("resolution must be at least 2");

    const Box& box = net.input_bounds;
    const double w = box.upper[0] - box.lower[0];
    const double h = box.upper[1] - box.lower[1];
    const int n = resolution;
    const double px = 600.0 / n;  // cell size in svg units
    const double size = px * n;
    auto sx = [&](double x) { return (x - box.lower[0]) / w * size; };
    auto sy = [&](double y) { return size - (y - box.lower[1]) / h * size; };

    std::vector<int> cls(std::size_t(n) * n);
    std::vector<std::uint64_t> key(std::size_t(n) * n);
    std::ostringstream csv;
    csv << "x,y,class,key\n";
    csv.precision(17);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            Vector p(2);
            p << box.lower[0] + (i + 0.5) / n * w, box.lower[1] + (j + 0.5) / n * h;
            const auto fr = forward(net, p);
            const std::size_t c = std::size_t(j) * n + i;
            cls[c] = fr.predicted();
            key[c] = pattern_number(fr.pattern, net.group_count).number;
            csv << p[0] << ',' << p[1] << ',' << cls[c] << ',' << key[c] << '\n';
        }
    }

    RegionPlot plot;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(size) << "\" height=\""
        << fmt(size) << "\" viewBox=\"0 0 " << fmt(size) << ' ' << fmt(size) << "\">\n";
    svg << "<g class=\"raster\" shape-rendering=\"crispEdges\">\n";
    for (int j = 0; j < n; ++j) {
        int start = 0;
        for (int i = 1; i <= n; ++i) {
            const std::size_t row = std::size_t(j) * n;
            if (i < n && cls[row + i] == cls[row + start]) continue;
            svg << "<rect x=\"" << fmt(start * px) << "\" y=\"" << fmt(size - (j + 1) * px)
                << "\" width=\"" << fmt((i - start) * px) << "\" height=\"" << fmt(px)
                << "\" fill=\"" << kPalette[std::size_t(cls[row + start]) % kPalette.size()]
                << "\"/>\n";
            start = i;
        }
    }
    svg << "</g>\n<g class=\"boundaries\" stroke-width=\"1\">\n";
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const std::size_t c = std::size_t(j) * n + i;
            if (i + 1 < n && key[c] != key[c + 1]) {
                const char* colour = cls[c] != cls[c + 1] ? "#000" : "#666";
                svg << "<line x1=\"" << fmt((i + 1) * px) << "\" y1=\"" << fmt(size - j * px)
                    << "\" x2=\"" << fmt((i + 1) * px) << "\" y2=\"" << fmt(size - (j + 1) * px)
                    << "\" stroke=\"" << colour << "\"/>\n";
            }
            if (j + 1 < n && key[c] != key[c + n]) {
                const char* colour = cls[c] != cls[c + n] ? "#000" : "#666";
                svg << "<line x1=\"" << fmt(i * px) << "\" y1=\"" << fmt(size - (j + 1) * px)
                    << "\" x2=\"" << fmt((i + 1) * px) << "\" y2=\"" << fmt(size - (j + 1) * px)
                    << "\" stroke=\"" << colour << "\"/>\n";
            }
        }
    }
    svg << "</g>\n";
    if (graph) {
        svg << "<g class=\"edges\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" stroke-opacity=\"0.6\">\n";
        for (const auto& [a, b] : graph->edges) {
            const Vector& pa = graph->vertices[a].witness;
            const Vector& pb = graph->vertices[b].witness;
            svg << "<line class=\"edge\" x1=\"" << fmt(sx(pa[0])) << "\" y1=\"" << fmt(sy(pa[1]))
                << "\" x2=\"" << fmt(sx(pb[0])) << "\" y2=\"" << fmt(sy(pb[1])) << "\"/>\n";
            ++plot.edges_drawn;
        }
        svg << "</g>\n";
    }
    svg << "<g class=\"findings\" fill=\"none\" stroke=\"#ff8c00\" stroke-width=\"3\">\n";
    for (const auto& f : findings) {
        const double r = std::max(f.ball.radius / w * size, 4.0);
        svg << "<circle class=\"finding\" cx=\"" << fmt(sx(f.ball.center[0])) << "\" cy=\""
            << fmt(sy(f.ball.center[1])) << "\" r=\"" << fmt(r) << "\"/>\n";
        ++plot.findings_drawn;
    }
    svg << "</g>\n</svg>\n";

    plot.svg = svg.str();
    plot.csv = csv.str();
    return plot;
}

}  // namespace sdnv
