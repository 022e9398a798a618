#include "graphmdn/svgplot.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "graphmdn/errors.hpp"

namespace graphmdn {

namespace {

constexpr double kPanelSize = 220.0;
constexpr double kMargin = 14.0;
constexpr double kTitleBand = 18.0;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

struct PanelMapper {
    double x0;
    // normalized coords are in [-1.1, 1.1]; y is flipped for screen space
    double px(double x) const { return x0 + (x + 1.1) / 2.2 * kPanelSize; }
    double py(double y) const { return kTitleBand + (1.1 - y) / 2.2 * kPanelSize; }
};

void draw_skeleton(std::ostringstream& out, const SkeletonGraph& graph, const PanelMapper& map,
                   std::span<const double> xy, const std::string& color, double opacity) {
    out << "  <g stroke=\"" << color << "\" stroke-opacity=\"" << fmt(opacity)
        << "\" stroke-width=\"2\" fill=\"none\">\n";
    for (const auto& [a, b] : graph.edges()) {
        out << "    <line x1=\"" << fmt(map.px(xy[2 * a])) << "\" y1=\"" << fmt(map.py(xy[2 * a + 1]))
            << "\" x2=\"" << fmt(map.px(xy[2 * b])) << "\" y2=\"" << fmt(map.py(xy[2 * b + 1]))
            << "\"/>\n";
    }
    out << "  </g>\n";
    out << "  <g fill=\"" << color << "\" fill-opacity=\"" << fmt(opacity) << "\">\n";
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
        out << "    <circle cx=\"" << fmt(map.px(xy[2 * i])) << "\" cy=\""
            << fmt(map.py(xy[2 * i + 1])) << "\" r=\"2.2\"/>\n";
    }
    out << "  </g>\n";
}

} // namespace

std::string render_sample_svg(const SkeletonGraph& graph, std::span<const double> input2d,
                              const PoseMixture& mixture,
                              std::span<const double> azimuths_deg) {
    const std::size_t k = graph.node_count();
    if (input2d.size() != 2 * k) throw ShapeError("render_sample_svg: input2d length != 2K");
    if (mixture.mu.cols() != 3 * k) throw ShapeError("render_sample_svg: mixture width != 3K");

    const std::size_t panels = 1 + azimuths_deg.size();
    const double width = kMargin + panels * (kPanelSize + kMargin);
    const double height = kTitleBand + kPanelSize + kMargin;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
        << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " " << fmt(height) << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    PanelMapper map{kMargin};
    out << "  <text x=\"" << fmt(map.x0) << "\" y=\"12\" font-size=\"11\" font-family=\"sans-serif\">"
        << "input (2D)</text>\n";
    draw_skeleton(out, graph, map, input2d, "#444444", 1.0);

    std::vector<double> projected(2 * k);
    for (std::size_t p = 0; p < azimuths_deg.size(); ++p) {
        map.x0 = kMargin + (p + 1) * (kPanelSize + kMargin);
        out << "  <text x=\"" << fmt(map.x0) << "\" y=\"12\" font-size=\"11\" "
            << "font-family=\"sans-serif\">hypotheses, azimuth=" << fmt(azimuths_deg[p])
            << "</text>\n";
        const double rad = azimuths_deg[p] * M_PI / 180.0;
        const double ca = std::cos(rad), sa = std::sin(rad);
        for (std::size_t j = 0; j < mixture.kernels; ++j) {
            const double* mu = mixture.mu.row(j);
            for (std::size_t i = 0; i < k; ++i) {
                projected[2 * i] = mu[3 * i] * ca + mu[3 * i + 2] * sa;
                projected[2 * i + 1] = mu[3 * i + 1];
            }
            const double opacity = 0.05 + 0.95 * mixture.pi[j];
            draw_skeleton(out, graph, map, projected, "#1f6fb4", opacity);
        }
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace graphmdn
