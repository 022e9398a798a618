#pragma once

#include <span>
#include <string>

#include "graphmdn/graph.hpp"
#include "graphmdn/mdn.hpp"

namespace graphmdn {

/// Static SVG for one sample: a 2D input panel followed by one panel per
/// azimuth showing all kernel skeletons, stroke opacity 0.05 + 0.95 * pi_j.
/// The 3D-to-2D panel projection is an azimuth rotation about the vertical
/// axis followed by an orthographic drop of the depth coordinate.
/// Output bytes are deterministic for fixed inputs.
std::string render_sample_svg(const SkeletonGraph& graph, std::span<const double> input2d,
                              const PoseMixture& mixture,
                              std::span<const double> azimuths_deg);

} // namespace graphmdn
