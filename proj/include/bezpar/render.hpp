#pragma once

#include <string>

#include "bezpar/documents.hpp"

namespace bezpar {

enum class RenderMode { Partition, Isocurves, JacobianColormap };

RenderMode parse_render_mode(const std::string& name);

// SVG 1.1 text. Partition mode draws every segmentation curve; isocurves mode
// draws iso_count iso-parameter curves per direction per patch plus the four
// patch boundaries (one <path> element each); colormap mode fills per-sample
// cells on a fixed blue-to-red scale over [0, 1].
std::string render_svg(const LayoutDocument& doc, RenderMode mode, int iso_count);

}  // namespace bezpar
