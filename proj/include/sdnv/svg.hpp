#pragma once

// 2D region plots: class raster, region boundaries, graph edges and
// adversarial-region highlights.

#include "sdnv/rgrv.hpp"
#include "sdnv/sdn.hpp"

#include <string>
#include <vector>

namespace sdnv {

struct RegionPlot {
    std::string svg;
    std::string csv;  // x,y,class,key per grid cell center
    std::size_t findings_drawn = 0;
    std::size_t edges_drawn = 0;
};

/// Rasterizes `net` on a resolution x resolution grid over its input box.
/// `graph` may be null (no edges drawn). Refuses inputs that are not 2D.
RegionPlot emit_region_svg(const SDNetwork& net, const ClassificationGraph* graph,
                           const std::vector<Finding>& findings, int resolution);

}  // namespace sdnv
