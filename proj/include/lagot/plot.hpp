#pragma once

#include <array>
#include <string>
#include <vector>

#include "lagot/bench.hpp"
#include "lagot/spline.hpp"

namespace lagot {

// Static SVG figure: source/target/push-forward scatter, transport paths, and
// either potential shading or metric eigenvector glyphs as background.
struct PlotData {
  std::array<double, 4> box{-1, -1, 1, 1};  // min_x, min_y, max_x, max_y (data coords)
  const EmpiricalMeasure* source = nullptr;
  const EmpiricalMeasure* target = nullptr;
  const EmpiricalMeasure* pushed = nullptr;
  std::vector<const PathSpline*> paths;
  const PotentialSpec* potential = nullptr;  // shaded background when set
  const MetricField* metric = nullptr;       // eigenvector glyphs when set
  int width = 720, height = 720;
};

std::string render_svg(const PlotData& data);

}  // namespace lagot
