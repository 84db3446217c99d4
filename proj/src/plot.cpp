#include "lagot/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lagot/lagrangian.hpp"

namespace lagot {

namespace {

struct Mapper {
  std::array<double, 4> box;
  int w, h;
  double margin = 30.0;

  double sx(double x) const {
    return margin + (x - box[0]) / (box[2] - box[0]) * (w - 2 * margin);
  }
  double sy(double y) const {  // svg y grows downward
    return h - margin - (y - box[1]) / (box[3] - box[1]) * (h - 2 * margin);
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void scatter(std::ostringstream& os, const Mapper& m, const EmpiricalMeasure& pts,
             const char* color, double r) {
  for (int i = 0; i < pts.size(); ++i) {
    auto p = pts.point(i);
    os << "<circle cx=\"" << fmt(m.sx(p[0])) << "\" cy=\"" << fmt(m.sy(p[1])) << "\" r=\"" << r
       << "\" fill=\"" << color << "\" fill-opacity=\"0.75\"/>\n";
  }
}

}  // namespace

std::string render_svg(const PlotData& data) {
  Mapper m{data.box, data.width, data.height};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << data.width << "\" height=\""
     << data.height << "\" viewBox=\"0 0 " << data.width << " " << data.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (data.potential) {
    // shaded cells, darker where passing costs more (-U large)
    const int cells = 48;
    double umin = 0.0, umax = 0.0;
    std::vector<double> vals(static_cast<size_t>(cells) * cells);
    for (int i = 0; i < cells; ++i)
      for (int j = 0; j < cells; ++j) {
        double x = data.box[0] + (data.box[2] - data.box[0]) * (i + 0.5) / cells;
        double y = data.box[1] + (data.box[3] - data.box[1]) * (j + 0.5) / cells;
        double u = -potential_value(*data.potential, std::array<double, 2>{x, y});
        vals[static_cast<size_t>(i) * cells + j] = u;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
      }
    double span = std::max(umax - umin, 1e-12);
    for (int i = 0; i < cells; ++i)
      for (int j = 0; j < cells; ++j) {
        double frac = (vals[static_cast<size_t>(i) * cells + j] - umin) / span;
        if (frac < 0.02) continue;
        int shade = static_cast<int>(245 - 160 * frac);
        double x0 = data.box[0] + (data.box[2] - data.box[0]) * i / cells;
        double y1 = data.box[1] + (data.box[3] - data.box[1]) * (j + 1.0) / cells;
        double w = (m.sx(data.box[2]) - m.sx(data.box[0])) / cells;
        double h = (m.sy(data.box[1]) - m.sy(data.box[3])) / cells;
        os << "<rect x=\"" << fmt(m.sx(x0)) << "\" y=\"" << fmt(m.sy(y1)) << "\" width=\""
           << fmt(w) << "\" height=\"" << fmt(h) << "\" fill=\"rgb(" << shade << "," << shade
           << "," << shade << ")\"/>\n";
      }
  }

  if (data.metric) {
    // short segments along the smallest eigenvector (the cheap direction)
    const int glyphs = 18;
    double len = std::min(data.box[2] - data.box[0], data.box[3] - data.box[1]) / glyphs * 0.38;
    for (int i = 0; i < glyphs; ++i)
      for (int j = 0; j < glyphs; ++j) {
        double x = data.box[0] + (data.box[2] - data.box[0]) * (i + 0.5) / glyphs;
        double y = data.box[1] + (data.box[3] - data.box[1]) * (j + 0.5) / glyphs;
        std::array<double, 4> a;
        try {
          a = metric_value(*data.metric, std::array<double, 2>{x, y});
        } catch (const std::exception&) {
          continue;  // e.g. the circle metric at the origin
        }
        auto e = eigen_sym2(a);
        os << "<line x1=\"" << fmt(m.sx(x - e.vec1[0] * len)) << "\" y1=\""
           << fmt(m.sy(y - e.vec1[1] * len)) << "\" x2=\"" << fmt(m.sx(x + e.vec1[0] * len))
           << "\" y2=\"" << fmt(m.sy(y + e.vec1[1] * len))
           << "\" stroke=\"#7f7f7f\" stroke-width=\"1.4\"/>\n";
      }
  }

  for (const PathSpline* path : data.paths) {
    os << "<polyline fill=\"none\" stroke=\"#a8a8fe\" stroke-width=\"1.6\" points=\"";
    for (int k = 0; k <= 48; ++k) {
      auto p = path->position(k / 48.0);
      os << fmt(m.sx(p[0])) << "," << fmt(m.sy(p[1])) << " ";
    }
    os << "\"/>\n";
  }

  if (data.source) scatter(os, m, *data.source, "#1a254b", 3.0);
  if (data.target) scatter(os, m, *data.target, "#a7bed3", 3.0);
  if (data.pushed) scatter(os, m, *data.pushed, "#f2545c", 2.4);

  os << "</svg>\n";
  return os.str();
}

}  // namespace lagot
