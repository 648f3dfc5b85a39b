#include "bezpar/render.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace bezpar {

namespace {

constexpr int kCurveSamples = 32;

struct Mapper {
  BBox box;
  double scale = 1.0;
  double margin = 0.0;

  Point2 map(const Point2& p) const {
    return {(p.x - box.lo.x) * scale + margin, (box.hi.y - p.y) * scale + margin};
  }
  double width() const { return (box.hi.x - box.lo.x) * scale + 2 * margin; }
  double height() const { return (box.hi.y - box.lo.y) * scale + 2 * margin; }
};

std::string color_of(double js) {
  const double t = std::clamp(js, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255.0 * t));
  const int b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  std::ostringstream os;
  os << "#" << std::hex << std::setfill('0') << std::setw(2) << r << "00"
     << std::setw(2) << b;
  return os.str();
}

void emit_polyline_path(std::ostringstream& os, const Mapper& m,
                        const std::vector<Point2>& pts, const char* stroke) {
  os << "<path fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
     << 0.002 * std::max(m.width(), m.height()) << "\" d=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2 q = m.map(pts[i]);
    os << (i == 0 ? "M" : "L") << q.x << " " << q.y << " ";
  }
  os << "\"/>\n";
}

std::vector<Point2> sample_curve(const BezierCurve& c) {
  std::vector<Point2> pts;
  for (int k = 0; k <= kCurveSamples; ++k)
    pts.push_back(c.eval(static_cast<double>(k) / kCurveSamples));
  return pts;
}

std::vector<Point2> sample_iso(const BezierPatch& p, bool u_const, double value) {
  std::vector<Point2> pts;
  for (int k = 0; k <= kCurveSamples; ++k) {
    const double t = static_cast<double>(k) / kCurveSamples;
    pts.push_back(u_const ? p.eval(value, t) : p.eval(t, value));
  }
  return pts;
}

}  // namespace

RenderMode parse_render_mode(const std::string& name) {
  if (name == "partition") return RenderMode::Partition;
  if (name == "isocurves") return RenderMode::Isocurves;
  if (name == "jacobian" || name == "jacobian_colormap")
    return RenderMode::JacobianColormap;
  throw std::invalid_argument("render: unknown mode '" + name + "'");
}

std::string render_svg(const LayoutDocument& doc, RenderMode mode, int iso_count) {
  if (iso_count < 0) throw std::invalid_argument("render: iso_count must be >= 0");
  Mapper m;
  if (doc.has_curves)
    for (const SegmentationCurve& sc : doc.layout.curves)
      for (const Point2& p : sc.curve.pts) m.box.expand(p);
  for (const BezierPatch& p : doc.patches)
    for (const Point2& q : p.net) m.box.expand(q);
  if (!doc.has_curves && doc.patches.empty())
    throw std::runtime_error("render: document has no curves or patches");
  const double extent = std::max(m.box.hi.x - m.box.lo.x, m.box.hi.y - m.box.lo.y);
  m.scale = extent > 0 ? 800.0 / extent : 1.0;
  m.margin = 20.0;

  std::ostringstream os;
  os << std::setprecision(8);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << m.width()
     << "\" height=\"" << m.height() << "\" viewBox=\"0 0 " << m.width() << " "
     << m.height() << "\">\n";

  switch (mode) {
    case RenderMode::Partition: {
      if (!doc.has_curves) throw std::runtime_error("render: partition needs curves");
      for (const SegmentationCurve& sc : doc.layout.curves)
        emit_polyline_path(os, m, sample_curve(sc.curve), sc.fixed ? "black" : "red");
      break;
    }
    case RenderMode::Isocurves: {
      if (doc.patches.empty()) throw std::runtime_error("render: isocurves needs patches");
      for (const BezierPatch& p : doc.patches) {
        for (int k = 1; k <= iso_count; ++k) {
          const double t = static_cast<double>(k) / (iso_count + 1);
          emit_polyline_path(os, m, sample_iso(p, true, t), "steelblue");
          emit_polyline_path(os, m, sample_iso(p, false, t), "steelblue");
        }
        emit_polyline_path(os, m, sample_iso(p, true, 0.0), "black");
        emit_polyline_path(os, m, sample_iso(p, true, 1.0), "black");
        emit_polyline_path(os, m, sample_iso(p, false, 0.0), "black");
        emit_polyline_path(os, m, sample_iso(p, false, 1.0), "black");
      }
      break;
    }
    case RenderMode::JacobianColormap: {
      if (doc.patches.empty()) throw std::runtime_error("render: colormap needs patches");
      const int g = std::max(2, doc.config.grid);
      for (const BezierPatch& p : doc.patches) {
        std::vector<double> js = scaled_jacobian_field(p, g);
        std::vector<Point2> pos(g * g);
        for (int i = 0; i < g; ++i)
          for (int j = 0; j < g; ++j)
            pos[i * g + j] = p.eval(static_cast<double>(i) / (g - 1),
                                    static_cast<double>(j) / (g - 1));
        for (int i = 0; i + 1 < g; ++i) {
          for (int j = 0; j + 1 < g; ++j) {
            const double v = 0.25 * (js[i * g + j] + js[(i + 1) * g + j] +
                                     js[(i + 1) * g + j + 1] + js[i * g + j + 1]);
            const Point2 a = m.map(pos[i * g + j]);
            const Point2 b = m.map(pos[(i + 1) * g + j]);
            const Point2 c = m.map(pos[(i + 1) * g + j + 1]);
            const Point2 d = m.map(pos[i * g + j + 1]);
            os << "<polygon fill=\"" << color_of(v) << "\" stroke=\"none\" points=\""
               << a.x << "," << a.y << " " << b.x << "," << b.y << " " << c.x << ","
               << c.y << " " << d.x << "," << d.y << "\"/>\n";
          }
        }
      }
      break;
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace bezpar
