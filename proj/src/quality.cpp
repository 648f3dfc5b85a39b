#include "bezpar/quality.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bezpar {

namespace {

struct Derivs {
  Vec2 ru, rv;
};

std::vector<Derivs> sample_derivatives(const BezierPatch& patch, int grid) {
  if (grid < 2) throw std::invalid_argument("quality: grid must be at least 2x2");
  std::vector<Derivs> out;
  out.reserve(grid * grid);
  for (int i = 0; i < grid; ++i) {
    const double u = static_cast<double>(i) / (grid - 1);
    for (int j = 0; j < grid; ++j) {
      const double v = static_cast<double>(j) / (grid - 1);
      out.push_back({patch.deriv_u(u, v), patch.deriv_v(u, v)});
    }
  }
  return out;
}

}  // namespace

std::vector<double> scaled_jacobian_field(const BezierPatch& patch, int grid,
                                          int* degenerate) {
  const std::vector<Derivs> d = sample_derivatives(patch, grid);
  std::vector<double> out(d.size());
  int bad = 0;
  for (std::size_t s = 0; s < d.size(); ++s) {
    const double denom = norm(d[s].ru) * norm(d[s].rv);
    if (denom < 1e-14) {
      out[s] = 0.0;
      ++bad;
      continue;
    }
    out[s] = cross(d[s].ru, d[s].rv) / denom;
  }
  if (degenerate) *degenerate = bad;
  return out;
}

std::vector<double> condition_number_field(const BezierPatch& patch, int grid,
                                           int* singular) {
  const std::vector<Derivs> d = sample_derivatives(patch, grid);
  std::vector<double> out(d.size());
  int bad = 0;
  for (std::size_t s = 0; s < d.size(); ++s) {
    const double fro2 = norm2(d[s].ru) + norm2(d[s].rv);
    const double det = cross(d[s].ru, d[s].rv);
    if (std::abs(det) <= 1e-16 * fro2 || fro2 == 0.0) {
      out[s] = std::numeric_limits<double>::infinity();
      ++bad;
      continue;
    }
    out[s] = fro2 / std::abs(det);
  }
  if (singular) *singular = bad;
  return out;
}

namespace {

void accumulate(MetricTriple& t, double v, double& finite_sum, long& finite_count,
                bool first) {
  if (first) {
    t.min = v;
    t.max = v;
  } else {
    t.min = std::min(t.min, v);
    t.max = std::max(t.max, v);
  }
  if (std::isfinite(v)) {
    finite_sum += v;
    ++finite_count;
  }
}

}  // namespace

QualityReport quality_report(const std::vector<BezierPatch>& patches, int grid,
                             const QualityFlags& flags) {
  QualityReport rep;
  rep.grid = grid;
  rep.flags = flags;
  rep.patch_count = static_cast<int>(patches.size());
  if (!patches.empty()) {
    rep.degree = patches[0].n;
    rep.control_point_count =
        static_cast<int>(patches.size()) * (rep.degree + 1) * (rep.degree + 1);
  }

  double gjs_sum = 0.0, gk_sum = 0.0;
  long gjs_n = 0, gk_n = 0;
  bool gfirst = true;
  for (const BezierPatch& patch : patches) {
    PatchQuality q;
    const std::vector<double> js = scaled_jacobian_field(patch, grid, &q.degenerate_samples);
    const std::vector<double> k = condition_number_field(patch, grid, &q.singular_samples);
    double js_sum = 0.0, k_sum = 0.0;
    long js_n = 0, k_n = 0;
    for (std::size_t s = 0; s < js.size(); ++s) {
      accumulate(q.scaled_jacobian, js[s], js_sum, js_n, s == 0);
      accumulate(q.condition_number, k[s], k_sum, k_n, s == 0);
      accumulate(rep.global.scaled_jacobian, js[s], gjs_sum, gjs_n, gfirst);
      accumulate(rep.global.condition_number, k[s], gk_sum, gk_n, gfirst);
      gfirst = false;
    }
    q.scaled_jacobian.avg = js_n > 0 ? js_sum / js_n : 0.0;
    q.condition_number.avg = k_n > 0 ? k_sum / k_n : 0.0;
    rep.global.degenerate_samples += q.degenerate_samples;
    rep.global.singular_samples += q.singular_samples;
    rep.per_patch.push_back(q);
  }
  rep.global.scaled_jacobian.avg = gjs_n > 0 ? gjs_sum / gjs_n : 0.0;
  rep.global.condition_number.avg = gk_n > 0 ? gk_sum / gk_n : 0.0;
  return rep;
}

std::string report_table(const QualityReport& rep) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "degree " << rep.degree << ", " << rep.patch_count << " patches, "
     << rep.control_point_count << " control points, grid " << rep.grid << "x"
     << rep.grid << "\n";
  if (rep.flags.invalid_patches > 0)
    os << "invalid patches: " << rep.flags.invalid_patches
       << " (repair failures: " << rep.flags.repair_failures << ")\n";
  if (rep.flags.fallback_quadrangulation) os << "fallback quadrangulation used\n";
  os << std::setw(8) << "patch" << std::setw(10) << "Js min" << std::setw(10)
     << "Js avg" << std::setw(10) << "Js max" << std::setw(10) << "k min"
     << std::setw(10) << "k avg" << std::setw(10) << "k max" << "\n";
  auto row = [&](const std::string& name, const PatchQuality& q) {
    os << std::setw(8) << name << std::setw(10) << q.scaled_jacobian.min
       << std::setw(10) << q.scaled_jacobian.avg << std::setw(10)
       << q.scaled_jacobian.max << std::setw(10) << q.condition_number.min
       << std::setw(10) << q.condition_number.avg << std::setw(10)
       << q.condition_number.max << "\n";
  };
  for (std::size_t p = 0; p < rep.per_patch.size(); ++p)
    row(std::to_string(p), rep.per_patch[p]);
  row("all", rep.global);
  return os.str();
}

}  // namespace bezpar
