#include "bezpar/documents.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bezpar {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string(what) + ": " + e.what());
  }
}

void check_known_keys(const json& obj, const std::vector<std::string>& known,
                      const std::string& where, std::vector<std::string>* warnings) {
  if (!warnings || !obj.is_object()) return;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      warnings->push_back("ignored unknown field '" + it.key() + "' in " + where);
  }
}

json point_list(const std::vector<Point2>& pts) {
  json out = json::array();
  for (const Point2& p : pts) out.push_back({p.x, p.y});
  return out;
}

std::vector<Point2> parse_points(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw std::runtime_error(where + ": expected point array");
  std::vector<Point2> out;
  for (const json& p : arr) {
    if (!p.is_array() || p.size() != 2)
      throw std::runtime_error(where + ": points must be [x, y] pairs");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("config: ") + name +
                                                " must be positive");
  };
  positive(sigma1, "sigma1");
  positive(sigma2, "sigma2");
  positive(w1, "omega1");
  positive(w2, "omega2");
  positive(w3, "omega3");
  positive(tau1, "tau1");
  positive(tau2, "tau2");
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("config: epsilon must lie in (0,1]");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("config: delta must lie in (0,1)");
  if (min_degree < 4) throw std::invalid_argument("config: min_degree must be >= 4");
  if (grid < 2) throw std::invalid_argument("config: grid must be >= 2");
  positive(repair.mu_init_scale, "repair.mu_init_scale");
}

namespace {

json config_to_json(const PipelineConfig& c) {
  json j;
  j["sigma1"] = c.sigma1;
  j["sigma2"] = c.sigma2;
  j["omega1"] = c.w1;
  j["omega2"] = c.w2;
  j["omega3"] = c.w3;
  j["tau1"] = c.tau1;
  j["tau2"] = c.tau2;
  j["epsilon"] = c.epsilon;
  j["delta"] = c.delta;
  j["min_degree"] = c.min_degree;
  j["grid"] = c.grid;
  j["lbfgs_memory"] = c.lbfgs_memory;
  j["grad_tolerance"] = c.grad_tolerance;
  j["max_iterations"] = c.max_iterations;
  j["smooth_cap"] = c.smooth_cap;
  j["validity_restarts"] = c.validity_restarts;
  j["seed"] = c.seed;
  j["repair"] = {{"mu_init_scale", c.repair.mu_init_scale},
                 {"mu_shrink", c.repair.mu_shrink},
                 {"mu_stages", c.repair.mu_stages},
                 {"inner_iteration_cap", c.repair.inner_iteration_cap},
                 {"grad_tolerance", c.repair.grad_tolerance},
                 {"barrier_eps", c.repair.barrier_eps}};
  return j;
}

PipelineConfig config_from_json(const json& j, std::vector<std::string>* warnings) {
  PipelineConfig c;
  check_known_keys(j,
                   {"sigma1", "sigma2", "omega1", "omega2", "omega3", "tau1", "tau2",
                    "epsilon", "delta", "min_degree", "grid", "lbfgs_memory",
                    "grad_tolerance", "max_iterations", "smooth_cap",
                    "validity_restarts", "seed", "repair"},
                   "config", warnings);
  c.sigma1 = j.value("sigma1", c.sigma1);
  c.sigma2 = j.value("sigma2", c.sigma2);
  c.w1 = j.value("omega1", c.w1);
  c.w2 = j.value("omega2", c.w2);
  c.w3 = j.value("omega3", c.w3);
  c.tau1 = j.value("tau1", c.tau1);
  c.tau2 = j.value("tau2", c.tau2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.delta = j.value("delta", c.delta);
  c.min_degree = j.value("min_degree", c.min_degree);
  c.grid = j.value("grid", c.grid);
  c.lbfgs_memory = j.value("lbfgs_memory", c.lbfgs_memory);
  c.grad_tolerance = j.value("grad_tolerance", c.grad_tolerance);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.smooth_cap = j.value("smooth_cap", c.smooth_cap);
  c.validity_restarts = j.value("validity_restarts", c.validity_restarts);
  c.seed = j.value("seed", c.seed);
  if (j.contains("repair")) {
    const json& r = j["repair"];
    check_known_keys(r,
                     {"mu_init_scale", "mu_shrink", "mu_stages", "inner_iteration_cap",
                      "grad_tolerance", "barrier_eps"},
                     "config.repair", warnings);
    c.repair.mu_init_scale = r.value("mu_init_scale", c.repair.mu_init_scale);
    c.repair.mu_shrink = r.value("mu_shrink", c.repair.mu_shrink);
    c.repair.mu_stages = r.value("mu_stages", c.repair.mu_stages);
    c.repair.inner_iteration_cap =
        r.value("inner_iteration_cap", c.repair.inner_iteration_cap);
    c.repair.grad_tolerance = r.value("grad_tolerance", c.repair.grad_tolerance);
    c.repair.barrier_eps = r.value("barrier_eps", c.repair.barrier_eps);
  }
  c.validate();
  return c;
}

}  // namespace

std::string config_hash(const PipelineConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

PipelineConfig parse_config(const std::string& text,
                            std::vector<std::string>* warnings) {
  return config_from_json(parse_json(text, "config"), warnings);
}

PipelineConfig load_config(const std::string& path, std::vector<std::string>* warnings) {
  return parse_config(read_file(path), warnings);
}

// ---------------------------------------------------------------------------

namespace {

BSplineCurve reverse_piece(const BSplineCurve& c) {
  BSplineCurve out;
  out.degree = c.degree;
  out.control_points.assign(c.control_points.rbegin(), c.control_points.rend());
  const double lo = c.knots.front();
  const double hi = c.knots.back();
  out.knots.reserve(c.knots.size());
  for (auto it = c.knots.rbegin(); it != c.knots.rend(); ++it)
    out.knots.push_back(lo + hi - *it);
  return out;
}

std::vector<Point2> sample_loop_polygon(const BoundaryLoop& loop) {
  std::vector<Point2> pts;
  for (const BSplineCurve& piece : loop.pieces)
    for (const BezierCurve& seg : bezier_extract(piece))
      for (int k = 0; k < 8; ++k)
        pts.push_back(seg.eval(static_cast<double>(k) / 8.0));
  return pts;
}

}  // namespace

std::vector<BoundaryLoop> parse_boundary(const std::string& text) {
  const json j = parse_json(text, "boundary");
  if (!j.is_object() || !j.contains("loops"))
    throw std::runtime_error("boundary: missing 'loops'");
  if (j.value("version", 1) != 1)
    throw std::runtime_error("boundary: unsupported document version");

  std::vector<BoundaryLoop> loops;
  for (std::size_t li = 0; li < j["loops"].size(); ++li) {
    const json& jl = j["loops"][li];
    BoundaryLoop loop;
    if (!jl.contains("pieces") || jl["pieces"].empty())
      throw std::runtime_error("boundary: loop " + std::to_string(li) +
                               " has no pieces");
    for (std::size_t pi = 0; pi < jl["pieces"].size(); ++pi) {
      const json& jp = jl["pieces"][pi];
      BSplineCurve piece;
      const std::string where =
          "loop " + std::to_string(li) + " piece " + std::to_string(pi);
      if (!jp.contains("degree") || !jp.contains("knots") ||
          !jp.contains("control_points"))
        throw std::runtime_error("boundary: " + where +
                                 " needs degree/knots/control_points");
      piece.degree = jp["degree"].get<int>();
      piece.knots = jp["knots"].get<std::vector<double>>();
      piece.control_points = parse_points(jp["control_points"], where);
      try {
        piece.validate();
      } catch (const std::exception& e) {
        throw std::runtime_error("boundary: " + where + ": " + e.what());
      }
      loop.pieces.push_back(std::move(piece));
    }
    loops.push_back(std::move(loop));
  }

  // Identify the outer loop (largest sampled area) and normalize orientation:
  // outer CCW, holes CW.
  std::vector<double> areas(loops.size());
  std::size_t outer = 0;
  for (std::size_t li = 0; li < loops.size(); ++li) {
    areas[li] = polygon_signed_area(sample_loop_polygon(loops[li]));
    if (std::abs(areas[li]) > std::abs(areas[outer])) outer = li;
  }
  if (outer != 0) std::swap(loops[0], loops[outer]), std::swap(areas[0], areas[outer]);
  for (std::size_t li = 0; li < loops.size(); ++li) {
    loops[li].is_hole = li != 0;
    const bool want_ccw = li == 0;
    if ((areas[li] > 0.0) != want_ccw) {
      std::vector<BSplineCurve> rev;
      for (auto it = loops[li].pieces.rbegin(); it != loops[li].pieces.rend(); ++it)
        rev.push_back(reverse_piece(*it));
      loops[li].pieces = std::move(rev);
    }
  }
  // Holes must lie inside the outer loop.
  const std::vector<Point2> outer_poly = sample_loop_polygon(loops[0]);
  for (std::size_t li = 1; li < loops.size(); ++li) {
    for (const Point2& p : sample_loop_polygon(loops[li]))
      if (!point_in_polygon(p, outer_poly))
        throw std::runtime_error("boundary: loop " + std::to_string(li) +
                                 " is not inside the outer loop");
  }
  return loops;
}

std::vector<BoundaryLoop> load_boundary(const std::string& path) {
  return parse_boundary(read_file(path));
}

// ---------------------------------------------------------------------------

namespace {

json triple_to_json(const MetricTriple& t) {
  auto num = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  return json::array({num(t.min), num(t.avg), num(t.max)});
}

MetricTriple triple_from_json(const json& j) {
  auto num = [](const json& v) {
    return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
  };
  return {num(j[0]), num(j[1]), num(j[2])};
}

json quality_to_json(const PatchQuality& q) {
  return {{"scaled_jacobian", triple_to_json(q.scaled_jacobian)},
          {"condition_number", triple_to_json(q.condition_number)},
          {"degenerate_samples", q.degenerate_samples},
          {"singular_samples", q.singular_samples}};
}

PatchQuality quality_from_json(const json& j) {
  PatchQuality q;
  q.scaled_jacobian = triple_from_json(j.at("scaled_jacobian"));
  q.condition_number = triple_from_json(j.at("condition_number"));
  q.degenerate_samples = j.value("degenerate_samples", 0);
  q.singular_samples = j.value("singular_samples", 0);
  return q;
}

}  // namespace

std::string serialize_layout(const LayoutDocument& doc) {
  json j;
  j["format"] = "bezpar-layout";
  j["version"] = doc.version;
  j["config"] = config_to_json(doc.config);
  j["degree"] = doc.degree;
  j["provenance"] = {{"config_hash", config_hash(doc.config)},
                     {"timings",
                      {{"t1_global", doc.timings.t1_global},
                       {"t2_local", doc.timings.t2_local},
                       {"total", doc.timings.total}}}};
  json jf;
  jf["validity_violations"] = doc.flags.validity_violations;
  jf["validity_restarts_used"] = doc.flags.validity_restarts_used;
  jf["invalid_patches"] = doc.flags.invalid_patches;
  jf["repair_failures"] = doc.flags.repair_failures;
  jf["g1_fallbacks"] = doc.flags.g1_fallbacks;
  jf["irregular_vertices"] = doc.flags.irregular_vertices;
  jf["fallback_quadrangulation"] = doc.flags.fallback_quadrangulation;
  jf["parity_segment_splits"] = doc.flags.parity_segment_splits;
  jf["parity_cut_splits"] = doc.flags.parity_cut_splits;
  jf["orth_newton_failures"] = doc.flags.orth_newton_failures;
  jf["warnings"] = doc.flags.warnings;
  j["flags"] = jf;

  json jchains = json::array();
  for (const SegmentChain& c : doc.chains) {
    json jc;
    jc["loop"] = c.loop;
    jc["hole"] = c.is_hole;
    jc["degree"] = c.degree;
    json segs = json::array();
    for (const BezierCurve& s : c.segments) segs.push_back(point_list(s.pts));
    jc["segments"] = segs;
    json orgs = json::array();
    for (const SegmentOrigin& o : c.origins)
      orgs.push_back({o.piece, o.span, o.split_depth});
    jc["origins"] = orgs;
    jchains.push_back(jc);
  }
  j["chains"] = jchains;

  if (doc.has_mesh) {
    json jm;
    jm["positions"] = point_list(doc.mesh.positions);
    json bv = json::array();
    for (char b : doc.mesh.boundary_vertex) bv.push_back(static_cast<int>(b));
    jm["boundary_vertex"] = bv;
    json jq = json::array();
    for (const auto& q : doc.mesh.quads) jq.push_back({q[0], q[1], q[2], q[3]});
    jm["quads"] = jq;
    json je = json::array();
    for (const auto& [e, src] : doc.mesh.boundary_edges)
      je.push_back({e.first, e.second, src.chain, src.segment});
    jm["boundary_edges"] = je;
    j["mesh"] = jm;
  }

  if (doc.has_curves) {
    json jc = json::array();
    for (const SegmentationCurve& sc : doc.layout.curves) {
      json e;
      e["points"] = point_list(sc.curve.pts);
      e["start"] = sc.v_start;
      e["end"] = sc.v_end;
      e["fixed"] = sc.fixed;
      e["chain"] = sc.source.chain;
      e["segment"] = sc.source.segment;
      jc.push_back(e);
    }
    j["curves"] = jc;
  }

  if (!doc.patches.empty()) {
    json jp = json::array();
    for (const BezierPatch& p : doc.patches) {
      jp.push_back({{"quad", p.quad}, {"net", point_list(p.net)}});
    }
    j["patches"] = jp;
  }

  if (doc.has_report) {
    json jr;
    jr["patch_count"] = doc.report.patch_count;
    jr["degree"] = doc.report.degree;
    jr["control_point_count"] = doc.report.control_point_count;
    jr["grid"] = doc.report.grid;
    jr["global"] = quality_to_json(doc.report.global);
    json pp = json::array();
    for (const PatchQuality& q : doc.report.per_patch) pp.push_back(quality_to_json(q));
    jr["per_patch"] = pp;
    j["report"] = jr;
  }
  return j.dump(2) + "\n";
}

LayoutDocument parse_layout(const std::string& text,
                            std::vector<std::string>* warnings) {
  const json j = parse_json(text, "layout");
  if (!j.is_object() || j.value("format", "") != std::string("bezpar-layout"))
    throw std::runtime_error("layout: not a bezpar layout document");
  if (j.value("version", -1) != 1)
    throw std::runtime_error(
        "layout: unsupported document version (expected 1); no migration available");
  check_known_keys(j,
                   {"format", "version", "config", "degree", "provenance", "flags",
                    "chains", "mesh", "curves", "patches", "report"},
                   "layout", warnings);

  LayoutDocument doc;
  if (j.contains("config")) doc.config = config_from_json(j["config"], warnings);
  doc.degree = j.value("degree", 0);

  if (j.contains("flags")) {
    const json& jf = j["flags"];
    doc.flags.validity_violations = jf.value("validity_violations", 0);
    doc.flags.validity_restarts_used = jf.value("validity_restarts_used", 0);
    doc.flags.invalid_patches = jf.value("invalid_patches", 0);
    doc.flags.repair_failures = jf.value("repair_failures", 0);
    doc.flags.g1_fallbacks = jf.value("g1_fallbacks", 0);
    doc.flags.irregular_vertices = jf.value("irregular_vertices", 0);
    doc.flags.fallback_quadrangulation = jf.value("fallback_quadrangulation", false);
    doc.flags.parity_segment_splits = jf.value("parity_segment_splits", 0);
    doc.flags.parity_cut_splits = jf.value("parity_cut_splits", 0);
    doc.flags.orth_newton_failures = jf.value("orth_newton_failures", 0);
    if (jf.contains("warnings"))
      doc.flags.warnings = jf["warnings"].get<std::vector<std::string>>();
  }
  if (j.contains("provenance") && j["provenance"].contains("timings")) {
    const json& jt = j["provenance"]["timings"];
    doc.timings.t1_global = jt.value("t1_global", 0.0);
    doc.timings.t2_local = jt.value("t2_local", 0.0);
    doc.timings.total = jt.value("total", 0.0);
  }

  for (const json& jc : j.value("chains", json::array())) {
    SegmentChain c;
    c.loop = jc.value("loop", -1);
    c.is_hole = jc.value("hole", false);
    c.degree = jc.value("degree", 0);
    for (const json& s : jc.at("segments"))
      c.segments.emplace_back(parse_points(s, "chain segment"));
    for (const json& o : jc.value("origins", json::array()))
      c.origins.push_back({o[0].get<int>(), o[1].get<int>(), o[2].get<int>()});
    while (c.origins.size() < c.segments.size()) c.origins.push_back({});
    doc.chains.push_back(std::move(c));
  }

  if (j.contains("mesh")) {
    const json& jm = j["mesh"];
    doc.mesh.positions = parse_points(jm.at("positions"), "mesh positions");
    for (const json& b : jm.at("boundary_vertex"))
      doc.mesh.boundary_vertex.push_back(static_cast<char>(b.get<int>()));
    for (const json& q : jm.at("quads"))
      doc.mesh.quads.push_back({q[0].get<int>(), q[1].get<int>(), q[2].get<int>(),
                                q[3].get<int>()});
    for (const json& e : jm.at("boundary_edges"))
      doc.mesh.boundary_edges[{e[0].get<int>(), e[1].get<int>()}] =
          EdgeSource{e[2].get<int>(), e[3].get<int>()};
    doc.has_mesh = true;
  }

  if (j.contains("curves")) {
    if (!doc.has_mesh) throw std::runtime_error("layout: curves without mesh");
    std::vector<SegmentationCurve> curves;
    for (const json& e : j["curves"]) {
      SegmentationCurve sc;
      sc.curve = BezierCurve(parse_points(e.at("points"), "curve points"));
      sc.v_start = e.at("start").get<int>();
      sc.v_end = e.at("end").get<int>();
      sc.fixed = e.value("fixed", false);
      sc.source.chain = e.value("chain", -1);
      sc.source.segment = e.value("segment", -1);
      curves.push_back(std::move(sc));
    }
    doc.layout = assemble_layout(doc.mesh, doc.degree, std::move(curves));
    doc.has_curves = true;
  }

  for (const json& jp : j.value("patches", json::array())) {
    BezierPatch p;
    p.quad = jp.at("quad").get<int>();
    p.net = parse_points(jp.at("net"), "patch net");
    const int side = static_cast<int>(std::lround(std::sqrt(double(p.net.size()))));
    if (side * side != static_cast<int>(p.net.size()) || side < 2)
      throw std::runtime_error("layout: patch net is not square");
    p.n = side - 1;
    doc.patches.push_back(std::move(p));
  }

  if (j.contains("report")) {
    const json& jr = j["report"];
    doc.report.patch_count = jr.value("patch_count", 0);
    doc.report.degree = jr.value("degree", 0);
    doc.report.control_point_count = jr.value("control_point_count", 0);
    doc.report.grid = jr.value("grid", 0);
    doc.report.global = quality_from_json(jr.at("global"));
    for (const json& q : jr.value("per_patch", json::array()))
      doc.report.per_patch.push_back(quality_from_json(q));
    doc.has_report = true;
  }
  return doc;
}

void save_layout(const LayoutDocument& doc, const std::string& path) {
  write_file(path, serialize_layout(doc));
}

LayoutDocument load_layout(const std::string& path, std::vector<std::string>* warnings) {
  return parse_layout(read_file(path), warnings);
}

}  // namespace bezpar
