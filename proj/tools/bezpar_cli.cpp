#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "bezpar/pipeline.hpp"
#include "bezpar/render.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  double epsilon = -1.0;
  int degree = -1;
  int grid = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

bezpar::PipelineConfig resolve_config(const CommonOpts& o) {
  bezpar::PipelineConfig cfg;
  std::vector<std::string> warnings;
  if (!o.config_path.empty()) cfg = bezpar::load_config(o.config_path, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  if (o.epsilon > 0.0) cfg.epsilon = o.epsilon;
  if (o.degree > 0) cfg.min_degree = o.degree;
  if (o.grid > 0) cfg.grid = o.grid;
  if (o.seed_set) cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "pipeline configuration JSON");
  cmd->add_option("--epsilon", o.epsilon, "non-concavity tolerance");
  cmd->add_option("--degree", o.degree, "minimum patch degree (>= 4)");
  cmd->add_option("--grid", o.grid, "quality sampling grid");
  cmd->add_option("--seed", o.seed, "random seed recorded in the document")
      ->each([&o](const std::string&) { o.seed_set = true; });
}

bezpar::LayoutDocument load_doc(const std::string& path) {
  std::vector<std::string> warnings;
  bezpar::LayoutDocument doc = bezpar::load_layout(path, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  return doc;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

bezpar::OptimizerTrace make_trace(const std::string& path,
                                  std::shared_ptr<std::ofstream>& keeper) {
  if (path.empty()) return nullptr;
  keeper = std::make_shared<std::ofstream>(path);
  if (!*keeper) throw std::runtime_error("cannot write " + path);
  *keeper << "iteration,f,grad_norm\n";
  std::ofstream* raw = keeper.get();
  return [raw](int it, double f, double gn) {
    (*raw) << it << "," << f << "," << gn << "\n";
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar parameterization of B-spline bounded domains into Bezier patches"};
  app.require_subcommand(1);

  std::string in_path, out_path, obj_path, trace_path, mode_name = "partition";
  int iso_count = 8;
  CommonOpts opts;

  auto* c_pre = app.add_subcommand("preprocess", "extract and subdivide boundary curves");
  c_pre->add_option("input", in_path, "boundary JSON")->required();
  c_pre->add_option("-o,--output", out_path, "output document")->required();
  add_common(c_pre, opts);

  auto* c_mesh = app.add_subcommand("mesh", "build the quad decomposition");
  c_mesh->add_option("input", in_path, "layout document")->required();
  c_mesh->add_option("-o,--output", out_path, "output document")->required();
  c_mesh->add_option("--dump-quadmesh", obj_path, "write the quad mesh as OBJ");
  add_common(c_mesh, opts);

  auto* c_seg = app.add_subcommand("segment", "optimize segmentation curves");
  c_seg->add_option("input", in_path, "layout document")->required();
  c_seg->add_option("-o,--output", out_path, "output document")->required();
  c_seg->add_option("--trace-optimizer", trace_path, "write optimizer trace CSV");
  add_common(c_seg, opts);

  auto* c_fit = app.add_subcommand("fit", "construct Bezier patches");
  c_fit->add_option("input", in_path, "layout document")->required();
  c_fit->add_option("-o,--output", out_path, "output document")->required();
  add_common(c_fit, opts);

  auto* c_check = app.add_subcommand("check", "certify injectivity and repair");
  c_check->add_option("input", in_path, "layout document")->required();
  c_check->add_option("-o,--output", out_path, "output document")->required();
  add_common(c_check, opts);

  auto* c_rep = app.add_subcommand("report", "compute quality metrics");
  c_rep->add_option("input", in_path, "layout document")->required();
  c_rep->add_option("-o,--output", out_path, "output document with report");
  add_common(c_rep, opts);

  auto* c_render = app.add_subcommand("render", "render the layout as SVG");
  c_render->add_option("input", in_path, "layout document")->required();
  c_render->add_option("-o,--output", out_path, "output SVG")->required();
  c_render->add_option("--mode", mode_name, "partition | isocurves | jacobian");
  c_render->add_option("--iso-count", iso_count, "iso-parameter curves per direction");
  add_common(c_render, opts);

  auto* c_pipe = app.add_subcommand("pipeline", "run every stage");
  c_pipe->add_option("input", in_path, "boundary JSON")->required();
  c_pipe->add_option("-o,--output", out_path, "output document")->required();
  c_pipe->add_option("--dump-quadmesh", obj_path, "write the quad mesh as OBJ");
  c_pipe->add_option("--trace-optimizer", trace_path, "write optimizer trace CSV");
  add_common(c_pipe, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    std::shared_ptr<std::ofstream> trace_file;
    if (c_pre->parsed()) {
      bezpar::LayoutDocument doc;
      doc.config = resolve_config(opts);
      bezpar::stage_preprocess(doc, bezpar::load_boundary(in_path));
      bezpar::save_layout(doc, out_path);
    } else if (c_mesh->parsed()) {
      bezpar::LayoutDocument doc = load_doc(in_path);
      bezpar::stage_mesh(doc);
      bezpar::save_layout(doc, out_path);
      if (!obj_path.empty()) write_text(obj_path, bezpar::quadmesh_to_obj(doc.mesh));
    } else if (c_seg->parsed()) {
      bezpar::LayoutDocument doc = load_doc(in_path);
      bezpar::stage_segment(doc, make_trace(trace_path, trace_file));
      bezpar::save_layout(doc, out_path);
    } else if (c_fit->parsed()) {
      bezpar::LayoutDocument doc = load_doc(in_path);
      bezpar::stage_fit(doc);
      bezpar::save_layout(doc, out_path);
    } else if (c_check->parsed()) {
      bezpar::LayoutDocument doc = load_doc(in_path);
      bezpar::stage_check(doc);
      bezpar::save_layout(doc, out_path);
    } else if (c_rep->parsed()) {
      bezpar::LayoutDocument doc = load_doc(in_path);
      if (opts.grid > 0) doc.config.grid = opts.grid;
      bezpar::stage_report(doc);
      std::cout << bezpar::report_table(doc.report);
      if (!out_path.empty()) bezpar::save_layout(doc, out_path);
    } else if (c_render->parsed()) {
      bezpar::LayoutDocument doc = load_doc(in_path);
      write_text(out_path,
                 bezpar::render_svg(doc, bezpar::parse_render_mode(mode_name), iso_count));
    } else if (c_pipe->parsed()) {
      bezpar::LayoutDocument doc = bezpar::run_pipeline(
          bezpar::load_boundary(in_path), resolve_config(opts),
          make_trace(trace_path, trace_file));
      bezpar::save_layout(doc, out_path);
      if (!obj_path.empty()) write_text(obj_path, bezpar::quadmesh_to_obj(doc.mesh));
      for (const std::string& w : doc.flags.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << bezpar::report_table(doc.report);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
