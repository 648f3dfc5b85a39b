#pragma once

#include "bezpar/documents.hpp"

namespace bezpar {

// Stage entry points; each consumes the sections produced by earlier stages
// and fills its own, so stages can be run and inspected independently.
void stage_preprocess(LayoutDocument& doc, const std::vector<BoundaryLoop>& loops);
void stage_mesh(LayoutDocument& doc);
void stage_segment(LayoutDocument& doc, const OptimizerTrace& trace = nullptr);
void stage_fit(LayoutDocument& doc);
void stage_check(LayoutDocument& doc);
void stage_report(LayoutDocument& doc);

LayoutDocument run_pipeline(const std::vector<BoundaryLoop>& loops,
                            const PipelineConfig& cfg,
                            const OptimizerTrace& trace = nullptr);

}  // namespace bezpar
