#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "peddet/eval.hpp"
#include "peddet/head.hpp"

namespace peddet {

/// One JSON object per detection:
/// {"image","cx","cy","w","h","obj","cls","grid"}.
void write_detections_jsonl(std::ostream& out, const std::string& image_name,
                            const std::vector<Detection>& dets);

/// Detections grouped by image name; errors name the offending line.
std::map<std::string, std::vector<Detection>> read_detections_jsonl(
    const std::string& path);

/// Ground truth: {"image", "boxes": [[cx,cy,w,h], ...]} per line.
void write_gt_jsonl(std::ostream& out, const std::string& image_name,
                    const std::vector<BBox>& boxes);
std::map<std::string, std::vector<BBox>> read_gt_jsonl(const std::string& path);

/// Fixed-key JSON object; undefined ratios serialize as null.
std::string report_to_json(const EvalReport& report);

}  // namespace peddet
