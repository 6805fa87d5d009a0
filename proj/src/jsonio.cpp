#include "peddet/jsonio.hpp"

#include <fstream>

#include <json.hpp>

#include "peddet/error.hpp"

namespace peddet {

using nlohmann::json;

void write_detections_jsonl(std::ostream& out, const std::string& image_name,
                            const std::vector<Detection>& dets) {
  for (const Detection& d : dets) {
    json j;
    j["image"] = image_name;
    j["cx"] = d.bbox.cx;
    j["cy"] = d.bbox.cy;
    j["w"] = d.bbox.w;
    j["h"] = d.bbox.h;
    j["obj"] = d.objectness;
    j["cls"] = d.class_score;
    j["grid"] = d.grid;
    out << j.dump() << "\n";
  }
}

namespace {

json parse_line(const std::string& line, const std::string& path, int line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(path + ":" + std::to_string(line_no) +
                     ": invalid JSON: " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& path, int line_no) {
  if (!j.contains(key)) {
    throw ParseError(path + ":" + std::to_string(line_no) +
                     ": missing key '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": bad value for '" +
                     std::string(key) + "': " + e.what());
  }
}

}  // namespace

std::map<std::string, std::vector<Detection>> read_detections_jsonl(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open detections file: " + path);
  std::map<std::string, std::vector<Detection>> by_image;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_line(line, path, line_no);
    Detection d;
    const auto name = field<std::string>(j, "image", path, line_no);
    d.bbox.cx = field<float>(j, "cx", path, line_no);
    d.bbox.cy = field<float>(j, "cy", path, line_no);
    d.bbox.w = field<float>(j, "w", path, line_no);
    d.bbox.h = field<float>(j, "h", path, line_no);
    d.objectness = field<float>(j, "obj", path, line_no);
    d.class_score = field<float>(j, "cls", path, line_no);
    d.grid = j.contains("grid") ? field<int>(j, "grid", path, line_no) : 0;
    by_image[name].push_back(d);
  }
  return by_image;
}

void write_gt_jsonl(std::ostream& out, const std::string& image_name,
                    const std::vector<BBox>& boxes) {
  json j;
  j["image"] = image_name;
  json arr = json::array();
  for (const BBox& b : boxes) arr.push_back({b.cx, b.cy, b.w, b.h});
  j["boxes"] = arr;
  out << j.dump() << "\n";
}

std::map<std::string, std::vector<BBox>> read_gt_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground-truth file: " + path);
  std::map<std::string, std::vector<BBox>> by_image;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_line(line, path, line_no);
    const auto name = field<std::string>(j, "image", path, line_no);
    if (!j.contains("boxes") || !j.at("boxes").is_array()) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": missing 'boxes' array");
    }
    std::vector<BBox>& boxes = by_image[name];
    for (const json& jb : j.at("boxes")) {
      if (!jb.is_array() || jb.size() != 4) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": each box must be [cx,cy,w,h]");
      }
      BBox b;
      b.cx = jb[0].get<float>();
      b.cy = jb[1].get<float>();
      b.w = jb[2].get<float>();
      b.h = jb[3].get<float>();
      boxes.push_back(b);
    }
  }
  return by_image;
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["n_images"] = r.n_images;
  j["n_positives"] = r.n_positives;
  auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  j["accuracy"] = opt(r.accuracy);
  j["mean_iou"] = opt(r.mean_iou);
  j["fppi"] = opt(r.fppi);
  j["miss_rate"] = opt(r.miss_rate);
  return j.dump();
}

}  // namespace peddet
