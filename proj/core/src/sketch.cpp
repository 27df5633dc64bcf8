#include "ssr/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace ssr {

using nlohmann::json;

DataError::DataError(const std::string& what, std::size_t line)
    : std::runtime_error(line ? fmt::format("line {}: {}", line, what) : what), line_(line) {}

Stroke Stroke::from_xy(const std::vector<std::pair<double, double>>& xy) {
  if (xy.empty()) throw DataError("stroke has no points");
  Stroke s;
  s.points_.reserve(xy.size());
  for (const auto& [x, y] : xy) s.points_.push_back({x, y, PenState::kTouching});
  s.points_.back().pen = PenState::kLifting;
  return s;
}

std::size_t LabelSpace::category_index(const std::string& name) const {
  auto it = std::find(category_names.begin(), category_names.end(), name);
  if (it == category_names.end()) throw DataError(fmt::format("unknown category '{}'", name));
  return static_cast<std::size_t>(it - category_names.begin());
}

std::size_t LabelSpace::component_index(const std::string& name) const {
  auto it = std::find(component_names.begin(), component_names.end(), name);
  if (it == component_names.end()) throw DataError(fmt::format("unknown component '{}'", name));
  return static_cast<std::size_t>(it - component_names.begin());
}

std::vector<std::uint8_t> LabelSpace::composition_vector(std::size_t category) const {
  if (category >= num_categories()) {
    throw DataError(fmt::format("unknown category id {} (have {})", category, num_categories()));
  }
  if (!has_composition()) throw DataError("label space has no composition table");
  return composition[category];
}

void LabelSpace::validate() const {
  if (category_names.empty()) throw DataError("label space has no categories");
  if (component_names.empty()) throw DataError("label space has no components");
  if (!has_composition()) return;
  if (composition.size() != num_categories()) {
    throw DataError(fmt::format("composition has {} rows for {} categories", composition.size(),
                                num_categories()));
  }
  for (std::size_t c = 0; c < composition.size(); ++c) {
    const auto& row = composition[c];
    if (row.size() != num_components()) {
      throw DataError(fmt::format("composition row '{}' has width {} (expected {})", category_names[c],
                                  row.size(), num_components()));
    }
    if (std::none_of(row.begin(), row.end(), [](std::uint8_t b) { return b != 0; })) {
      throw DataError(fmt::format("category '{}' has no components", category_names[c]));
    }
  }
}

void derive_composition(LabelSpace& space, const std::vector<Sketch>& samples) {
  std::vector<std::vector<std::uint8_t>> comp(space.num_categories(),
                                              std::vector<std::uint8_t>(space.num_components(), 0));
  for (const auto& s : samples) {
    if (!s.stroke_components) continue;
    for (std::size_t j : *s.stroke_components) comp.at(s.category).at(j) = 1;
  }
  space.composition = std::move(comp);
  space.validate();
}

std::size_t Dataset::total_strokes() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.num_strokes();
  return n;
}

bool Dataset::fully_labeled() const {
  return std::all_of(samples.begin(), samples.end(),
                     [](const Sketch& s) { return s.stroke_components.has_value(); });
}

Sketch normalize(const Sketch& sketch) {
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (const auto& stroke : sketch.strokes) {
    for (const auto& p : stroke.points()) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError("non-finite coordinate");
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  Sketch out = sketch;
  const double w = max_x - min_x;
  const double h = max_y - min_y;
  const double extent = std::max(w, h);
  for (auto& stroke : out.strokes) {
    for (std::size_t i = 0; i < stroke.size(); ++i) {
      const auto& p = stroke.points()[i];
      if (extent == 0.0) {
        stroke.set_xy(i, 0.5, 0.5);
      } else {
        stroke.set_xy(i, (p.x - min_x) / extent + 0.5 * (1.0 - w / extent),
                      (p.y - min_y) / extent + 0.5 * (1.0 - h / extent));
      }
    }
  }
  return out;
}

void validate_sketch(const Sketch& sketch, const LabelSpace& space, std::size_t max_strokes) {
  const std::size_t n = sketch.num_strokes();
  if (n == 0) throw DataError("sketch has no strokes");
  if (n > max_strokes) throw DataError(fmt::format("sketch has {} strokes (max {})", n, max_strokes));
  if (sketch.category >= space.num_categories()) {
    throw DataError(fmt::format("unknown category id {}", sketch.category));
  }
  for (const auto& s : sketch.strokes)
    if (s.size() == 0) throw DataError("stroke has no points");
  if (!sketch.stroke_components) return;
  const auto& comps = *sketch.stroke_components;
  if (comps.size() != n) {
    throw DataError(fmt::format("stroke_components has {} entries for {} strokes", comps.size(), n));
  }
  for (std::size_t j : comps) {
    if (j >= space.num_components()) throw DataError(fmt::format("unknown component id {}", j));
    if (space.has_composition() && !space.composition[sketch.category][j]) {
      throw DataError(fmt::format("component '{}' is not part of category '{}'", space.component_names[j],
                                  space.category_names[sketch.category]));
    }
  }
}

namespace {

std::size_t parse_label(const json& v, const std::vector<std::string>& names, const char* what) {
  if (v.is_number_integer()) {
    const auto id = v.get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= names.size()) {
      throw DataError(fmt::format("unknown {} id {}", what, id));
    }
    return static_cast<std::size_t>(id);
  }
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError(fmt::format("unknown {} '{}'", what, name));
    return static_cast<std::size_t>(it - names.begin());
  }
  throw DataError(fmt::format("{} must be a string or integer", what));
}

}  // namespace

Sketch parse_sketch_record(const json& record, const LabelSpace& space, std::size_t max_strokes) {
  if (!record.is_object()) throw DataError("record is not an object");
  if (!record.contains("category")) throw DataError("record has no 'category'");
  if (!record.contains("strokes") || !record["strokes"].is_array()) {
    throw DataError("record has no 'strokes' list");
  }
  Sketch sketch;
  sketch.category = parse_label(record["category"], space.category_names, "category");
  for (const auto& stroke : record["strokes"]) {
    if (!stroke.is_array()) throw DataError("stroke is not a list of points");
    std::vector<std::pair<double, double>> xy;
    for (const auto& pt : stroke) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
        throw DataError("point is not an [x, y] pair");
      }
      xy.emplace_back(pt[0].get<double>(), pt[1].get<double>());
    }
    sketch.strokes.push_back(Stroke::from_xy(xy));
  }
  if (record.contains("stroke_components") && !record["stroke_components"].is_null()) {
    const auto& comps = record["stroke_components"];
    if (!comps.is_array()) throw DataError("stroke_components is not a list");
    std::vector<std::size_t> ids;
    for (const auto& c : comps) ids.push_back(parse_label(c, space.component_names, "component"));
    sketch.stroke_components = std::move(ids);
  }
  validate_sketch(sketch, space, max_strokes);
  return normalize(sketch);
}

json sketch_to_json(const Sketch& sketch, const LabelSpace& space) {
  json strokes = json::array();
  for (const auto& s : sketch.strokes) {
    json pts = json::array();
    for (const auto& p : s.points()) pts.push_back({p.x, p.y});
    strokes.push_back(std::move(pts));
  }
  json rec = {{"category", space.category_names.at(sketch.category)}, {"strokes", std::move(strokes)}};
  if (sketch.stroke_components) rec["stroke_components"] = *sketch.stroke_components;
  return rec;
}

Dataset load_stroke_file(const std::filesystem::path& path, const LabelSpace& space,
                         std::size_t max_strokes) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open sketch file {}", path.string()));
  space.validate();
  Dataset data;
  data.label_space = space;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      data.samples.push_back(parse_sketch_record(json::parse(line), space, max_strokes));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("malformed record: {}", e.what()), line_no);
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
  }
  return data;
}

void save_stroke_file(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write sketch file {}", path.string()));
  for (const auto& s : data.samples) out << sketch_to_json(s, data.label_space).dump() << '\n';
}

LabelSpace label_space_from_json(const json& doc) {
  LabelSpace space;
  try {
    space.category_names = doc.at("categories").get<std::vector<std::string>>();
    space.component_names = doc.at("components").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(fmt::format("label space: {}", e.what()));
  }
  if (doc.contains("composition") && !doc["composition"].is_null()) {
    const auto& comp = doc["composition"];
    if (!comp.is_object()) throw DataError("label space: composition must map category -> components");
    space.composition.assign(space.num_categories(), std::vector<std::uint8_t>(space.num_components(), 0));
    for (const auto& [cat, parts] : comp.items()) {
      const std::size_t c = space.category_index(cat);
      for (const auto& part : parts) space.composition[c][space.component_index(part.get<std::string>())] = 1;
    }
  }
  space.validate();
  return space;
}

json label_space_to_json(const LabelSpace& space) {
  json doc = {{"categories", space.category_names}, {"components", space.component_names}};
  if (space.has_composition()) {
    json comp = json::object();
    for (std::size_t c = 0; c < space.num_categories(); ++c) {
      json parts = json::array();
      for (std::size_t j = 0; j < space.num_components(); ++j)
        if (space.composition[c][j]) parts.push_back(space.component_names[j]);
      comp[space.category_names[c]] = std::move(parts);
    }
    doc["composition"] = std::move(comp);
  }
  return doc;
}

LabelSpace load_label_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open label space {}", path.string()));
  try {
    return label_space_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("label space {}: {}", path.string(), e.what()));
  }
}

void save_label_space(const std::filesystem::path& path, const LabelSpace& space) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write label space {}", path.string()));
  out << label_space_to_json(space).dump(2) << '\n';
}

}  // namespace ssr
