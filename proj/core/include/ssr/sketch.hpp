#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace ssr {

/// Malformed or inconsistent input data. `line()` is 1-based, 0 if unknown.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class PenState : std::uint8_t { kTouching = 0, kLifting = 1 };

struct Point {
  double x = 0.0;
  double y = 0.0;
  PenState pen = PenState::kTouching;
};

/// Pen-down to pen-up point sequence. Only the final point is lifting.
class Stroke {
 public:
  Stroke() = default;
  /// Builds a stroke from raw coordinates, deriving pen states.
  static Stroke from_xy(const std::vector<std::pair<double, double>>& xy);

  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Point& front() const { return points_.front(); }

  /// Mutable coordinate access; pen states stay derived.
  void set_xy(std::size_t i, double x, double y) {
    points_[i].x = x;
    points_[i].y = y;
  }

 private:
  std::vector<Point> points_;
};

inline constexpr std::size_t kDefaultMaxStrokes = 64;

struct Sketch {
  std::vector<Stroke> strokes;
  std::size_t category = 0;
  /// Per-stroke component type ids, when annotated.
  std::optional<std::vector<std::size_t>> stroke_components;

  std::size_t num_strokes() const { return strokes.size(); }
};

/// Category and component vocabularies plus the per-category composition
/// prior (which component types each category contains).
struct LabelSpace {
  std::vector<std::string> category_names;
  std::vector<std::string> component_names;
  /// composition[c][j] == 1 iff category c contains component type j.
  /// Empty until supplied or derived.
  std::vector<std::vector<std::uint8_t>> composition;

  std::size_t num_categories() const { return category_names.size(); }
  std::size_t num_components() const { return component_names.size(); }
  bool has_composition() const { return !composition.empty(); }

  std::size_t category_index(const std::string& name) const;
  std::size_t component_index(const std::string& name) const;

  /// y_e for `category`; throws DataError on an unknown id or missing table.
  std::vector<std::uint8_t> composition_vector(std::size_t category) const;

  void validate() const;

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;
};

/// Union of observed component ids per category.
void derive_composition(LabelSpace& space, const std::vector<Sketch>& samples);

enum class Split { kTrain, kTest };

struct Dataset {
  std::vector<Sketch> samples;
  LabelSpace label_space;
  Split split = Split::kTrain;

  std::size_t total_strokes() const;
  bool fully_labeled() const;
};

/// Uniform scaling into [0,1]^2: the longer bounding-box side spans [0,1],
/// the shorter side is centered. A zero-extent sketch maps to (0.5, 0.5).
Sketch normalize(const Sketch& sketch);

/// Structural checks against the label space (stroke count, ids, and
/// component ids lying in the category's composition when one exists).
void validate_sketch(const Sketch& sketch, const LabelSpace& space, std::size_t max_strokes);

/// Parses one sketch record; coordinates are normalized.
Sketch parse_sketch_record(const nlohmann::json& record, const LabelSpace& space,
                           std::size_t max_strokes = kDefaultMaxStrokes);
nlohmann::json sketch_to_json(const Sketch& sketch, const LabelSpace& space);

Dataset load_stroke_file(const std::filesystem::path& path, const LabelSpace& space,
                         std::size_t max_strokes = kDefaultMaxStrokes);
void save_stroke_file(const std::filesystem::path& path, const Dataset& data);

LabelSpace label_space_from_json(const nlohmann::json& doc);
nlohmann::json label_space_to_json(const LabelSpace& space);
LabelSpace load_label_space(const std::filesystem::path& path);
void save_label_space(const std::filesystem::path& path, const LabelSpace& space);

}  // namespace ssr
