#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssr/parameter.hpp"
#include "ssr/sketch.hpp"

namespace ssr {

enum class Archetype { kLine, kArc, kZigzag, kLoop };

std::string to_string(Archetype a);
Archetype archetype_from_string(const std::string& s);

/// One component type: a stroke archetype drawn at a canonical placement
/// inside the unit square, split into `strokes` pen-down segments.
struct ComponentSpec {
  std::string name;
  Archetype archetype = Archetype::kLine;
  double center_x = 0.5;
  double center_y = 0.5;
  double scale = 0.3;
  double angle = 0.0;  // radians
  std::size_t strokes = 1;
};

struct CategorySpec {
  std::string name;
  std::vector<std::size_t> components;
};

struct SynthSpec {
  std::vector<ComponentSpec> components;
  std::vector<CategorySpec> categories;
  std::size_t samples_per_category = 50;
  /// Placement jitter as a fraction of the unit square.
  double jitter = 0.03;
  std::size_t min_points = 8;
  std::size_t max_points = 14;
  /// When set, `ssr synth` also writes train/test files split per category.
  std::optional<std::size_t> train_per_category;

  void validate() const;
  LabelSpace label_space() const;

  /// Random layout with distinct per-category compositions; each category
  /// draws between 2 and 4 component types.
  static SynthSpec generate(std::size_t num_categories, std::size_t num_components,
                            std::size_t samples_per_category, double jitter, std::uint64_t seed);
};

nlohmann::json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& doc);
SynthSpec load_synth_spec(const std::filesystem::path& path);

/// Deterministic under `seed`. Samples are grouped by category in order;
/// component draw order and stroke order within each component are shuffled.
Dataset synthesize_dataset(const SynthSpec& spec, std::uint64_t seed);

/// Splits each category's samples: the first `train_per_category` go to the
/// train split, the rest to test.
std::pair<Dataset, Dataset> split_per_category(const Dataset& data, std::size_t train_per_category);

}  // namespace ssr
