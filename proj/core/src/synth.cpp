#include "ssr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

namespace ssr {

using nlohmann::json;

std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::kLine: return "line";
    case Archetype::kArc: return "arc";
    case Archetype::kZigzag: return "zigzag";
    case Archetype::kLoop: return "loop";
  }
  return "line";
}

Archetype archetype_from_string(const std::string& s) {
  if (s == "line") return Archetype::kLine;
  if (s == "arc") return Archetype::kArc;
  if (s == "zigzag") return Archetype::kZigzag;
  if (s == "loop") return Archetype::kLoop;
  throw DataError(fmt::format("unknown archetype '{}'", s));
}

void SynthSpec::validate() const {
  if (components.empty()) throw DataError("synth spec: no components");
  if (categories.empty()) throw DataError("synth spec: no categories");
  for (const auto& c : components)
    if (c.strokes == 0) throw DataError(fmt::format("synth spec: component '{}' has zero strokes", c.name));
  for (const auto& cat : categories) {
    if (cat.components.empty()) {
      throw DataError(fmt::format("synth spec: category '{}' has no components", cat.name));
    }
    for (std::size_t j : cat.components)
      if (j >= components.size()) {
        throw DataError(fmt::format("synth spec: category '{}' uses unknown component {}", cat.name, j));
      }
  }
  if (min_points == 0 || min_points > max_points) throw DataError("synth spec: bad point range");
  if (!(jitter >= 0.0)) throw DataError("synth spec: jitter must be non-negative");
  if (train_per_category && *train_per_category > samples_per_category) {
    throw DataError("synth spec: train_per_category exceeds samples_per_category");
  }
}

LabelSpace SynthSpec::label_space() const {
  LabelSpace space;
  for (const auto& c : categories) space.category_names.push_back(c.name);
  for (const auto& c : components) space.component_names.push_back(c.name);
  space.composition.assign(categories.size(), std::vector<std::uint8_t>(components.size(), 0));
  for (std::size_t c = 0; c < categories.size(); ++c)
    for (std::size_t j : categories[c].components) space.composition[c][j] = 1;
  return space;
}

SynthSpec SynthSpec::generate(std::size_t num_categories, std::size_t num_components,
                              std::size_t samples_per_category, double jitter, std::uint64_t seed) {
  if (num_categories == 0 || num_components == 0) throw DataError("synth spec: empty vocabulary");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SynthSpec spec;
  spec.samples_per_category = samples_per_category;
  spec.jitter = jitter;
  for (std::size_t j = 0; j < num_components; ++j) {
    ComponentSpec c;
    c.name = fmt::format("part{}", j);
    c.archetype = static_cast<Archetype>(j % 4);
    c.center_x = 0.2 + 0.6 * unit(rng);
    c.center_y = 0.2 + 0.6 * unit(rng);
    c.scale = 0.15 + 0.2 * unit(rng);
    c.angle = std::numbers::pi * unit(rng);
    c.strokes = (j % 3 == 2) ? 2 : 1;
    spec.components.push_back(c);
  }
  const std::size_t max_parts = std::min<std::size_t>(4, num_components);
  const std::size_t min_parts = std::min<std::size_t>(2, num_components);
  std::set<std::vector<std::size_t>> used;
  std::vector<std::size_t> ids(num_components);
  for (std::size_t c = 0; c < num_categories; ++c) {
    std::vector<std::size_t> parts;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::iota(ids.begin(), ids.end(), 0);
      std::shuffle(ids.begin(), ids.end(), rng);
      const std::size_t n = min_parts + static_cast<std::size_t>(unit(rng) * (max_parts - min_parts + 1));
      parts.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(n, max_parts)));
      std::sort(parts.begin(), parts.end());
      if (!used.count(parts)) break;
    }
    if (used.count(parts)) {
      throw DataError(fmt::format("synth spec: cannot find {} distinct compositions over {} components",
                                  num_categories, num_components));
    }
    used.insert(parts);
    spec.categories.push_back({fmt::format("cat{}", c), parts});
  }
  return spec;
}

json synth_spec_to_json(const SynthSpec& spec) {
  json comps = json::array();
  for (const auto& c : spec.components) {
    comps.push_back({{"name", c.name},
                     {"archetype", to_string(c.archetype)},
                     {"center", {c.center_x, c.center_y}},
                     {"scale", c.scale},
                     {"angle", c.angle},
                     {"strokes", c.strokes}});
  }
  json cats = json::array();
  for (const auto& c : spec.categories) cats.push_back({{"name", c.name}, {"components", c.components}});
  json doc = {{"components", comps},
              {"categories", cats},
              {"samples_per_category", spec.samples_per_category},
              {"jitter", spec.jitter},
              {"min_points", spec.min_points},
              {"max_points", spec.max_points}};
  if (spec.train_per_category) doc["train_per_category"] = *spec.train_per_category;
  return doc;
}

SynthSpec synth_spec_from_json(const json& doc) {
  try {
    // Compact form: generate a random layout from counts.
    if (doc.contains("num_categories")) {
      SynthSpec spec = SynthSpec::generate(doc.at("num_categories").get<std::size_t>(),
                                           doc.at("num_components").get<std::size_t>(),
                                           doc.value("samples_per_category", std::size_t{50}),
                                           doc.value("jitter", 0.03), doc.value("layout_seed", std::uint64_t{7}));
      if (doc.contains("train_per_category")) spec.train_per_category = doc["train_per_category"].get<std::size_t>();
      spec.validate();
      return spec;
    }
    SynthSpec spec;
    for (const auto& c : doc.at("components")) {
      ComponentSpec cs;
      cs.name = c.at("name").get<std::string>();
      cs.archetype = archetype_from_string(c.at("archetype").get<std::string>());
      cs.center_x = c.at("center").at(0).get<double>();
      cs.center_y = c.at("center").at(1).get<double>();
      cs.scale = c.value("scale", 0.3);
      cs.angle = c.value("angle", 0.0);
      cs.strokes = c.value("strokes", std::size_t{1});
      spec.components.push_back(cs);
    }
    for (const auto& c : doc.at("categories")) {
      CategorySpec cat;
      cat.name = c.at("name").get<std::string>();
      for (const auto& part : c.at("components")) {
        if (part.is_string()) {
          const auto name = part.get<std::string>();
          auto it = std::find_if(spec.components.begin(), spec.components.end(),
                                 [&](const ComponentSpec& cs) { return cs.name == name; });
          if (it == spec.components.end()) throw DataError(fmt::format("synth spec: unknown component '{}'", name));
          cat.components.push_back(static_cast<std::size_t>(it - spec.components.begin()));
        } else {
          cat.components.push_back(part.get<std::size_t>());
        }
      }
      spec.categories.push_back(cat);
    }
    spec.samples_per_category = doc.value("samples_per_category", std::size_t{50});
    spec.jitter = doc.value("jitter", 0.03);
    spec.min_points = doc.value("min_points", std::size_t{8});
    spec.max_points = doc.value("max_points", std::size_t{14});
    if (doc.contains("train_per_category")) spec.train_per_category = doc["train_per_category"].get<std::size_t>();
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("synth spec: {}", e.what()));
  }
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open synth spec {}", path.string()));
  try {
    return synth_spec_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("synth spec {}: {}", path.string(), e.what()));
  }
}

namespace {

// Archetype curve in local coordinates, t in [0, 1].
std::pair<double, double> archetype_point(Archetype a, double t) {
  using std::numbers::pi;
  switch (a) {
    case Archetype::kLine: return {t - 0.5, 0.0};
    case Archetype::kArc: return {0.5 * std::cos(pi * (1.0 - t)), 0.5 * std::sin(pi * (1.0 - t)) - 0.25};
    case Archetype::kZigzag: {
      // Four segments alternating between y = +0.25 and y = -0.25.
      const int seg = std::min(static_cast<int>(t * 4.0), 3);
      const double frac = t * 4.0 - seg;
      const double y0 = (seg % 2 == 0) ? -0.25 : 0.25;
      return {t - 0.5, y0 + (-2.0 * y0) * frac};
    }
    case Archetype::kLoop: return {0.4 * std::cos(2.0 * pi * t), 0.4 * std::sin(2.0 * pi * t)};
  }
  return {0.0, 0.0};
}

}  // namespace

Dataset synthesize_dataset(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> npts(spec.min_points, spec.max_points);

  Dataset data;
  data.label_space = spec.label_space();
  for (std::size_t c = 0; c < spec.categories.size(); ++c) {
    const auto& cat = spec.categories[c];
    for (std::size_t s = 0; s < spec.samples_per_category; ++s) {
      // Per-component stroke lists, later shuffled at both levels.
      std::vector<std::vector<Stroke>> groups;
      std::vector<std::size_t> group_ids;
      for (std::size_t j : cat.components) {
        const auto& comp = spec.components[j];
        const double cx = comp.center_x + spec.jitter * sym(rng);
        const double cy = comp.center_y + spec.jitter * sym(rng);
        const double scale = comp.scale * (1.0 + spec.jitter * sym(rng));
        const double angle = comp.angle + spec.jitter * sym(rng);
        const double ca = std::cos(angle), sa = std::sin(angle);
        std::vector<Stroke> strokes;
        for (std::size_t k = 0; k < comp.strokes; ++k) {
          const double t0 = static_cast<double>(k) / static_cast<double>(comp.strokes);
          const double t1 = static_cast<double>(k + 1) / static_cast<double>(comp.strokes);
          const std::size_t m = npts(rng);
          std::vector<std::pair<double, double>> xy;
          for (std::size_t p = 0; p < m; ++p) {
            const double t = t0 + (t1 - t0) * static_cast<double>(p) / static_cast<double>(m - 1 ? m - 1 : 1);
            auto [lx, ly] = archetype_point(comp.archetype, t);
            lx *= scale;
            ly *= scale;
            xy.emplace_back(cx + ca * lx - sa * ly + 0.25 * spec.jitter * noise(rng),
                            cy + sa * lx + ca * ly + 0.25 * spec.jitter * noise(rng));
          }
          strokes.push_back(Stroke::from_xy(xy));
        }
        std::shuffle(strokes.begin(), strokes.end(), rng);
        groups.push_back(std::move(strokes));
        group_ids.push_back(j);
      }
      std::vector<std::size_t> order(groups.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);

      Sketch sketch;
      sketch.category = c;
      sketch.stroke_components.emplace();
      for (std::size_t g : order) {
        for (auto& st : groups[g]) {
          sketch.strokes.push_back(std::move(st));
          sketch.stroke_components->push_back(group_ids[g]);
        }
      }
      data.samples.push_back(normalize(sketch));
    }
  }
  return data;
}

std::pair<Dataset, Dataset> split_per_category(const Dataset& data, std::size_t train_per_category) {
  Dataset train, test;
  train.label_space = test.label_space = data.label_space;
  train.split = Split::kTrain;
  test.split = Split::kTest;
  std::vector<std::size_t> seen(data.label_space.num_categories(), 0);
  for (const auto& s : data.samples) {
    if (seen[s.category]++ < train_per_category) {
      train.samples.push_back(s);
    } else {
      test.samples.push_back(s);
    }
  }
  return {std::move(train), std::move(test)};
}

}  // namespace ssr
