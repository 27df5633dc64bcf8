#include <set>

#include <gtest/gtest.h>

#include "ssr/synth.hpp"

namespace ssr {
namespace {

using nlohmann::json;

std::string dump(const Dataset& d) {
  std::string out;
  for (const auto& s : d.samples) out += sketch_to_json(s, d.label_space).dump() + "\n";
  return out;
}

TEST(Synth, FixedSeedIsByteIdentical) {
  const SynthSpec spec = SynthSpec::generate(5, 8, 10, 0.03, 7);
  EXPECT_EQ(dump(synthesize_dataset(spec, 42)), dump(synthesize_dataset(spec, 42)));
  EXPECT_NE(dump(synthesize_dataset(spec, 42)), dump(synthesize_dataset(spec, 43)));
}

TEST(Synth, FiveCategoriesEightComponentsFiftySamples) {
  const Dataset d = synthesize_dataset(SynthSpec::generate(5, 8, 50, 0.03, 7), 1);
  EXPECT_EQ(d.samples.size(), 250u);
  EXPECT_TRUE(d.fully_labeled());
  EXPECT_EQ(d.label_space.num_categories(), 5u);
  EXPECT_EQ(d.label_space.num_components(), 8u);
  for (const auto& s : d.samples) {
    EXPECT_NO_THROW(validate_sketch(s, d.label_space, kDefaultMaxStrokes));
    for (const auto& st : s.strokes)
      for (const auto& p : st.points()) {
        EXPECT_GE(p.x, 0.0);
        EXPECT_LE(p.x, 1.0);
        EXPECT_GE(p.y, 0.0);
        EXPECT_LE(p.y, 1.0);
      }
  }
}

TEST(Synth, CategoriesHaveDistinctCompositions) {
  const SynthSpec spec = SynthSpec::generate(5, 8, 5, 0.03, 7);
  const LabelSpace space = spec.label_space();
  for (std::size_t a = 0; a < space.num_categories(); ++a)
    for (std::size_t b = a + 1; b < space.num_categories(); ++b)
      EXPECT_NE(space.composition_vector(a), space.composition_vector(b)) << a << " vs " << b;
}

TEST(Synth, StrokesOfOneComponentAreContiguous) {
  const Dataset d = synthesize_dataset(SynthSpec::generate(3, 6, 10, 0.03, 7), 3);
  for (const auto& s : d.samples) {
    std::set<std::size_t> closed;
    const auto& ids = *s.stroke_components;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      EXPECT_FALSE(closed.count(ids[i])) << "component " << ids[i] << " split";
      if (i + 1 == ids.size() || ids[i + 1] != ids[i]) closed.insert(ids[i]);
    }
  }
}

TEST(Synth, CategoryWithoutComponentsRejected) {
  const json doc = json::parse(R"({
    "components": [{"name": "a", "archetype": "line", "center": [0.5, 0.5]}],
    "categories": [{"name": "empty", "components": []}]
  })");
  EXPECT_THROW(synth_spec_from_json(doc), DataError);
}

TEST(Synth, ExplicitSpecByComponentName) {
  const json doc = json::parse(R"({
    "components": [{"name": "bar", "archetype": "line", "center": [0.3, 0.5]},
                   {"name": "ring", "archetype": "loop", "center": [0.7, 0.5], "strokes": 2}],
    "categories": [{"name": "both", "components": ["bar", "ring"]}],
    "samples_per_category": 3
  })");
  const SynthSpec spec = synth_spec_from_json(doc);
  const Dataset d = synthesize_dataset(spec, 0);
  ASSERT_EQ(d.samples.size(), 3u);
  EXPECT_EQ(d.samples[0].num_strokes(), 3u);
}

TEST(Synth, SpecJsonRoundTrip) {
  SynthSpec spec = SynthSpec::generate(4, 6, 12, 0.05, 9);
  spec.train_per_category = 8;
  const SynthSpec back = synth_spec_from_json(synth_spec_to_json(spec));
  EXPECT_EQ(synth_spec_to_json(back), synth_spec_to_json(spec));
  EXPECT_EQ(back.train_per_category, std::optional<std::size_t>(8));
}

TEST(Synth, SplitPerCategoryCounts) {
  const Dataset d = synthesize_dataset(SynthSpec::generate(5, 8, 60, 0.03, 7), 2);
  const auto [train, test] = split_per_category(d, 40);
  EXPECT_EQ(train.samples.size(), 200u);
  EXPECT_EQ(test.samples.size(), 100u);
  std::vector<std::size_t> per_cat(5, 0);
  for (const auto& s : test.samples) ++per_cat[s.category];
  for (std::size_t n : per_cat) EXPECT_EQ(n, 20u);
}

}  // namespace
}  // namespace ssr
