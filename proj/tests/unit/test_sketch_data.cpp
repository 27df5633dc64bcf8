#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "ssr/sketch.hpp"
#include "test_util.hpp"

namespace ssr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

LabelSpace airplane_space() {
  return label_space_from_json(json::parse(R"({
    "categories": ["airplane", "house"],
    "components": ["fuselage", "wing", "tail", "roof", "wall", "door"],
    "composition": {"airplane": ["fuselage", "wing", "tail"], "house": ["roof", "wall", "door"]}
  })"));
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ssr_sketch_tests";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Stroke, PenStatesDerivedFromPosition) {
  const Stroke s = Stroke::from_xy({{0, 0}, {1, 1}, {2, 0}});
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.points()[0].pen, PenState::kTouching);
  EXPECT_EQ(s.points()[1].pen, PenState::kTouching);
  EXPECT_EQ(s.points()[2].pen, PenState::kLifting);
  EXPECT_THROW(Stroke::from_xy({}), DataError);
}

TEST(ParseRecord, OneStrokeThreePoints) {
  const Sketch s = parse_sketch_record(json::parse(R"({"category": "airplane", "strokes": [[[0,0],[1,1],[2,0]]]})"),
                                       airplane_space());
  EXPECT_EQ(s.num_strokes(), 1u);
  EXPECT_EQ(s.strokes[0].size(), 3u);
  EXPECT_EQ(s.category, 0u);
  EXPECT_FALSE(s.stroke_components.has_value());
}

TEST(ParseRecord, IntegerCategoryAccepted) {
  const Sketch s = parse_sketch_record(json::parse(R"({"category": 1, "strokes": [[[0,0]]]})"), airplane_space());
  EXPECT_EQ(s.category, 1u);
}

TEST(ParseRecord, WrongLengthStrokeComponentsRejected) {
  const json rec = json::parse(R"({"category": 0, "strokes": [[[0,0]],[[1,1]]], "stroke_components": [0]})");
  EXPECT_THROW(parse_sketch_record(rec, airplane_space()), DataError);
}

TEST(ParseRecord, UnknownLabelsRejected) {
  const LabelSpace space = airplane_space();
  EXPECT_THROW(parse_sketch_record(json::parse(R"({"category": "boat", "strokes": [[[0,0]]]})"), space), DataError);
  EXPECT_THROW(parse_sketch_record(json::parse(R"({"category": 7, "strokes": [[[0,0]]]})"), space), DataError);
  EXPECT_THROW(
      parse_sketch_record(json::parse(R"({"category": 0, "strokes": [[[0,0]]], "stroke_components": [9]})"), space),
      DataError);
}

TEST(ParseRecord, ComponentOutsideCompositionIsDataError) {
  // "roof" is not part of an airplane.
  const json rec = json::parse(R"({"category": "airplane", "strokes": [[[0,0]]], "stroke_components": [3]})");
  EXPECT_THROW(parse_sketch_record(rec, airplane_space()), DataError);
}

TEST(ParseRecord, TooManyStrokesRejected) {
  json rec = {{"category", 0}, {"strokes", json::array()}};
  for (int i = 0; i < 5; ++i) rec["strokes"].push_back(json::array({json::array({i, i})}));
  EXPECT_THROW(parse_sketch_record(rec, airplane_space(), 4), DataError);
  EXPECT_NO_THROW(parse_sketch_record(rec, airplane_space(), 5));
}

TEST(LoadStrokeFile, MalformedRecordReportsLineNumber) {
  const fs::path p = temp_path("bad.jsonl");
  std::ofstream(p) << R"({"category": 0, "strokes": [[[0,0]]]})" << "\n"
                   << R"({"category": 0, "strokes": [[[0,0]]]})" << "\n"
                   << R"({"category": 0, "strokes": [[[0,0)" << "\n";
  try {
    load_stroke_file(p, airplane_space());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadStrokeFile, SaveLoadRoundTrip) {
  std::mt19937_64 rng(5);
  LabelSpace space = testing::toy_label_space(3, 4);
  Dataset data;
  data.label_space = space;
  for (int i = 0; i < 20; ++i) data.samples.push_back(normalize(testing::random_sketch(1 + i % 5, 3, 4, rng)));
  const fs::path p = temp_path("roundtrip.jsonl");
  save_stroke_file(p, data);
  const Dataset once = load_stroke_file(p, space);
  save_stroke_file(p, once);
  const Dataset twice = load_stroke_file(p, space);
  ASSERT_EQ(once.samples.size(), data.samples.size());
  ASSERT_EQ(twice.samples.size(), once.samples.size());
  for (std::size_t s = 0; s < once.samples.size(); ++s) {
    const Sketch& a = once.samples[s];
    const Sketch& b = twice.samples[s];
    EXPECT_EQ(a.category, b.category);
    EXPECT_EQ(a.stroke_components, b.stroke_components);
    ASSERT_EQ(a.num_strokes(), b.num_strokes());
    for (std::size_t i = 0; i < a.num_strokes(); ++i) {
      ASSERT_EQ(a.strokes[i].size(), b.strokes[i].size());
      for (std::size_t k = 0; k < a.strokes[i].size(); ++k) {
        EXPECT_NEAR(a.strokes[i].points()[k].x, b.strokes[i].points()[k].x, 1e-15);
        EXPECT_NEAR(a.strokes[i].points()[k].y, b.strokes[i].points()[k].y, 1e-15);
        EXPECT_EQ(a.strokes[i].points()[k].pen, b.strokes[i].points()[k].pen);
      }
    }
  }
}

Sketch sketch_of(std::vector<std::vector<std::pair<double, double>>> strokes) {
  Sketch s;
  for (const auto& xy : strokes) s.strokes.push_back(Stroke::from_xy(xy));
  return s;
}

TEST(Normalize, SquareCornerMapsToOrigin) {
  const Sketch n = normalize(sketch_of({{{5, 5}, {7, 7}}, {{5, 7}}}));
  EXPECT_EQ(n.strokes[0].points()[0].x, 0.0);
  EXPECT_EQ(n.strokes[0].points()[0].y, 0.0);
  EXPECT_EQ(n.strokes[0].points()[1].x, 1.0);
}

TEST(Normalize, NormalizedSquareUnchanged) {
  const Sketch s = sketch_of({{{0, 0}, {1, 1}}, {{0.25, 0.75}}});
  const Sketch n = normalize(s);
  for (std::size_t i = 0; i < s.num_strokes(); ++i)
    for (std::size_t k = 0; k < s.strokes[i].size(); ++k) {
      EXPECT_EQ(n.strokes[i].points()[k].x, s.strokes[i].points()[k].x);
      EXPECT_EQ(n.strokes[i].points()[k].y, s.strokes[i].points()[k].y);
    }
}

TEST(Normalize, TallBoxCentersShorterSide) {
  // bbox [10,20] x [30,60]: scale 1/30, x offset (1 - 10/30) / 2 = 1/3.
  const Sketch n = normalize(sketch_of({{{10, 30}, {20, 60}}, {{10, 45}}}));
  const double scale = 1.0 / 30.0;
  const double x_offset = 0.5 * (1.0 - 10.0 * scale);
  const Point& p = n.strokes[1].points()[0];
  EXPECT_NEAR(p.x, (10.0 - 10.0) * scale + x_offset, 1e-15);
  EXPECT_NEAR(p.y, (45.0 - 30.0) * scale, 1e-15);
  EXPECT_NEAR(p.x, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.y, 0.5, 1e-15);
}

TEST(Normalize, SinglePointGoesToCenter) {
  const Sketch n = normalize(sketch_of({{{3, -8}}}));
  EXPECT_EQ(n.strokes[0].points()[0].x, 0.5);
  EXPECT_EQ(n.strokes[0].points()[0].y, 0.5);
}

TEST(Normalize, NonFiniteRejected) {
  EXPECT_THROW(normalize(sketch_of({{{0, 0}, {std::nan(""), 1}}})), DataError);
  EXPECT_THROW(normalize(sketch_of({{{0, 0}, {INFINITY, 1}}})), DataError);
}

TEST(Normalize, IdempotentAndAspectPreserving) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int trial = 0; trial < 100; ++trial) {
    Sketch s;
    const double sx = std::abs(u(rng)) + 1.0, sy = std::abs(u(rng)) + 1.0;
    for (int i = 0; i < 3; ++i) {
      std::vector<std::pair<double, double>> xy;
      for (int k = 0; k < 4; ++k) xy.emplace_back(u(rng) * sx, u(rng) * sy);
      s.strokes.push_back(Stroke::from_xy(xy));
    }
    auto bbox = [](const Sketch& sk) {
      double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
      for (const auto& st : sk.strokes)
        for (const auto& p : st.points()) {
          x0 = std::min(x0, p.x), x1 = std::max(x1, p.x), y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
        }
      return std::array<double, 4>{x0, x1, y0, y1};
    };
    const Sketch once = normalize(s);
    const Sketch twice = normalize(once);
    const auto b0 = bbox(s), b1 = bbox(once);
    EXPECT_NEAR((b1[1] - b1[0]) / (b1[3] - b1[2]), (b0[1] - b0[0]) / (b0[3] - b0[2]), 1e-9);
    EXPECT_NEAR(std::max(b1[1] - b1[0], b1[3] - b1[2]), 1.0, 1e-12);
    EXPECT_GE(std::min(b1[0], b1[2]), -1e-12);
    EXPECT_LE(std::max(b1[1], b1[3]), 1.0 + 1e-12);
    for (std::size_t i = 0; i < once.num_strokes(); ++i)
      for (std::size_t k = 0; k < once.strokes[i].size(); ++k) {
        EXPECT_NEAR(twice.strokes[i].points()[k].x, once.strokes[i].points()[k].x, 1e-12);
        EXPECT_NEAR(twice.strokes[i].points()[k].y, once.strokes[i].points()[k].y, 1e-12);
      }
  }
}

TEST(LabelSpace, CompositionVectorFromTable) {
  const LabelSpace space = airplane_space();
  EXPECT_EQ(space.composition_vector(0), (std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0}));
  EXPECT_THROW(space.composition_vector(2), DataError);
}

TEST(LabelSpace, CategoryWithComponentsZeroAndThree) {
  LabelSpace space = testing::toy_label_space(1, 6, false);
  space.composition = {{1, 0, 0, 1, 0, 0}};
  EXPECT_EQ(space.composition_vector(0), (std::vector<std::uint8_t>{1, 0, 0, 1, 0, 0}));
}

TEST(LabelSpace, AllComponentsGivesAllOnes) {
  const LabelSpace space = testing::toy_label_space(2, 5);
  EXPECT_EQ(space.composition_vector(1), std::vector<std::uint8_t>(5, 1));
}

TEST(LabelSpace, MissingTableIsError) {
  const LabelSpace space = testing::toy_label_space(2, 3, false);
  EXPECT_THROW(space.composition_vector(0), DataError);
}

TEST(LabelSpace, CategoryWithoutComponentsRejected) {
  EXPECT_THROW(label_space_from_json(json::parse(
                   R"({"categories": ["a", "b"], "components": ["x"], "composition": {"a": ["x"]}})")),
               DataError);
}

TEST(LabelSpace, JsonRoundTrip) {
  const LabelSpace space = airplane_space();
  EXPECT_EQ(label_space_from_json(label_space_to_json(space)), space);
}

TEST(LabelSpace, DerivedCompositionIsUnionOfObservedComponents) {
  LabelSpace space = testing::toy_label_space(2, 4, false);
  std::vector<Sketch> samples(3);
  samples[0].category = 0, samples[0].stroke_components = std::vector<std::size_t>{0, 2};
  samples[1].category = 0, samples[1].stroke_components = std::vector<std::size_t>{2, 3};
  samples[2].category = 1, samples[2].stroke_components = std::vector<std::size_t>{1};
  derive_composition(space, samples);
  EXPECT_EQ(space.composition_vector(0), (std::vector<std::uint8_t>{1, 0, 1, 1}));
  EXPECT_EQ(space.composition_vector(1), (std::vector<std::uint8_t>{0, 1, 0, 0}));
}

}  // namespace
}  // namespace ssr
