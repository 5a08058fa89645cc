#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "betarep/data_io.hpp"
#include "betarep/synth.hpp"

namespace betarep {
namespace {

constexpr const char* kMinimal =
    R"({"ID": "a", "gtboxes": [{"tag": "person", "fbox": [10, 10, 50, 100], "vbox": [10, 10, 25, 100], "extra": {"ignore": 0}}]})";

TEST(OdgtTest, ConvertsXywhToCorners) {
  const auto s = parse_odgt(kMinimal);
  EXPECT_EQ(s.image_id, "a");
  ASSERT_EQ(s.persons.size(), 1u);
  EXPECT_EQ(s.persons[0].boxes.full(), (BBox{10, 10, 60, 110}));
  EXPECT_EQ(s.persons[0].boxes.visible(), (BBox{10, 10, 35, 110}));
  EXPECT_FALSE(s.persons[0].ignore);
  EXPECT_FALSE(s.image_size.has_value());
}

TEST(OdgtTest, ClipsOverflowingVisibleBox) {
  const auto s = parse_odgt(
      R"({"ID": "a", "gtboxes": [{"tag": "person", "fbox": [10, 10, 50, 100], "vbox": [0, 50, 100, 100]}]})");
  EXPECT_EQ(s.persons[0].boxes.visible(), (BBox{10, 50, 60, 110}));
}

TEST(OdgtTest, IgnoreFlagFromTagOrExtra) {
  const auto s = parse_odgt(R"({"ID": "a", "width": 800, "height": 600, "gtboxes": [
    {"tag": "mask", "fbox": [0, 0, 10, 10], "vbox": [0, 0, 10, 10]},
    {"tag": "person", "fbox": [0, 0, 10, 10], "vbox": [0, 0, 10, 10], "extra": {"ignore": 1}},
    {"tag": "person", "fbox": [0, 0, 10, 10], "vbox": [0, 0, 10, 10], "hbox": [1, 1, 2, 2]}]})");
  ASSERT_EQ(s.persons.size(), 3u);
  EXPECT_TRUE(s.persons[0].ignore);
  EXPECT_EQ(s.persons[0].tag, "mask");
  EXPECT_TRUE(s.persons[1].ignore);
  EXPECT_FALSE(s.persons[2].ignore);
  EXPECT_EQ(s.image_size, (ImageSize{800, 600}));
}

TEST(OdgtTest, SkipsIncompleteEntriesWithWarning) {
  ParseWarnings w;
  const auto s = parse_odgt(R"({"ID": "a", "gtboxes": [
    {"tag": "person", "fbox": [0, 0, 10, 10]},
    {"tag": "person", "fbox": [0, 0, 10, 10], "vbox": [50, 50, 5, 5]},
    {"tag": "person", "fbox": [0, 0, 10, 10], "vbox": [0, 0, 10, 10]}]})",
                            7, &w);
  EXPECT_EQ(s.persons.size(), 1u);
  ASSERT_EQ(w.messages.size(), 2u);
  EXPECT_EQ(w.messages[0].rfind("line 7: ", 0), 0u);
}

TEST(OdgtTest, MalformedJsonReportsLine) {
  std::istringstream in(std::string(kMinimal) + "\n\n{\"ID\": \"b\", \"gtboxes\": [\n");
  try {
    read_odgt(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(OdgtTest, DuplicateIdsRejected) {
  std::istringstream in(std::string(kMinimal) + "\n" + kMinimal + "\n");
  EXPECT_THROW(read_odgt(in), ParseError);
}

std::vector<SceneAnnotation> read_back(const std::vector<SceneAnnotation>& scenes) {
  std::ostringstream out;
  write_odgt(out, scenes);
  std::istringstream in(out.str());
  return read_odgt(in);
}

TEST(OdgtTest, RoundTripIsIdentityOnCanonicalRecords) {
  // Integer pixel boxes, as distributed with the dataset.
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.scenes = 30;
  auto scenes = synth_scenes(cfg);
  for (auto& s : scenes) {
    for (auto& p : s.persons) {
      auto r = [](const BBox& b) {
        return BBox{std::round(b.l), std::round(b.t), std::round(b.r), std::round(b.b)};
      };
      const BBox f = r(p.boxes.full());
      BBox v = r(p.boxes.visible());
      if (!v.valid()) v = f;
      p.boxes = PairedBoxes::make(f, v);
    }
  }
  scenes[0].persons[0].ignore = true;
  scenes[0].persons[0].tag = "mask";
  EXPECT_TRUE(read_back(scenes) == scenes);
  std::ostringstream once, twice;
  write_odgt(once, scenes);
  write_odgt(twice, read_back(scenes));
  EXPECT_EQ(once.str(), twice.str());
}

TEST(OdgtTest, RoundTripKeepsFractionalBoxesClose) {
  SynthConfig cfg;
  cfg.seed = 4;
  cfg.scenes = 30;
  const auto scenes = synth_scenes(cfg);
  const auto back = read_back(scenes);
  ASSERT_EQ(back.size(), scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    ASSERT_EQ(back[i].persons.size(), scenes[i].persons.size());
    for (std::size_t k = 0; k < scenes[i].persons.size(); ++k) {
      const BBox a = back[i].persons[k].boxes.full(), b = scenes[i].persons[k].boxes.full();
      EXPECT_NEAR(a.l, b.l, 1e-9);
      EXPECT_NEAR(a.r, b.r, 1e-9);
      const BBox va = back[i].persons[k].boxes.visible(), vb = scenes[i].persons[k].boxes.visible();
      EXPECT_NEAR(va.t, vb.t, 1e-9);
      EXPECT_NEAR(va.b, vb.b, 1e-9);
    }
  }
}

TEST(DetectionIoTest, EmptyStreamGivesNothing) {
  std::istringstream in("\n  \n");
  EXPECT_TRUE(read_detections(in).empty());
}

TEST(DetectionIoTest, RoundTripKeepsEveryBit) {
  std::mt19937_64 rng(401);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ImageDetection> dets;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const double l = 1000 * u(rng) - 100, t = 1000 * u(rng);
    dets.push_back({"img" + std::to_string(i % 7),
                    {{{l, t, l + 1e-3 + 300 * u(rng), t + 1e-3 + 600 * u(rng)},
                      {1 + 30 * u(rng), 1 + 30 * u(rng)},
                      {1 + 30 * u(rng), 1 + 30 * u(rng)}},
                     u(rng),
                     i * 977},
                    true});
  }
  std::ostringstream out;
  write_detections(out, dets);
  std::istringstream in(out.str());
  EXPECT_EQ(read_detections(in), dets);
}

TEST(DetectionIoTest, IdDefaultsToRecordIndex) {
  std::istringstream in(
      "{\"image\": \"a\", \"score\": 0.5, \"beta\": [0, 0, 10, 20, 2, 2, 2, 2]}\n"
      "\n"
      "{\"image\": \"a\", \"score\": 0.4, \"beta\": [0, 0, 10, 20, 2, 2, 2, 2], \"id\": 42}\n"
      "{\"image\": \"b\", \"score\": 0.3, \"beta\": [0, 0, 10, 20, 2, 2, 2, 2]}\n");
  const auto dets = read_detections(in);
  ASSERT_EQ(dets.size(), 3u);
  EXPECT_EQ(dets[0].det.id, 0u);
  EXPECT_FALSE(dets[0].explicit_id);
  EXPECT_EQ(dets[1].det.id, 42u);
  EXPECT_TRUE(dets[1].explicit_id);
  EXPECT_EQ(dets[2].det.id, 2u);
}

TEST(DetectionIoTest, SchemaErrorsNameTheRecord) {
  const std::string good = "{\"image\": \"a\", \"score\": 0.5, \"beta\": [0, 0, 10, 20, 2, 2, 2, 2]}\n";
  const std::vector<std::string> bad{
      "{\"score\": 0.5, \"beta\": [0, 0, 10, 20, 2, 2, 2, 2]}",
      "{\"image\": \"a\", \"score\": \"high\", \"beta\": [0, 0, 10, 20, 2, 2, 2, 2]}",
      "{\"image\": \"a\", \"score\": 0.5, \"beta\": [0, 0, 10, 20, 2, 2, 2]}",
      "{\"image\": \"a\", \"score\": 0.5, \"beta\": [0, 0, -10, 20, 2, 2, 2, 2]}",
      "{\"image\": \"a\", \"score\": 1.5, \"beta\": [0, 0, 10, 20, 2, 2, 2, 2]}",
      "{\"image\": \"a\", \"score\": 0.5, \"beta\": [0, 0, 10, 20, 2, 2, 2, 2], \"id\": -3}",
      "[1, 2]"};
  for (const auto& line : bad) {
    std::istringstream in(good + good + line + "\n");
    try {
      read_detections(in);
      ADD_FAILURE() << "accepted: " << line;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find("detection record 2"), std::string::npos) << e.what();
      EXPECT_EQ(e.line(), 3u);
    }
  }
}

TEST(SynthTest, SeedDeterminesOutput) {
  SynthConfig cfg;
  cfg.seed = 99;
  const auto a = synth_scenes(cfg);
  EXPECT_EQ(synth_scenes(cfg), a);
  cfg.seed = 100;
  EXPECT_NE(synth_scenes(cfg), a);
}

TEST(SynthTest, FrozenStream) {
  // The generator draws raw bits, so these values hold on any standard library.
  SynthConfig cfg;
  cfg.seed = 1;
  cfg.scenes = 1;
  const auto s = synth_scenes(cfg)[0];
  EXPECT_EQ(s.image_id, "synth_1_0");
  ASSERT_EQ(s.persons.size(), 2u);
  EXPECT_EQ(s.persons[0].boxes.full(),
            (BBox{845.47635597611941, 20.335943771076209, 891.69880835455319, 133.07363249896355}));
  EXPECT_EQ(s.persons[0].boxes.visible(), s.persons[0].boxes.full());
}

TEST(SynthTest, ZeroIntensityHasNoOverlap) {
  SynthConfig cfg;
  cfg.seed = 8;
  cfg.scenes = 200;
  cfg.overlap_intensity = 0.0;
  for (const auto& s : synth_scenes(cfg)) {
    for (std::size_t i = 0; i < s.persons.size(); ++i) {
      for (std::size_t j = i + 1; j < s.persons.size(); ++j) {
        EXPECT_EQ(iou(s.persons[i].boxes.full(), s.persons[j].boxes.full()), 0.0);
      }
    }
  }
}

TEST(SynthTest, OutputSatisfiesInvariants) {
  SynthConfig cfg;
  cfg.seed = 12;
  cfg.scenes = 300;
  cfg.overlap_intensity = 0.8;
  cfg.pattern_mix = {1, 1, 1, 1, 1};
  for (const auto& s : synth_scenes(cfg)) {
    for (const auto& p : s.persons) {
      EXPECT_TRUE(p.boxes.visible().valid());
      EXPECT_TRUE(p.boxes.full().contains(p.boxes.visible()));
    }
  }
}

TEST(SynthTest, InfeasibleConfigsRejected) {
  SynthConfig cfg;
  cfg.overlap_intensity = 1.0;
  EXPECT_THROW(synth_scenes(cfg), GenerationError);
  cfg = SynthConfig{};
  cfg.min_persons = 5;
  cfg.max_persons = 4;
  EXPECT_THROW(synth_scenes(cfg), GenerationError);
  cfg = SynthConfig{};
  cfg.pattern_mix = {0, 0, 0, 0, 0};
  EXPECT_THROW(synth_scenes(cfg), GenerationError);
}

TEST(SynthTest, HighIntensityMatchesCalibration) {
  std::ifstream f(BETAREP_TEST_DATA "/synth_calibration.json");
  ASSERT_TRUE(f);
  const Json calib = Json::parse(f);
  const int seeds = calib["seeds"].get<int>();
  int hits = 0;
  for (int seed = 0; seed < seeds; ++seed) {
    SynthConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.scenes = 1;
    cfg.min_persons = cfg.max_persons = 2;
    cfg.overlap_intensity = calib["overlap_intensity"].get<double>();
    const auto s = synth_scenes(cfg)[0];
    const auto& a = s.persons[0].boxes;
    const auto& b = s.persons[1].boxes;
    hits += iou(a.full(), b.full()) > 0.5 && intersection_area(a.visible(), b.visible()) == 0.0;
  }
  EXPECT_EQ(hits, calib["qualifying_scenes"].get<int>());
  EXPECT_GE(hits, calib["required_fraction"].get<double>() * seeds);
}

}  // namespace
}  // namespace betarep
