#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "mapcomm/config.hpp"
#include "mapcomm/report.hpp"

using namespace mapcomm;

namespace {

std::string field_of(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsAreMovingTargetScenario) {
  const ScenarioConfig c = parse_config_string("");
  EXPECT_EQ(c.actor.start, (Cell{12, 57}));
  EXPECT_EQ(c.sensor.start, (Cell{46, 62}));
  EXPECT_EQ(c.target.start, (Cell{90, 49}));
  EXPECT_TRUE(c.target.moving);
  EXPECT_EQ(c.sensor.horizon, 105);
  EXPECT_EQ(c.actor.window, (WindowShape{5, 5}));
  EXPECT_EQ(c.sensor.window, (WindowShape{15, 15}));
  EXPECT_DOUBLE_EQ(c.actor.noise, 1e-6);
  EXPECT_DOUBLE_EQ(c.sensor.noise, 1e-5);
  EXPECT_DOUBLE_EQ(c.actor.feasibility_threshold, 0.501);
  EXPECT_DOUBLE_EQ(c.prior.mean, 0.5);
  EXPECT_DOUBLE_EQ(c.encoder.sigma, 20.0);
  EXPECT_DOUBLE_EQ(c.encoder.lambda_coefficient, 0.02);
  EXPECT_DOUBLE_EQ(c.actor.movement_penalty, 0.025);
}

TEST(Config, RoundTripIsIdempotent) {
  ScenarioConfig c;
  c.map.kind = MapSpec::Kind::kFile;
  c.map.path = "maps/site.pgm";
  c.map.format = RasterFormat::kGraymap;
  c.map.depth = true;
  c.framework = Framework::kFullyInformed;
  c.decoder = DecoderKind::kHistoryQp;
  c.actor.noise = 1.0 / 3.0;
  c.encoder.weight_mode = WeightMode::kLinear;
  c.seed = 123456789012345ULL;
  const std::string once = write_config_string(c);
  const std::string twice = write_config_string(parse_config_string(once));
  EXPECT_EQ(once, twice);
  EXPECT_DOUBLE_EQ(parse_config_string(once).actor.noise, 1.0 / 3.0);
}

TEST(Config, SampleScenariosParse) {
  const std::filesystem::path dir = MAPCOMM_SAMPLES_DIR;
  int seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "scenarios")) {
    if (entry.path().extension() != ".ini") continue;
    const ScenarioConfig c = load_config(entry.path());
    EXPECT_EQ(write_config_string(parse_config_string(write_config_string(c))), write_config_string(c));
    ++seen;
  }
  EXPECT_GE(seen, 4);
}

TEST(Config, FieldLevelErrors) {
  EXPECT_EQ(field_of("[actor]\nnoise = abc\n"), "actor.noise");
  EXPECT_EQ(field_of("[actor]\nstart = 3\n"), "actor.start");
  EXPECT_EQ(field_of("[sensor]\nwindow = 0x5\n"), "sensor.window");
  EXPECT_EQ(field_of("[run]\nframework = XY\n"), "run.framework");
  EXPECT_EQ(field_of("[run]\nspeed = 3\n"), "run.speed");
  EXPECT_EQ(field_of("[target]\nmoving = maybe\n"), "target.moving");
  EXPECT_EQ(field_of("[map]\nsource = file\n"), "map.path");
  EXPECT_EQ(field_of("[prior]\nmean = 1\nmean = 2\n"), "prior.mean");
  EXPECT_EQ(field_of("[actor\n"), "line 1");
  EXPECT_EQ(field_of("[actor]\njust words\n"), "line 2");
}

TEST(Config, CommentsAndWhitespace) {
  const ScenarioConfig c = parse_config_string("  [sensor]  \n horizon=7 # short\n; note\ncodebook = builtin7x7\n");
  EXPECT_EQ(c.sensor.horizon, 7);
  EXPECT_EQ(c.sensor.codebook, "builtin7x7");
}

TEST(Config, MissingMapFileNamesThePath) {
  MapSpec spec;
  spec.kind = MapSpec::Kind::kFile;
  spec.path = "no_such_map.txt";
  try {
    load_map(spec, 0, "/tmp/mapcomm_missing_dir");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/tmp/mapcomm_missing_dir/no_such_map.txt"), std::string::npos) << e.what();
  }
}

TEST(Config, SyntheticMapReseedsPerRun) {
  MapSpec spec;
  spec.rows = 16;
  spec.cols = 16;
  spec.reseed_per_run = true;
  const GridMap a = load_map(spec, 0), b = load_map(spec, 1);
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  spec.reseed_per_run = false;
  const GridMap c = load_map(spec, 0), d = load_map(spec, 1);
  EXPECT_TRUE(std::equal(c.values().begin(), c.values().end(), d.values().begin()));
}

TEST(Config, DepthFileBecomesInclination) {
  const auto path = std::filesystem::temp_directory_path() / "mapcomm_depth.txt";
  {
    std::ofstream out(path);
    out << "1 3\n0 1 3\n";
  }
  MapSpec spec;
  spec.kind = MapSpec::Kind::kFile;
  spec.path = path.string();
  spec.depth = true;
  const GridMap m = load_map(spec);
  EXPECT_DOUBLE_EQ(m[1], 1.0);
  EXPECT_DOUBLE_EQ(m[2], 0.5);
  std::filesystem::remove(path);
}

TEST(Codebooks, ResolveNamesAndFiles) {
  EXPECT_EQ(resolve_codebook("builtin16").templates.size(), 16u);
  EXPECT_EQ(resolve_codebook("builtin7x7").templates.size(), 10u);
  EXPECT_THROW(resolve_codebook("/no/such/codebook.txt"), std::runtime_error);
}

TEST(AtomicWrite, ReplacesWholeFile) {
  const auto dir = std::filesystem::temp_directory_path() / "mapcomm_atomic";
  std::filesystem::remove_all(dir);
  write_file_atomic(dir / "a.txt", "first version\n");
  write_file_atomic(dir / "a.txt", "2\n");
  std::ifstream in(dir / "a.txt");
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(s, "2\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
  std::filesystem::remove_all(dir);
}
