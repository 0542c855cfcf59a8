#include "embreg/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace embreg;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.num_examples = 60;
  s.clip_seconds = 3.0;
  s.seed = 5;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("embreg_synth_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Synth, ShapesAndSplits) {
  const SynthSpec s = small_spec();
  const Dataset d = generate(s);
  EXPECT_EQ(d.train.size(), 48u);
  EXPECT_EQ(d.val.size(), 6u);
  EXPECT_EQ(d.test.size(), 6u);
  EXPECT_EQ(d.num_classes, 8);
  EXPECT_EQ(d.input_bins, 16);
  std::set<std::string> ids;
  for (const auto* split : {&d.train, &d.val, &d.test}) {
    for (const Example& e : *split) {
      ids.insert(e.id);
      EXPECT_EQ(e.input.rows(), 30);
      EXPECT_EQ(e.input.cols(), 16);
      EXPECT_EQ(e.a.frames(), 3);
      EXPECT_EQ(e.a.dims(), 128);
      EXPECT_EQ(e.b.frames(), 30);
      EXPECT_EQ(e.b.dims(), 512);
      EXPECT_TRUE(((e.labels.array() == 0.0) || (e.labels.array() == 1.0)).all());
    }
  }
  EXPECT_EQ(ids.size(), 60u);
}

TEST(Synth, DeterministicPerSeed) {
  const SynthSpec s = small_spec();
  EXPECT_TRUE(generate(s) == generate(s));
  SynthSpec other = s;
  other.seed = 6;
  EXPECT_FALSE(generate(s) == generate(other));
}

TEST(Synth, ValuesAreF32Representable) {
  const Dataset d = generate(small_spec());
  for (const Example& e : d.train) {
    for (Index i = 0; i < e.input.size(); ++i) {
      ASSERT_EQ(e.input.data()[i], static_cast<double>(static_cast<float>(e.input.data()[i])));
    }
  }
}

TEST(Synth, LabelRateNearDensity) {
  SynthSpec s = small_spec();
  s.num_examples = 400;
  const Dataset d = generate(s);
  double ones = 0, total = 0;
  for (const Example& e : d.train) {
    ones += e.labels.sum();
    total += static_cast<double>(e.labels.size());
  }
  EXPECT_NEAR(ones / total, s.label_density, 0.03);
}

TEST(Synth, FeaturesCarryClassSignal) {
  // With no feature noise, clips with the same labels have far closer
  // clip-mean feature vectors than clips with disjoint labels.
  SynthSpec s = small_spec();
  s.noise_v = 0.0;
  s.num_examples = 200;
  const Dataset d = generate(s);
  const Example* empty = nullptr;
  const Example* labelled = nullptr;
  for (const Example& e : d.train) {
    if (e.labels.sum() == 0 && !empty) empty = &e;
    if (e.labels.sum() > 0 && !labelled) labelled = &e;
  }
  ASSERT_TRUE(empty && labelled);
  EXPECT_DOUBLE_EQ(empty->b.matrix().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(labelled->b.matrix().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Synth, RejectsBadSpecs) {
  SynthSpec s = small_spec();
  s.num_classes = 0;
  EXPECT_THROW(generate(s), ConfigError);
  s = small_spec();
  s.num_examples = 5;
  EXPECT_THROW(generate(s), ConfigError);
  s = small_spec();
  s.rho = 1.5;
  EXPECT_THROW(generate(s), ConfigError);
}

TEST(Corpus, ExportLoadRoundTripIsExact) {
  const Dataset d = generate(small_spec());
  const fs::path dir = scratch("roundtrip");
  const fs::path manifest = export_corpus(d, dir);
  EXPECT_TRUE(fs::exists(manifest));
  EXPECT_TRUE(load_corpus(dir) == d);
  EXPECT_TRUE(load_corpus(manifest) == d);
  fs::remove_all(dir);
}

TEST(Corpus, MissingFileNamesTheExample) {
  const Dataset d = generate(small_spec());
  const fs::path dir = scratch("missing");
  export_corpus(d, dir);
  const std::string victim = d.val.front().id;
  fs::remove(dir / "examples" / (victim + ".b.fstr"));
  try {
    load_corpus(dir);
    ADD_FAILURE() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find(victim), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Corpus, MalformedManifestIsLoadError) {
  const fs::path dir = scratch("malformed");
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.jsonl") << "{\"id\": \"x\"}\n";
  EXPECT_THROW(load_corpus(dir), LoadError);
  std::ofstream(dir / "manifest.jsonl") << "";
  EXPECT_THROW(load_corpus(dir), LoadError);
  EXPECT_THROW(load_corpus(dir / "nope"), LoadError);
  fs::remove_all(dir);
}
