#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>
#include <string>

#include "emoflow/dataset.hpp"
#include "emoflow/manifest.hpp"
#include "emoflow/prediction_io.hpp"
#include "test_util.hpp"

using namespace emoflow;
using testutil::TempDir;

namespace {

const char* kSmallDataset =
    "ID\tTexts\tLabels\n"
    "t1\tfirst tweet\tJoy\n"
    "t2\tsecond tweet\tAnger\n"
    "t3\tthird tweet\tNeutral\n";

}  // namespace

TEST_CASE("load_dataset ingests a labeled TSV") {
  TempDir dir;
  testutil::write_file(dir.file("d.tsv"), kSmallDataset);
  const Dataset ds = load_dataset(dir.file("d.tsv"));
  REQUIRE(ds.size() == 3);
  CHECK(ds.instances[0].id == "t1");
  CHECK(ds.instances[0].text == "first tweet");
  CHECK(ds.instances[0].gold == EmotionLabel::Joy);
  CHECK(ds.instances[2].gold == EmotionLabel::Neutral);
}

TEST_CASE("load_dataset without a mapped label column yields unlabeled instances") {
  TempDir dir;
  testutil::write_file(dir.file("d.tsv"), kSmallDataset);
  const Dataset ds = load_dataset(dir.file("d.tsv"), ColumnMap::unlabeled());
  REQUIRE(ds.size() == 3);
  for (const auto& inst : ds.instances) CHECK_FALSE(inst.gold.has_value());
}

TEST_CASE("load_dataset rejects duplicate ids") {
  TempDir dir;
  testutil::write_file(dir.file("d.tsv"),
                       "ID\tTexts\tLabels\nt1\ta\tJoy\nt1\tb\tFear\n");
  CHECK_THROWS_MATCHES(load_dataset(dir.file("d.tsv")), EmoflowError,
                       Catch::Matchers::Predicate<EmoflowError>([](const auto& e) {
                         return e.code() == ErrorCode::DuplicateId;
                       }));
}

TEST_CASE("load_dataset reports missing columns") {
  TempDir dir;
  testutil::write_file(dir.file("d.tsv"), "ID\tBody\nt1\thello\n");
  try {
    load_dataset(dir.file("d.tsv"));
    FAIL("expected MissingColumn");
  } catch (const EmoflowError& e) {
    CHECK(e.code() == ErrorCode::MissingColumn);
  }
}

TEST_CASE("load_dataset reports bad labels with the row number") {
  TempDir dir;
  testutil::write_file(dir.file("d.tsv"),
                       "ID\tTexts\tLabels\nt1\ta\tJoy\nt2\tb\thappiness\n");
  try {
    load_dataset(dir.file("d.tsv"));
    FAIL("expected BadRow");
  } catch (const EmoflowError& e) {
    CHECK(e.code() == ErrorCode::BadRow);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
}

TEST_CASE("load_dataset rejects empty text") {
  TempDir dir;
  testutil::write_file(dir.file("d.tsv"), "ID\tTexts\tLabels\nt1\t\tJoy\n");
  CHECK_THROWS_AS(load_dataset(dir.file("d.tsv")), EmoflowError);
}

TEST_CASE("split_dataset produces the configured sizes") {
  Dataset ds;
  for (int i = 0; i < 5000; ++i) {
    ds.instances.push_back({"id" + std::to_string(i), "text", {}, {}});
  }
  const auto [train, val] = split_dataset(ds, 4000, 7);
  CHECK(train.size() == 4000);
  CHECK(val.size() == 1000);
}

TEST_CASE("split_dataset partitions without loss or duplication") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 200;
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
      ds.instances.push_back({"id" + std::to_string(i), "text", {}, {}});
    }
    const std::size_t n_train = 1 + rng() % (n - 1);
    const auto [train, val] = split_dataset(ds, n_train, rng());
    REQUIRE(train.size() + val.size() == n);
    std::set<std::string> seen;
    for (const auto& inst : train.instances) seen.insert(inst.id);
    for (const auto& inst : val.instances) seen.insert(inst.id);
    CHECK(seen.size() == n);
  }
}

TEST_CASE("split_dataset is deterministic per seed") {
  Dataset ds;
  for (int i = 0; i < 100; ++i) {
    ds.instances.push_back({"id" + std::to_string(i), "text", {}, {}});
  }
  const auto [a1, b1] = split_dataset(ds, 60, 42);
  const auto [a2, b2] = split_dataset(ds, 60, 42);
  REQUIRE(a1.size() == a2.size());
  for (std::size_t i = 0; i < a1.size(); ++i) {
    CHECK(a1.instances[i].id == a2.instances[i].id);
  }
}

TEST_CASE("split_dataset rejects empty validation splits") {
  Dataset ds;
  for (int i = 0; i < 10; ++i) {
    ds.instances.push_back({"id" + std::to_string(i), "text", {}, {}});
  }
  CHECK_THROWS_AS(split_dataset(ds, 10, 1), EmoflowError);
  CHECK_THROWS_AS(split_dataset(ds, 0, 1), EmoflowError);
}

TEST_CASE("prediction files round-trip byte-identically") {
  TempDir dir;
  PredictionFile pf;
  pf.model_id = "m1";
  Prediction p1{"t1", EmotionLabel::Joy, "has\ttab and\nnewline", "m1", "raw", false};
  Prediction p2{"t2", EmotionLabel::Neutral, std::nullopt, "m1", "", true};
  pf.predictions = {p1, p2};

  write_predictions(pf, dir.file("p.tsv"));
  const PredictionFile back = read_predictions(dir.file("p.tsv"));
  CHECK(back.model_id == "p");  // file stem
  REQUIRE(back.size() == 2);
  CHECK(back.predictions[0].label == EmotionLabel::Joy);
  CHECK(back.predictions[0].explanation == "has\ttab and\nnewline");
  CHECK(back.predictions[1].fallback_applied);

  write_predictions(back, dir.file("p2.tsv"));
  CHECK(testutil::read_file(dir.file("p.tsv")) ==
        testutil::read_file(dir.file("p2.tsv")));
}

TEST_CASE("escaped explanations survive round-trips") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "ab\t\n\r\\cd ||";
  TempDir dir;
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    const std::size_t len = rng() % 30;
    for (std::size_t i = 0; i < len; ++i) text += alphabet[rng() % alphabet.size()];
    PredictionFile pf;
    pf.model_id = "m";
    Prediction p{"t1", EmotionLabel::Fear, text.empty() ? std::optional<std::string>{} : text,
                 "m", "", false};
    pf.predictions = {p};
    write_predictions(pf, dir.file("r.tsv"));
    const PredictionFile back = read_predictions(dir.file("r.tsv"));
    CHECK(back.predictions[0].explanation.value_or("") == text);
  }
}

TEST_CASE("external files with only ID and Label columns are accepted") {
  TempDir dir;
  testutil::write_file(dir.file("ext.tsv"), "ID\tLabel\nt1\tJoy\nt2\tFear\n");
  const PredictionFile pf = read_predictions(dir.file("ext.tsv"));
  REQUIRE(pf.size() == 2);
  CHECK(pf.model_id == "ext");
  CHECK_FALSE(pf.predictions[0].explanation.has_value());
  CHECK(pf.predictions[1].label == EmotionLabel::Fear);
}

TEST_CASE("prediction rows with unknown labels fail with the row number") {
  TempDir dir;
  testutil::write_file(dir.file("bad.tsv"), "ID\tLabel\nt1\tJoy\nt2\texcited\n");
  try {
    read_predictions(dir.file("bad.tsv"));
    FAIL("expected BadRow");
  } catch (const EmoflowError& e) {
    CHECK(e.code() == ErrorCode::BadRow);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
}

TEST_CASE("manifest JSON round-trips") {
  TempDir dir;
  RunManifest m;
  m.kind = "classify-zeroshot";
  m.backend_model = "mock-1";
  m.seed = 99;
  m.started = utc_timestamp();
  m.finished = m.started;
  m.counts.instances = 10;
  m.counts.backend_calls = 12;
  m.counts.cache_hits = 2;
  m.counts.fallbacks = 1;
  m.extra["output"] = "p.tsv";
  m.assign_run_id();

  write_manifest(m, dir.file("m.json"));
  const RunManifest back = read_manifest(dir.file("m.json"));
  CHECK(back.run_id == m.run_id);
  CHECK(back.counts.instances == 10);
  CHECK(back.counts.fallbacks == 1);
  CHECK(back.extra.at("output") == "p.tsv");
  CHECK(back.counts.fallbacks <= back.counts.instances);
}
