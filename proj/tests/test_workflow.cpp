#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "emoflow/backend.hpp"
#include "emoflow/dataset.hpp"
#include "emoflow/gateway.hpp"
#include "emoflow/workflow.hpp"
#include "test_util.hpp"

using namespace emoflow;

namespace {

BackendConfig mock_config(std::size_t in_flight = 4) {
  BackendConfig cfg;
  cfg.dialect = Dialect::Mock;
  cfg.model = "mock-1";
  cfg.max_in_flight = in_flight;
  cfg.requests_per_second = 10000.0;
  return cfg;
}

const Instance kTweet{"t1", "some tweet text", {}, {}};

Dataset dataset_of(const std::vector<std::string>& ids) {
  Dataset d;
  for (const auto& id : ids) {
    d.instances.push_back({id, "text of " + id + ";", {}, {}});
  }
  return d;
}

PredictionFile file_of(const std::string& model,
                       const std::vector<std::pair<std::string, EmotionLabel>>& rows) {
  PredictionFile pf;
  pf.model_id = model;
  for (const auto& [id, label] : rows) {
    Prediction p;
    p.instance_id = id;
    p.label = label;
    p.model_id = model;
    pf.predictions.push_back(std::move(p));
  }
  return pf;
}

}  // namespace

TEST_CASE("miawf adjudication short-circuits identical candidates") {
  auto mock = std::make_shared<MockBackend>("never used");
  Gateway gw(mock_config(), mock);
  const AdjudicationOutcome out = miawf_adjudicate(
      kTweet, EmotionLabel::Anger, EmotionLabel::Anger, gw, PromptCatalog::builtin());
  CHECK(out.label == EmotionLabel::Anger);
  CHECK_FALSE(out.called);
  CHECK(mock->call_count() == 0);
}

TEST_CASE("miawf adjudication follows the scripted answer") {
  auto mock = std::make_shared<MockBackend>("Neutral");
  Gateway gw(mock_config(), mock);
  const AdjudicationOutcome out = miawf_adjudicate(
      kTweet, EmotionLabel::Joy, EmotionLabel::Neutral, gw, PromptCatalog::builtin());
  CHECK(out.label == EmotionLabel::Neutral);
  CHECK(out.called);
  CHECK_FALSE(out.off_menu);
}

TEST_CASE("miawf off-menu answers fall back to the first candidate") {
  auto mock = std::make_shared<MockBackend>("Fear");
  Gateway gw(mock_config(), mock);
  const AdjudicationOutcome out = miawf_adjudicate(
      kTweet, EmotionLabel::Joy, EmotionLabel::Neutral, gw, PromptCatalog::builtin());
  CHECK(out.label == EmotionLabel::Joy);
  CHECK(out.off_menu);
}

TEST_CASE("miawf_run over identical inputs is the identity with zero calls") {
  const Dataset data = dataset_of({"a", "b", "c"});
  const PredictionFile pf = file_of("m1", {{"a", EmotionLabel::Joy},
                                           {"b", EmotionLabel::Fear},
                                           {"c", EmotionLabel::Neutral}});
  auto mock = std::make_shared<MockBackend>("never");
  Gateway gw(mock_config(), mock);

  for (std::size_t iterations : {std::size_t{1}, std::size_t{3}}) {
    MiawfOptions opt;
    opt.iterations = iterations;
    const MiawfResult run =
        miawf_run(data, pf, pf, gw, PromptCatalog::builtin(),
                  {{"m1", 0.5}}, opt);
    REQUIRE(run.file.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(run.file.predictions[i].label == pf.predictions[i].label);
    }
    CHECK(mock->call_count() == 0);
    CHECK(run.manifest.counts.backend_calls == 0);
  }
}

TEST_CASE("miawf_run with an emotion2-leaning adjudicator adopts B where they differ") {
  const Dataset data = dataset_of({"a", "b", "c"});
  const PredictionFile pa = file_of("A", {{"a", EmotionLabel::Joy},
                                          {"b", EmotionLabel::Fear},
                                          {"c", EmotionLabel::Neutral}});
  const PredictionFile pb = file_of("B", {{"a", EmotionLabel::Joy},
                                          {"b", EmotionLabel::Sadness},
                                          {"c", EmotionLabel::Anger}});
  // The adjudicator always answers with whatever label is quoted second.
  auto mock = std::make_shared<MockBackend>();
  for (EmotionLabel l : kAllLabels) {
    mock->respond_when_contains(
        "or \"" + std::string(canonical_text(l)) + "\".",
        std::string(canonical_text(l)));
  }
  Gateway gw(mock_config(), mock);

  const MiawfResult run =
      miawf_run(data, pa, pb, gw, PromptCatalog::builtin());
  CHECK(run.file.predictions[0].label == EmotionLabel::Joy);      // agreed
  CHECK(run.file.predictions[1].label == EmotionLabel::Sadness);  // B
  CHECK(run.file.predictions[2].label == EmotionLabel::Anger);    // B
  CHECK(mock->call_count() == 2);  // only the two disagreements
}

TEST_CASE("miawf_run round 2 pairs the previous output with the stronger source") {
  const Dataset data = dataset_of({"x"});
  const PredictionFile pa = file_of("A", {{"x", EmotionLabel::Joy}});
  const PredictionFile pb = file_of("B", {{"x", EmotionLabel::Fear}});

  // Round 1 (Joy vs Fear): the first call answers Joy. Round 2 pairs the
  // round-1 output (Joy) with the stronger source. If B (dev 0.57 > 0.55) is
  // correctly chosen, the pair is (Joy vs Fear) again; the second call
  // answers Fear. A wrong pairing with A would present (Joy vs Joy),
  // short-circuit, and emit Joy with only one call.
  auto counting = std::make_shared<MockBackend>();
  {
    MockBackend::Rule once;
    auto counter = std::make_shared<std::atomic<int>>(0);
    once.matches = [counter](const ChatRequest&) {
      return counter->fetch_add(1) == 0;
    };
    once.response = "Joy";
    counting->add_rule(once);
    counting->set_default_response("Fear");
  }
  Gateway gw(mock_config(1), counting);

  MiawfOptions opt;
  opt.iterations = 2;
  const MiawfResult run = miawf_run(data, pa, pb, gw, PromptCatalog::builtin(),
                                    {{"A", 0.55}, {"B", 0.57}}, opt);
  CHECK(counting->call_count() == 2);
  CHECK(run.file.predictions[0].label == EmotionLabel::Fear);
}

TEST_CASE("miawf_run validates ids and dev scores") {
  const Dataset data = dataset_of({"a", "b"});
  const PredictionFile pa = file_of("A", {{"a", EmotionLabel::Joy},
                                          {"b", EmotionLabel::Fear}});
  const PredictionFile mismatched = file_of("B", {{"a", EmotionLabel::Joy},
                                                  {"zz", EmotionLabel::Fear}});
  auto mock = std::make_shared<MockBackend>("Joy");
  Gateway gw(mock_config(), mock);

  CHECK_THROWS_AS(miawf_run(data, pa, mismatched, gw, PromptCatalog::builtin()),
                  EmoflowError);

  const PredictionFile pb = file_of("B", {{"a", EmotionLabel::Joy},
                                          {"b", EmotionLabel::Sadness}});
  MiawfOptions opt;
  opt.iterations = 2;
  CHECK_THROWS_AS(
      miawf_run(data, pa, pb, gw, PromptCatalog::builtin(), {}, opt),
      EmoflowError);
}

TEST_CASE("adjudicate_among follows the script and flags off-menu answers") {
  auto mock = std::make_shared<MockBackend>("Joy");
  Gateway gw(mock_config(), mock);
  const std::vector<EmotionLabel> two = {EmotionLabel::Joy, EmotionLabel::Anger};
  CHECK(adjudicate_among(kTweet, two, gw, PromptCatalog::builtin()).label ==
        EmotionLabel::Joy);

  auto off = std::make_shared<MockBackend>("Neutral");
  Gateway gw_off(mock_config(), off);
  const std::vector<EmotionLabel> three = {EmotionLabel::Fear,
                                           EmotionLabel::Sadness,
                                           EmotionLabel::Anger};
  const AdjudicationOutcome out =
      adjudicate_among(kTweet, three, gw_off, PromptCatalog::builtin());
  CHECK(out.label == EmotionLabel::Fear);
  CHECK(out.off_menu);

  CHECK_THROWS_AS(adjudicate_among(kTweet, {&two[0], 1}, gw, PromptCatalog::builtin()),
                  EmoflowError);
}

TEST_CASE("mbcawf: exactly one positive wins with five calls") {
  auto mock = std::make_shared<MockBackend>("no");
  mock->respond_when_contains("detecting 'Joy'", "yes");
  Gateway gw(mock_config(), mock);

  const MbcawfResult out = mbcawf_classify(kTweet, gw, PromptCatalog::builtin());
  CHECK(out.prediction.label == EmotionLabel::Joy);
  CHECK(out.trace.backend_calls() == 5);
  CHECK(mock->call_count() == 5);
  for (const auto& stage : out.trace.stages) {
    CHECK(stage.stage.rfind("binary:", 0) == 0);  // no adjudication stage
  }
}

TEST_CASE("mbcawf: multiple positives go to adjudication, six calls") {
  auto mock = std::make_shared<MockBackend>("no");
  mock->respond_when_contains("detecting 'Joy'", "yes");
  mock->respond_when_contains("detecting 'Anger'", "yes");
  mock->respond_when_contains("choosing emotions", "Anger");
  Gateway gw(mock_config(), mock);

  const MbcawfResult out = mbcawf_classify(kTweet, gw, PromptCatalog::builtin());
  CHECK(out.prediction.label == EmotionLabel::Anger);
  CHECK(out.trace.backend_calls() == 6);
  CHECK(out.trace.stages.back().stage == "adjudicate");
}

TEST_CASE("mbcawf: all negative with confirmed Neutral, six calls") {
  auto mock = std::make_shared<MockBackend>("no");
  mock->respond_when_contains("others think is 'Neutral'", "Neutral");
  Gateway gw(mock_config(), mock);

  const MbcawfResult out = mbcawf_classify(kTweet, gw, PromptCatalog::builtin());
  CHECK(out.prediction.label == EmotionLabel::Neutral);
  CHECK_FALSE(out.prediction.fallback_applied);
  CHECK(out.trace.backend_calls() == 6);
  CHECK(out.trace.stages.back().stage == "neutral_check");
}

TEST_CASE("mbcawf: the Neutral check may override, six calls") {
  auto mock = std::make_shared<MockBackend>("no");
  mock->respond_when_contains("others think is 'Neutral'", "Anger");
  Gateway gw(mock_config(), mock);

  const MbcawfResult out = mbcawf_classify(kTweet, gw, PromptCatalog::builtin());
  CHECK(out.prediction.label == EmotionLabel::Anger);
  CHECK(out.trace.backend_calls() == 6);
}

TEST_CASE("mbcawf: unparseable binaries count as no") {
  auto mock = std::make_shared<MockBackend>("maybe?");
  mock->respond_when_contains("others think is 'Neutral'", "Neutral");
  Gateway gw(mock_config(), mock);

  const MbcawfResult out = mbcawf_classify(kTweet, gw, PromptCatalog::builtin());
  CHECK(out.prediction.label == EmotionLabel::Neutral);
  CHECK(out.trace.flags.size() == 5);  // all five binaries flagged
}

TEST_CASE("mbcawf: unparseable Neutral check falls back to Neutral with flag") {
  auto mock = std::make_shared<MockBackend>("no");
  mock->respond_when_contains("others think is 'Neutral'", "not a label");
  Gateway gw(mock_config(), mock);

  const MbcawfResult out = mbcawf_classify(kTweet, gw, PromptCatalog::builtin());
  CHECK(out.prediction.label == EmotionLabel::Neutral);
  CHECK(out.prediction.fallback_applied);
  CHECK(out.trace.backend_calls() == 6);
}

TEST_CASE("mbcawf trace call counts equal recorded stage calls") {
  auto mock = std::make_shared<MockBackend>("no");
  mock->respond_when_contains("detecting 'Fear'", "yes");
  mock->respond_when_contains("detecting 'Sadness'", "yes");
  mock->respond_when_contains("choosing emotions", "Sadness");
  Gateway gw(mock_config(), mock);

  const MbcawfResult out = mbcawf_classify(kTweet, gw, PromptCatalog::builtin());
  std::uint64_t called = 0;
  for (const auto& s : out.trace.stages) called += s.called ? 1 : 0;
  CHECK(out.trace.backend_calls() == called);
  CHECK(called == mock->call_count());
}

TEST_CASE("mbcawf_run processes a dataset in order with traces") {
  const Dataset data = dataset_of({"a", "b", "c", "d"});
  auto mock = std::make_shared<MockBackend>("no");
  mock->respond_when_contains("others think is 'Neutral'", "Neutral");
  Gateway gw(mock_config(2), mock);

  const MbcawfRunResult run = mbcawf_run(data, gw, PromptCatalog::builtin());
  REQUIRE(run.file.size() == 4);
  REQUIRE(run.traces.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(run.file.predictions[i].instance_id == data.instances[i].id);
    CHECK(run.traces[i].instance_id == data.instances[i].id);
    CHECK(run.traces[i].backend_calls() == 6);
  }
  CHECK(run.manifest.counts.backend_calls == 24);

  testutil::TempDir dir;
  write_traces(run.traces, dir.file("trace.jsonl"));
  const std::string jsonl = testutil::read_file(dir.file("trace.jsonl"));
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 4);
}
