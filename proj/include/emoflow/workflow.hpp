#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoflow/dataset.hpp"
#include "emoflow/error.hpp"
#include "emoflow/gateway.hpp"
#include "emoflow/manifest.hpp"
#include "emoflow/prediction_io.hpp"
#include "emoflow/prompt.hpp"
#include "emoflow/record.hpp"
#include "emoflow/util/parallel.hpp"

namespace emoflow {

/// Per-instance audit trail of a workflow run: every stage decision, whether
/// it cost a backend call, and any degraded-path flags.
struct WorkflowTrace {
  struct Stage {
    std::string stage;     // e.g. "binary:Love", "adjudicate", "neutral_check"
    std::string response;  // raw model output ("" when no call was made)
    std::string decision;
    bool called = false;
  };

  std::string instance_id;
  std::vector<Stage> stages;
  std::vector<std::string> flags;

  std::uint64_t backend_calls() const {
    std::uint64_t n = 0;
    for (const Stage& s : stages) n += s.called ? 1 : 0;
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json stages_json = nlohmann::json::array();
    for (const Stage& s : stages) {
      stages_json.push_back({{"stage", s.stage},
                             {"response", s.response},
                             {"decision", s.decision},
                             {"called", s.called}});
    }
    return {{"instance_id", instance_id},
            {"stages", stages_json},
            {"backend_calls", backend_calls()},
            {"flags", flags}};
  }
};

inline void write_traces(std::span<const WorkflowTrace> traces,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write trace file: " + path);
  for (const WorkflowTrace& t : traces) out << t.to_json().dump() << '\n';
}

struct AdjudicationOutcome {
  EmotionLabel label = EmotionLabel::Neutral;
  bool called = false;
  bool off_menu = false;  // answer was none of the candidates; fell back
  std::string raw;
};

/// One LLM pick among >= 2 candidate labels (the pick-one prompt). The
/// candidate list renders in the order given; callers pass canonical order.
/// An answer outside the candidate set falls back to the first candidate and
/// is flagged, never erroring the workflow.
inline AdjudicationOutcome adjudicate_among(const Instance& inst,
                                            std::span<const EmotionLabel> candidates,
                                            Gateway& gateway,
                                            const PromptCatalog& prompts) {
  if (candidates.size() < 2) {
    raise(ErrorCode::OutOfRange, "adjudication needs at least two candidates");
  }
  const PromptTemplate& t = prompts.get(template_id::kMbcawfPick);
  PromptTemplate::Bindings vars{{"tweet_text", inst.text},
                                {"tweet", inst.text},
                                {"emotions", format_label_list(candidates)}};
  AdjudicationOutcome out;
  out.raw = gateway.complete(gateway.make_request(
      {system_message(t.render_system(vars)), user_message(t.render_user(vars))}));
  out.called = true;

  const Result<EmotionLabel> parsed = parse_label(out.raw);
  if (parsed.ok() &&
      std::find(candidates.begin(), candidates.end(), parsed.value()) !=
          candidates.end()) {
    out.label = parsed.value();
  } else {
    out.label = candidates.front();
    out.off_menu = true;
  }
  return out;
}

/// Binary adjudication between two prior labels (the two-label prompt).
/// Identical candidates short-circuit with zero calls by default; the prompt
/// sanctions either answer in that case, so skipping the call changes nothing
/// and removes a nondeterminism source.
inline AdjudicationOutcome miawf_adjudicate(const Instance& inst,
                                            EmotionLabel first,
                                            EmotionLabel second,
                                            Gateway& gateway,
                                            const PromptCatalog& prompts,
                                            bool skip_identical = true) {
  AdjudicationOutcome out;
  if (first == second && skip_identical) {
    out.label = first;
    return out;
  }
  const PromptTemplate& t = prompts.get(template_id::kMiawf);
  PromptTemplate::Bindings vars{
      {"tweet_text", inst.text},
      {"tweet", inst.text},
      {"emotion1", std::string(canonical_text(first))},
      {"emotion2", std::string(canonical_text(second))}};
  out.raw = gateway.complete(gateway.make_request(
      {system_message(t.render_system(vars)), user_message(t.render_user(vars))}));
  out.called = true;

  const Result<EmotionLabel> parsed = parse_label(out.raw);
  if (parsed.ok() && (parsed.value() == first || parsed.value() == second)) {
    out.label = parsed.value();
  } else {
    out.label = first;
    out.off_menu = true;
  }
  return out;
}

struct MiawfOptions {
  std::size_t iterations = 1;
  bool skip_identical = true;
  ModelId output_model_id = "miawf";
};

struct MiawfResult {
  PredictionFile file;
  std::vector<WorkflowTrace> traces;
  RunManifest manifest;
};

/// Iterated adjudication between two source prediction files. Round 1
/// adjudicates A against B; every later round pairs the previous round's
/// output with whichever source scored the higher dev F1. The dataset
/// supplies the tweet text the adjudicator sees.
inline MiawfResult miawf_run(const Dataset& data, const PredictionFile& a,
                             const PredictionFile& b, Gateway& gateway,
                             const PromptCatalog& prompts,
                             const std::map<ModelId, double>& dev_scores = {},
                             MiawfOptions options = {}) {
  if (options.iterations < 1) {
    raise(ErrorCode::OutOfRange, "iterations must be >= 1");
  }
  if (a.size() != b.size() || a.size() != data.size()) {
    raise(ErrorCode::IdMismatch,
          "sources and dataset must cover the same instances");
  }
  std::unordered_map<std::string_view, const Prediction*> b_by_id;
  b_by_id.reserve(b.size());
  for (const Prediction& p : b.predictions) b_by_id.emplace(p.instance_id, &p);

  // Work in dataset order; per-instance labels for A, B aligned to it.
  std::vector<EmotionLabel> labels_a(data.size()), labels_b(data.size());
  std::unordered_map<std::string_view, const Prediction*> a_by_id;
  a_by_id.reserve(a.size());
  for (const Prediction& p : a.predictions) a_by_id.emplace(p.instance_id, &p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string& id = data.instances[i].id;
    const auto ia = a_by_id.find(id);
    const auto ib = b_by_id.find(id);
    if (ia == a_by_id.end() || ib == b_by_id.end()) {
      raise(ErrorCode::IdMismatch, "sources missing prediction for \"" + id + "\"");
    }
    labels_a[i] = ia->second->label;
    labels_b[i] = ib->second->label;
  }

  if (options.iterations >= 2) {
    const auto sa = dev_scores.find(a.model_id);
    const auto sb = dev_scores.find(b.model_id);
    if (sa == dev_scores.end() || sb == dev_scores.end()) {
      raise(ErrorCode::ConfigInvalid,
            "iterations >= 2 need dev scores for both sources");
    }
  }
  // Ties go to source A: deterministic, and "better" is then well defined.
  const bool b_is_stronger =
      options.iterations >= 2 &&
      dev_scores.at(b.model_id) > dev_scores.at(a.model_id);
  const std::vector<EmotionLabel>& stronger = b_is_stronger ? labels_b : labels_a;

  MiawfResult result;
  result.traces.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    result.traces[i].instance_id = data.instances[i].id;
  }

  RunManifest manifest;
  manifest.kind = "workflow-miawf";
  manifest.backend_model = gateway.config().model;
  manifest.temperature = gateway.config().temperature;
  manifest.max_tokens = gateway.config().max_tokens;
  manifest.prompt_checksum = prompts.checksum();
  manifest.started = utc_timestamp();
  manifest.assign_run_id();
  manifest.extra["iterations"] = std::to_string(options.iterations);
  manifest.extra["source_a"] = a.model_id;
  manifest.extra["source_b"] = b.model_id;
  const GatewayStats before = gateway.stats();

  std::atomic<std::uint64_t> flagged{0};
  std::vector<EmotionLabel> current(data.size());

  for (std::size_t round = 1; round <= options.iterations; ++round) {
    const std::vector<EmotionLabel>& left = round == 1 ? labels_a : current;
    const std::vector<EmotionLabel>& right = round == 1 ? labels_b : stronger;

    std::vector<EmotionLabel> next(data.size());
    util::parallel_for(data.size(), gateway.max_in_flight(), [&](std::size_t i) {
      WorkflowTrace::Stage stage;
      stage.stage = "adjudicate:round" + std::to_string(round);
      try {
        const AdjudicationOutcome out =
            miawf_adjudicate(data.instances[i], left[i], right[i], gateway,
                             prompts, options.skip_identical);
        next[i] = out.label;
        stage.response = out.raw;
        stage.called = out.called;
        stage.decision = canonical_text(out.label);
        if (out.off_menu) {
          flagged.fetch_add(1);
          result.traces[i].flags.push_back("off_menu:round" +
                                           std::to_string(round));
        }
      } catch (const std::exception& e) {
        // A failed adjudication must not destroy a valid prior answer.
        next[i] = left[i];
        stage.response = std::string("[error] ") + e.what();
        stage.called = true;
        stage.decision = canonical_text(left[i]);
        flagged.fetch_add(1);
        result.traces[i].flags.push_back("error:round" + std::to_string(round));
      }
      result.traces[i].stages.push_back(std::move(stage));
    });
    current = std::move(next);
  }

  result.file.model_id = options.output_model_id;
  result.file.predictions.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Prediction p;
    p.instance_id = data.instances[i].id;
    p.label = current[i];
    p.model_id = options.output_model_id;
    result.file.predictions.push_back(std::move(p));
  }

  manifest.finished = utc_timestamp();
  manifest.counts.instances = data.size();
  const GatewayStats after = gateway.stats();
  manifest.counts.backend_calls = after.backend_calls - before.backend_calls;
  manifest.counts.cache_hits = after.cache_hits - before.cache_hits;
  manifest.counts.flagged = flagged.load();
  result.manifest = std::move(manifest);
  return result;
}

struct MbcawfResult {
  Prediction prediction;
  WorkflowTrace trace;
};

/// Five per-emotion yes/no classifiers, then: a single positive wins
/// outright; multiple positives go to adjudication; zero positives trigger
/// the Neutral double-check, whose non-Neutral answer is final. Unparseable
/// binary answers count as "no"; an unparseable Neutral-check answer falls
/// back to Neutral with the fallback flag.
inline MbcawfResult mbcawf_classify(const Instance& inst, Gateway& gateway,
                                    const PromptCatalog& prompts,
                                    const ModelId& model_id = "mbcawf") {
  MbcawfResult result;
  result.trace.instance_id = inst.id;

  std::vector<EmotionLabel> positives;
  const PromptTemplate& binary = prompts.get(template_id::kMbcawfBinary);
  for (EmotionLabel emotion : kNonNeutralLabels) {
    PromptTemplate::Bindings vars{
        {"tweet_text", inst.text},
        {"tweet", inst.text},
        {"emotion", std::string(canonical_text(emotion))}};
    const std::string raw = gateway.complete(gateway.make_request(
        {system_message(binary.render_system(vars)),
         user_message(binary.render_user(vars))}));

    const Result<bool> answer = parse_yes_no(raw);
    bool positive = false;
    if (answer.ok()) {
      positive = answer.value();
    } else {
      result.trace.flags.push_back(std::string("unparseable_binary:") +
                                   std::string(canonical_text(emotion)));
    }
    if (positive) positives.push_back(emotion);
    result.trace.stages.push_back({"binary:" + std::string(canonical_text(emotion)),
                                   raw, positive ? "yes" : "no", true});
  }

  Prediction& p = result.prediction;
  p.instance_id = inst.id;
  p.model_id = model_id;

  if (positives.size() == 1) {
    p.label = positives.front();
    p.raw_output = "single positive";
    return result;
  }

  if (positives.size() >= 2) {
    const AdjudicationOutcome out =
        adjudicate_among(inst, positives, gateway, prompts);
    p.label = out.label;
    p.raw_output = out.raw;
    result.trace.stages.push_back(
        {"adjudicate", out.raw, std::string(canonical_text(out.label)), true});
    if (out.off_menu) result.trace.flags.push_back("off_menu:adjudicate");
    return result;
  }

  // All negative: tell the model others call it Neutral and let it confirm
  // or override.
  const PromptTemplate& check = prompts.get(template_id::kMbcawfNeutralCheck);
  PromptTemplate::Bindings vars{
      {"tweet_text", inst.text},
      {"tweet", inst.text},
      {"emotions", format_label_list(kNonNeutralLabels)}};
  const std::string raw = gateway.complete(gateway.make_request(
      {system_message(check.render_system(vars)),
       user_message(check.render_user(vars))}));

  const Result<EmotionLabel> parsed = parse_label(raw);
  if (parsed.ok()) {
    p.label = parsed.value();
    p.raw_output = raw;
  } else {
    p = make_fallback_prediction(inst.id, model_id, raw);
    result.trace.flags.push_back("unparseable_neutral_check");
  }
  result.trace.stages.push_back(
      {"neutral_check", raw, std::string(canonical_text(p.label)), true});
  return result;
}

struct MbcawfRunResult {
  PredictionFile file;
  std::vector<WorkflowTrace> traces;
  RunManifest manifest;
};

/// Dataset-level MBCAWF: instances run concurrently under the gateway bound,
/// each instance's stages run in order, outputs come back in dataset order.
inline MbcawfRunResult mbcawf_run(const Dataset& data, Gateway& gateway,
                                  const PromptCatalog& prompts,
                                  const ModelId& model_id = "mbcawf") {
  RunManifest manifest;
  manifest.kind = "workflow-mbcawf";
  manifest.backend_model = gateway.config().model;
  manifest.temperature = gateway.config().temperature;
  manifest.max_tokens = gateway.config().max_tokens;
  manifest.prompt_checksum = prompts.checksum();
  manifest.started = utc_timestamp();
  manifest.assign_run_id();
  const GatewayStats before = gateway.stats();

  MbcawfRunResult result;
  result.file.model_id = model_id;
  result.file.predictions.resize(data.size());
  result.traces.resize(data.size());

  util::parallel_for(data.size(), gateway.max_in_flight(), [&](std::size_t i) {
    const Instance& inst = data.instances[i];
    try {
      MbcawfResult one = mbcawf_classify(inst, gateway, prompts, model_id);
      result.file.predictions[i] = std::move(one.prediction);
      result.traces[i] = std::move(one.trace);
    } catch (const std::exception& e) {
      result.file.predictions[i] = make_fallback_prediction(
          inst.id, model_id, std::string("[error] ") + e.what());
      result.traces[i].instance_id = inst.id;
      result.traces[i].flags.push_back("error");
    }
  });

  manifest.finished = utc_timestamp();
  manifest.counts.instances = data.size();
  const GatewayStats after = gateway.stats();
  manifest.counts.backend_calls = after.backend_calls - before.backend_calls;
  manifest.counts.cache_hits = after.cache_hits - before.cache_hits;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (result.file.predictions[i].fallback_applied) ++manifest.counts.fallbacks;
    if (!result.traces[i].flags.empty()) ++manifest.counts.flagged;
  }
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace emoflow
