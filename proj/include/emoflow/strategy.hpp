#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emoflow/dataset.hpp"
#include "emoflow/embedding.hpp"
#include "emoflow/error.hpp"
#include "emoflow/gateway.hpp"
#include "emoflow/knn.hpp"
#include "emoflow/manifest.hpp"
#include "emoflow/prediction_io.hpp"
#include "emoflow/prompt.hpp"
#include "emoflow/record.hpp"
#include "emoflow/util/parallel.hpp"
#include "emoflow/util/rng.hpp"

namespace emoflow {

enum class StrategyKind { ZeroShot, Zse, Zsec, FewShot, FineTuned };

inline const char* strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::ZeroShot: return "zeroshot";
    case StrategyKind::Zse: return "zse";
    case StrategyKind::Zsec: return "zsec";
    case StrategyKind::FewShot: return "fewshot";
    case StrategyKind::FineTuned: return "finetuned";
  }
  return "unknown";
}

inline StrategyKind parse_strategy(const std::string& name) {
  if (name == "zeroshot") return StrategyKind::ZeroShot;
  if (name == "zse") return StrategyKind::Zse;
  if (name == "zsec") return StrategyKind::Zsec;
  if (name == "fewshot") return StrategyKind::FewShot;
  if (name == "finetuned") return StrategyKind::FineTuned;
  raise(ErrorCode::ConfigInvalid, "unknown strategy: " + name);
}

/// Which stage-1 labels the ZSEC correction stage rechecks. NeutralOnly is
/// the shipped configuration; AllLabels rechecks everything; None turns the
/// correction stage off entirely (ZSEC degenerates to ZSE).
enum class CorrectionScope { NeutralOnly, AllLabels, None };

inline CorrectionScope parse_correction_scope(const std::string& name) {
  if (name == "neutral") return CorrectionScope::NeutralOnly;
  if (name == "all") return CorrectionScope::AllLabels;
  if (name == "none") return CorrectionScope::None;
  raise(ErrorCode::ConfigInvalid, "unknown correction scope: " + name);
}

enum class ExampleSelector { Random, Knn };

struct StrategyConfig {
  StrategyKind kind = StrategyKind::ZeroShot;
  ModelId model_id;  // defaults to the strategy name when empty
  CorrectionScope scope = CorrectionScope::NeutralOnly;
  ExampleSelector selector = ExampleSelector::Random;
  std::size_t example_count = 6;
  std::uint64_t seed = 0;
  std::optional<std::size_t> embed_dim;  // knn selector truncation

  ModelId effective_model_id() const {
    return model_id.empty() ? ModelId(strategy_name(kind)) : model_id;
  }
};

namespace detail {

inline PromptTemplate::Bindings tweet_bindings(const Instance& inst) {
  // Both placeholder spellings bind to the instance text; each template uses
  // whichever one its verbatim wording carries.
  return {{"tweet_text", inst.text}, {"tweet", inst.text}};
}

inline Prediction prediction_from_label(const Instance& inst,
                                        const ModelId& model_id,
                                        EmotionLabel label, std::string raw) {
  Prediction p;
  p.instance_id = inst.id;
  p.label = label;
  p.model_id = model_id;
  p.raw_output = std::move(raw);
  return p;
}

}  // namespace detail

/// Single completion, bare-label output contract.
inline Prediction zero_shot_classify(const Instance& inst, Gateway& gateway,
                                     const PromptCatalog& prompts,
                                     const ModelId& model_id = "zeroshot") {
  const PromptTemplate& t = prompts.get(template_id::kZeroShot);
  const auto vars = detail::tweet_bindings(inst);
  const std::string raw = gateway.complete(gateway.make_request(
      {system_message(t.render_system(vars)), user_message(t.render_user(vars))}));
  const Result<EmotionLabel> label = parse_label(raw);
  if (!label.ok()) return make_fallback_prediction(inst.id, model_id, raw);
  return detail::prediction_from_label(inst, model_id, label.value(), raw);
}

/// Single completion, "explanation || label" output contract.
inline Prediction zse_classify(const Instance& inst, Gateway& gateway,
                               const PromptCatalog& prompts,
                               const ModelId& model_id = "zse") {
  const PromptTemplate& t = prompts.get(template_id::kZse);
  const auto vars = detail::tweet_bindings(inst);
  const std::string raw = gateway.complete(gateway.make_request(
      {system_message(t.render_system(vars)), user_message(t.render_user(vars))}));
  const Result<ExplainedOutput> parsed = parse_explained_output(raw);
  if (!parsed.ok()) return make_fallback_prediction(inst.id, model_id, raw);
  Prediction p = detail::prediction_from_label(inst, model_id,
                                               parsed.value().label, raw);
  p.explanation = parsed.value().explanation;
  return p;
}

struct ZsecOutcome {
  Prediction prediction;
  bool stage2_kept_stage1 = false;  // stage-2 answer unparseable, stage-1 kept
};

/// ZSE then an optional second-model recheck of the stage-1 label. The
/// stage-2 label is final when it parses; when it does not, the stage-1
/// answer survives (the correction stage is advisory) and the event is
/// flagged for the manifest.
inline ZsecOutcome zsec_classify(const Instance& inst, Gateway& first,
                                 Gateway& second, CorrectionScope scope,
                                 const PromptCatalog& prompts,
                                 const ModelId& model_id = "zsec") {
  Prediction stage1 = zse_classify(inst, first, prompts, model_id);
  const bool recheck =
      scope == CorrectionScope::AllLabels ||
      (scope == CorrectionScope::NeutralOnly && stage1.label == EmotionLabel::Neutral);
  if (!recheck) return {std::move(stage1), false};

  const PromptTemplate& t = prompts.get(template_id::kZsecCorrection);
  auto vars = detail::tweet_bindings(inst);
  vars.emplace("emotion", std::string(canonical_text(stage1.label)));
  const std::string raw2 = second.complete(second.make_request(
      {system_message(t.render_system(vars)), user_message(t.render_user(vars))}));

  const Result<ExplainedOutput> parsed = parse_explained_output(raw2);
  if (!parsed.ok()) {
    stage1.raw_output += "\n[stage-2 unparsed] " + raw2;
    return {std::move(stage1), true};
  }
  Prediction p = detail::prediction_from_label(inst, model_id,
                                               parsed.value().label, raw2);
  p.explanation = parsed.value().explanation;
  p.raw_output += "\n[stage-1] " + stage1.raw_output;
  return {std::move(p), false};
}

struct FewShotExample {
  std::string text;
  EmotionLabel label = EmotionLabel::Neutral;
};

/// One completion regardless of the example count: the examples ride along
/// as user/assistant turns ahead of the query.
inline Prediction few_shot_classify(const Instance& inst, Gateway& gateway,
                                    const PromptCatalog& prompts,
                                    std::span<const FewShotExample> examples,
                                    const ModelId& model_id = "fewshot") {
  const PromptTemplate& t = prompts.get(template_id::kZeroShot);
  std::vector<ChatMessage> messages;
  messages.reserve(2 * examples.size() + 2);
  messages.push_back(system_message(t.render_system({})));
  for (const FewShotExample& ex : examples) {
    PromptTemplate::Bindings vars{{"tweet_text", ex.text}, {"tweet", ex.text}};
    messages.push_back(user_message(t.render_user(vars)));
    messages.push_back(assistant_message(t.render_assistant(
        {{"label", std::string(canonical_text(ex.label))}})));
  }
  messages.push_back(user_message(t.render_user(detail::tweet_bindings(inst))));

  const std::string raw = gateway.complete(gateway.make_request(std::move(messages)));
  const Result<EmotionLabel> label = parse_label(raw);
  if (!label.ok()) return make_fallback_prediction(inst.id, model_id, raw);
  return detail::prediction_from_label(inst, model_id, label.value(), raw);
}

/// Inference against a fine-tuned model: its training-time system prompt,
/// the bare tweet as the user turn, strict one-word output.
inline Prediction finetuned_classify(const Instance& inst, Gateway& gateway,
                                     const PromptCatalog& prompts,
                                     const ModelId& model_id = "finetuned") {
  const PromptTemplate& t = prompts.get(template_id::kFinetune);
  const auto vars = detail::tweet_bindings(inst);
  const std::string raw = gateway.complete(gateway.make_request(
      {system_message(t.render_system(vars)), user_message(t.render_user(vars))}));
  const Result<EmotionLabel> label = parse_label(raw);
  if (!label.ok()) return make_fallback_prediction(inst.id, model_id, raw);
  return detail::prediction_from_label(inst, model_id, label.value(), raw);
}

/// Seeded distinct draw from the training pool. The per-instance seed is
/// derived from (seed, instance id), so the draw is stable no matter how
/// instances are scheduled across workers.
inline std::vector<FewShotExample> select_random_examples(
    const Dataset& train, std::size_t count, std::uint64_t seed,
    const std::string& instance_id) {
  if (train.empty()) {
    raise(ErrorCode::OutOfRange, "few-shot selector: empty training pool");
  }
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  util::Rng rng(util::Rng::derive(seed, instance_id));
  rng.shuffle(order);
  const std::size_t n = std::min(count, train.size());

  std::vector<FewShotExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Instance& ex = train.instances[order[i]];
    if (!ex.gold) {
      raise(ErrorCode::BadRow, "training instance " + ex.id + " has no gold label");
    }
    out.push_back({ex.text, *ex.gold});
  }
  return out;
}

/// The `count` most similar training tweets, nearest first.
inline std::vector<FewShotExample> select_knn_examples(
    const Dataset& train, const EmbeddingIndex& index,
    const std::vector<double>& query, std::size_t count) {
  if (train.empty() || index.empty()) {
    raise(ErrorCode::OutOfRange, "few-shot selector: empty training pool");
  }
  std::unordered_map<std::string_view, const Instance*> by_id;
  by_id.reserve(train.size());
  for (const Instance& inst : train.instances) by_id.emplace(inst.id, &inst);

  std::vector<FewShotExample> out;
  for (const auto& n : index.nearest(query, std::min(count, index.size()))) {
    const auto& entry = index.entry(n.entry_index);
    const auto it = by_id.find(entry.id);
    if (it == by_id.end()) {
      raise(ErrorCode::IdMismatch,
            "index id \"" + entry.id + "\" missing from training pool");
    }
    out.push_back({it->second->text, entry.label});
  }
  return out;
}

struct StrategyResources {
  Gateway* second = nullptr;       // ZSEC stage-2 backend (defaults to primary)
  const Dataset* train = nullptr;  // few-shot example pool
  Gateway* embedder = nullptr;     // few-shot knn selector embeddings
};

struct StrategyRunResult {
  PredictionFile file;
  RunManifest manifest;
};

/// Classifies every instance with the configured strategy, bounded-parallel
/// under the gateway's in-flight limit, and reassembles predictions in
/// dataset order. Per-instance failures (gateway or parse) degrade to the
/// Neutral fallback and are counted; only configuration-level problems abort
/// the run.
inline StrategyRunResult run_strategy(const Dataset& data,
                                      const StrategyConfig& cfg,
                                      Gateway& gateway,
                                      const PromptCatalog& prompts,
                                      StrategyResources res = {}) {
  const ModelId model_id = cfg.effective_model_id();
  Gateway& second = res.second != nullptr ? *res.second : gateway;

  if (cfg.kind == StrategyKind::FewShot) {
    if (cfg.example_count == 0) {
      raise(ErrorCode::ConfigInvalid, "few-shot example count must be >= 1");
    }
    if (res.train == nullptr || res.train->empty()) {
      raise(ErrorCode::ConfigInvalid, "few-shot strategy needs a training pool");
    }
    if (cfg.selector == ExampleSelector::Knn && res.embedder == nullptr) {
      raise(ErrorCode::ConfigInvalid, "knn selector needs an embedding backend");
    }
  }

  RunManifest manifest;
  manifest.kind = std::string("classify-") + strategy_name(cfg.kind);
  manifest.backend_model = gateway.config().model;
  manifest.temperature = gateway.config().temperature;
  manifest.max_tokens = gateway.config().max_tokens;
  manifest.seed = cfg.seed;
  manifest.prompt_checksum = prompts.checksum();
  manifest.started = utc_timestamp();
  manifest.assign_run_id();

  std::vector<Gateway*> gateways{&gateway};
  if (res.second != nullptr && res.second != &gateway) gateways.push_back(res.second);
  if (res.embedder != nullptr && res.embedder != &gateway &&
      res.embedder != res.second) {
    gateways.push_back(res.embedder);
  }
  std::vector<GatewayStats> before;
  before.reserve(gateways.size());
  for (Gateway* g : gateways) before.push_back(g->stats());

  // Few-shot KNN groundwork: embed the pool once, embed the queries once.
  EmbeddingIndex index;
  std::vector<std::vector<double>> query_embeddings;
  if (cfg.kind == StrategyKind::FewShot && cfg.selector == ExampleSelector::Knn) {
    std::vector<std::string> pool_texts;
    pool_texts.reserve(res.train->size());
    for (const Instance& inst : res.train->instances) pool_texts.push_back(inst.text);
    index = build_index(*res.train,
                        embed_texts(*res.embedder, pool_texts, cfg.embed_dim));

    std::vector<std::string> query_texts;
    query_texts.reserve(data.size());
    for (const Instance& inst : data.instances) query_texts.push_back(inst.text);
    for (EmbeddingVector& v : embed_texts(*res.embedder, query_texts, cfg.embed_dim)) {
      query_embeddings.push_back(std::move(v.values));
    }
  }

  std::vector<Prediction> slots(data.size());
  std::atomic<std::uint64_t> flagged{0};

  util::parallel_for(data.size(), gateway.max_in_flight(), [&](std::size_t i) {
    const Instance& inst = data.instances[i];
    try {
      switch (cfg.kind) {
        case StrategyKind::ZeroShot:
          slots[i] = zero_shot_classify(inst, gateway, prompts, model_id);
          break;
        case StrategyKind::Zse:
          slots[i] = zse_classify(inst, gateway, prompts, model_id);
          break;
        case StrategyKind::Zsec: {
          ZsecOutcome out =
              zsec_classify(inst, gateway, second, cfg.scope, prompts, model_id);
          if (out.stage2_kept_stage1) flagged.fetch_add(1);
          slots[i] = std::move(out.prediction);
          break;
        }
        case StrategyKind::FewShot: {
          const std::vector<FewShotExample> examples =
              cfg.selector == ExampleSelector::Knn
                  ? select_knn_examples(*res.train, index, query_embeddings[i],
                                        cfg.example_count)
                  : select_random_examples(*res.train, cfg.example_count,
                                           cfg.seed, inst.id);
          slots[i] = few_shot_classify(inst, gateway, prompts, examples, model_id);
          break;
        }
        case StrategyKind::FineTuned:
          slots[i] = finetuned_classify(inst, gateway, prompts, model_id);
          break;
      }
    } catch (const std::exception& e) {
      slots[i] = make_fallback_prediction(inst.id, model_id,
                                          std::string("[error] ") + e.what());
    }
  });

  StrategyRunResult result;
  result.file.model_id = model_id;
  result.file.predictions = std::move(slots);

  manifest.finished = utc_timestamp();
  manifest.counts.instances = data.size();
  for (std::size_t g = 0; g < gateways.size(); ++g) {
    const GatewayStats after = gateways[g]->stats();
    manifest.counts.backend_calls += after.backend_calls - before[g].backend_calls;
    manifest.counts.cache_hits += after.cache_hits - before[g].cache_hits;
  }
  for (const Prediction& p : result.file.predictions) {
    if (p.fallback_applied) ++manifest.counts.fallbacks;
  }
  manifest.counts.flagged = flagged.load();
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace emoflow
