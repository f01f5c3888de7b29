#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoflow/dataset.hpp"
#include "emoflow/error.hpp"
#include "emoflow/gateway.hpp"
#include "emoflow/label.hpp"
#include "emoflow/prediction_io.hpp"
#include "emoflow/prompt.hpp"
#include "emoflow/workflow.hpp"

namespace emoflow {

enum class EnsembleMode { Unweighted, Weighted, LlmAdjudicated };

inline EnsembleMode parse_ensemble_mode(const std::string& name) {
  if (name == "unweighted") return EnsembleMode::Unweighted;
  if (name == "weighted") return EnsembleMode::Weighted;
  if (name == "llm" || name == "llm_adjudicated") return EnsembleMode::LlmAdjudicated;
  raise(ErrorCode::ConfigInvalid, "unknown ensemble mode: " + name);
}

/// One aggregation recipe. Members are prediction files (by path) or other
/// ensembles (by "ensemble:<name>" reference) for nested composition.
struct EnsembleSpec {
  std::string name = "ensemble";
  EnsembleMode mode = EnsembleMode::Unweighted;
  std::vector<std::string> members;
  std::map<ModelId, double> weights;  // required for weighted mode
};

/// Per-label accumulated score for one instance.
struct VoteTally {
  std::array<double, kLabelCount> score{};

  void add(EmotionLabel label, double weight) {
    score[label_index(label)] += weight;
  }

  double max_score() const {
    double best = score[0];
    for (double s : score) best = std::max(best, s);
    return best;
  }
};

namespace detail {

inline void check_member_alignment(const std::vector<PredictionFile>& files) {
  if (files.size() < 2) {
    raise(ErrorCode::ConfigInvalid, "an ensemble needs at least 2 members");
  }
  std::set<std::string> base;
  for (const Prediction& p : files[0].predictions) base.insert(p.instance_id);
  for (std::size_t i = 1; i < files.size(); ++i) {
    std::set<std::string> ids;
    for (const Prediction& p : files[i].predictions) ids.insert(p.instance_id);
    if (ids != base) {
      raise(ErrorCode::IdMismatch,
            "member \"" + files[i].model_id +
                "\" covers a different instance set than \"" +
                files[0].model_id + "\"");
    }
  }
}

/// Label of each member for one instance, in member order.
inline std::vector<EmotionLabel> member_labels(
    const std::vector<PredictionFile>& files,
    const std::vector<std::unordered_map<std::string_view, EmotionLabel>>& lookup,
    std::string_view id) {
  std::vector<EmotionLabel> labels;
  labels.reserve(files.size());
  for (const auto& table : lookup) labels.push_back(table.at(id));
  return labels;
}

inline std::vector<std::unordered_map<std::string_view, EmotionLabel>>
build_lookup(const std::vector<PredictionFile>& files) {
  std::vector<std::unordered_map<std::string_view, EmotionLabel>> lookup;
  lookup.reserve(files.size());
  for (const PredictionFile& f : files) {
    auto& table = lookup.emplace_back();
    table.reserve(f.size());
    for (const Prediction& p : f.predictions) table.emplace(p.instance_id, p.label);
  }
  return lookup;
}

}  // namespace detail

/// Majority / weighted-majority voting. The winner is the argmax of the
/// per-label tally; a tie goes to the tied label predicted by the member
/// with the highest weight (unweighted: the earliest member in spec order).
/// Output rows follow the first member's instance order.
inline PredictionFile vote(const EnsembleSpec& spec,
                           const std::vector<PredictionFile>& files) {
  if (spec.mode == EnsembleMode::LlmAdjudicated) {
    raise(ErrorCode::ConfigInvalid, "vote() does not run llm_adjudicated mode");
  }
  detail::check_member_alignment(files);

  std::vector<double> member_weight(files.size(), 1.0);
  if (spec.mode == EnsembleMode::Weighted) {
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto it = spec.weights.find(files[i].model_id);
      if (it == spec.weights.end()) {
        raise(ErrorCode::ConfigInvalid,
              "no weight for member \"" + files[i].model_id + "\"");
      }
      if (it->second < 0) {
        raise(ErrorCode::ConfigInvalid,
              "negative weight for member \"" + files[i].model_id + "\"");
      }
      member_weight[i] = it->second;
    }
  }

  const auto lookup = detail::build_lookup(files);

  PredictionFile out;
  out.model_id = spec.name;
  out.predictions.reserve(files[0].size());

  for (const Prediction& anchor : files[0].predictions) {
    const std::vector<EmotionLabel> labels =
        detail::member_labels(files, lookup, anchor.instance_id);

    VoteTally tally;
    for (std::size_t m = 0; m < labels.size(); ++m) {
      tally.add(labels[m], member_weight[m]);
    }
    const double best = tally.max_score();

    // Tie-break: among members whose label is tied for the top score, take
    // the highest-weight member, then the earliest in spec order. With all
    // weights equal this is exactly "earliest member wins".
    EmotionLabel winner = labels[0];
    double winner_weight = -1.0;
    for (std::size_t m = 0; m < labels.size(); ++m) {
      if (tally.score[label_index(labels[m])] == best &&
          member_weight[m] > winner_weight) {
        winner = labels[m];
        winner_weight = member_weight[m];
      }
    }

    Prediction p;
    p.instance_id = anchor.instance_id;
    p.label = winner;
    p.model_id = out.model_id;
    out.predictions.push_back(std::move(p));
  }
  return out;
}

/// Inputs the adjudicator needs for llm-mode ensembles (and nested specs
/// containing one): the tweets plus a configured backend.
struct AdjudicatorContext {
  const Dataset* data = nullptr;
  Gateway* gateway = nullptr;
  const PromptCatalog* prompts = nullptr;
  std::uint64_t off_menu_fallbacks = 0;
};

/// LLM-adjudicated aggregation: unanimous instances pass through with zero
/// calls; disagreements go to the pick-one prompt over the distinct member
/// labels, deduplicated into canonical label order.
inline PredictionFile llm_adjudicated_vote(const EnsembleSpec& spec,
                                           const std::vector<PredictionFile>& files,
                                           AdjudicatorContext& ctx) {
  if (ctx.data == nullptr || ctx.gateway == nullptr || ctx.prompts == nullptr) {
    raise(ErrorCode::ConfigInvalid,
          "llm_adjudicated mode needs a dataset and an adjudicator backend");
  }
  detail::check_member_alignment(files);
  const auto lookup = detail::build_lookup(files);

  std::unordered_map<std::string_view, const Instance*> inst_by_id;
  inst_by_id.reserve(ctx.data->size());
  for (const Instance& inst : ctx.data->instances) inst_by_id.emplace(inst.id, &inst);
  for (const Prediction& p : files[0].predictions) {
    if (inst_by_id.find(p.instance_id) == inst_by_id.end()) {
      raise(ErrorCode::IdMismatch,
            "dataset has no instance \"" + p.instance_id + "\" for adjudication");
    }
  }

  PredictionFile out;
  out.model_id = spec.name;
  out.predictions.resize(files[0].size());

  std::atomic<std::uint64_t> off_menu{0};
  std::mutex error_mu;
  std::optional<Error> first_error;
  const auto& anchors = files[0].predictions;
  util::parallel_for(anchors.size(), ctx.gateway->max_in_flight(), [&](std::size_t i) {
    const std::string& id = anchors[i].instance_id;
    const std::vector<EmotionLabel> labels = detail::member_labels(files, lookup, id);

    // Distinct labels in canonical order, for a deterministic prompt.
    std::array<bool, kLabelCount> seen{};
    for (EmotionLabel l : labels) seen[label_index(l)] = true;
    std::vector<EmotionLabel> distinct;
    for (EmotionLabel l : kAllLabels) {
      if (seen[label_index(l)]) distinct.push_back(l);
    }

    Prediction p;
    p.instance_id = id;
    p.model_id = out.model_id;
    if (distinct.size() == 1) {
      p.label = distinct.front();
    } else {
      try {
        const AdjudicationOutcome decided = adjudicate_among(
            *inst_by_id.at(id), distinct, *ctx.gateway, *ctx.prompts);
        p.label = decided.label;
        p.raw_output = decided.raw;
        if (decided.off_menu) off_menu.fetch_add(1);
      } catch (const EmoflowError& e) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = e.error();
        return;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = Error{ErrorCode::TransientFailure, e.what()};
        return;
      }
    }
    out.predictions[i] = std::move(p);
  });
  if (first_error) throw EmoflowError(*first_error);  // gateway errors propagate
  ctx.off_menu_fallbacks += off_menu.load();
  return out;
}

/// A set of ensembles that may reference each other as members. Evaluation
/// is leaf-first with cycle detection.
struct ComposeSpec {
  std::vector<EnsembleSpec> ensembles;
  std::string root;

  static ComposeSpec from_json(const nlohmann::json& j) {
    ComposeSpec spec;
    spec.root = j.value("root", "");
    if (!j.contains("ensembles")) {
      raise(ErrorCode::ConfigInvalid, "compose spec lacks \"ensembles\"");
    }
    for (const auto& je : j["ensembles"]) {
      EnsembleSpec e;
      e.name = je.value("name", "");
      if (e.name.empty()) {
        raise(ErrorCode::ConfigInvalid, "ensemble without a name");
      }
      e.mode = parse_ensemble_mode(je.value("mode", "unweighted"));
      for (const auto& m : je.value("members", nlohmann::json::array())) {
        e.members.push_back(m.get<std::string>());
      }
      if (je.contains("weights")) {
        e.weights = je["weights"].get<std::map<ModelId, double>>();
      }
      spec.ensembles.push_back(std::move(e));
    }
    if (spec.root.empty() && !spec.ensembles.empty()) {
      spec.root = spec.ensembles.back().name;
    }
    return spec;
  }
};

inline constexpr std::string_view kEnsembleRefPrefix = "ensemble:";

/// Evaluates a composition DAG down from `root`. Leaf members load from
/// disk; "ensemble:<name>" members evaluate first and feed the parent like
/// any other prediction file.
class EnsembleComposer {
 public:
  explicit EnsembleComposer(ComposeSpec spec, AdjudicatorContext ctx = {})
      : spec_(std::move(spec)), ctx_(ctx) {}

  PredictionFile evaluate() { return evaluate_named(spec_.root); }

  const AdjudicatorContext& context() const { return ctx_; }

 private:
  PredictionFile evaluate_named(const std::string& name) {
    if (const auto it = memo_.find(name); it != memo_.end()) return it->second;
    if (!in_progress_.insert(name).second) {
      raise(ErrorCode::CycleDetected,
            "ensemble \"" + name + "\" participates in a reference cycle");
    }
    const EnsembleSpec* spec = nullptr;
    for (const auto& e : spec_.ensembles) {
      if (e.name == name) {
        spec = &e;
        break;
      }
    }
    if (spec == nullptr) {
      raise(ErrorCode::ConfigInvalid, "no ensemble named \"" + name + "\"");
    }

    std::vector<PredictionFile> files;
    files.reserve(spec->members.size());
    for (const std::string& member : spec->members) {
      if (member.starts_with(kEnsembleRefPrefix)) {
        files.push_back(
            evaluate_named(member.substr(kEnsembleRefPrefix.size())));
      } else {
        files.push_back(read_predictions(member));
      }
    }

    PredictionFile out = spec->mode == EnsembleMode::LlmAdjudicated
                             ? llm_adjudicated_vote(*spec, files, ctx_)
                             : vote(*spec, files);
    in_progress_.erase(name);
    memo_.emplace(name, out);
    return out;
  }

  ComposeSpec spec_;
  AdjudicatorContext ctx_;
  std::map<std::string, PredictionFile> memo_;
  std::set<std::string> in_progress_;
};

}  // namespace emoflow
