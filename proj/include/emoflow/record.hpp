#pragma once

#include <optional>
#include <string>
#include <utility>

#include "emoflow/label.hpp"

namespace emoflow {

/// Names a strategy+backend combination. Opaque, non-empty, stable for a run.
using ModelId = std::string;

/// One input text (a tweet) with an optional gold label.
struct Instance {
  std::string id;
  std::string text;
  std::optional<std::string> language;
  std::optional<EmotionLabel> gold;
};

/// A model's labeled output for one instance. fallback_applied means the raw
/// output could not be parsed and the label was replaced with Neutral.
struct Prediction {
  std::string instance_id;
  EmotionLabel label = EmotionLabel::Neutral;
  std::optional<std::string> explanation;
  ModelId model_id;
  std::string raw_output;
  bool fallback_applied = false;
};

/// The Neutral fallback for unparseable outputs; the only way
/// fallback_applied gets set, which keeps the label==Neutral invariant.
inline Prediction make_fallback_prediction(std::string instance_id,
                                           ModelId model_id,
                                           std::string raw_output) {
  Prediction p;
  p.instance_id = std::move(instance_id);
  p.label = EmotionLabel::Neutral;
  p.model_id = std::move(model_id);
  p.raw_output = std::move(raw_output);
  p.fallback_applied = true;
  return p;
}

}  // namespace emoflow
