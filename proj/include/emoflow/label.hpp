#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "emoflow/error.hpp"
#include "emoflow/util/strings.hpp"

namespace emoflow {

/// The closed six-way emotion vocabulary. Declaration order is the canonical
/// order used everywhere a fixed label ordering matters (prompt candidate
/// lists, confusion-matrix axes, binary-classifier sequence).
enum class EmotionLabel { Love, Joy, Anger, Fear, Sadness, Neutral };

inline constexpr std::array<EmotionLabel, 6> kAllLabels = {
    EmotionLabel::Love, EmotionLabel::Joy,     EmotionLabel::Anger,
    EmotionLabel::Fear, EmotionLabel::Sadness, EmotionLabel::Neutral,
};

/// The five non-neutral emotions, in canonical order.
inline constexpr std::array<EmotionLabel, 5> kNonNeutralLabels = {
    EmotionLabel::Love, EmotionLabel::Joy, EmotionLabel::Anger,
    EmotionLabel::Fear, EmotionLabel::Sadness,
};

inline constexpr std::size_t kLabelCount = kAllLabels.size();

inline std::string_view canonical_text(EmotionLabel label) {
  switch (label) {
    case EmotionLabel::Love: return "Love";
    case EmotionLabel::Joy: return "Joy";
    case EmotionLabel::Anger: return "Anger";
    case EmotionLabel::Fear: return "Fear";
    case EmotionLabel::Sadness: return "Sadness";
    case EmotionLabel::Neutral: return "Neutral";
  }
  return "Neutral";
}

inline std::size_t label_index(EmotionLabel label) {
  return static_cast<std::size_t>(label);
}

namespace detail {

inline bool is_terminal_punct(char c) {
  switch (c) {
    case '.': case '!': case '?': case ',': case ';': case ':':
    case '"': case '\'':
      return true;
    default:
      return false;
  }
}

/// Strips whitespace, then any run of terminal punctuation and quotes at both
/// ends. Interior punctuation is left alone.
inline std::string_view normalize_label_token(std::string_view raw) {
  std::string_view s = util::trim(raw);
  while (!s.empty() && is_terminal_punct(s.back())) {
    s.remove_suffix(1);
    s = util::trim(s);
  }
  while (!s.empty() && (s.front() == '"' || s.front() == '\'')) {
    s.remove_prefix(1);
    s = util::trim(s);
  }
  return s;
}

}  // namespace detail

/// Parses a bare-label model output. Trims whitespace and terminal
/// punctuation, then matches case-insensitively against the six canonical
/// words. Anything else is UnrecognizedLabel.
inline Result<EmotionLabel> parse_label(std::string_view raw) {
  std::string_view token = detail::normalize_label_token(raw);
  for (EmotionLabel label : kAllLabels) {
    if (util::iequals(token, canonical_text(label))) return label;
  }
  return Result<EmotionLabel>::failure(
      ErrorCode::UnrecognizedLabel,
      "not one of the six emotion labels: \"" + std::string(raw) + "\"");
}

struct ExplainedOutput {
  std::string explanation;
  EmotionLabel label;
};

/// Parses an "explanation || label" output. Splits at the LAST "||" so
/// explanations containing the separator still leave a bare label on the
/// right. The right side goes through parse_label.
inline Result<ExplainedOutput> parse_explained_output(std::string_view raw) {
  const std::size_t pos = raw.rfind("||");
  if (pos == std::string_view::npos) {
    return Result<ExplainedOutput>::failure(
        ErrorCode::MissingSeparator, "output lacks the \"||\" separator");
  }
  Result<EmotionLabel> label = parse_label(raw.substr(pos + 2));
  if (!label.ok()) return label.error();
  return ExplainedOutput{std::string(util::trim(raw.substr(0, pos))),
                         label.value()};
}

/// Parses a binary classifier's yes/no answer, with the same trimming rules
/// as parse_label ("No." still counts as no).
inline Result<bool> parse_yes_no(std::string_view raw) {
  std::string_view token = detail::normalize_label_token(raw);
  if (util::iequals(token, "yes")) return true;
  if (util::iequals(token, "no")) return false;
  return Result<bool>::failure(
      ErrorCode::UnrecognizedBinary,
      "expected yes/no, got \"" + std::string(raw) + "\"");
}

}  // namespace emoflow
