#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>

#include "emoflow/label.hpp"
#include "emoflow/record.hpp"

using namespace emoflow;

TEST_CASE("parse_label accepts the six canonical words") {
  CHECK(parse_label("Anger").value() == EmotionLabel::Anger);
  CHECK(parse_label("Love").value() == EmotionLabel::Love);
  CHECK(parse_label("Joy").value() == EmotionLabel::Joy);
  CHECK(parse_label("Fear").value() == EmotionLabel::Fear);
  CHECK(parse_label("Sadness").value() == EmotionLabel::Sadness);
  CHECK(parse_label("Neutral").value() == EmotionLabel::Neutral);
}

TEST_CASE("parse_label normalizes case, whitespace and terminal punctuation") {
  CHECK(parse_label("  joy.").value() == EmotionLabel::Joy);
  CHECK(parse_label("ANGER!").value() == EmotionLabel::Anger);
  CHECK(parse_label("'Sadness'").value() == EmotionLabel::Sadness);
  CHECK(parse_label("\"Fear\"").value() == EmotionLabel::Fear);
  CHECK(parse_label("Love,").value() == EmotionLabel::Love);
  CHECK(parse_label("neutral.\n").value() == EmotionLabel::Neutral);
}

TEST_CASE("parse_label rejects everything outside the closed set") {
  CHECK_FALSE(parse_label("happiness").ok());
  CHECK(parse_label("happiness").error().code == ErrorCode::UnrecognizedLabel);
  CHECK_FALSE(parse_label("").ok());
  CHECK_FALSE(parse_label("I think it's Joy").ok());
  CHECK_FALSE(parse_label("Joyful").ok());
}

TEST_CASE("canonical text round-trips through parse_label") {
  for (EmotionLabel label : kAllLabels) {
    const auto parsed = parse_label(std::string(canonical_text(label)));
    REQUIRE(parsed.ok());
    CHECK(parsed.value() == label);
  }
}

TEST_CASE("round-trip survives random case and punctuation decoration") {
  std::mt19937_64 rng(20240601);
  const std::string punct = ".!?\"'";
  for (int trial = 0; trial < 200; ++trial) {
    const EmotionLabel label = kAllLabels[rng() % kAllLabels.size()];
    std::string text(canonical_text(label));
    for (char& c : text) {
      if (rng() % 2 == 0) c = static_cast<char>(std::toupper(c));
      else c = static_cast<char>(std::tolower(c));
    }
    text.insert(0, std::string(rng() % 3, ' '));
    text += std::string(rng() % 3, ' ');
    text += punct[rng() % punct.size()];
    const auto parsed = parse_label(text);
    REQUIRE(parsed.ok());
    CHECK(parsed.value() == label);
  }
}

TEST_CASE("parse_explained_output splits at the separator") {
  const auto r = parse_explained_output("The tweet expresses excitement || Joy");
  REQUIRE(r.ok());
  CHECK(r.value().explanation == "The tweet expresses excitement");
  CHECK(r.value().label == EmotionLabel::Joy);
}

TEST_CASE("parse_explained_output requires the separator") {
  const auto r = parse_explained_output("no separator here Joy");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().code == ErrorCode::MissingSeparator);
}

TEST_CASE("parse_explained_output splits at the last separator") {
  const auto r = parse_explained_output("a || b || Sadness");
  REQUIRE(r.ok());
  CHECK(r.value().explanation == "a || b");
  CHECK(r.value().label == EmotionLabel::Sadness);
}

TEST_CASE("parse_explained_output propagates label errors") {
  const auto r = parse_explained_output("some reasoning || happiness");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().code == ErrorCode::UnrecognizedLabel);

  // An empty label side can never succeed.
  CHECK_FALSE(parse_explained_output("reasoning ||").ok());
  CHECK_FALSE(parse_explained_output("reasoning ||   ").ok());
}

TEST_CASE("parse_yes_no") {
  CHECK(parse_yes_no("yes").value());
  CHECK(parse_yes_no("YES!").value());
  CHECK_FALSE(parse_yes_no("No.").value());
  CHECK_FALSE(parse_yes_no(" no ").value());
  const auto r = parse_yes_no("maybe");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().code == ErrorCode::UnrecognizedBinary);
}

TEST_CASE("fallback predictions are Neutral by construction") {
  const Prediction p = make_fallback_prediction("t1", "model", "garbage output");
  CHECK(p.fallback_applied);
  CHECK(p.label == EmotionLabel::Neutral);
  CHECK(p.raw_output == "garbage output");
}
