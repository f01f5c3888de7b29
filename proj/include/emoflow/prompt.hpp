#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emoflow/error.hpp"
#include "emoflow/label.hpp"
#include "emoflow/util/sha256.hpp"

namespace emoflow {

/// A chat prompt skeleton: system text, user text and (for few-shot example
/// turns) assistant text, with {name} placeholders. Rendering substitutes
/// every placeholder in one pass; an unbound placeholder is an error, and
/// substituted values are never rescanned, so braces inside tweet text pass
/// through untouched.
struct PromptTemplate {
  std::string id;
  std::string system_text;
  std::string user_text;
  std::string assistant_text;

  using Bindings = std::map<std::string, std::string, std::less<>>;

  static std::string render_text(std::string_view text, const Bindings& vars,
                                 std::string_view template_id) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
      if (text[i] == '{') {
        std::size_t j = i + 1;
        while (j < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[j])) != 0 ||
                text[j] == '_')) {
          ++j;
        }
        if (j < text.size() && text[j] == '}' && j > i + 1) {
          const std::string_view name = text.substr(i + 1, j - i - 1);
          const auto it = vars.find(name);
          if (it == vars.end()) {
            raise(ErrorCode::ConfigInvalid,
                  "template " + std::string(template_id) +
                      ": unbound placeholder {" + std::string(name) + "}");
          }
          out += it->second;
          i = j + 1;
          continue;
        }
      }
      out += text[i++];
    }
    return out;
  }

  std::string render_system(const Bindings& vars) const {
    return render_text(system_text, vars, id);
  }
  std::string render_user(const Bindings& vars) const {
    return render_text(user_text, vars, id);
  }
  std::string render_assistant(const Bindings& vars) const {
    return render_text(assistant_text, vars, id);
  }
};

/// Candidate lists rendered into prompts: the whole comma-separated list
/// wrapped in single quotes, labels in the order given.
inline std::string format_label_list(std::span<const EmotionLabel> labels) {
  std::string out = "'";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += ", ";
    out += canonical_text(labels[i]);
  }
  out += "'";
  return out;
}

namespace template_id {
inline constexpr std::string_view kFinetune = "finetune";
inline constexpr std::string_view kZeroShot = "zero_shot";
inline constexpr std::string_view kZse = "zse";
inline constexpr std::string_view kZsecCorrection = "zsec_correction";
inline constexpr std::string_view kMiawf = "miawf";
inline constexpr std::string_view kMbcawfBinary = "mbcawf_binary";
inline constexpr std::string_view kMbcawfNeutralCheck = "mbcawf_neutral_check";
inline constexpr std::string_view kMbcawfPick = "mbcawf_pick";
}  // namespace template_id

/// The fixed template set, either the built-in copies or the same files
/// loaded from an assets directory. Checksummed into run manifests so a run
/// records exactly which prompt text it used.
class PromptCatalog {
 public:
  static PromptCatalog builtin() {
    PromptCatalog c;
    c.add({std::string(template_id::kFinetune),
           "As a supportive assistant specialized in tweet classification, "
           "you're tasked with determining the emotion conveyed in a given "
           "tweet. Utilizing your intuitive understanding, analyze the "
           "sentiment of the provided tweet. Your response should be just one "
           "word, choosing one emotion from these 6 emotions: Love, Joy, "
           "Anger, Fear, Sadness, Neutral.",
           "{tweet_text}", ""});
    c.add({std::string(template_id::kZeroShot),
           "You are a helpful assistant designed to output classification "
           "results.",
           "Suppose there are six emotions: Love, Joy, Anger, Fear, Sadness, "
           "Neutral. Use your instinct, what is the emotion of the following "
           "tweet: '{tweet_text}'. Your response must be just one label from "
           "the six labels. Please do not output anything else.",
           "{label}"});
    c.add({std::string(template_id::kZse),
           "You are an expert who takes an input tweet and outputs an emotion "
           "classification label among the following emotion labels: Love, "
           "Joy, Anger, Fear, Sadness, Neutral. Your output should start with "
           "the explanation and end with the emotion label. Explanation and "
           "emotion label should be separated by ||. Do not output newlines.",
           "What is the emotion label of this tweet '{tweet}'?", ""});
    c.add({std::string(template_id::kZsecCorrection),
           "You are an expert in checking emotion in tweets. There are six "
           "emotions 'Love, Joy, Anger, Fear, Sadness, Neutral'. You will be "
           "presented with a tweet that others think is '{emotion}'. Output "
           "'{emotion}' if you agree with that; otherwise, output one emotion "
           "label from other emotions that describes the emotion of the tweet "
           "the best. Your output should start with the explanation and end "
           "with the emotion label. Explanation and emotion should be "
           "separated by ||. Do not output newlines.",
           "What is the emotion label of this tweet '{tweet}'?", ""});
    c.add({std::string(template_id::kMiawf),
           "As an expert specialized in tweet classification, you're "
           "presented with a tweet and two emotion labels: \"{emotion1}\" and "
           "\"{emotion2}\". Drawing upon your intuitive understanding, assess "
           "the emotion of the tweet provided. Your response should be either "
           "\"{emotion1}\" or \"{emotion2}\". If the two emotion labels are "
           "identical, return either one of them.",
           "{tweet_text}", ""});
    c.add({std::string(template_id::kMbcawfBinary),
           "You are an expert in detecting '{emotion}' emotion in tweets. You "
           "will be presented with a tweet. Output 'yes' if you detect "
           "'{emotion}' emotion in the tweet; otherwise, output 'no'. Your "
           "response should only contain 'yes' or 'no'. No other output is "
           "allowed.",
           "{tweet_text}", ""});
    c.add({std::string(template_id::kMbcawfNeutralCheck),
           "You are an expert in checking emotion in tweets. You will be "
           "presented with a tweet that others think is 'Neutral'. Output "
           "'Neutral' if you agree with that; otherwise, output one emotion "
           "from {emotions} that describes the emotion of the tweet the best. "
           "In the latter case, your response should only contain one of "
           "{emotions} and no other output is allowed.",
           "{tweet_text}", ""});
    c.add({std::string(template_id::kMbcawfPick),
           "You are an expert in choosing emotions for tweets. You will be "
           "presented with a tweet. Pick one emotion from {emotions} that "
           "describes the emotion of the tweet the best. Your response should "
           "only contain one of {emotions}. No other output is allowed.",
           "{tweet_text}", ""});
    return c;
  }

  /// Loads every template from <dir>/<id>.txt. Files use [system]/[user]/
  /// [assistant] section headers; section bodies are taken verbatim minus the
  /// final newline.
  static PromptCatalog load_dir(const std::filesystem::path& dir) {
    PromptCatalog c;
    for (const PromptTemplate& t : builtin().templates_) {
      c.add(load_file(dir / (t.id + ".txt"), t.id));
    }
    return c;
  }

  const PromptTemplate& get(std::string_view id) const {
    for (const auto& t : templates_) {
      if (t.id == id) return t;
    }
    raise(ErrorCode::ConfigInvalid, "unknown prompt template: " + std::string(id));
  }

  const std::vector<PromptTemplate>& templates() const { return templates_; }

  /// Digest over every template's id and text, in catalog order.
  std::string checksum() const {
    std::string material;
    for (const auto& t : templates_) {
      material += t.id;
      material += '\x1f';
      material += t.system_text;
      material += '\x1f';
      material += t.user_text;
      material += '\x1f';
      material += t.assistant_text;
      material += '\x1e';
    }
    return util::sha256_hex(material);
  }

  /// Serializes a template in the asset-file format.
  static std::string to_file_text(const PromptTemplate& t) {
    std::string out = "[system]\n" + t.system_text + "\n[user]\n" + t.user_text + "\n";
    if (!t.assistant_text.empty()) {
      out += "[assistant]\n" + t.assistant_text + "\n";
    }
    return out;
  }

 private:
  void add(PromptTemplate t) { templates_.push_back(std::move(t)); }

  static PromptTemplate load_file(const std::filesystem::path& path,
                                  const std::string& id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      raise(ErrorCode::IoFailure, "cannot open prompt template: " + path.string());
    }
    PromptTemplate t;
    t.id = id;
    std::string* section = nullptr;
    std::string line;
    bool first_line_of_section = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line == "[system]") { section = &t.system_text; first_line_of_section = true; continue; }
      if (line == "[user]") { section = &t.user_text; first_line_of_section = true; continue; }
      if (line == "[assistant]") { section = &t.assistant_text; first_line_of_section = true; continue; }
      if (section == nullptr) {
        raise(ErrorCode::ConfigInvalid,
              path.string() + ": content before first section header");
      }
      if (!first_line_of_section) *section += '\n';
      *section += line;
      first_line_of_section = false;
    }
    return t;
  }

  std::vector<PromptTemplate> templates_;
};

}  // namespace emoflow
