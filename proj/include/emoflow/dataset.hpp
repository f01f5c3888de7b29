#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "emoflow/error.hpp"
#include "emoflow/record.hpp"
#include "emoflow/util/rng.hpp"
#include "emoflow/util/strings.hpp"

namespace emoflow {

/// Maps logical fields to the column names of a particular TSV layout. The
/// label and language columns are optional; leave them empty to skip.
struct ColumnMap {
  std::string id = "ID";
  std::string text = "Texts";
  std::string label = "Labels";
  std::string language;

  static ColumnMap unlabeled(std::string id_col = "ID",
                             std::string text_col = "Texts") {
    ColumnMap m;
    m.id = std::move(id_col);
    m.text = std::move(text_col);
    m.label.clear();
    return m;
  }
};

struct Dataset {
  std::vector<Instance> instances;
  std::string source_path;
  ColumnMap column_map;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }

  const Instance* find(std::string_view id) const {
    for (const auto& inst : instances) {
      if (inst.id == id) return &inst;
    }
    return nullptr;
  }
};

namespace detail {

inline int find_column(const std::vector<std::string>& header,
                       const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace detail

/// Loads a UTF-8 TSV with a header row into a Dataset. Gold labels are parsed
/// through parse_label when the label column is mapped and present. Row
/// numbers in error messages are 1-based file lines (header is line 1).
inline Dataset load_dataset(const std::string& path, ColumnMap columns = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoFailure, "cannot open dataset: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    raise(ErrorCode::BadRow, path + ": empty file, expected a header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = util::split(line, '\t');
  const int id_col = detail::find_column(header, columns.id);
  const int text_col = detail::find_column(header, columns.text);
  if (id_col < 0) {
    raise(ErrorCode::MissingColumn, path + ": no column \"" + columns.id + "\"");
  }
  if (text_col < 0) {
    raise(ErrorCode::MissingColumn,
          path + ": no column \"" + columns.text + "\"");
  }
  int label_col = -1;
  if (!columns.label.empty()) {
    label_col = detail::find_column(header, columns.label);
    if (label_col < 0) {
      raise(ErrorCode::MissingColumn,
            path + ": no column \"" + columns.label + "\"");
    }
  }
  int lang_col = -1;
  if (!columns.language.empty()) {
    lang_col = detail::find_column(header, columns.language);
    if (lang_col < 0) {
      raise(ErrorCode::MissingColumn,
            path + ": no column \"" + columns.language + "\"");
    }
  }

  Dataset ds;
  ds.source_path = path;
  ds.column_map = columns;
  std::unordered_set<std::string> seen;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const std::vector<std::string> cells = util::split(line, '\t');
    const auto cell = [&](int col) -> std::string {
      return col >= 0 && col < static_cast<int>(cells.size())
                 ? cells[static_cast<std::size_t>(col)]
                 : std::string();
    };

    Instance inst;
    inst.id = cell(id_col);
    inst.text = cell(text_col);
    if (inst.id.empty()) {
      raise(ErrorCode::BadRow,
            path + ":" + std::to_string(line_no) + ": empty id");
    }
    if (inst.text.empty()) {
      raise(ErrorCode::BadRow,
            path + ":" + std::to_string(line_no) + ": empty text");
    }
    if (!seen.insert(inst.id).second) {
      raise(ErrorCode::DuplicateId,
            path + ":" + std::to_string(line_no) + ": duplicate id \"" +
                inst.id + "\"");
    }
    if (label_col >= 0) {
      Result<EmotionLabel> gold = parse_label(cell(label_col));
      if (!gold.ok()) {
        raise(ErrorCode::BadRow, path + ":" + std::to_string(line_no) + ": " +
                                     gold.error().message);
      }
      inst.gold = gold.value();
    }
    if (lang_col >= 0) {
      std::string lang = cell(lang_col);
      if (!lang.empty()) inst.language = std::move(lang);
    }
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

/// Seeded shuffle-then-cut split: the first n_train shuffled instances become
/// the train split, the remainder the validation split. Deterministic for a
/// given seed on any platform.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d,
                                                 std::size_t n_train,
                                                 std::uint64_t seed) {
  if (n_train == 0 || n_train >= d.size()) {
    raise(ErrorCode::OutOfRange,
          "n_train must be in [1, " + std::to_string(d.size()) + ")");
  }
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  util::Rng rng(seed);
  rng.shuffle(order);

  Dataset train;
  train.source_path = d.source_path;
  train.column_map = d.column_map;
  Dataset val = train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : val).instances.push_back(d.instances[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace emoflow
