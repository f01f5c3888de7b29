#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emoflow/dataset.hpp"
#include "emoflow/embedding.hpp"
#include "emoflow/error.hpp"
#include "emoflow/label.hpp"
#include "emoflow/metrics_core.hpp"
#include "emoflow/util/rng.hpp"
#include "emoflow/util/strings.hpp"

namespace emoflow {

/// Exact-search index over labeled embeddings, cosine metric. Immutable once
/// built; queries are read-only and safe to run concurrently.
class EmbeddingIndex {
 public:
  struct Entry {
    std::string id;
    EmotionLabel label = EmotionLabel::Neutral;
    std::vector<double> values;
  };

  struct Neighbor {
    std::size_t entry_index;
    double similarity;
  };

  EmbeddingIndex() = default;
  explicit EmbeddingIndex(std::string model_id) : model_id_(std::move(model_id)) {}

  void add(std::string id, EmotionLabel label, std::vector<double> values) {
    if (dim_ == 0) dim_ = values.size();
    if (values.size() != dim_) {
      raise(ErrorCode::DimensionMismatch,
            "index dim " + std::to_string(dim_) + ", vector dim " +
                std::to_string(values.size()));
    }
    entries_.push_back({std::move(id), label, std::move(values)});
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t dim() const { return dim_; }
  const std::string& model_id() const { return model_id_; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }

  /// All neighbors of `query`, most similar first. Equal similarities order
  /// by instance id so results never depend on index insertion order.
  std::vector<Neighbor> ranked_neighbors(const std::vector<double>& query) const {
    if (empty()) raise(ErrorCode::EmptyIndex, "index has no vectors");
    if (query.size() != dim_) {
      raise(ErrorCode::DimensionMismatch,
            "query dim " + std::to_string(query.size()) + ", index dim " +
                std::to_string(dim_));
    }
    std::vector<Neighbor> nbrs;
    nbrs.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      nbrs.push_back({i, cosine_similarity(query, entries_[i].values)});
    }
    std::sort(nbrs.begin(), nbrs.end(), [this](const Neighbor& a, const Neighbor& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return entries_[a.entry_index].id < entries_[b.entry_index].id;
    });
    return nbrs;
  }

  std::vector<Neighbor> nearest(const std::vector<double>& query,
                                std::size_t k) const {
    std::vector<Neighbor> nbrs = ranked_neighbors(query);
    if (k < nbrs.size()) nbrs.resize(k);
    return nbrs;
  }

  /// Portable text persistence: a metadata comment line, then one row per
  /// vector with comma-separated coordinates at full round-trip precision.
  void save_tsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoFailure, "cannot write index: " + path);
    out << "# emoflow-embedding-index model=" << model_id_ << " dim=" << dim_
        << "\n";
    out << "ID\tLabel\tEmbedding\n";
    char buf[64];
    for (const auto& e : entries_) {
      out << e.id << '\t' << canonical_text(e.label) << '\t';
      for (std::size_t i = 0; i < e.values.size(); ++i) {
        if (i > 0) out << ',';
        const auto res = std::to_chars(buf, buf + sizeof(buf), e.values[i],
                                       std::chars_format::general, 17);
        out.write(buf, res.ptr - buf);
      }
      out << '\n';
    }
  }

  static EmbeddingIndex load_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoFailure, "cannot open index: " + path);
    EmbeddingIndex idx;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        const auto mpos = line.find("model=");
        if (mpos != std::string::npos) {
          const auto end = line.find(' ', mpos);
          idx.model_id_ = line.substr(mpos + 6, end - (mpos + 6));
        }
        continue;
      }
      if (line.rfind("ID\t", 0) == 0) continue;  // header
      const std::vector<std::string> cells = util::split(line, '\t');
      if (cells.size() < 3) {
        raise(ErrorCode::BadRow,
              path + ":" + std::to_string(line_no) + ": expected 3 columns");
      }
      const Result<EmotionLabel> label = parse_label(cells[1]);
      if (!label.ok()) {
        raise(ErrorCode::BadRow, path + ":" + std::to_string(line_no) + ": " +
                                     label.error().message);
      }
      std::vector<double> values;
      for (const std::string& tok : util::split(cells[2], ',')) {
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc()) {
          raise(ErrorCode::BadRow, path + ":" + std::to_string(line_no) +
                                       ": bad float \"" + tok + "\"");
        }
        values.push_back(v);
      }
      idx.add(cells[0], label.value(), std::move(values));
    }
    return idx;
  }

 private:
  std::vector<Entry> entries_;
  std::size_t dim_ = 0;
  std::string model_id_;
};

/// Builds a labeled index from a gold dataset and its embeddings (parallel
/// lists). Instances without gold labels are rejected.
inline EmbeddingIndex build_index(const Dataset& data,
                                  const std::vector<EmbeddingVector>& embeddings) {
  if (data.size() != embeddings.size()) {
    raise(ErrorCode::DimensionMismatch,
          "dataset and embedding counts differ: " + std::to_string(data.size()) +
              " vs " + std::to_string(embeddings.size()));
  }
  EmbeddingIndex idx(embeddings.empty() ? std::string() : embeddings[0].model_id);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Instance& inst = data.instances[i];
    if (!inst.gold) {
      raise(ErrorCode::BadRow, "instance " + inst.id + " has no gold label");
    }
    idx.add(inst.id, *inst.gold, embeddings[i].values);
  }
  return idx;
}

/// k-nearest-neighbor vote under cosine similarity. Majority label among the
/// top k; a tie between labels goes to the label of the nearest neighbor
/// carrying one of the tied labels.
inline EmotionLabel knn_classify(const std::vector<double>& query,
                                 const EmbeddingIndex& index, std::size_t k) {
  if (index.empty()) raise(ErrorCode::EmptyIndex, "index has no vectors");
  if (k == 0 || k > index.size()) {
    raise(ErrorCode::OutOfRange,
          "k must be in [1, " + std::to_string(index.size()) + "]");
  }
  const auto top = index.nearest(query, k);

  std::array<std::size_t, kLabelCount> counts{};
  for (const auto& n : top) {
    ++counts[label_index(index.entry(n.entry_index).label)];
  }
  std::size_t best = 0;
  for (std::size_t c : counts) best = std::max(best, c);
  for (const auto& n : top) {
    const EmotionLabel label = index.entry(n.entry_index).label;
    if (counts[label_index(label)] == best) return label;
  }
  return index.entry(top.front().entry_index).label;  // unreachable
}

/// Cross-validation outcome for k selection.
struct CrossValReport {
  std::map<std::size_t, double> mean_f1_by_k;
  std::size_t chosen_k = 0;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
};

/// Picks k by seeded stratified f-fold cross-validation, scoring each fold
/// with macro-F1 over the labels present in that fold's gold. Ties in mean F1
/// resolve to the smallest k.
inline CrossValReport select_k(const EmbeddingIndex& index, std::size_t k_min,
                               std::size_t k_max, std::size_t folds,
                               std::uint64_t seed) {
  if (folds < 2) raise(ErrorCode::OutOfRange, "need at least 2 folds");
  if (index.size() < folds) {
    raise(ErrorCode::OutOfRange, "fewer vectors than folds");
  }
  if (k_min == 0 || k_min > k_max) {
    raise(ErrorCode::OutOfRange, "bad k range");
  }

  // Stratified assignment: shuffle ids within each label, deal round-robin.
  std::vector<std::size_t> fold_of(index.size(), 0);
  {
    std::map<EmotionLabel, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < index.size(); ++i) {
      by_label[index.entry(i).label].push_back(i);
    }
    std::size_t dealt = 0;
    for (auto& [label, ids] : by_label) {
      util::Rng rng(util::Rng::derive(seed, canonical_text(label)));
      rng.shuffle(ids);
      for (std::size_t i : ids) fold_of[i] = dealt++ % folds;
    }
  }

  const std::size_t max_train = index.size() - index.size() / folds - 1;
  const std::size_t k_hi = std::min(k_max, max_train);
  if (k_hi < k_min) raise(ErrorCode::OutOfRange, "k range exceeds fold-train size");

  CrossValReport report;
  report.folds = folds;
  report.seed = seed;

  std::map<std::size_t, double> f1_sum;
  std::map<std::size_t, std::size_t> f1_cnt;

  for (std::size_t f = 0; f < folds; ++f) {
    EmbeddingIndex train;
    std::vector<std::size_t> test_ids;
    for (std::size_t i = 0; i < index.size(); ++i) {
      const auto& e = index.entry(i);
      if (fold_of[i] == f) {
        test_ids.push_back(i);
      } else {
        train.add(e.id, e.label, e.values);
      }
    }
    if (test_ids.empty() || train.empty()) continue;

    // One neighbor ranking per test item, reused for every k.
    std::vector<std::vector<EmbeddingIndex::Neighbor>> rankings;
    rankings.reserve(test_ids.size());
    for (std::size_t i : test_ids) {
      rankings.push_back(train.ranked_neighbors(index.entry(i).values));
    }

    for (std::size_t k = k_min; k <= k_hi; ++k) {
      const std::size_t kk = std::min(k, train.size());
      ConfusionMatrix cm;
      for (std::size_t t = 0; t < test_ids.size(); ++t) {
        std::array<std::size_t, kLabelCount> counts{};
        for (std::size_t n = 0; n < kk; ++n) {
          ++counts[label_index(
              train.entry(rankings[t][n].entry_index).label)];
        }
        std::size_t best = 0;
        for (std::size_t c : counts) best = std::max(best, c);
        EmotionLabel picked = EmotionLabel::Neutral;
        for (std::size_t n = 0; n < kk; ++n) {
          const EmotionLabel lbl = train.entry(rankings[t][n].entry_index).label;
          if (counts[label_index(lbl)] == best) {
            picked = lbl;
            break;
          }
        }
        cm.record(index.entry(test_ids[t]).label, picked);
      }
      f1_sum[k] += metrics_from_confusion(cm).macro_f1;
      f1_cnt[k] += 1;
    }
  }

  double best_f1 = -1.0;
  for (std::size_t k = k_min; k <= k_hi; ++k) {
    const double mean = f1_cnt[k] > 0 ? f1_sum[k] / static_cast<double>(f1_cnt[k]) : 0.0;
    report.mean_f1_by_k[k] = mean;
    if (mean > best_f1) {  // strict: ties keep the smallest k
      best_f1 = mean;
      report.chosen_k = k;
    }
  }
  return report;
}

}  // namespace emoflow
