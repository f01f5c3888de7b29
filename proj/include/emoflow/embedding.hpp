#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emoflow/error.hpp"
#include "emoflow/gateway.hpp"
#include "emoflow/util/parallel.hpp"

namespace emoflow {

/// A sentence embedding with provenance. When truncated_from is set the
/// vector was cut to its leading coordinates and renormalized to unit L2.
struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;
  std::optional<std::size_t> truncated_from;

  std::size_t dim() const { return values.size(); }

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }
};

/// Cosine similarity; degenerate zero-norm vectors compare as 0.
inline double cosine_similarity(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() != b.size()) {
    raise(ErrorCode::DimensionMismatch,
          "cosine over dims " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Keeps the first target_dim coordinates and renormalizes to unit length.
/// With no target_dim the provider vector passes through untouched.
inline EmbeddingVector truncate_embedding(std::vector<double> raw,
                                          std::string model_id,
                                          std::optional<std::size_t> target_dim) {
  EmbeddingVector out;
  out.model_id = std::move(model_id);
  if (!target_dim) {
    out.values = std::move(raw);
    return out;
  }
  if (*target_dim == 0 || *target_dim > raw.size()) {
    raise(ErrorCode::DimensionMismatch,
          "target dim " + std::to_string(*target_dim) +
              " exceeds provider dim " + std::to_string(raw.size()));
  }
  out.truncated_from = raw.size();
  raw.resize(*target_dim);
  double norm = 0.0;
  for (double v : raw) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    raise(ErrorCode::DimensionMismatch,
          "zero-norm embedding cannot be renormalized");
  }
  for (double& v : raw) v /= norm;
  out.values = std::move(raw);
  return out;
}

/// Fetches embeddings for every text through the gateway (cached, retried,
/// rate limited, bounded-parallel) and applies optional truncation. The
/// provider must return one consistent dimension across the batch.
inline std::vector<EmbeddingVector> embed_texts(
    Gateway& gateway, const std::vector<std::string>& texts,
    std::optional<std::size_t> target_dim = {}) {
  if (texts.empty()) {
    raise(ErrorCode::OutOfRange, "embed_texts needs at least one text");
  }
  std::vector<Result<EmbeddingVector>> slots(
      texts.size(),
      Result<EmbeddingVector>::failure(ErrorCode::TransientFailure,
                                       "not executed"));
  util::parallel_for(texts.size(), gateway.max_in_flight(), [&](std::size_t i) {
    try {
      slots[i] = truncate_embedding(gateway.embed(texts[i]),
                                    gateway.config().model, target_dim);
    } catch (const EmoflowError& e) {
      slots[i] = e.error();
    } catch (const std::exception& e) {
      slots[i] = Error{ErrorCode::TransientFailure, e.what()};
    }
  });

  std::vector<EmbeddingVector> out;
  out.reserve(slots.size());
  std::optional<std::size_t> dim;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].ok()) throw EmoflowError(slots[i].error());
    const EmbeddingVector& v = slots[i].value();
    if (!dim) dim = v.dim();
    if (v.dim() != *dim) {
      raise(ErrorCode::DimensionMismatch,
            "provider returned inconsistent dims: " + std::to_string(*dim) +
                " vs " + std::to_string(v.dim()) + " (text " +
                std::to_string(i) + ")");
    }
    out.push_back(std::move(std::move(slots[i]).value()));
  }
  return out;
}

}  // namespace emoflow
