#include "listgen/embedding.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "listgen/rng.hpp"
#include "listgen/text.hpp"

namespace listgen {
namespace {

constexpr std::uint64_t kBagBuckets = 1 << 18;

std::vector<double> project_text(const std::string& text, int dim,
                                 std::uint64_t seed) {
  std::unordered_map<std::uint64_t, double> tf;
  for (const auto& w : split_words(text)) {
    tf[stable_hash(w) % kBagBuckets] += 1.0;
  }

  // Each bucket contributes a fixed pseudo-random direction keyed by
  // (seed, bucket); the projection matrix is never materialized.
  std::vector<double> v(dim, 0.0);
  for (const auto& [bucket, count] : tf) {
    Rng rng(mix_hash(seed, bucket));
    for (int d = 0; d < dim; ++d) v[d] += count * rng.gaussian();
  }

  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

}  // namespace

std::vector<std::vector<double>> embed_corpus(
    const std::vector<Document>& documents, int dim, std::uint64_t seed) {
  if (documents.empty()) throw std::invalid_argument("empty corpus");
  if (dim < 2) throw std::invalid_argument("embedding dim must be >= 2");

  std::vector<std::vector<double>> out;
  out.reserve(documents.size());
  for (const auto& doc : documents) {
    if (doc.embedding.has_value()) {
      if (static_cast<int>(doc.embedding->size()) != dim) {
        throw std::invalid_argument("embedding dimension mismatch for document '" +
                                    doc.internal_id + "'");
      }
      out.push_back(*doc.embedding);
      continue;
    }
    if (doc.text.empty()) {
      throw std::invalid_argument("document '" + doc.internal_id +
                                  "' has empty text and no embedding");
    }
    out.push_back(project_text(doc.text, dim, seed));
  }
  return out;
}

}  // namespace listgen
