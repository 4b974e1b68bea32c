#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "listgen/model.hpp"
#include "listgen/rng.hpp"

namespace listgen::testutil {

// embed 8 / hidden 16 with a small hashed vocabulary keeps full-coordinate
// finite differencing cheap.
inline ScorerModel tiny_model(std::uint64_t seed) {
  ModelConfig config;
  config.query_vocab = 32;
  config.embed_dim = 8;
  config.hidden_dim = 16;
  config.seed = seed;
  return ScorerModel::init(config);
}

inline std::vector<int> random_query(Rng& rng, int vocab, int max_len = 4) {
  std::vector<int> tokens(1 + rng.below(max_len));
  for (auto& t : tokens) t = static_cast<int>(rng.below(vocab));
  return tokens;
}

inline Docid random_docid(Rng& rng, int max_digits = 4) {
  Docid docid;
  docid.digits.resize(1 + rng.below(max_digits));
  for (auto& d : docid.digits) d = static_cast<std::uint8_t>(rng.below(10));
  return docid;
}

// Central finite differences over every parameter coordinate.
inline GradientSet finite_difference(const ScorerModel& model,
                                     const std::function<double(const ScorerModel&)>& f,
                                     double step = 1e-4) {
  ScorerModel probe = model;
  GradientSet fd = GradientSet::zeros_like(model);
  for (std::size_t i = 0; i < probe.params.size(); ++i) {
    const double saved = probe.params[i];
    probe.params[i] = saved + step;
    const double up = f(probe);
    probe.params[i] = saved - step;
    const double down = f(probe);
    probe.params[i] = saved;
    fd.values[i] = (up - down) / (2.0 * step);
  }
  return fd;
}

inline double max_rel_error(const GradientSet& analytic, const GradientSet& fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.values.size(); ++i) {
    const double a = analytic.values[i];
    const double b = fd.values[i];
    const double denom = std::max(std::abs(a) + std::abs(b), 1e-6);
    worst = std::max(worst, std::abs(a - b) / denom);
  }
  return worst;
}

}  // namespace listgen::testutil
