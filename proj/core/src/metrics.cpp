#include "listgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace listgen {
namespace {

int grade_of(const QueryJudgments& judgments, const std::string& id) {
  auto it = judgments.find(id);
  return it == judgments.end() ? 0 : it->second;
}

double gain(int grade) { return std::ldexp(1.0, grade) - 1.0; }  // 2^g - 1

}  // namespace

double ndcg_at_k(const RunRanking& run, const QueryJudgments& judgments, int k) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  double dcg = 0.0;
  const int depth = std::min<int>(k, static_cast<int>(run.entries.size()));
  for (int r = 0; r < depth; ++r) {
    dcg += gain(grade_of(judgments, run.entries[r].internal_id)) /
           std::log2(static_cast<double>(r + 2));
  }

  std::vector<int> grades;
  grades.reserve(judgments.size());
  for (const auto& [id, g] : judgments) {
    if (g > 0) grades.push_back(g);
  }
  std::sort(grades.rbegin(), grades.rend());
  double idcg = 0.0;
  for (int r = 0; r < std::min<int>(k, static_cast<int>(grades.size())); ++r) {
    idcg += gain(grades[r]) / std::log2(static_cast<double>(r + 2));
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double err_at_k(const RunRanking& run, const QueryJudgments& judgments, int k,
                int g_max) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (g_max < 1) throw std::invalid_argument("g_max must be positive");
  const double denom = std::ldexp(1.0, g_max);  // 2^g_max
  double err = 0.0;
  double not_stopped = 1.0;
  const int depth = std::min<int>(k, static_cast<int>(run.entries.size()));
  for (int r = 0; r < depth; ++r) {
    int g = grade_of(judgments, run.entries[r].internal_id);
    if (g > g_max) {
      throw std::invalid_argument("relevance grade " + std::to_string(g) +
                                  " exceeds g_max " + std::to_string(g_max));
    }
    double stop = gain(g) / denom;
    err += not_stopped * stop / static_cast<double>(r + 1);
    not_stopped *= 1.0 - stop;
  }
  return err;
}

double precision_at_k(const RunRanking& run, const QueryJudgments& judgments, int k) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  int relevant = 0;
  const int depth = std::min<int>(k, static_cast<int>(run.entries.size()));
  for (int r = 0; r < depth; ++r) {
    if (grade_of(judgments, run.entries[r].internal_id) >= 1) ++relevant;
  }
  return static_cast<double>(relevant) / static_cast<double>(k);
}

double mrr_at_k(const RunRanking& run, const QueryJudgments& judgments, int k) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  const int depth = std::min<int>(k, static_cast<int>(run.entries.size()));
  for (int r = 0; r < depth; ++r) {
    if (grade_of(judgments, run.entries[r].internal_id) >= 1) {
      return 1.0 / static_cast<double>(r + 1);
    }
  }
  return 0.0;
}

int hits_at_k(const RunRanking& run, const QueryJudgments& judgments, int k) {
  return mrr_at_k(run, judgments, k) > 0.0 ? 1 : 0;
}

}  // namespace listgen
