#pragma once

#include <map>
#include <string>
#include <vector>

namespace listgen {

// One query's ranked result list, scores strictly descending after
// tie-breaking, no duplicate docids.
struct RunEntry {
  std::string internal_id;
  double score = 0.0;
};

struct RunRanking {
  std::string query_id;
  std::vector<RunEntry> entries;
};

// grade per internal_id for one query; absent means unjudged (grade 0).
using QueryJudgments = std::map<std::string, int>;

// Exponential-gain nDCG: gain 2^g - 1, discount 1/log2(rank+1), normalized
// by the ideal DCG over all judged documents. 0 when nothing relevant.
double ndcg_at_k(const RunRanking& run, const QueryJudgments& judgments, int k);

// Expected reciprocal rank with R = (2^g - 1) / 2^g_max. Throws if a grade
// exceeds g_max.
double err_at_k(const RunRanking& run, const QueryJudgments& judgments, int k,
                int g_max);

// Binary metrics; grade >= 1 counts as relevant. Lists shorter than k pad
// conceptually with non-relevant results.
double precision_at_k(const RunRanking& run, const QueryJudgments& judgments, int k);
double mrr_at_k(const RunRanking& run, const QueryJudgments& judgments, int k);
int hits_at_k(const RunRanking& run, const QueryJudgments& judgments, int k);

}  // namespace listgen
