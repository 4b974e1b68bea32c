#pragma once

#include <string>
#include <vector>

#include "listgen/docids.hpp"
#include "listgen/model.hpp"

namespace listgen {

struct ScoredDocid {
  Docid docid;
  std::string internal_id;
  double seq_logprob = 0.0;
};

// Trie-constrained beam search. At every step candidate extensions are
// restricted to allowed_tokens; finished beams compete with open beams in
// one pool. Returns up to k distinct docids sorted by cumulative log-prob
// descending, ties broken by docid lexicographic order. Every returned
// docid resolves in the trie. Requires beam_width >= k >= 1.
std::vector<ScoredDocid> constrained_beam_search(const ScorerModel& model,
                                                 std::span<const int> query_tokens,
                                                 const DecimalTrie& trie,
                                                 int beam_width, int k);

// Verification oracle: teacher-forced sequence_logprob for every corpus
// docid, sorted with the same tie rule. Guarded to corpora of at most
// 10,000 documents.
std::vector<ScoredDocid> exhaustive_rank(const ScorerModel& model,
                                         std::span<const int> query_tokens,
                                         const DocidMap& docid_map, int k);

}  // namespace listgen
