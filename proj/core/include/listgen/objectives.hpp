#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "listgen/model.hpp"

namespace listgen {

struct RelevanceJudgment {
  std::string query_id;
  std::string internal_id;
  int grade = 0;  // non-negative; 0 means irrelevant
};

struct LabeledDocid {
  std::string internal_id;
  int grade = 0;
};

// Ground-truth docid list for one query, grades non-increasing.
struct RankedLabelList {
  std::string query_id;
  std::vector<LabeledDocid> entries;
};

// Length-normalized log-probs aligned index-for-index with a label list.
struct ListwiseScores {
  std::string query_id;
  std::vector<double> values;
};

// Position weights alpha(i) = 2^(n-i) - 1. alpha(n) = 0, so single-element
// lists contribute nothing (the binary-relevance reduction).
double position_weight(int i, int n);
std::vector<double> position_weights(int n);

// sequence_logprob / |id|, |id| counting the EOS step.
double length_normalized_logprob(const ScorerModel& model,
                                 std::span<const int> query_tokens, const Docid& docid);
double length_normalized_logprob(const ScorerModel& model, const EncoderTrace& enc,
                                 const Docid& docid);

// Suffix softmax: P(position i generated first among positions i..n),
// computed with max-subtraction. 1-based i.
double positional_conditional(const ListwiseScores& scores, int i);

// Position-weighted listwise loss: sum_i alpha(i) * (-s_i + lse(s_i..s_n)).
// Every summand is >= 0. Throws on a scores/weights length mismatch.
double listwise_loss(const ListwiseScores& scores, const std::vector<double>& weights);

// Unweighted variant: negative log Plackett-Luce likelihood of the identity
// permutation of the scores.
double listmle_loss(const ListwiseScores& scores);

// d loss / d s for the two listwise losses; used when chaining into the
// model backward.
std::vector<double> listwise_loss_grad_scores(const ListwiseScores& scores,
                                              const std::vector<double>& weights);

// Closed-form Plackett-Luce probability of an ordering (testing oracle).
// permutation holds 1-based positions-to-score indices; n <= 8.
double pl_permutation_prob(const ListwiseScores& scores,
                           const std::vector<int>& permutation);

// Pointwise teacher-forced losses (optionally label-smoothed over the
// docid vocabulary).
struct PointwisePair {
  std::vector<int> input_tokens;  // tokenized document or query
  Docid docid;
};

double pointwise_loss(const ScorerModel& model, const std::vector<PointwisePair>& pairs,
                      double label_smoothing = 0.0);
double pointwise_loss_grad(const ScorerModel& model,
                           const std::vector<PointwisePair>& pairs,
                           double label_smoothing, GradientSet& grads);

// -sum_d log P(id | d): documents tokenized like queries, truncated to
// max_doc_tokens. Throws if a document lacks a docid.
double indexing_loss(const ScorerModel& model, const std::vector<Document>& documents,
                     const DocidMap& docid_map, int max_doc_tokens = 512,
                     double label_smoothing = 0.0);

// -sum log P(id | q) over (query, docid) pairs, pseudo-query pairs included.
double retrieval_loss(const ScorerModel& model, const std::vector<PointwisePair>& pairs,
                      double label_smoothing = 0.0);

// One query's listwise term: scores are length-normalized log-probs of the
// list entries in order. Gradients flow through every entry's sequence.
struct ListExample {
  std::vector<int> query_tokens;
  std::vector<Docid> docids;  // label-list order, grades non-increasing
};

double list_loss(const ScorerModel& model, const ListExample& example,
                 bool position_aware);
double list_loss_grad(const ScorerModel& model, const ListExample& example,
                      bool position_aware, GradientSet& grads);

// Total stage-one loss: listwise summed over queries + indexing + retrieval
// (unit weights).
struct TrainingBatch {
  std::vector<Document> documents;
  const DocidMap* docid_map = nullptr;
  std::vector<PointwisePair> retrieval_pairs;
  std::vector<ListExample> lists;
  int max_doc_tokens = 512;
  double label_smoothing = 0.0;
};

double training_loss(const ScorerModel& model, const TrainingBatch& batch);

// Samples up to samples_per_query ground-truth lists for one query's
// judgments: position i holds a uniformly drawn docid of grade n-i+1 where
// n is the query's highest grade; absent grade levels truncate the list.
// Distinct lists are drawn without replacement when possible. Throws
// "query has no relevant documents" if every judgment has grade 0.
std::vector<RankedLabelList> build_ground_truth_lists(
    const std::vector<RelevanceJudgment>& judgments, int samples_per_query,
    std::uint64_t seed);

}  // namespace listgen
