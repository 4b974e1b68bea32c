#include "listgen/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "listgen/rng.hpp"
#include "listgen/text.hpp"

namespace listgen {
namespace {

double suffix_logsumexp(const std::vector<double>& s, int from) {
  double m = s[from];
  for (std::size_t k = from; k < s.size(); ++k) m = std::max(m, s[k]);
  double acc = 0.0;
  for (std::size_t k = from; k < s.size(); ++k) acc += std::exp(s[k] - m);
  return m + std::log(acc);
}

}  // namespace

double position_weight(int i, int n) {
  if (i < 1 || i > n) throw std::out_of_range("position out of range");
  return std::ldexp(1.0, n - i) - 1.0;  // 2^(n-i) - 1, exact for n <= 53
}

std::vector<double> position_weights(int n) {
  std::vector<double> w(n);
  for (int i = 1; i <= n; ++i) w[i - 1] = position_weight(i, n);
  return w;
}

double length_normalized_logprob(const ScorerModel& model, const EncoderTrace& enc,
                                 const Docid& docid) {
  if (docid.digits.empty()) throw std::invalid_argument("zero-length docid");
  return sequence_logprob(model, enc, docid) / docid.length_with_eos();
}

double length_normalized_logprob(const ScorerModel& model,
                                 std::span<const int> query_tokens,
                                 const Docid& docid) {
  EncoderTrace enc = encode_query(model, query_tokens);
  return length_normalized_logprob(model, enc, docid);
}

double positional_conditional(const ListwiseScores& scores, int i) {
  const int n = static_cast<int>(scores.values.size());
  if (i < 1 || i > n) throw std::out_of_range("position out of range");
  double lse = suffix_logsumexp(scores.values, i - 1);
  return std::exp(scores.values[i - 1] - lse);
}

double listwise_loss(const ListwiseScores& scores, const std::vector<double>& weights) {
  const std::size_t n = scores.values.size();
  if (weights.size() != n) {
    throw std::invalid_argument("scores/weights length mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss += weights[i] * (suffix_logsumexp(scores.values, static_cast<int>(i)) -
                          scores.values[i]);
  }
  return loss;
}

double listmle_loss(const ListwiseScores& scores) {
  return listwise_loss(scores, std::vector<double>(scores.values.size(), 1.0));
}

std::vector<double> listwise_loss_grad_scores(const ListwiseScores& scores,
                                              const std::vector<double>& weights) {
  const std::size_t n = scores.values.size();
  if (weights.size() != n) {
    throw std::invalid_argument("scores/weights length mismatch");
  }
  // d/ds_j = -alpha_j + sum_{i<=j} alpha_i * softmax_i(j), where softmax_i
  // normalizes over the suffix starting at i.
  std::vector<double> grad(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] -= weights[i];
    double lse = suffix_logsumexp(scores.values, static_cast<int>(i));
    for (std::size_t j = i; j < n; ++j) {
      grad[j] += weights[i] * std::exp(scores.values[j] - lse);
    }
  }
  return grad;
}

double pl_permutation_prob(const ListwiseScores& scores,
                           const std::vector<int>& permutation) {
  const int n = static_cast<int>(scores.values.size());
  if (n > 8) throw std::invalid_argument("oracle limited to small n");
  if (static_cast<int>(permutation.size()) != n) {
    throw std::invalid_argument("permutation length mismatch");
  }
  std::vector<bool> seen(n, false);
  for (int p : permutation) {
    if (p < 1 || p > n || seen[p - 1]) {
      throw std::invalid_argument("not a permutation of 1..n");
    }
    seen[p - 1] = true;
  }
  double prob = 1.0;
  for (int i = 0; i < n; ++i) {
    double num = std::exp(scores.values[permutation[i] - 1]);
    double den = 0.0;
    for (int k = i; k < n; ++k) den += std::exp(scores.values[permutation[k] - 1]);
    prob *= num / den;
  }
  return prob;
}

namespace {

// Teacher-forced negative log-likelihood of one pair, with gradients when
// grads != nullptr. Label smoothing spreads eps of the target mass
// uniformly over the docid vocabulary.
double pair_nll(const ScorerModel& model, const EncoderTrace& enc, const Docid& docid,
                double label_smoothing, GradientSet* grads) {
  if (grads == nullptr) {
    if (label_smoothing == 0.0) {
      return -sequence_logprob(model, enc, docid);
    }
    SequenceTrace seq = run_teacher_forced(model, enc, docid);
    double loss = 0.0;
    for (std::size_t t = 0; t < seq.steps.size(); ++t) {
      const auto& lp = seq.steps[t].logprobs;
      double mean_lp = 0.0;
      for (double v : lp) mean_lp += v;
      mean_lp /= kDocidVocab;
      loss -= (1.0 - label_smoothing) * lp[seq.targets[t]] + label_smoothing * mean_lp;
    }
    return loss;
  }

  SequenceTrace seq = run_teacher_forced(model, enc, docid);
  double loss = 0.0;
  std::vector<LogProbs> grad_lp(seq.steps.size());
  for (std::size_t t = 0; t < seq.steps.size(); ++t) {
    const auto& lp = seq.steps[t].logprobs;
    grad_lp[t].fill(-label_smoothing / kDocidVocab);
    grad_lp[t][seq.targets[t]] -= 1.0 - label_smoothing;
    double mean_lp = 0.0;
    for (double v : lp) mean_lp += v;
    mean_lp /= kDocidVocab;
    loss -= (1.0 - label_smoothing) * lp[seq.targets[t]] + label_smoothing * mean_lp;
  }
  backward_sequence(model, enc, seq, grad_lp, *grads);
  return loss;
}

}  // namespace

double pointwise_loss_grad(const ScorerModel& model,
                           const std::vector<PointwisePair>& pairs,
                           double label_smoothing, GradientSet& grads) {
  double loss = 0.0;
  for (const auto& pair : pairs) {
    EncoderTrace enc = encode_query(model, pair.input_tokens);
    loss += pair_nll(model, enc, pair.docid, label_smoothing, &grads);
  }
  return loss;
}

double pointwise_loss(const ScorerModel& model, const std::vector<PointwisePair>& pairs,
                      double label_smoothing) {
  double loss = 0.0;
  for (const auto& pair : pairs) {
    EncoderTrace enc = encode_query(model, pair.input_tokens);
    loss += pair_nll(model, enc, pair.docid, label_smoothing, nullptr);
  }
  return loss;
}

double indexing_loss(const ScorerModel& model, const std::vector<Document>& documents,
                     const DocidMap& docid_map, int max_doc_tokens,
                     double label_smoothing) {
  std::vector<PointwisePair> pairs;
  pairs.reserve(documents.size());
  for (const auto& doc : documents) {
    auto it = docid_map.find(doc.internal_id);
    if (it == docid_map.end()) {
      throw std::invalid_argument("document '" + doc.internal_id + "' has no docid");
    }
    auto tokens = model.config.tokenize_query(doc.text);
    if (static_cast<int>(tokens.size()) > max_doc_tokens) {
      tokens.resize(max_doc_tokens);
    }
    pairs.push_back({std::move(tokens), it->second});
  }
  return pointwise_loss(model, pairs, label_smoothing);
}

double retrieval_loss(const ScorerModel& model, const std::vector<PointwisePair>& pairs,
                      double label_smoothing) {
  return pointwise_loss(model, pairs, label_smoothing);
}

double list_loss(const ScorerModel& model, const ListExample& example,
                 bool position_aware) {
  EncoderTrace enc = encode_query(model, example.query_tokens);
  ListwiseScores scores;
  scores.values.reserve(example.docids.size());
  for (const auto& docid : example.docids) {
    scores.values.push_back(length_normalized_logprob(model, enc, docid));
  }
  const int n = static_cast<int>(scores.values.size());
  auto weights = position_aware ? position_weights(n) : std::vector<double>(n, 1.0);
  return listwise_loss(scores, weights);
}

double list_loss_grad(const ScorerModel& model, const ListExample& example,
                      bool position_aware, GradientSet& grads) {
  EncoderTrace enc = encode_query(model, example.query_tokens);
  const int n = static_cast<int>(example.docids.size());

  std::vector<SequenceTrace> traces;
  traces.reserve(n);
  ListwiseScores scores;
  for (const auto& docid : example.docids) {
    if (docid.digits.empty()) throw std::invalid_argument("zero-length docid");
    traces.push_back(run_teacher_forced(model, enc, docid));
    double seq_lp = 0.0;
    for (std::size_t t = 0; t < traces.back().steps.size(); ++t) {
      seq_lp += traces.back().steps[t].logprobs[traces.back().targets[t]];
    }
    scores.values.push_back(seq_lp / docid.length_with_eos());
  }

  auto weights = position_aware ? position_weights(n) : std::vector<double>(n, 1.0);
  double loss = listwise_loss(scores, weights);
  std::vector<double> d_scores = listwise_loss_grad_scores(scores, weights);

  // s_i = seq_logprob_i / |id_i|, so each realized-token log-prob receives
  // d_scores[i] / |id_i|.
  for (int i = 0; i < n; ++i) {
    const double coeff = d_scores[i] / example.docids[i].length_with_eos();
    if (coeff == 0.0) continue;
    std::vector<LogProbs> grad_lp(traces[i].steps.size());
    for (std::size_t t = 0; t < grad_lp.size(); ++t) {
      grad_lp[t].fill(0.0);
      grad_lp[t][traces[i].targets[t]] = coeff;
    }
    backward_sequence(model, enc, traces[i], grad_lp, grads);
  }
  return loss;
}

double training_loss(const ScorerModel& model, const TrainingBatch& batch) {
  double loss = 0.0;
  for (const auto& example : batch.lists) {
    loss += list_loss(model, example, /*position_aware=*/true);
  }
  if (!batch.documents.empty()) {
    if (batch.docid_map == nullptr) {
      throw std::invalid_argument("batch documents require a docid map");
    }
    loss += indexing_loss(model, batch.documents, *batch.docid_map,
                          batch.max_doc_tokens, batch.label_smoothing);
  }
  loss += retrieval_loss(model, batch.retrieval_pairs, batch.label_smoothing);
  return loss;
}

std::vector<RankedLabelList> build_ground_truth_lists(
    const std::vector<RelevanceJudgment>& judgments, int samples_per_query,
    std::uint64_t seed) {
  if (judgments.empty()) {
    throw std::invalid_argument("query has no relevant documents");
  }
  if (samples_per_query < 1) {
    throw std::invalid_argument("samples_per_query must be positive");
  }
  const std::string& qid = judgments.front().query_id;

  // bucket docids per grade, sorted for determinism
  std::map<int, std::vector<std::string>> by_grade;
  int max_grade = 0;
  for (const auto& j : judgments) {
    if (j.query_id != qid) {
      throw std::invalid_argument("judgments span multiple queries");
    }
    if (j.grade < 0) throw std::invalid_argument("negative relevance grade");
    if (j.grade >= 1) by_grade[j.grade].push_back(j.internal_id);
    max_grade = std::max(max_grade, j.grade);
  }
  if (max_grade == 0) {
    throw std::invalid_argument("query has no relevant documents");
  }
  for (auto& [grade, ids] : by_grade) std::sort(ids.begin(), ids.end());

  // grades used, from max_grade downward until the first absent level
  std::vector<int> level_grades;
  for (int g = max_grade; g >= 1; --g) {
    if (!by_grade.count(g)) break;  // absent level truncates the list
    level_grades.push_back(g);
  }

  std::uint64_t combos = 1;
  bool overflow = false;
  for (int g : level_grades) {
    combos *= by_grade[g].size();
    if (combos > 1000000) {
      overflow = true;
      break;
    }
  }

  Rng rng(mix_hash(seed, stable_hash(qid)));
  std::vector<std::vector<int>> picks;  // per-level docid indices
  const int want = samples_per_query;

  if (!overflow && combos <= static_cast<std::uint64_t>(want)) {
    // every distinct list fits: enumerate, then shuffle so callers drawing
    // a prefix of the result still sample uniformly
    std::vector<int> current(level_grades.size(), 0);
    for (std::uint64_t c = 0; c < combos; ++c) {
      picks.push_back(current);
      for (int l = static_cast<int>(level_grades.size()) - 1; l >= 0; --l) {
        if (++current[l] < static_cast<int>(by_grade[level_grades[l]].size())) break;
        current[l] = 0;
      }
    }
    rng.shuffle(picks);
  } else {
    // draw without replacement until enough distinct lists are collected
    std::vector<std::vector<int>> seen;
    while (static_cast<int>(picks.size()) < want) {
      std::vector<int> current(level_grades.size());
      for (std::size_t l = 0; l < level_grades.size(); ++l) {
        current[l] = static_cast<int>(rng.below(by_grade[level_grades[l]].size()));
      }
      if (std::find(seen.begin(), seen.end(), current) != seen.end()) continue;
      seen.push_back(current);
      picks.push_back(std::move(current));
    }
  }

  std::vector<RankedLabelList> lists;
  lists.reserve(picks.size());
  for (const auto& pick : picks) {
    RankedLabelList list;
    list.query_id = qid;
    for (std::size_t l = 0; l < level_grades.size(); ++l) {
      int g = level_grades[l];
      list.entries.push_back({by_grade[g][pick[l]], g});
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

}  // namespace listgen
