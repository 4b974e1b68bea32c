#include "listgen/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace listgen {

GeneratedCandidateList sort_to_target_order(const std::string& query_id,
                                            std::vector<GeneratedCandidate> beam_output) {
  std::vector<int> order(beam_output.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = beam_output[a];
    const auto& cb = beam_output[b];
    if (ca.grade != cb.grade) return ca.grade > cb.grade;
    if (ca.seq_logprob != cb.seq_logprob) return ca.seq_logprob > cb.seq_logprob;
    return ca.docid < cb.docid;
  });

  GeneratedCandidateList list;
  list.query_id = query_id;
  list.candidates.reserve(beam_output.size());
  list.beam_order = order;
  for (int idx : order) list.candidates.push_back(std::move(beam_output[idx]));
  return list;
}

std::vector<double> token_target_weights(const GeneratedCandidateList& candidates,
                                         const RankedLabelList& truth, double beta) {
  if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
  if (candidates.candidates.empty()) {
    throw std::invalid_argument("empty candidate list");
  }

  std::unordered_map<std::string, int> truth_grade;
  for (const auto& entry : truth.entries) {
    truth_grade.emplace(entry.internal_id, entry.grade);
  }

  const std::size_t n = candidates.candidates.size();
  std::vector<double> weights(n, 0.0);
  std::vector<std::size_t> absent;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cand = candidates.candidates[i];
    auto it = truth_grade.find(cand.internal_id);
    if (it != truth_grade.end()) {
      const double m1 = it->second + 1.0;
      weights[i] = 1.0 - 1.0 / (m1 * m1);
    } else if (cand.judged) {
      weights[i] = 0.0;  // judged irrelevant: suppressed outright, not part of beta
    } else {
      absent.push_back(i);
    }
  }
  // the beta budget is split uniformly over candidates absent from truth
  if (!absent.empty()) {
    const double share = beta / static_cast<double>(absent.size());
    for (auto i : absent) weights[i] = share;
  }
  return weights;
}

double token_calibration_loss(const ScorerModel& model,
                              std::span<const int> query_tokens,
                              const GeneratedCandidateList& candidates,
                              const std::vector<double>& weights) {
  if (weights.size() != candidates.candidates.size()) {
    throw std::invalid_argument("weights/candidates length mismatch");
  }
  EncoderTrace enc = encode_query(model, query_tokens);
  double loss = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (weights[c] == 0.0) continue;
    loss -= weights[c] *
            sequence_logprob(model, enc, candidates.candidates[c].docid);
  }
  return loss;
}

double length_penalized_score(const ScorerModel& model, const EncoderTrace& enc,
                              const GeneratedCandidate& candidate, double alpha_len) {
  if (candidate.docid.digits.empty()) {
    throw std::invalid_argument("zero-length docid");
  }
  if (alpha_len < 0.0) throw std::invalid_argument("alpha_len must be >= 0");
  double denom = std::pow(candidate.docid.length_with_eos(), alpha_len);
  return sequence_logprob(model, enc, candidate.docid) / denom;
}

double length_penalized_score(const ScorerModel& model,
                              std::span<const int> query_tokens,
                              const GeneratedCandidate& candidate, double alpha_len) {
  EncoderTrace enc = encode_query(model, query_tokens);
  return length_penalized_score(model, enc, candidate, alpha_len);
}

double sequence_calibration_loss(const std::vector<double>& scores, double lambda) {
  double loss = 0.0;
  const int n = static_cast<int>(scores.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      loss += std::max(0.0, scores[j] - scores[i] + (j - i) * lambda);
    }
  }
  return loss;
}

namespace {

double query_retraining_loss(const ScorerModel& model, const CalibrationExample& ex,
                             const CalibrationConfig& config, GradientSet* grads) {
  const auto& cands = ex.candidates.candidates;
  const std::size_t n = cands.size();
  if (n == 0) return 0.0;

  std::vector<double> weights = token_target_weights(ex.candidates, ex.truth, config.beta);
  EncoderTrace enc = encode_query(model, ex.query_tokens);

  // one teacher-forced pass per candidate serves both loss terms
  std::vector<SequenceTrace> traces;
  std::vector<double> seq_lp(n, 0.0);
  traces.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    traces.push_back(run_teacher_forced(model, enc, cands[c].docid));
    for (std::size_t t = 0; t < traces[c].steps.size(); ++t) {
      seq_lp[c] += traces[c].steps[t].logprobs[traces[c].targets[t]];
    }
  }

  double token_loss = 0.0;
  for (std::size_t c = 0; c < n; ++c) token_loss += -weights[c] * seq_lp[c];

  std::vector<double> lp_scale(n);  // 1 / |id|^alpha
  std::vector<double> scores(n);
  for (std::size_t c = 0; c < n; ++c) {
    lp_scale[c] = 1.0 / std::pow(cands[c].docid.length_with_eos(), config.alpha_len);
    scores[c] = seq_lp[c] * lp_scale[c];
  }
  double seq_loss = sequence_calibration_loss(scores, config.lambda);
  double total = token_loss + config.gamma * seq_loss;
  if (grads == nullptr) return total;

  // d total / d seq_lp per candidate
  std::vector<double> d_seq_lp(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) d_seq_lp[c] -= weights[c];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double margin = scores[j] - scores[i] +
                      static_cast<double>(j - i) * config.lambda;
      if (margin > 0.0) {
        d_seq_lp[j] += config.gamma * lp_scale[j];
        d_seq_lp[i] -= config.gamma * lp_scale[i];
      }
    }
  }

  for (std::size_t c = 0; c < n; ++c) {
    if (d_seq_lp[c] == 0.0) continue;
    std::vector<LogProbs> grad_lp(traces[c].steps.size());
    for (std::size_t t = 0; t < grad_lp.size(); ++t) {
      grad_lp[t].fill(0.0);
      grad_lp[t][traces[c].targets[t]] = d_seq_lp[c];
    }
    backward_sequence(model, enc, traces[c], grad_lp, *grads);
  }
  return total;
}

}  // namespace

double retraining_loss(const ScorerModel& model,
                       const std::vector<CalibrationExample>& batch,
                       const CalibrationConfig& config) {
  double loss = 0.0;
  for (const auto& ex : batch) loss += query_retraining_loss(model, ex, config, nullptr);
  return loss;
}

double retraining_loss_grad(const ScorerModel& model,
                            const std::vector<CalibrationExample>& batch,
                            const CalibrationConfig& config, GradientSet& grads) {
  double loss = 0.0;
  for (const auto& ex : batch) loss += query_retraining_loss(model, ex, config, &grads);
  return loss;
}

}  // namespace listgen
