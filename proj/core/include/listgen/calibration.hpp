#pragma once

#include <string>
#include <vector>

#include "listgen/model.hpp"
#include "listgen/objectives.hpp"

namespace listgen {

struct CalibrationConfig {
  double beta = 0.002;    // total token-weight mass for candidates absent from truth
  double lambda = 0.001;  // relevance margin, scaled by rank distance
  double alpha_len = 0.6; // docid length penalty exponent
  double gamma = 100.0;   // sequence-term weight in the combined loss
};

struct GeneratedCandidate {
  Docid docid;
  std::string internal_id;
  double seq_logprob = 0.0;  // cumulative beam log-prob
  int grade = 0;             // 0 if not judged
  bool judged = false;       // appears in qrels (distinguishes judged grade 0)
};

// Beam-decoded candidates for one query. candidates holds the calibration
// target order (grade desc, beam score desc, docid lex); beam_order maps
// back to the original decode ranks.
struct GeneratedCandidateList {
  std::string query_id;
  std::vector<GeneratedCandidate> candidates;
  std::vector<int> beam_order;  // beam_order[i] = decode rank of candidates[i]
};

// Re-sorts raw beam output into calibration target order.
GeneratedCandidateList sort_to_target_order(const std::string& query_id,
                                            std::vector<GeneratedCandidate> beam_output);

// Per-candidate token weight (uniform over a candidate's tokens):
//   in truth with grade M      -> 1 - 1/(M+1)^2
//   judged with grade 0        -> 0
//   absent from truth          -> beta / (number of absent candidates)
// The absent weights sum to beta exactly. Throws if beta <= 0.
std::vector<double> token_target_weights(const GeneratedCandidateList& candidates,
                                         const RankedLabelList& truth, double beta);

// Token-level calibration: -sum_c sum_t weight_c * log P(w_t | q, w_<t),
// teacher-forced along each candidate's own digits (EOS step included).
double token_calibration_loss(const ScorerModel& model,
                              std::span<const int> query_tokens,
                              const GeneratedCandidateList& candidates,
                              const std::vector<double>& weights);

// sequence_logprob / |docid|^alpha_len.
double length_penalized_score(const ScorerModel& model,
                              std::span<const int> query_tokens,
                              const GeneratedCandidate& candidate, double alpha_len);
double length_penalized_score(const ScorerModel& model, const EncoderTrace& enc,
                              const GeneratedCandidate& candidate, double alpha_len);

// Pairwise hinge over target-order scores:
// sum_{i<j} max(0, s_j - s_i + (j-i)*lambda).
double sequence_calibration_loss(const std::vector<double>& scores, double lambda);

// One query's combined re-training objective and its batch form
// (token + gamma * sequence, summed over queries).
struct CalibrationExample {
  std::vector<int> query_tokens;
  GeneratedCandidateList candidates;
  RankedLabelList truth;
};

double retraining_loss(const ScorerModel& model,
                       const std::vector<CalibrationExample>& batch,
                       const CalibrationConfig& config);
double retraining_loss_grad(const ScorerModel& model,
                            const std::vector<CalibrationExample>& batch,
                            const CalibrationConfig& config, GradientSet& grads);

}  // namespace listgen
