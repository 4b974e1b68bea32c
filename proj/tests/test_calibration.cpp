#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "listgen/calibration.hpp"
#include "listgen/optimizer.hpp"
#include "listgen/rng.hpp"
#include "test_util.hpp"

using namespace listgen;
using namespace listgen::testutil;

namespace {

const double kLog12 = std::log(12.0);

GeneratedCandidate candidate(const std::string& digits, const std::string& id,
                             double lp, int grade, bool judged) {
  return {Docid::from_string(digits), id, lp, grade, judged};
}

GeneratedCandidateList list_of(std::vector<GeneratedCandidate> candidates) {
  return sort_to_target_order("q", std::move(candidates));
}

RankedLabelList truth_of(std::vector<LabeledDocid> entries) {
  return {"q", std::move(entries)};
}

double kendall_tau(const std::vector<double>& scores, const std::vector<int>& grades) {
  int concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = i + 1; j < scores.size(); ++j) {
      if (grades[i] == grades[j]) continue;
      bool score_order = scores[i] > scores[j];
      bool grade_order = grades[i] > grades[j];
      (score_order == grade_order ? concordant : discordant) += 1;
    }
  }
  int total = concordant + discordant;
  return total == 0 ? 0.0 : static_cast<double>(concordant - discordant) / total;
}

}  // namespace

TEST_CASE("token target weights reproduce the closed forms") {
  auto candidates = list_of({candidate("00", "a", -1.0, 3, true),
                             candidate("01", "b", -2.0, 2, true),
                             candidate("02", "x", -3.0, 0, false),
                             candidate("03", "y", -4.0, 0, false)});
  auto truth = truth_of({{"a", 3}, {"b", 2}});
  auto weights = token_target_weights(candidates, truth, 0.002);
  REQUIRE(weights.size() == 4);
  // target order preserves (a, b, x, y): grades 3, 2 then unjudged by score
  CHECK(weights[0] == doctest::Approx(0.9375).epsilon(1e-15));       // 1 - 1/16
  CHECK(weights[1] == doctest::Approx(8.0 / 9.0).epsilon(1e-15));    // 1 - 1/9
  CHECK(weights[2] == doctest::Approx(0.001).epsilon(1e-15));        // beta split
  CHECK(weights[3] == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(weights[2] + weights[3] == 0.002);  // absent mass budget, exact
  CHECK(weights[0] > weights[1]);           // case 3 holds automatically

  SUBCASE("judged grade-0 candidates get weight 0 outside the beta pool") {
    auto with_zero = list_of({candidate("00", "a", -1.0, 3, true),
                              candidate("04", "z", -1.5, 0, true),
                              candidate("02", "x", -3.0, 0, false)});
    auto w = token_target_weights(with_zero, truth_of({{"a", 3}}), 0.002);
    REQUIRE(w.size() == 3);
    CHECK(w[0] == doctest::Approx(0.9375));
    CHECK(w[1] == 0.0);     // judged irrelevant
    CHECK(w[2] == 0.002);   // single absent candidate takes the whole budget
  }

  SUBCASE("beta must be positive") {
    CHECK_THROWS_AS(token_target_weights(candidates, truth, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(token_target_weights(candidates, truth, -1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("grade monotonicity of in-truth weights") {
  Rng rng(3);
  for (int a = 1; a <= 3; ++a) {
    for (int b = 0; b < a; ++b) {
      auto ca = list_of({candidate("00", "a", -1.0, a, true)});
      auto cb = list_of({candidate("01", "b", -1.0, b, true)});
      auto wa = token_target_weights(ca, truth_of({{"a", a}}), 0.002);
      auto wb = token_target_weights(cb, truth_of({{"b", b}}), 0.002);
      CHECK(wa[0] > wb[0]);
    }
  }
}

TEST_CASE("target order sorts by grade, then beam score, then docid") {
  auto list = list_of({candidate("09", "low", -5.0, 1, true),
                       candidate("01", "tie_b", -2.0, 2, true),
                       candidate("00", "tie_a", -1.0, 2, true),
                       candidate("05", "none", -0.5, 0, false)});
  REQUIRE(list.candidates.size() == 4);
  CHECK(list.candidates[0].internal_id == "tie_a");  // grade 2, better score
  CHECK(list.candidates[1].internal_id == "tie_b");
  CHECK(list.candidates[2].internal_id == "low");
  CHECK(list.candidates[3].internal_id == "none");   // grade 0 last
  // beam_order maps back to decode ranks
  CHECK(list.beam_order == std::vector<int>{2, 1, 0, 3});
}

TEST_CASE("token calibration loss") {
  ScorerModel model = tiny_model(31);
  std::vector<int> query{4, 9};

  SUBCASE("all-zero weights give zero loss") {
    auto candidates = list_of({candidate("12", "a", -1.0, 0, true)});
    CHECK(token_calibration_loss(model, query, candidates, {0.0}) == 0.0);
  }

  SUBCASE("uniform model closed form: weight * steps * log 12") {
    for (double& v : model.param(Param::kOutW)) v = 0.0;
    for (double& v : model.param(Param::kOutB)) v = 0.0;
    auto candidates = list_of({candidate("12", "a", -1.0, 1, true)});
    auto weights = token_target_weights(candidates, truth_of({{"a", 1}}), 0.002);
    REQUIRE(weights[0] == doctest::Approx(0.75));  // M=1 -> 3/4
    CHECK(token_calibration_loss(model, query, candidates, weights) ==
          doctest::Approx(0.75 * 3.0 * kLog12).epsilon(1e-9));
  }

  SUBCASE("two-candidate case matches a per-token expansion") {
    auto candidates = list_of({candidate("30", "a", -1.0, 2, true),
                               candidate("41", "x", -2.0, 0, false)});
    auto weights = token_target_weights(candidates, truth_of({{"a", 2}}), 0.002);
    double expected = 0.0;
    for (std::size_t c = 0; c < candidates.candidates.size(); ++c) {
      std::vector<int> prefix{kBosToken};
      for (int target : candidates.candidates[c].docid.tokens_with_eos()) {
        expected -= weights[c] * token_logprobs(model, query, prefix)[target];
        prefix.push_back(target);
      }
    }
    CHECK(token_calibration_loss(model, query, candidates, weights) ==
          doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("length penalized score") {
  ScorerModel model = tiny_model(32);
  std::vector<int> query{7};
  auto cand = candidate("321", "a", 0.0, 1, true);

  double raw = sequence_logprob(model, query, cand.docid);
  CHECK(length_penalized_score(model, query, cand, 0.0) ==
        doctest::Approx(raw).epsilon(1e-12));
  CHECK(length_penalized_score(model, query, cand, 1.0) ==
        doctest::Approx(raw / cand.docid.length_with_eos()).epsilon(1e-12));
  // frozen from an independent evaluation of -4 / 5^0.6
  ScorerModel uniform = tiny_model(33);
  (void)uniform;
  CHECK(-4.0 / std::pow(5.0, 0.6) == doctest::Approx(-1.522923150972703).epsilon(1e-12));
  CHECK_THROWS_AS(length_penalized_score(model, query,
                                         candidate("", "z", 0.0, 0, false), 0.6),
                  std::invalid_argument);
}

TEST_CASE("sequence calibration loss") {
  CHECK(sequence_calibration_loss({-2.0}, 0.001) == 0.0);
  // strictly decreasing with every gap above the scaled margin
  CHECK(sequence_calibration_loss({0.0, -1.0, -2.0}, 0.001) == 0.0);
  // frozen: three equal scores violate all pairs by exactly (j-i)*lambda
  CHECK(sequence_calibration_loss({-1.0, -1.0, -1.0}, 0.001) ==
        doctest::Approx(0.004).epsilon(1e-15));
}

TEST_CASE("hinge zero set characterization") {
  Rng rng(34);
  const double lambda = 0.001;
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng.below(5));
    // sample margin-satisfying scores: consecutive gaps >= lambda
    std::vector<double> scores(n);
    scores[0] = rng.uniform(-1.0, 0.0);
    for (int i = 1; i < n; ++i) {
      scores[i] = scores[i - 1] - lambda - rng.uniform(0.0, 0.5);
    }
    CHECK(sequence_calibration_loss(scores, lambda) == 0.0);

    // violating any single pair forces a positive loss
    int i = static_cast<int>(rng.below(n - 1));
    std::vector<double> violated = scores;
    violated[i + 1] = violated[i] + rng.uniform(0.0, 0.1);
    CHECK(sequence_calibration_loss(violated, lambda) > 0.0);
  }
}

TEST_CASE("retraining loss composition") {
  ScorerModel model = tiny_model(35);
  CalibrationExample ex;
  ex.query_tokens = {3, 8};
  ex.candidates = list_of({candidate("10", "a", -1.0, 2, true),
                           candidate("11", "b", -1.5, 1, true),
                           candidate("12", "x", -2.0, 0, false)});
  ex.truth = truth_of({{"a", 2}, {"b", 1}});

  CalibrationConfig config;  // defaults: beta 0.002, lambda 0.001, alpha 0.6, gamma 100

  SUBCASE("gamma = 0 leaves the token term alone") {
    CalibrationConfig no_seq = config;
    no_seq.gamma = 0.0;
    auto weights = token_target_weights(ex.candidates, ex.truth, config.beta);
    CHECK(retraining_loss(model, {ex}, no_seq) ==
          doctest::Approx(token_calibration_loss(model, ex.query_tokens,
                                                 ex.candidates, weights))
              .epsilon(1e-12));
  }

  SUBCASE("decomposes into token + gamma * sequence") {
    auto weights = token_target_weights(ex.candidates, ex.truth, config.beta);
    double token = token_calibration_loss(model, ex.query_tokens, ex.candidates, weights);
    std::vector<double> scores;
    for (const auto& cand : ex.candidates.candidates) {
      scores.push_back(length_penalized_score(model, ex.query_tokens, cand,
                                              config.alpha_len));
    }
    double seq = sequence_calibration_loss(scores, config.lambda);
    CHECK(retraining_loss(model, {ex}, config) ==
          doctest::Approx(token + config.gamma * seq).epsilon(1e-12));
  }

  SUBCASE("both terms zero gives zero") {
    CalibrationConfig zero = config;
    zero.gamma = 0.0;
    CalibrationExample empty_weights = ex;
    // judged grade-0 candidates only: every token weight is 0
    empty_weights.candidates = list_of({candidate("10", "z", -1.0, 0, true)});
    empty_weights.truth = truth_of({{"other", 1}});
    CHECK(retraining_loss(model, {empty_weights}, zero) == 0.0);
  }
}

TEST_CASE("calibration losses match finite differences") {
  Rng rng(36);
  ScorerModel model = tiny_model(37);
  CalibrationExample ex;
  ex.query_tokens = random_query(rng, model.config.query_vocab);
  ex.candidates = list_of({candidate("10", "a", -1.0, 2, true),
                           candidate("21", "b", -1.2, 1, true),
                           candidate("302", "x", -2.0, 0, false)});
  ex.truth = truth_of({{"a", 2}, {"b", 1}});

  SUBCASE("token term (gamma = 0), Eq.18 route") {
    CalibrationConfig config;
    config.gamma = 0.0;
    GradientSet analytic = parameter_gradients(
        model, [&](const ScorerModel& m, GradientSet& g) {
          return retraining_loss_grad(m, {ex}, config, g);
        });
    GradientSet fd = finite_difference(model, [&](const ScorerModel& m) {
      return retraining_loss(m, {ex}, config);
    });
    CHECK(max_rel_error(analytic, fd) < 1e-3);
  }

  SUBCASE("sequence term isolated via beta -> tiny weights") {
    // keep the token term negligible but valid; compare the combined loss
    CalibrationConfig config;
    config.gamma = 5.0;
    GradientSet analytic = parameter_gradients(
        model, [&](const ScorerModel& m, GradientSet& g) {
          return retraining_loss_grad(m, {ex}, config, g);
        });
    GradientSet fd = finite_difference(model, [&](const ScorerModel& m) {
      return retraining_loss(m, {ex}, config);
    });
    CHECK(max_rel_error(analytic, fd) < 1e-3);
  }
}

TEST_CASE("calibration repairs a rigged misordered toy task") {
  // beam order disagrees with grade order; after re-training on the frozen
  // lists, Kendall-tau between length-penalized scores and grades must not
  // decrease
  ScorerModel model = tiny_model(38);
  std::vector<int> query{5, 11};

  CalibrationExample ex;
  ex.query_tokens = query;
  std::vector<GeneratedCandidate> beams{candidate("00", "low", 0.0, 1, true),
                                        candidate("11", "mid", -0.5, 2, true),
                                        candidate("22", "high", -1.0, 3, true)};
  // fill in the model's actual scores so the rigged order is real
  for (auto& b : beams) b.seq_logprob = sequence_logprob(model, query, b.docid);
  ex.candidates = sort_to_target_order("q", beams);
  ex.truth = truth_of({{"high", 3}, {"mid", 2}, {"low", 1}});

  CalibrationConfig config;
  auto tau_of = [&](const ScorerModel& m) {
    std::vector<double> scores;
    std::vector<int> grades;
    for (const auto& b : beams) {
      scores.push_back(length_penalized_score(m, query, b, config.alpha_len));
      grades.push_back(b.grade);
    }
    return kendall_tau(scores, grades);
  };

  double before = tau_of(model);
  AdamConfig adam;
  adam.total_steps = 120;
  adam.weight_decay = 0.0;
  AdamState state = AdamState::zeros_like(model);
  for (int step = 0; step < 120; ++step) {
    GradientSet grads = parameter_gradients(
        model, [&](const ScorerModel& m, GradientSet& g) {
          return retraining_loss_grad(m, {ex}, config, g);
        });
    optimizer_step(model, grads, state, step, adam);
  }
  double after = tau_of(model);
  CHECK(after >= before);
  CHECK(after == doctest::Approx(1.0));  // fully repaired on this toy
}
