// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria with a runtime budget fail when the budget is exceeded.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "listgen/calibration.hpp"
#include "listgen/dataset.hpp"
#include "listgen/decoder.hpp"
#include "listgen/docids.hpp"
#include "listgen/embedding.hpp"
#include "listgen/metrics.hpp"
#include "listgen/model.hpp"
#include "listgen/objectives.hpp"
#include "listgen/rng.hpp"
#include "listgen/trainer.hpp"

using namespace listgen;

namespace {

struct Criterion {
  int id;
  std::string description;
  std::function<bool(std::string&)> body;
  double budget_seconds = 0.0;  // 0 disables the budget
};

ScorerModel tiny_model(std::uint64_t seed) {
  ModelConfig config;
  config.query_vocab = 32;
  config.embed_dim = 8;
  config.hidden_dim = 16;
  config.seed = seed;
  return ScorerModel::init(config);
}

std::vector<int> random_query(Rng& rng, int vocab) {
  std::vector<int> q(1 + rng.below(4));
  for (auto& t : q) t = static_cast<int>(rng.below(vocab));
  return q;
}

Docid random_docid(Rng& rng, int max_digits = 4) {
  Docid d;
  d.digits.resize(1 + rng.below(max_digits));
  for (auto& digit : d.digits) digit = static_cast<std::uint8_t>(rng.below(10));
  return d;
}

GradientSet finite_difference(const ScorerModel& model,
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

double max_rel_error(const GradientSet& a, const GradientSet& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double denom = std::max(std::abs(a.values[i]) + std::abs(b.values[i]), 1e-6);
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / denom);
  }
  return worst;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------------------

bool criterion_pl_oracle(std::string& detail) {
  Rng rng(901);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + static_cast<int>(rng.below(5));  // 2..6
    ListwiseScores scores{"q", {}};
    scores.values.resize(n);
    for (auto& v : scores.values) v = rng.uniform(-3.0, 3.0);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 1);
    double total = 0.0;
    double identity_prob = 0.0;
    do {
      double p = pl_permutation_prob(scores, perm);
      total += p;
      if (std::is_sorted(perm.begin(), perm.end())) identity_prob = p;
    } while (std::next_permutation(perm.begin(), perm.end()));

    if (!close(total, 1.0, 1e-9)) {
      detail = "permutation mass " + std::to_string(total);
      return false;
    }
    if (!close(std::exp(-listmle_loss(scores)), identity_prob, 1e-9)) {
      detail = "exp(-listmle) mismatch at trial " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

bool criterion_positional_normalization(std::string& detail) {
  Rng rng(902);
  for (int c = 0; c < 1000; ++c) {
    int n = 1 + static_cast<int>(rng.below(8));
    ListwiseScores scores{"q", {}};
    scores.values.resize(n);
    for (auto& v : scores.values) v = rng.uniform(-40.0, 40.0);
    int i = 1 + static_cast<int>(rng.below(n));

    // suffix mass: swap each suffix member into position i and accumulate
    double mass = 0.0;
    for (int j = i; j <= n; ++j) {
      std::swap(scores.values[i - 1], scores.values[j - 1]);
      mass += positional_conditional(scores, i);
      std::swap(scores.values[i - 1], scores.values[j - 1]);
    }
    if (!close(mass, 1.0, 1e-12)) {
      detail = "suffix mass " + std::to_string(mass) + " at case " + std::to_string(c);
      return false;
    }
  }
  return true;
}

bool criterion_weight_reduction(std::string& detail) {
  Rng rng(903);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + static_cast<int>(rng.below(8));
    ListwiseScores scores{"q", {}};
    scores.values.resize(n);
    for (auto& v : scores.values) v = rng.uniform(-5.0, 5.0);
    double a = listwise_loss(scores, std::vector<double>(n, 1.0));
    double b = listmle_loss(scores);
    if (!close(a, b, 1e-12)) {
      detail = "alpha==1 reduction off by " + std::to_string(a - b);
      return false;
    }
  }
  for (int n = 2; n <= 16; ++n) {
    for (int i = 1; i < n; ++i) {
      if (!(position_weight(i, n) > position_weight(i + 1, n))) {
        detail = "alpha not strictly decreasing at n=" + std::to_string(n);
        return false;
      }
    }
  }
  ListwiseScores singleton{"q", {0.37}};
  if (listwise_loss(singleton, position_weights(1)) != 0.0) {
    detail = "n=1 listwise loss not exactly zero";
    return false;
  }
  return true;
}

bool criterion_gradient_suite(std::string& detail) {
  Rng rng(904);
  struct Check {
    const char* name;
    std::function<double(const ScorerModel&, GradientSet*)> loss;
  };

  for (int trial = 0; trial < 20; ++trial) {
    ScorerModel model = tiny_model(9000 + trial);
    auto query = random_query(rng, model.config.query_vocab);

    // indexing: one-document corpus
    std::vector<Document> docs{{"a", "indexing text body", std::nullopt}};
    DocidMap map;
    map.emplace("a", random_docid(rng, 3));
    // retrieval: one pair
    std::vector<PointwisePair> pair{{query, random_docid(rng, 3)}};
    // listwise list of 3 docids
    ListExample list{query, {random_docid(rng, 3), random_docid(rng, 3),
                             random_docid(rng, 3)}};

    // calibration fixtures
    CalibrationExample graded;
    graded.query_tokens = query;
    graded.candidates = sort_to_target_order(
        "q", {{Docid::from_string("10"), "a", -1.0, 2, true},
              {Docid::from_string("21"), "b", -1.5, 1, true},
              {Docid::from_string("302"), "x", -2.0, 0, false}});
    graded.truth = {"q", {{"a", 2}, {"b", 1}}};

    CalibrationExample zero_weights;  // every token weight 0 -> pure Eq.20 path
    zero_weights.query_tokens = query;
    zero_weights.candidates = sort_to_target_order(
        "q", {{Docid::from_string("10"), "a", -1.0, 0, true},
              {Docid::from_string("21"), "b", -1.5, 0, true},
              {Docid::from_string("302"), "x", -2.0, 0, true}});
    zero_weights.truth = {"q", {{"other", 1}}};

    CalibrationConfig token_only;
    token_only.gamma = 0.0;
    CalibrationConfig seq_only;
    seq_only.gamma = 1.0;
    CalibrationConfig combined;  // defaults: gamma 100

    std::vector<Check> checks{
        {"indexing", [&](const ScorerModel& m, GradientSet* g) {
           std::vector<PointwisePair> pairs{
               {m.config.tokenize_query(docs[0].text), map.at("a")}};
           return g ? pointwise_loss_grad(m, pairs, 0.0, *g)
                    : indexing_loss(m, docs, map);
         }},
        {"retrieval", [&](const ScorerModel& m, GradientSet* g) {
           return g ? pointwise_loss_grad(m, pair, 0.0, *g)
                    : retrieval_loss(m, pair);
         }},
        {"listwise", [&](const ScorerModel& m, GradientSet* g) {
           return g ? list_loss_grad(m, list, true, *g) : list_loss(m, list, true);
         }},
        {"token-calibration", [&](const ScorerModel& m, GradientSet* g) {
           return g ? retraining_loss_grad(m, {graded}, token_only, *g)
                    : retraining_loss(m, {graded}, token_only);
         }},
        {"sequence-calibration", [&](const ScorerModel& m, GradientSet* g) {
           return g ? retraining_loss_grad(m, {zero_weights}, seq_only, *g)
                    : retraining_loss(m, {zero_weights}, seq_only);
         }},
        {"retraining", [&](const ScorerModel& m, GradientSet* g) {
           return g ? retraining_loss_grad(m, {graded}, combined, *g)
                    : retraining_loss(m, {graded}, combined);
         }},
    };

    for (auto& check : checks) {
      GradientSet analytic = parameter_gradients(
          model,
          [&](const ScorerModel& m, GradientSet& g) { return check.loss(m, &g); });
      GradientSet fd = finite_difference(
          model, [&](const ScorerModel& m) { return check.loss(m, nullptr); });
      double err = max_rel_error(analytic, fd);
      if (err >= 1e-3) {
        detail = std::string(check.name) + " max rel error " + std::to_string(err) +
                 " at trial " + std::to_string(trial);
        return false;
      }
    }
  }
  return true;
}

bool criterion_decoder_equivalence(std::string& detail) {
  // 200-docid corpus built by the real clustering path
  Rng rng(905);
  std::vector<std::string> ids;
  std::vector<std::vector<double>> embeddings;
  for (int i = 0; i < 200; ++i) {
    ids.push_back("doc" + std::to_string(1000 + i));
    std::vector<double> v(6);
    for (auto& x : v) x = rng.gaussian();
    embeddings.push_back(std::move(v));
  }
  DocidMap map = assign_docids(ids, embeddings, {10, 20}, 905);
  DecimalTrie trie = DecimalTrie::build(map);

  for (int trial = 0; trial < 50; ++trial) {
    ScorerModel model = tiny_model(7000 + trial);
    auto query = random_query(rng, model.config.query_vocab);
    auto beam = constrained_beam_search(model, query, trie, 200, 200);
    auto oracle = exhaustive_rank(model, query, map, 200);
    if (beam.size() != oracle.size()) {
      detail = "size mismatch at trial " + std::to_string(trial);
      return false;
    }
    for (std::size_t i = 0; i < beam.size(); ++i) {
      if (beam[i].internal_id != oracle[i].internal_id ||
          !close(beam[i].seq_logprob, oracle[i].seq_logprob, 1e-9)) {
        detail = "rank " + std::to_string(i) + " mismatch at trial " +
                 std::to_string(trial);
        return false;
      }
    }
  }
  return true;
}

bool criterion_calibration_semantics(std::string& detail) {
  auto candidates = sort_to_target_order(
      "q", {{Docid::from_string("00"), "a", -1.0, 3, true},
            {Docid::from_string("01"), "b", -2.0, 2, true},
            {Docid::from_string("02"), "x", -3.0, 0, false},
            {Docid::from_string("03"), "y", -4.0, 0, false}});
  RankedLabelList truth{"q", {{"a", 3}, {"b", 2}}};
  auto weights = token_target_weights(candidates, truth, 0.002);
  if (weights[0] != 0.9375) {
    detail = "M=3 weight " + std::to_string(weights[0]);
    return false;
  }
  if (!close(weights[1], 8.0 / 9.0, 1e-15)) {
    detail = "M=2 weight " + std::to_string(weights[1]);
    return false;
  }
  if (weights[2] + weights[3] != 0.002) {
    detail = "absent mass " + std::to_string(weights[2] + weights[3]);
    return false;
  }

  Rng rng(906);
  const double lambda = 0.001;
  for (int c = 0; c < 1000; ++c) {
    int n = 2 + static_cast<int>(rng.below(6));
    std::vector<double> scores(n);
    scores[0] = rng.uniform(-2.0, 0.0);
    for (int i = 1; i < n; ++i) {
      scores[i] = scores[i - 1] - lambda - rng.uniform(0.0, 1.0);
    }
    if (sequence_calibration_loss(scores, lambda) != 0.0) {
      detail = "margin-satisfying instance " + std::to_string(c) + " not zero";
      return false;
    }
    // inject one violation; loss must leave the zero set
    int i = static_cast<int>(rng.below(n - 1));
    scores[i + 1] = scores[i] + rng.uniform(0.0, 0.2);
    if (!(sequence_calibration_loss(scores, lambda) > 0.0)) {
      detail = "violated instance " + std::to_string(c) + " still zero";
      return false;
    }
  }
  return true;
}

bool criterion_docid_integrity(std::string& detail) {
  DatasetBundle bundle = make_synthetic_dataset(1000, 50, {1, 2, 3}, 77);
  auto embeddings = embed_corpus(bundle.corpus, 32, 77);
  std::vector<std::string> ids;
  for (const auto& doc : bundle.corpus) ids.push_back(doc.internal_id);
  DocidMap map = assign_docids(ids, embeddings, {10, 100}, 77);

  if (map.size() != 1000) {
    detail = "map size " + std::to_string(map.size());
    return false;
  }
  std::set<std::string> unique;
  for (const auto& [id, docid] : map) unique.insert(docid.to_string());
  if (unique.size() != 1000) {
    detail = "only " + std::to_string(unique.size()) + " distinct docids";
    return false;
  }

  DecimalTrie trie = DecimalTrie::build(map);
  for (const auto& [id, docid] : map) {
    if (trie.resolve(docid) != id) {
      detail = "round-trip failed for '" + id + "'";
      return false;
    }
  }

  ModelConfig mc;
  mc.query_vocab = 512;
  mc.embed_dim = 16;
  mc.hidden_dim = 24;
  mc.seed = 5;
  ScorerModel model = ScorerModel::init(mc);
  int checked = 0;
  for (const auto& [qid, text] : bundle.queries) {
    auto decoded = constrained_beam_search(model, mc.tokenize_query(text), trie, 20, 20);
    for (const auto& d : decoded) {
      if (trie.resolve(d.docid) != d.internal_id || !map.count(d.internal_id)) {
        detail = "decoded docid failed to resolve for query '" + qid + "'";
        return false;
      }
    }
    if (++checked >= 10) break;
  }
  return true;
}

// shared state between criteria 8 and 10
struct SyntheticRun {
  std::map<std::string, double> mean_ndcg;  // system -> mean over seeds
  std::string listgr_run_bytes;             // seed 101 artifacts
  std::string listgr_report;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

ExperimentConfig synthetic_config(std::uint64_t seed) {
  ExperimentConfig config;
  config.doc_embed_dim = 48;
  config.query_vocab = 4096;
  config.embed_dim = 32;
  config.hidden_dim = 64;
  config.steps = 2000;
  config.seed = seed;
  return config;
}

struct PipelineArtifacts {
  double ndcg5 = 0.0;
  std::string run_bytes;
  std::string report;
};

PipelineArtifacts run_pipeline(const DatasetBundle& bundle, const DocidMap& docid_map,
                               const DecimalTrie& trie, const ExperimentConfig& config,
                               Variant variant, bool retrain,
                               const std::string& run_path) {
  TrainResult stage_one = train_stage_one(bundle, docid_map, config, variant, nullptr);
  ScorerModel model = std::move(stage_one.model);
  if (retrain) {
    TrainResult result =
        retrain_calibration(model, bundle, docid_map, trie, config, nullptr);
    model = std::move(result.model);
  }

  std::map<std::string, std::string> test_queries;
  for (const auto& qid : bundle.test_queries) test_queries[qid] = bundle.queries.at(qid);
  auto run = retrieve_queries(model, trie, test_queries, config.beam_width, config.k);
  write_trec_run(run, run_path);

  auto report = evaluate_run(run, bundle.qrels, {MetricSpec::parse("ndcg@5")}, 3);
  PipelineArtifacts artifacts;
  artifacts.ndcg5 = report.means[0].second;
  artifacts.run_bytes = slurp(run_path);
  artifacts.report = report.to_tsv() + report.per_query_jsonl();
  return artifacts;
}

SyntheticRun g_synthetic;

bool criterion_directional(std::string& detail) {
  const auto dir = std::filesystem::temp_directory_path() / "listgen_acceptance";
  std::filesystem::create_directories(dir);

  DatasetBundle bundle = make_synthetic_dataset(200, 60, {0, 1, 2, 3}, 7);
  ExperimentConfig base = synthetic_config(7);
  auto embeddings = embed_corpus(bundle.corpus, base.doc_embed_dim, 7);
  std::vector<std::string> ids;
  for (const auto& doc : bundle.corpus) ids.push_back(doc.internal_id);
  DocidMap docid_map = assign_docids(ids, embeddings, {base.branching, base.leaf_max}, 7);
  DecimalTrie trie = DecimalTrie::build(docid_map);

  const std::vector<std::uint64_t> seeds{101, 102, 103};
  std::map<std::string, double> totals;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig config = synthetic_config(seed);
    auto run_path = [&](const char* name) {
      return (dir / (std::string(name) + "_" + std::to_string(seed) + ".run")).string();
    };

    auto pointwise = run_pipeline(bundle, docid_map, trie, config, Variant::kPointwise,
                                  false, run_path("pointwise"));
    auto listmle = run_pipeline(bundle, docid_map, trie, config, Variant::kListMLE,
                                false, run_path("listmle"));
    auto listgr = run_pipeline(bundle, docid_map, trie, config, Variant::kListGR,
                               false, run_path("listgr"));
    auto retrained = run_pipeline(bundle, docid_map, trie, config, Variant::kListGR,
                                  true, run_path("listgr_retrain"));
    totals["pointwise"] += pointwise.ndcg5;
    totals["listmle"] += listmle.ndcg5;
    totals["listgr"] += listgr.ndcg5;
    totals["listgr_retrain"] += retrained.ndcg5;

    if (seed == seeds.front()) {
      g_synthetic.listgr_run_bytes = retrained.run_bytes;
      g_synthetic.listgr_report = retrained.report;
    }
  }

  for (auto& [name, value] : totals) {
    g_synthetic.mean_ndcg[name] = value / seeds.size();
  }
  const auto& m = g_synthetic.mean_ndcg;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "ndcg@5 retrain=%.4f listgr=%.4f listmle=%.4f pointwise=%.4f",
                m.at("listgr_retrain"), m.at("listgr"), m.at("listmle"),
                m.at("pointwise"));
  detail = buf;

  if (!(m.at("listgr_retrain") >= m.at("listgr") && m.at("listgr") >= m.at("listmle") &&
        m.at("listmle") >= m.at("pointwise"))) {
    return false;
  }
  if (!(m.at("listgr_retrain") - m.at("pointwise") >= 0.02)) return false;
  return true;
}

bool criterion_metric_fixtures(std::string& detail) {
  QueryJudgments graded{{"a", 3}, {"b", 1}};
  RunRanking swapped{"q", {{"b", -0.1}, {"a", -0.2}}};
  if (!close(ndcg_at_k(swapped, graded, 2), 0.7098097413968655, 1e-6)) {
    detail = "ndcg fixture " + std::to_string(ndcg_at_k(swapped, graded, 2));
    return false;
  }
  RunRanking ordered{"q", {{"a", -0.1}, {"b", -0.2}}};
  if (!close(err_at_k(ordered, graded, 2, 3), 0.8828125, 1e-6)) {
    detail = "err fixture " + std::to_string(err_at_k(ordered, graded, 2, 3));
    return false;
  }
  RunRanking single{"q", {{"a", -0.5}}};
  if (!close(err_at_k(single, QueryJudgments{{"a", 1}}, 1, 1), 0.5, 1e-12)) {
    detail = "binary err fixture";
    return false;
  }
  if (!close(ndcg_at_k(ordered, graded, 5), 1.0, 1e-12)) {
    detail = "ideal ndcg fixture";
    return false;
  }
  return true;
}

bool criterion_determinism(std::string& detail) {
  if (g_synthetic.listgr_run_bytes.empty()) {
    detail = "criterion 8 artifacts unavailable";
    return false;
  }
  const auto dir = std::filesystem::temp_directory_path() / "listgen_acceptance";
  DatasetBundle bundle = make_synthetic_dataset(200, 60, {0, 1, 2, 3}, 7);
  ExperimentConfig config = synthetic_config(101);
  auto embeddings = embed_corpus(bundle.corpus, config.doc_embed_dim, 7);
  std::vector<std::string> ids;
  for (const auto& doc : bundle.corpus) ids.push_back(doc.internal_id);
  DocidMap docid_map =
      assign_docids(ids, embeddings, {config.branching, config.leaf_max}, 7);
  DecimalTrie trie = DecimalTrie::build(docid_map);

  auto repeat = run_pipeline(bundle, docid_map, trie, config, Variant::kListGR, true,
                             (dir / "repeat_101.run").string());
  if (repeat.run_bytes != g_synthetic.listgr_run_bytes) {
    detail = "run files differ between identical invocations";
    return false;
  }
  if (repeat.report != g_synthetic.listgr_report) {
    detail = "metric reports differ between identical invocations";
    return false;
  }
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {1, "Plackett-Luce oracle sums to 1; exp(-listmle) matches identity",
       criterion_pl_oracle, 10.0},
      {2, "positional conditional suffix softmax normalizes to 1e-12",
       criterion_positional_normalization, 0.0},
      {3, "alpha==1 reduces to listmle; alpha decreasing; n=1 loss is 0",
       criterion_weight_reduction, 0.0},
      {4, "analytic gradients match finite differences for all six losses",
       criterion_gradient_suite, 120.0},
      {5, "full-width beam search equals exhaustive ranking on 50 cases",
       criterion_decoder_equivalence, 60.0},
      {6, "token weights and hinge zero set follow the closed forms",
       criterion_calibration_semantics, 0.0},
      {7, "1000-document docid map is injective and trie-resolvable",
       criterion_docid_integrity, 0.0},
      {8, "synthetic reproduction orders retrain >= listgr >= listmle >= pointwise",
       criterion_directional, 900.0},
      {9, "nDCG/ERR hand-computed fixtures match to 1e-6",
       criterion_metric_fixtures, 0.0},
      {10, "repeating the synthetic pipeline is byte-identical",
       criterion_determinism, 0.0},
  };

  int failures = 0;
  for (auto& criterion : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criterion.budget_seconds > 0.0 && elapsed > criterion.budget_seconds) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + std::string("over budget ") +
                std::to_string(criterion.budget_seconds) + "s";
    }
    std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL",
                criterion.id, criterion.description.c_str(), elapsed,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
