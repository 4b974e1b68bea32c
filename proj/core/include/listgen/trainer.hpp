#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "listgen/calibration.hpp"
#include "listgen/dataset.hpp"
#include "listgen/decoder.hpp"
#include "listgen/docids.hpp"
#include "listgen/metrics.hpp"
#include "listgen/model.hpp"
#include "listgen/objectives.hpp"

namespace listgen {

// pListMLE (position-aware listwise), ListMLE ablation, or the plain
// indexing+retrieval objective.
enum class Variant { kListGR, kListMLE, kPointwise };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant v);

struct ExperimentConfig {
  // docid construction
  int branching = 10;
  int leaf_max = 100;
  int doc_embed_dim = 64;

  // scorer
  int query_vocab = 4096;
  int embed_dim = 32;
  int hidden_dim = 64;

  // stage-one training
  double base_lr = 1e-3;
  double warmup_fraction = 0.1;
  double weight_decay = 0.01;
  double label_smoothing = 0.0;  // pointwise terms only
  int steps = 2000;
  int batch_indexing = 8;
  int batch_retrieval = 8;
  int batch_lists = 4;
  int samples_per_query = 10;
  int max_doc_tokens = 512;

  // relevance calibration re-training
  int retrain_steps = 500;
  int retrain_batch_queries = 4;
  double beta = 0.002;
  double lambda = 0.001;
  double alpha_len = 0.6;
  double gamma = 100.0;
  bool retrain_add_training_terms = false;

  // decoding
  int beam_width = 20;
  int k = 20;

  std::uint64_t seed = 1;

  ModelConfig model_config() const;
  CalibrationConfig calibration_config() const;

  // Applies "key = value" settings; unknown keys throw.
  void apply(const std::map<std::string, std::string>& settings);
};

// Plain "key = value" file, '#' comments, blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);

using LogSink = std::function<void(const std::string&)>;

struct TrainResult {
  ScorerModel model;
  std::vector<double> step_loss;  // per-step batch-mean loss
};

// Stage-one loop. Every step mixes indexing pairs, retrieval pairs
// (pseudo-queries included), and sampled ground-truth lists; the variant
// selects the list term (absent for kPointwise). Queries with no relevant
// docid are warned about and skipped.
TrainResult train_stage_one(const DatasetBundle& bundle, const DocidMap& docid_map,
                            const ExperimentConfig& config, Variant variant,
                            const LogSink& log = nullptr);

// Re-training: decodes beam_width candidates per training query with the
// given stage-one model, freezes those lists, then optimizes the combined
// calibration loss. retrain_steps == 0 returns the input model unchanged.
TrainResult retrain_calibration(const ScorerModel& stage_one,
                                const DatasetBundle& bundle,
                                const DocidMap& docid_map, const DecimalTrie& trie,
                                const ExperimentConfig& config,
                                const LogSink& log = nullptr);

// Decodes each query (sorted by qid) into a ranked run.
std::vector<RunRanking> retrieve_queries(const ScorerModel& model,
                                         const DecimalTrie& trie,
                                         const std::map<std::string, std::string>& queries,
                                         int beam_width, int k,
                                         double* mean_latency_ms = nullptr);

// TREC run file: "qid Q0 docid rank score listgen", rank starting at 1.
void write_trec_run(const std::vector<RunRanking>& run, const std::string& path,
                    const std::string& tag = "listgen");
std::vector<RunRanking> read_trec_run(const std::string& path);

struct MetricSpec {
  enum Kind { kNdcg, kErr, kPrecision, kMrr, kHits } kind;
  int k = 0;

  std::string name() const;
  static MetricSpec parse(const std::string& text);  // e.g. "ndcg@5"
};

struct MetricsReport {
  std::vector<std::pair<std::string, double>> means;
  // per query, metrics in request order
  std::map<std::string, std::vector<std::pair<std::string, double>>> per_query;

  std::string to_tsv() const;        // "metric<TAB>value" lines
  std::string per_query_jsonl() const;
};

// Evaluates over the queries present in the run that carry judgments.
// Docids missing from the corpus count as non-relevant (warned via log).
MetricsReport evaluate_run(const std::vector<RunRanking>& run,
                           const std::vector<RelevanceJudgment>& qrels,
                           const std::vector<MetricSpec>& metrics, int g_max,
                           const LogSink& log = nullptr);

}  // namespace listgen
