// listgen: desk-scale listwise generative retrieval.
//
// Subcommands: build-docids, train, retrain, retrieve, evaluate,
// make-synthetic. Every failure exits nonzero with a one-line diagnostic.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "listgen/checkpoint.hpp"
#include "listgen/dataset.hpp"
#include "listgen/decoder.hpp"
#include "listgen/docids.hpp"
#include "listgen/embedding.hpp"
#include "listgen/trainer.hpp"

namespace {

using namespace listgen;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::string seed_text;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "key = value config file");
  cmd->add_option("--set", opts.overrides,
                  "config override as key=value (repeatable)");
  cmd->add_option("--seed", opts.seed_text, "random seed");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig config;
  if (!opts.config_path.empty()) {
    config.apply(parse_config_file(opts.config_path));
  }
  std::map<std::string, std::string> overrides;
  for (const auto& kv : opts.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    }
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (!opts.seed_text.empty()) overrides["seed"] = opts.seed_text;
  config.apply(overrides);
  return config;
}

void echo_logger(const std::string& line) { std::cout << line << '\n'; }

void write_loss_log(const std::vector<double>& losses, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6f", i + 1, losses[i]);
    out << buf << '\n';
  }
}

DatasetBundle load_bundle(const std::string& data_dir,
                          const std::string& pseudo_queries_path) {
  DatasetBundle bundle = read_dataset(data_dir);
  if (!pseudo_queries_path.empty()) {
    bundle.pseudo_queries = read_pseudo_queries(pseudo_queries_path);
    bundle.validate();
  }
  return bundle;
}

int cmd_build_docids(const std::string& corpus_path, const std::string& embeddings_path,
                     const std::string& out_path, const CommonOpts& opts) {
  ExperimentConfig config = resolve_config(opts);
  std::vector<Document> corpus = read_corpus(corpus_path);
  if (!embeddings_path.empty()) {
    auto precomputed = read_embeddings(embeddings_path);
    for (auto& doc : corpus) {
      auto it = precomputed.find(doc.internal_id);
      if (it != precomputed.end()) doc.embedding = it->second;
    }
  }
  auto embeddings = embed_corpus(corpus, config.doc_embed_dim, config.seed);
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& doc : corpus) ids.push_back(doc.internal_id);

  DocidMap map = assign_docids(ids, embeddings, {config.branching, config.leaf_max},
                               config.seed);
  write_docid_map(map, out_path);

  DecimalTrie trie = DecimalTrie::build(map);
  int leaf_width = 1;
  for (int v = config.leaf_max - 1; v >= 10; v /= 10) ++leaf_width;
  std::cout << "documents\t" << map.size() << '\n';
  std::cout << "max_depth\t" << trie.max_depth() << '\n';
  std::cout << "leaf_width\t" << leaf_width << '\n';
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& pseudo_path,
              const std::string& docids_path, const std::string& variant_name,
              const std::string& out_path, const CommonOpts& opts) {
  ExperimentConfig config = resolve_config(opts);
  DatasetBundle bundle = load_bundle(data_dir, pseudo_path);
  DocidMap docid_map = read_docid_map(docids_path);
  Variant variant = parse_variant(variant_name);

  TrainResult result =
      train_stage_one(bundle, docid_map, config, variant, echo_logger);
  save_checkpoint(result.model, config.steps, out_path);
  write_loss_log(result.step_loss, out_path + ".loss");
  std::cout << "checkpoint written to " << out_path << '\n';
  return 0;
}

int cmd_retrain(const std::string& data_dir, const std::string& pseudo_path,
                const std::string& docids_path, const std::string& checkpoint_path,
                const std::string& out_path, const CommonOpts& opts) {
  ExperimentConfig config = resolve_config(opts);
  DatasetBundle bundle = load_bundle(data_dir, pseudo_path);
  DocidMap docid_map = read_docid_map(docids_path);
  DecimalTrie trie = DecimalTrie::build(docid_map);
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);

  TrainResult result = retrain_calibration(loaded.model, bundle, docid_map, trie,
                                           config, echo_logger);
  save_checkpoint(result.model, loaded.step_count + config.retrain_steps, out_path);
  write_loss_log(result.step_loss, out_path + ".loss");
  std::cout << "checkpoint written to " << out_path << '\n';
  return 0;
}

int cmd_retrieve(const std::string& checkpoint_path, const std::string& docids_path,
                 const std::string& queries_path, const std::string& split_file,
                 const std::string& split, const std::string& out_path,
                 const CommonOpts& opts) {
  ExperimentConfig config = resolve_config(opts);
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  DocidMap docid_map = read_docid_map(docids_path);
  DecimalTrie trie = DecimalTrie::build(docid_map);
  auto queries = read_queries(queries_path);

  if (!split_file.empty() && split != "all") {
    std::set<std::string> train, test;
    read_split(split_file, train, test);
    const auto& keep = split == "train" ? train : test;
    for (auto it = queries.begin(); it != queries.end();) {
      it = keep.count(it->first) ? std::next(it) : queries.erase(it);
    }
  }
  if (queries.empty()) throw std::runtime_error("no queries selected");

  double latency = 0.0;
  auto run = retrieve_queries(loaded.model, trie, queries, config.beam_width,
                              config.k, &latency);
  write_trec_run(run, out_path);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", latency);
  std::cout << "queries\t" << run.size() << '\n';
  std::cout << "mean_latency_ms\t" << buf << '\n';
  std::cout << "run written to " << out_path << '\n';
  return 0;
}

int cmd_evaluate(const std::string& run_path, const std::string& qrels_path,
                 const std::string& docids_path, const std::string& metrics_text,
                 int g_max, const std::string& out_path,
                 const std::string& per_query_path) {
  auto run = read_trec_run(run_path);
  auto qrels = read_qrels(qrels_path);

  if (!docids_path.empty()) {
    // run docids missing from the corpus count as non-relevant, but warn
    DocidMap docid_map = read_docid_map(docids_path);
    for (const auto& ranking : run) {
      for (const auto& entry : ranking.entries) {
        if (!docid_map.count(entry.internal_id)) {
          std::cerr << "warning: run references unknown docid '"
                    << entry.internal_id << "' (query " << ranking.query_id
                    << ")\n";
        }
      }
    }
  }

  std::vector<MetricSpec> metrics;
  std::stringstream names(metrics_text);
  std::string name;
  while (std::getline(names, name, ',')) {
    if (!name.empty()) metrics.push_back(MetricSpec::parse(name));
  }
  if (metrics.empty()) throw std::invalid_argument("no metrics requested");

  if (g_max <= 0) {
    for (const auto& j : qrels) g_max = std::max(g_max, j.grade);
    if (g_max <= 0) g_max = 1;
  }

  auto report = evaluate_run(run, qrels, metrics, g_max,
                             [](const std::string& m) { std::cerr << m << '\n'; });
  std::cout << report.to_tsv();
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    out << report.to_tsv();
  }
  if (!per_query_path.empty()) {
    std::ofstream out(per_query_path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot open '" + per_query_path + "' for writing");
    }
    out << report.per_query_jsonl();
  }
  return 0;
}

int cmd_make_synthetic(int n_docs, int n_queries, const std::string& grades_text,
                       const std::string& out_dir, const CommonOpts& opts) {
  ExperimentConfig config = resolve_config(opts);
  std::set<int> grades;
  std::stringstream parts(grades_text);
  std::string part;
  while (std::getline(parts, part, ',')) {
    if (!part.empty()) grades.insert(std::stoi(part));
  }
  DatasetBundle bundle = make_synthetic_dataset(n_docs, n_queries, grades, config.seed);
  write_dataset(bundle, out_dir);
  std::cout << "documents\t" << bundle.corpus.size() << '\n';
  std::cout << "queries\t" << bundle.queries.size() << '\n';
  std::cout << "train_queries\t" << bundle.train_queries.size() << '\n';
  std::cout << "test_queries\t" << bundle.test_queries.size() << '\n';
  std::cout << "dataset written to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"listwise generative retrieval engine"};
  app.require_subcommand(1);

  CommonOpts opts;

  // build-docids
  std::string corpus_path, embeddings_path, out_path;
  auto* build = app.add_subcommand("build-docids",
                                   "cluster a corpus into semantic docids");
  build->add_option("--corpus", corpus_path, "corpus tsv")->required();
  build->add_option("--embeddings", embeddings_path, "precomputed embeddings tsv");
  build->add_option("--out", out_path, "docid map output path")->required();
  add_common(build, opts);

  // train
  std::string data_dir, pseudo_path, docids_path, variant_name = "listgr";
  auto* train = app.add_subcommand("train", "stage-one training");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--pseudo-queries", pseudo_path, "pseudo-query tsv");
  train->add_option("--docids", docids_path, "docid map path")->required();
  train->add_option("--variant", variant_name, "listgr | listmle | pointwise");
  train->add_option("--out", out_path, "checkpoint output path")->required();
  add_common(train, opts);

  // retrain
  std::string checkpoint_path;
  auto* retrain = app.add_subcommand("retrain", "relevance calibration re-training");
  retrain->add_option("--data", data_dir, "dataset directory")->required();
  retrain->add_option("--pseudo-queries", pseudo_path, "pseudo-query tsv");
  retrain->add_option("--docids", docids_path, "docid map path")->required();
  retrain->add_option("--checkpoint", checkpoint_path, "stage-one checkpoint")
      ->required();
  retrain->add_option("--out", out_path, "checkpoint output path")->required();
  add_common(retrain, opts);

  // retrieve
  std::string queries_path, split_file, split = "all";
  auto* retrieve = app.add_subcommand("retrieve", "decode ranked docid lists");
  retrieve->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  retrieve->add_option("--docids", docids_path, "docid map path")->required();
  retrieve->add_option("--queries", queries_path, "queries tsv")->required();
  retrieve->add_option("--split-file", split_file, "split tsv");
  retrieve->add_option("--split", split, "train | test | all");
  retrieve->add_option("--out", out_path, "TREC run output path")->required();
  add_common(retrieve, opts);

  // evaluate
  std::string run_path, qrels_path, per_query_path;
  std::string metrics_text = "ndcg@5,ndcg@20,p@20,err@20,mrr@20,hits@10";
  int g_max = 0;
  auto* evaluate = app.add_subcommand("evaluate", "score a run against qrels");
  evaluate->add_option("--run", run_path, "TREC run file")->required();
  evaluate->add_option("--qrels", qrels_path, "qrels file")->required();
  evaluate->add_option("--docids", docids_path,
                       "docid map; warns when the run references unknown docids");
  evaluate->add_option("--metrics", metrics_text, "comma-separated metric list");
  evaluate->add_option("--g-max", g_max, "maximum grade for ERR (default: observed)");
  evaluate->add_option("--out", out_path, "report output path");
  evaluate->add_option("--per-query", per_query_path, "per-query jsonl output path");

  // make-synthetic
  int n_docs = 200, n_queries = 60;
  std::string grades_text = "0,1,2,3";
  auto* synth = app.add_subcommand("make-synthetic", "generate a synthetic dataset");
  synth->add_option("--docs", n_docs, "number of documents");
  synth->add_option("--queries", n_queries, "number of queries");
  synth->add_option("--grades", grades_text, "comma-separated grade set");
  synth->add_option("--out", out_path, "output directory")->required();
  add_common(synth, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      return cmd_build_docids(corpus_path, embeddings_path, out_path, opts);
    }
    if (train->parsed()) {
      return cmd_train(data_dir, pseudo_path, docids_path, variant_name, out_path,
                       opts);
    }
    if (retrain->parsed()) {
      return cmd_retrain(data_dir, pseudo_path, docids_path, checkpoint_path,
                         out_path, opts);
    }
    if (retrieve->parsed()) {
      return cmd_retrieve(checkpoint_path, docids_path, queries_path, split_file,
                          split, out_path, opts);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(run_path, qrels_path, docids_path, metrics_text, g_max,
                          out_path, per_query_path);
    }
    if (synth->parsed()) {
      return cmd_make_synthetic(n_docs, n_queries, grades_text, out_path, opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "listgen: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
