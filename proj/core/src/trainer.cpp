#include "listgen/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "listgen/checkpoint.hpp"
#include "listgen/optimizer.hpp"
#include "listgen/rng.hpp"
#include "listgen/text.hpp"

namespace listgen {

Variant parse_variant(const std::string& name) {
  if (name == "listgr") return Variant::kListGR;
  if (name == "listmle") return Variant::kListMLE;
  if (name == "pointwise") return Variant::kPointwise;
  throw std::invalid_argument("unknown variant '" + name +
                              "' (expected listgr, listmle, or pointwise)");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kListGR: return "listgr";
    case Variant::kListMLE: return "listmle";
    case Variant::kPointwise: return "pointwise";
  }
  return "?";
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig mc;
  mc.query_vocab = query_vocab;
  mc.embed_dim = embed_dim;
  mc.hidden_dim = hidden_dim;
  mc.seed = seed;
  return mc;
}

CalibrationConfig ExperimentConfig::calibration_config() const {
  return {beta, lambda, alpha_len, gamma};
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out;
  if (!(in >> out) || !(in >> std::ws).eof()) {
    throw std::invalid_argument("bad value '" + value + "' for config key '" + key + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("bad value '" + value + "' for config key '" + key + "'");
}

}  // namespace

void ExperimentConfig::apply(const std::map<std::string, std::string>& settings) {
  for (const auto& [key, value] : settings) {
    if (key == "branching") branching = parse_number<int>(key, value);
    else if (key == "leaf_max") leaf_max = parse_number<int>(key, value);
    else if (key == "doc_embed_dim") doc_embed_dim = parse_number<int>(key, value);
    else if (key == "query_vocab") query_vocab = parse_number<int>(key, value);
    else if (key == "embed_dim") embed_dim = parse_number<int>(key, value);
    else if (key == "hidden_dim") hidden_dim = parse_number<int>(key, value);
    else if (key == "base_lr") base_lr = parse_number<double>(key, value);
    else if (key == "warmup_fraction") warmup_fraction = parse_number<double>(key, value);
    else if (key == "weight_decay") weight_decay = parse_number<double>(key, value);
    else if (key == "label_smoothing") label_smoothing = parse_number<double>(key, value);
    else if (key == "steps") steps = parse_number<int>(key, value);
    else if (key == "batch_indexing") batch_indexing = parse_number<int>(key, value);
    else if (key == "batch_retrieval") batch_retrieval = parse_number<int>(key, value);
    else if (key == "batch_lists") batch_lists = parse_number<int>(key, value);
    else if (key == "samples_per_query") samples_per_query = parse_number<int>(key, value);
    else if (key == "max_doc_tokens") max_doc_tokens = parse_number<int>(key, value);
    else if (key == "retrain_steps") retrain_steps = parse_number<int>(key, value);
    else if (key == "retrain_batch_queries") retrain_batch_queries = parse_number<int>(key, value);
    else if (key == "beta") beta = parse_number<double>(key, value);
    else if (key == "lambda") lambda = parse_number<double>(key, value);
    else if (key == "alpha_len") alpha_len = parse_number<double>(key, value);
    else if (key == "gamma") gamma = parse_number<double>(key, value);
    else if (key == "retrain_add_training_terms") retrain_add_training_terms = parse_bool(key, value);
    else if (key == "beam_width") beam_width = parse_number<int>(key, value);
    else if (key == "k") k = parse_number<int>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::map<std::string, std::string> settings;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    }
    settings[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return settings;
}

namespace {

void log_line(const LogSink& log, const std::string& message) {
  if (log) log(message);
}

// A seeded shuffled index stream that reshuffles every pass. Streams own
// independent rngs so variants that skip one stream stay in lockstep on
// the others.
class ExampleStream {
 public:
  ExampleStream(std::size_t size, std::uint64_t seed)
      : size_(size), rng_(seed) {}

  std::size_t next() {
    if (cursor_ >= order_.size()) {
      order_.resize(size_);
      for (std::size_t i = 0; i < size_; ++i) order_[i] = i;
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

 private:
  std::size_t size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct StageOneData {
  std::vector<PointwisePair> indexing_pairs;
  std::vector<PointwisePair> retrieval_pairs;
  // per relevant query: tokenized query + judgments for list sampling
  struct ListQuery {
    std::vector<int> query_tokens;
    std::vector<RelevanceJudgment> judgments;
    std::vector<RankedLabelList> pool;  // refreshed once consumed
    std::size_t pool_next = 0;
    int pool_epoch = 0;
  };
  std::vector<ListQuery> list_queries;
};

StageOneData prepare_stage_one(const DatasetBundle& bundle, const DocidMap& docid_map,
                               const ExperimentConfig& config, const ModelConfig& mc,
                               const LogSink& log) {
  bundle.validate();
  StageOneData data;

  for (const auto& doc : bundle.corpus) {
    auto it = docid_map.find(doc.internal_id);
    if (it == docid_map.end()) {
      throw std::runtime_error("document '" + doc.internal_id +
                               "' missing from the docid map");
    }
    auto tokens = mc.tokenize_query(doc.text);
    if (static_cast<int>(tokens.size()) > config.max_doc_tokens) {
      tokens.resize(config.max_doc_tokens);
    }
    data.indexing_pairs.push_back({std::move(tokens), it->second});
  }

  auto grouped = group_qrels(bundle.qrels);
  for (const auto& [qid, judgments] : grouped) {
    if (!bundle.train_queries.empty() && !bundle.train_queries.count(qid)) continue;
    auto query_it = bundle.queries.find(qid);
    if (query_it == bundle.queries.end()) continue;
    bool any_relevant = false;
    for (const auto& j : judgments) {
      if (j.grade >= 1) {
        any_relevant = true;
        data.retrieval_pairs.push_back(
            {mc.tokenize_query(query_it->second), docid_map.at(j.internal_id)});
      }
    }
    if (!any_relevant) {
      log_line(log, "warning: query '" + qid + "' has no relevant documents, skipped");
      continue;
    }
    data.list_queries.push_back({mc.tokenize_query(query_it->second), judgments});
  }

  for (const auto& [doc_id, text] : bundle.pseudo_queries) {
    auto it = docid_map.find(doc_id);
    if (it == docid_map.end()) {
      throw std::runtime_error("pseudo-query references unknown docid '" + doc_id + "'");
    }
    data.retrieval_pairs.push_back({mc.tokenize_query(text), it->second});
  }

  if (data.indexing_pairs.empty()) throw std::runtime_error("empty corpus");
  if (data.retrieval_pairs.empty()) {
    throw std::runtime_error("no training queries with relevant documents");
  }
  return data;
}

}  // namespace

TrainResult train_stage_one(const DatasetBundle& bundle, const DocidMap& docid_map,
                            const ExperimentConfig& config, Variant variant,
                            const LogSink& log) {
  const ModelConfig mc = config.model_config();
  StageOneData data = prepare_stage_one(bundle, docid_map, config, mc, log);

  TrainResult result{ScorerModel::init(mc), {}};
  AdamConfig adam{config.base_lr, 0.9, 0.999, 1e-8, config.weight_decay,
                  config.steps, config.warmup_fraction};
  AdamState adam_state = AdamState::zeros_like(result.model);

  ExampleStream indexing_stream(data.indexing_pairs.size(),
                                mix_hash(config.seed, stable_hash("indexing")));
  ExampleStream retrieval_stream(data.retrieval_pairs.size(),
                                 mix_hash(config.seed, stable_hash("retrieval")));
  ExampleStream list_stream(data.list_queries.size(),
                            mix_hash(config.seed, stable_hash("lists")));

  const bool use_lists = variant != Variant::kPointwise && !data.list_queries.empty();
  const bool position_aware = variant == Variant::kListGR;

  const double divisor =
      static_cast<double>(config.batch_indexing + config.batch_retrieval +
                          config.batch_lists);

  std::vector<PointwisePair> batch_pairs;
  GradientSet grads = GradientSet::zeros_like(result.model);
  result.step_loss.reserve(config.steps);

  for (int step = 0; step < config.steps; ++step) {
    std::fill(grads.values.begin(), grads.values.end(), 0.0);
    double loss = 0.0;

    batch_pairs.clear();
    for (int i = 0; i < config.batch_indexing; ++i) {
      batch_pairs.push_back(data.indexing_pairs[indexing_stream.next()]);
    }
    for (int i = 0; i < config.batch_retrieval; ++i) {
      batch_pairs.push_back(data.retrieval_pairs[retrieval_stream.next()]);
    }
    loss += pointwise_loss_grad(result.model, batch_pairs, config.label_smoothing,
                                grads);

    if (use_lists) {
      for (int i = 0; i < config.batch_lists; ++i) {
        std::size_t q = list_stream.next();
        auto& lq = data.list_queries[q];
        if (lq.pool_next >= lq.pool.size()) {
          // samples_per_query fresh permutations per pool refresh
          std::uint64_t pool_seed = mix_hash(
              mix_hash(config.seed, stable_hash(lq.judgments.front().query_id)),
              static_cast<std::uint64_t>(lq.pool_epoch++));
          lq.pool = build_ground_truth_lists(lq.judgments, config.samples_per_query,
                                             pool_seed);
          lq.pool_next = 0;
        }
        const auto& list = lq.pool[lq.pool_next++];
        ListExample example;
        example.query_tokens = lq.query_tokens;
        for (const auto& entry : list.entries) {
          example.docids.push_back(docid_map.at(entry.internal_id));
        }
        loss += list_loss_grad(result.model, example, position_aware, grads);
      }
    }

    loss /= divisor;
    for (double& g : grads.values) g /= divisor;
    optimizer_step(result.model, grads, adam_state, step, adam);
    result.step_loss.push_back(loss);

    if (log && (step + 1) % 100 == 0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "step %d loss %.6f", step + 1, loss);
      log_line(log, buf);
    }
  }
  return result;
}

TrainResult retrain_calibration(const ScorerModel& stage_one,
                                const DatasetBundle& bundle,
                                const DocidMap& docid_map, const DecimalTrie& trie,
                                const ExperimentConfig& config, const LogSink& log) {
  bundle.validate();
  TrainResult result{stage_one, {}};
  if (config.retrain_steps == 0) return result;

  const CalibrationConfig calib = config.calibration_config();
  auto grouped = group_qrels(bundle.qrels);

  // decode candidate lists once with the frozen stage-one model
  std::vector<CalibrationExample> examples;
  for (const auto& [qid, text] : bundle.queries) {
    if (!bundle.train_queries.empty() && !bundle.train_queries.count(qid)) continue;
    auto judged_it = grouped.find(qid);
    if (judged_it == grouped.end()) continue;

    RankedLabelList truth;
    truth.query_id = qid;
    std::unordered_map<std::string, int> grade_of;
    for (const auto& j : judged_it->second) {
      grade_of.emplace(j.internal_id, j.grade);
      if (j.grade >= 1) truth.entries.push_back({j.internal_id, j.grade});
    }
    if (truth.entries.empty()) {
      log_line(log, "warning: query '" + qid + "' has no relevant documents, skipped");
      continue;
    }
    std::sort(truth.entries.begin(), truth.entries.end(),
              [](const LabeledDocid& a, const LabeledDocid& b) {
                if (a.grade != b.grade) return a.grade > b.grade;
                return a.internal_id < b.internal_id;
              });

    CalibrationExample ex;
    ex.query_tokens = stage_one.config.tokenize_query(text);
    auto decoded = constrained_beam_search(stage_one, ex.query_tokens, trie,
                                           config.beam_width, config.beam_width);
    std::vector<GeneratedCandidate> candidates;
    candidates.reserve(decoded.size());
    for (const auto& d : decoded) {
      GeneratedCandidate cand;
      cand.docid = d.docid;
      cand.internal_id = d.internal_id;
      cand.seq_logprob = d.seq_logprob;
      auto g = grade_of.find(d.internal_id);
      cand.judged = g != grade_of.end();
      cand.grade = cand.judged ? g->second : 0;
      candidates.push_back(std::move(cand));
    }
    ex.candidates = sort_to_target_order(qid, std::move(candidates));
    ex.truth = std::move(truth);
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) {
    throw std::runtime_error("no training queries with relevant documents");
  }

  AdamConfig adam{config.base_lr, 0.9, 0.999, 1e-8, config.weight_decay,
                  config.retrain_steps, config.warmup_fraction};
  AdamState adam_state = AdamState::zeros_like(result.model);
  ExampleStream stream(examples.size(), mix_hash(config.seed, stable_hash("retrain")));
  GradientSet grads = GradientSet::zeros_like(result.model);

  const int batch = std::max(1, config.retrain_batch_queries);
  std::vector<CalibrationExample> batch_examples;
  for (int step = 0; step < config.retrain_steps; ++step) {
    std::fill(grads.values.begin(), grads.values.end(), 0.0);
    batch_examples.clear();
    for (int i = 0; i < batch && i < static_cast<int>(examples.size()); ++i) {
      batch_examples.push_back(examples[stream.next()]);
    }
    double loss = retraining_loss_grad(result.model, batch_examples, calib, grads);

    if (config.retrain_add_training_terms) {
      std::vector<PointwisePair> pairs;
      for (const auto& ex : batch_examples) {
        for (const auto& entry : ex.truth.entries) {
          pairs.push_back({ex.query_tokens, docid_map.at(entry.internal_id)});
        }
      }
      loss += pointwise_loss_grad(result.model, pairs, config.label_smoothing, grads);
    }

    const double divisor = static_cast<double>(batch_examples.size());
    loss /= divisor;
    for (double& g : grads.values) g /= divisor;
    optimizer_step(result.model, grads, adam_state, step, adam);
    result.step_loss.push_back(loss);

    if (log && (step + 1) % 100 == 0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "retrain step %d loss %.6f", step + 1, loss);
      log_line(log, buf);
    }
  }
  return result;
}

std::vector<RunRanking> retrieve_queries(const ScorerModel& model,
                                         const DecimalTrie& trie,
                                         const std::map<std::string, std::string>& queries,
                                         int beam_width, int k,
                                         double* mean_latency_ms) {
  std::vector<RunRanking> run;
  run.reserve(queries.size());
  auto start = std::chrono::steady_clock::now();
  for (const auto& [qid, text] : queries) {
    auto tokens = model.config.tokenize_query(text);
    auto decoded = constrained_beam_search(model, tokens, trie, beam_width, k);
    RunRanking ranking;
    ranking.query_id = qid;
    for (const auto& d : decoded) {
      ranking.entries.push_back({d.internal_id, d.seq_logprob});
    }
    run.push_back(std::move(ranking));
  }
  if (mean_latency_ms) {
    auto elapsed = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    *mean_latency_ms = queries.empty() ? 0.0 : elapsed / queries.size();
  }
  return run;
}

void write_trec_run(const std::vector<RunRanking>& run, const std::string& path,
                    const std::string& tag) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  char buf[64];
  for (const auto& ranking : run) {
    for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.6f", ranking.entries[r].score);
      out << ranking.query_id << " Q0 " << ranking.entries[r].internal_id << ' '
          << (r + 1) << ' ' << buf << ' ' << tag << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<RunRanking> read_trec_run(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open run '" + path + "'");
  std::vector<RunRanking> run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string qid, q0, docid, tag;
    int rank;
    double score;
    if (!(fields >> qid >> q0 >> docid >> rank >> score >> tag)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'qid Q0 docid rank score tag'");
    }
    if (run.empty() || run.back().query_id != qid) {
      run.push_back({qid, {}});
    }
    run.back().entries.push_back({docid, score});
  }
  return run;
}

std::string MetricSpec::name() const {
  const char* base = "";
  switch (kind) {
    case kNdcg: base = "ndcg"; break;
    case kErr: base = "err"; break;
    case kPrecision: base = "p"; break;
    case kMrr: base = "mrr"; break;
    case kHits: base = "hits"; break;
  }
  return std::string(base) + "@" + std::to_string(k);
}

MetricSpec MetricSpec::parse(const std::string& text) {
  auto at = text.find('@');
  if (at == std::string::npos) {
    throw std::invalid_argument("metric must look like 'ndcg@5', got '" + text + "'");
  }
  std::string base = text.substr(0, at);
  MetricSpec spec;
  if (base == "ndcg") spec.kind = kNdcg;
  else if (base == "err") spec.kind = kErr;
  else if (base == "p") spec.kind = kPrecision;
  else if (base == "mrr") spec.kind = kMrr;
  else if (base == "hits") spec.kind = kHits;
  else throw std::invalid_argument("unknown metric '" + base + "'");
  spec.k = parse_number<int>("metric depth", text.substr(at + 1));
  if (spec.k < 1) throw std::invalid_argument("metric depth must be >= 1");
  return spec;
}

MetricsReport evaluate_run(const std::vector<RunRanking>& run,
                           const std::vector<RelevanceJudgment>& qrels,
                           const std::vector<MetricSpec>& metrics, int g_max,
                           const LogSink& log) {
  auto judgments = qrels_to_judgments(qrels);
  MetricsReport report;
  std::vector<double> totals(metrics.size(), 0.0);
  std::size_t evaluated = 0;

  for (const auto& ranking : run) {
    auto it = judgments.find(ranking.query_id);
    if (it == judgments.end()) {
      log_line(log, "warning: query '" + ranking.query_id +
                        "' has no judgments, skipped");
      continue;
    }
    ++evaluated;
    auto& per_query = report.per_query[ranking.query_id];
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      double value = 0.0;
      switch (metrics[m].kind) {
        case MetricSpec::kNdcg:
          value = ndcg_at_k(ranking, it->second, metrics[m].k);
          break;
        case MetricSpec::kErr:
          value = err_at_k(ranking, it->second, metrics[m].k, g_max);
          break;
        case MetricSpec::kPrecision:
          value = precision_at_k(ranking, it->second, metrics[m].k);
          break;
        case MetricSpec::kMrr:
          value = mrr_at_k(ranking, it->second, metrics[m].k);
          break;
        case MetricSpec::kHits:
          value = hits_at_k(ranking, it->second, metrics[m].k);
          break;
      }
      per_query.emplace_back(metrics[m].name(), value);
      totals[m] += value;
    }
  }

  for (std::size_t m = 0; m < metrics.size(); ++m) {
    report.means.emplace_back(metrics[m].name(),
                              evaluated ? totals[m] / evaluated : 0.0);
  }
  return report;
}

std::string MetricsReport::to_tsv() const {
  std::string out;
  char buf[64];
  for (const auto& [name, value] : means) {
    std::snprintf(buf, sizeof buf, "%.6f", value);
    out += name;
    out += '\t';
    out += buf;
    out += '\n';
  }
  return out;
}

std::string MetricsReport::per_query_jsonl() const {
  std::string out;
  char buf[64];
  for (const auto& [qid, values] : per_query) {
    out += "{\"query_id\":\"";
    out += qid;
    out += '"';
    for (const auto& [name, value] : values) {
      std::snprintf(buf, sizeof buf, "%.6f", value);
      out += ",\"";
      out += name;
      out += "\":";
      out += buf;
    }
    out += "}\n";
  }
  return out;
}

}  // namespace listgen
