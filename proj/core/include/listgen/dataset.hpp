#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "listgen/docids.hpp"
#include "listgen/metrics.hpp"
#include "listgen/objectives.hpp"

namespace listgen {

// Everything one experiment consumes. The corpus is sorted by internal_id;
// qrels docids must exist in the corpus and qrels qids in the query table.
struct DatasetBundle {
  std::vector<Document> corpus;
  std::map<std::string, std::string> queries;  // qid -> text
  std::vector<RelevanceJudgment> qrels;
  std::vector<std::pair<std::string, std::string>> pseudo_queries;  // (internal_id, text)
  std::set<std::string> train_queries;
  std::set<std::string> test_queries;

  void validate() const;  // throws naming the offending id
};

// Corpus: "internal_id<TAB>text" per line, UTF-8.
std::vector<Document> read_corpus(const std::string& path);
void write_corpus(const std::vector<Document>& corpus, const std::string& path);

// Queries: "qid<TAB>text" per line.
std::map<std::string, std::string> read_queries(const std::string& path);
void write_queries(const std::map<std::string, std::string>& queries,
                   const std::string& path);

// TREC qrels: "qid<TAB>0<TAB>docid<TAB>grade" (any whitespace accepted on read).
std::vector<RelevanceJudgment> read_qrels(const std::string& path);
void write_qrels(const std::vector<RelevanceJudgment>& qrels, const std::string& path);

// Split: "qid<TAB>train|test" per line.
void read_split(const std::string& path, std::set<std::string>& train,
                std::set<std::string>& test);
void write_split(const std::set<std::string>& train, const std::set<std::string>& test,
                 const std::string& path);

// Precomputed embeddings: "internal_id<TAB>v1,v2,..." per line.
std::map<std::string, std::vector<double>> read_embeddings(const std::string& path);

// Pseudo-queries: "internal_id<TAB>query text" per line, one pair each.
std::vector<std::pair<std::string, std::string>> read_pseudo_queries(
    const std::string& path);

// Judgments grouped per query id, and per-query grade lookup for metrics.
std::map<std::string, std::vector<RelevanceJudgment>> group_qrels(
    const std::vector<RelevanceJudgment>& qrels);
std::map<std::string, QueryJudgments> qrels_to_judgments(
    const std::vector<RelevanceJudgment>& qrels);

// Topic-based synthetic dataset: each query is a topic phrase of three
// terms; a grade-g document shares g of them plus noise; qrels follow.
// Deterministic in (n_docs, n_queries, grades, seed).
DatasetBundle make_synthetic_dataset(int n_docs, int n_queries,
                                     const std::set<int>& grades, std::uint64_t seed);

// Writes corpus.tsv, queries.tsv, qrels.tsv, split.tsv under dir.
void write_dataset(const DatasetBundle& bundle, const std::string& dir);
DatasetBundle read_dataset(const std::string& dir);

}  // namespace listgen
