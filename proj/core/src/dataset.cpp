#include "listgen/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "listgen/rng.hpp"
#include "listgen/text.hpp"

namespace listgen {
namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

[[noreturn]] void fail_line(const std::string& path, std::size_t line_no,
                            const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

// splits "a<TAB>rest" once
std::pair<std::string, std::string> split_tab(const std::string& line,
                                              const std::string& path,
                                              std::size_t line_no) {
  auto tab = line.find('\t');
  if (tab == std::string::npos) fail_line(path, line_no, "expected a TAB separator");
  return {line.substr(0, tab), line.substr(tab + 1)};
}

}  // namespace

void DatasetBundle::validate() const {
  std::unordered_set<std::string> doc_ids;
  for (const auto& doc : corpus) {
    if (doc.internal_id.empty()) {
      throw std::runtime_error("corpus document with empty internal_id");
    }
    if (!doc_ids.insert(doc.internal_id).second) {
      throw std::runtime_error("duplicate internal_id '" + doc.internal_id + "'");
    }
  }
  for (const auto& j : qrels) {
    if (!doc_ids.count(j.internal_id)) {
      throw std::runtime_error("qrels references unknown docid '" + j.internal_id + "'");
    }
    if (!queries.count(j.query_id)) {
      throw std::runtime_error("qrels references unknown query '" + j.query_id + "'");
    }
  }
  for (const auto& [doc_id, text] : pseudo_queries) {
    if (!doc_ids.count(doc_id)) {
      throw std::runtime_error("pseudo-query references unknown docid '" + doc_id + "'");
    }
  }
  for (const auto& qid : train_queries) {
    if (!queries.count(qid)) {
      throw std::runtime_error("split references unknown query '" + qid + "'");
    }
  }
  for (const auto& qid : test_queries) {
    if (!queries.count(qid)) {
      throw std::runtime_error("split references unknown query '" + qid + "'");
    }
    if (train_queries.count(qid)) {
      throw std::runtime_error("query '" + qid + "' is in both splits");
    }
  }
}

std::vector<Document> read_corpus(const std::string& path) {
  auto in = open_in(path);
  std::vector<Document> corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto [id, text] = split_tab(line, path, line_no);
    if (id.empty()) fail_line(path, line_no, "empty internal_id");
    if (!seen.insert(id).second) {
      fail_line(path, line_no, "duplicate internal_id '" + id + "'");
    }
    corpus.push_back({id, text, std::nullopt});
  }
  std::sort(corpus.begin(), corpus.end(),
            [](const Document& a, const Document& b) {
              return a.internal_id < b.internal_id;
            });
  return corpus;
}

void write_corpus(const std::vector<Document>& corpus, const std::string& path) {
  auto out = open_out(path);
  for (const auto& doc : corpus) out << doc.internal_id << '\t' << doc.text << '\n';
}

std::map<std::string, std::string> read_queries(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> queries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto [qid, text] = split_tab(line, path, line_no);
    if (!queries.emplace(qid, text).second) {
      fail_line(path, line_no, "duplicate query id '" + qid + "'");
    }
  }
  return queries;
}

void write_queries(const std::map<std::string, std::string>& queries,
                   const std::string& path) {
  auto out = open_out(path);
  for (const auto& [qid, text] : queries) out << qid << '\t' << text << '\n';
}

std::vector<RelevanceJudgment> read_qrels(const std::string& path) {
  auto in = open_in(path);
  std::vector<RelevanceJudgment> qrels;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    RelevanceJudgment j;
    std::string iteration;
    if (!(fields >> j.query_id >> iteration >> j.internal_id >> j.grade)) {
      fail_line(path, line_no, "expected 'qid 0 docid grade'");
    }
    if (j.grade < 0) fail_line(path, line_no, "negative relevance grade");
    if (!seen.emplace(j.query_id, j.internal_id).second) {
      fail_line(path, line_no,
                "duplicate judgment for (" + j.query_id + ", " + j.internal_id + ")");
    }
    qrels.push_back(std::move(j));
  }
  return qrels;
}

void write_qrels(const std::vector<RelevanceJudgment>& qrels, const std::string& path) {
  auto out = open_out(path);
  for (const auto& j : qrels) {
    out << j.query_id << '\t' << 0 << '\t' << j.internal_id << '\t' << j.grade << '\n';
  }
}

void read_split(const std::string& path, std::set<std::string>& train,
                std::set<std::string>& test) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto [qid, part] = split_tab(line, path, line_no);
    if (part == "train") {
      train.insert(qid);
    } else if (part == "test") {
      test.insert(qid);
    } else {
      fail_line(path, line_no, "split must be 'train' or 'test', got '" + part + "'");
    }
  }
}

void write_split(const std::set<std::string>& train, const std::set<std::string>& test,
                 const std::string& path) {
  auto out = open_out(path);
  for (const auto& qid : train) out << qid << "\ttrain\n";
  for (const auto& qid : test) out << qid << "\ttest\n";
}

std::map<std::string, std::vector<double>> read_embeddings(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::vector<double>> embeddings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto [id, values] = split_tab(line, path, line_no);
    std::vector<double> v;
    std::istringstream parts(values);
    std::string field;
    while (std::getline(parts, field, ',')) {
      try {
        v.push_back(std::stod(field));
      } catch (const std::exception&) {
        fail_line(path, line_no, "bad float '" + field + "'");
      }
    }
    if (v.empty()) fail_line(path, line_no, "empty embedding");
    if (!embeddings.emplace(id, std::move(v)).second) {
      fail_line(path, line_no, "duplicate embedding for '" + id + "'");
    }
  }
  return embeddings;
}

std::vector<std::pair<std::string, std::string>> read_pseudo_queries(
    const std::string& path) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    pairs.push_back(split_tab(line, path, line_no));
  }
  return pairs;
}

std::map<std::string, std::vector<RelevanceJudgment>> group_qrels(
    const std::vector<RelevanceJudgment>& qrels) {
  std::map<std::string, std::vector<RelevanceJudgment>> grouped;
  for (const auto& j : qrels) grouped[j.query_id].push_back(j);
  return grouped;
}

std::map<std::string, QueryJudgments> qrels_to_judgments(
    const std::vector<RelevanceJudgment>& qrels) {
  std::map<std::string, QueryJudgments> judgments;
  for (const auto& j : qrels) judgments[j.query_id][j.internal_id] = j.grade;
  return judgments;
}

namespace {

const char* kSyllables[] = {
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du", "ka",
    "ke", "ki", "ko", "ku", "la", "le", "li", "lo", "lu", "ma", "me",
    "mi", "mo", "mu", "na", "ne", "ni", "no", "nu", "ra", "re", "ri",
    "ro", "ru", "sa", "se", "si", "so", "su", "ta", "te", "ti", "to",
    "tu", "va", "ve", "vi", "vo", "vu", "za", "ze", "zi", "zo", "zu"};
constexpr int kSyllableCount = 55;

std::string make_word(Rng& rng) {
  std::string w;
  for (int s = 0; s < 3; ++s) w += kSyllables[rng.below(kSyllableCount)];
  return w;
}

std::string fresh_word(Rng& rng, std::unordered_set<std::string>& used) {
  for (;;) {
    std::string w = make_word(rng);
    if (used.insert(w).second) return w;
  }
}

std::string padded_id(const char* prefix, int value, int width) {
  std::string digits = std::to_string(value);
  std::string id = prefix;
  id.append(width - std::min<std::size_t>(width, digits.size()), '0');
  id += digits;
  return id;
}

}  // namespace

DatasetBundle make_synthetic_dataset(int n_docs, int n_queries,
                                     const std::set<int>& grades,
                                     std::uint64_t seed) {
  if (n_docs < 1 || n_queries < 1) {
    throw std::invalid_argument("n_docs and n_queries must be positive");
  }
  std::vector<int> positive_grades;
  for (int g : grades) {
    if (g < 0 || g > 3) throw std::invalid_argument("grades must be within {0,1,2,3}");
    if (g >= 1) positive_grades.push_back(g);
  }
  if (positive_grades.empty()) {
    throw std::invalid_argument("at least one positive grade is required");
  }
  const int graded_docs = n_queries * static_cast<int>(positive_grades.size());
  if (n_docs < graded_docs) {
    throw std::invalid_argument("n_docs too small: need at least " +
                                std::to_string(graded_docs) + " graded documents");
  }

  Rng rng(mix_hash(seed, stable_hash("synthetic")));
  std::unordered_set<std::string> used_words;

  // shared noise vocabulary, then three distinctive terms per topic
  std::vector<std::string> noise_pool(100);
  for (auto& w : noise_pool) w = fresh_word(rng, used_words);
  std::vector<std::array<std::string, 3>> topics(n_queries);
  for (auto& topic : topics) {
    for (auto& term : topic) term = fresh_word(rng, used_words);
  }

  // Topic terms repeat so the hashed bag-of-words is topic-dominant and the
  // hierarchical clustering groups a topic's documents together.
  constexpr int kTopicRepeats = 3;
  constexpr int kNoiseTerms = 6;
  auto compose_doc = [&](const std::vector<std::string>& terms, int noise_terms) {
    std::vector<std::string> words;
    for (const auto& t : terms) {
      for (int r = 0; r < kTopicRepeats; ++r) words.push_back(t);
    }
    for (int i = 0; i < noise_terms; ++i) {
      words.push_back(noise_pool[rng.below(noise_pool.size())]);
    }
    rng.shuffle(words);
    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    return text;
  };

  DatasetBundle bundle;
  int doc_counter = 0;
  auto next_doc_id = [&] { return padded_id("d", doc_counter++, 5); };

  // one document per (query, positive grade): a grade-g document shares g
  // of its query's topic terms
  for (int q = 0; q < n_queries; ++q) {
    std::string qid = padded_id("q", q, 4);
    const auto& topic = topics[q];
    bundle.queries[qid] = topic[0] + " " + topic[1] + " " + topic[2];
    for (int g : positive_grades) {
      std::vector<std::string> terms(topic.begin(), topic.begin() + g);
      std::string doc_id = next_doc_id();
      bundle.corpus.push_back({doc_id, compose_doc(terms, kNoiseTerms), std::nullopt});
      bundle.qrels.push_back({qid, doc_id, g});
    }
  }
  // noise-only fillers up to n_docs
  std::vector<std::string> filler_ids;
  while (doc_counter < n_docs) {
    std::string doc_id = next_doc_id();
    filler_ids.push_back(doc_id);
    bundle.corpus.push_back({doc_id, compose_doc({}, kNoiseTerms + 4), std::nullopt});
  }

  // explicit grade-0 judgments when requested (two fillers per query)
  if (grades.count(0) && !filler_ids.empty()) {
    for (int q = 0; q < n_queries; ++q) {
      std::string qid = padded_id("q", q, 4);
      std::size_t first = rng.below(filler_ids.size());
      std::size_t second = rng.below(filler_ids.size());
      bundle.qrels.push_back({qid, filler_ids[first], 0});
      if (second != first) bundle.qrels.push_back({qid, filler_ids[second], 0});
    }
  }

  // seeded 1:1 train/test query split
  std::vector<std::string> qids;
  for (const auto& [qid, text] : bundle.queries) qids.push_back(qid);
  rng.shuffle(qids);
  std::size_t n_train = std::max<std::size_t>(1, (qids.size() + 1) / 2);
  if (n_train == qids.size() && qids.size() > 1) --n_train;
  for (std::size_t i = 0; i < qids.size(); ++i) {
    (i < n_train ? bundle.train_queries : bundle.test_queries).insert(qids[i]);
  }

  std::sort(bundle.qrels.begin(), bundle.qrels.end(),
            [](const RelevanceJudgment& a, const RelevanceJudgment& b) {
              if (a.query_id != b.query_id) return a.query_id < b.query_id;
              return a.internal_id < b.internal_id;
            });
  bundle.validate();
  return bundle;
}

void write_dataset(const DatasetBundle& bundle, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto path = [&](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };
  write_corpus(bundle.corpus, path("corpus.tsv"));
  write_queries(bundle.queries, path("queries.tsv"));
  write_qrels(bundle.qrels, path("qrels.tsv"));
  write_split(bundle.train_queries, bundle.test_queries, path("split.tsv"));
}

DatasetBundle read_dataset(const std::string& dir) {
  auto path = [&](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };
  DatasetBundle bundle;
  bundle.corpus = read_corpus(path("corpus.tsv"));
  bundle.queries = read_queries(path("queries.tsv"));
  bundle.qrels = read_qrels(path("qrels.tsv"));
  if (std::filesystem::exists(path("split.tsv"))) {
    read_split(path("split.tsv"), bundle.train_queries, bundle.test_queries);
  }
  if (std::filesystem::exists(path("pseudo_queries.tsv"))) {
    bundle.pseudo_queries = read_pseudo_queries(path("pseudo_queries.tsv"));
  }
  bundle.validate();
  return bundle;
}

}  // namespace listgen
