#include "listgen/docids.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "listgen/kmeans.hpp"
#include "listgen/rng.hpp"
#include "listgen/text.hpp"

namespace listgen {

std::string Docid::to_string() const {
  std::string s;
  s.reserve(digits.size());
  for (auto d : digits) s.push_back(static_cast<char>('0' + d));
  return s;
}

Docid Docid::from_string(std::string_view s) {
  Docid id;
  id.digits.reserve(s.size());
  for (char c : s) {
    if (c < '0' || c > '9') {
      throw std::invalid_argument("docid digit out of range: '" + std::string(s) + "'");
    }
    id.digits.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return id;
}

std::vector<int> Docid::tokens_with_eos() const {
  std::vector<int> t;
  t.reserve(digits.size() + 1);
  for (auto d : digits) t.push_back(d);
  t.push_back(kEosToken);
  return t;
}

namespace {

int leaf_index_width(int leaf_max) {
  int width = 1;
  for (int v = leaf_max - 1; v >= 10; v /= 10) ++width;
  return width;
}

void append_leaf_docids(const std::vector<std::string>& ids,
                        std::vector<int> members, const std::vector<std::uint8_t>& prefix,
                        int width, DocidMap& out) {
  std::sort(members.begin(), members.end(),
            [&](int a, int b) { return ids[a] < ids[b]; });
  for (std::size_t i = 0; i < members.size(); ++i) {
    Docid docid;
    docid.digits = prefix;
    // fixed-width decimal leaf index, most significant digit first
    int value = static_cast<int>(i);
    std::vector<std::uint8_t> leaf(width);
    for (int d = width - 1; d >= 0; --d) {
      leaf[d] = static_cast<std::uint8_t>(value % 10);
      value /= 10;
    }
    docid.digits.insert(docid.digits.end(), leaf.begin(), leaf.end());
    out.emplace(ids[members[i]], std::move(docid));
  }
}

struct HierarchicalClusterer {
  const std::vector<std::string>& ids;
  const std::vector<std::vector<double>>& embeddings;
  DocidAssignConfig config;
  std::uint64_t seed;
  int leaf_width;
  DocidMap out;

  void cluster_node(const std::vector<int>& members,
                    const std::vector<std::uint8_t>& prefix) {
    int k = std::min<int>(config.branching, static_cast<int>(members.size()));
    // Per-node rng keyed by (seed, prefix) so the result is independent of
    // sibling traversal order.
    std::string prefix_str(prefix.begin(), prefix.end());
    Rng rng(mix_hash(seed, stable_hash(prefix_str, 0x6c697374ull)));
    KMeansResult km = lloyd_kmeans(embeddings, members, k, config.max_iters, rng);

    std::vector<std::vector<int>> groups(km.n_clusters);
    for (std::size_t i = 0; i < members.size(); ++i) {
      groups[km.assignment[i]].push_back(members[i]);
    }

    if (km.n_clusters == 1 && static_cast<int>(members.size()) > config.leaf_max && k > 1) {
      // Degenerate split (e.g. identical embeddings): k-means cannot make
      // progress, so chunk evenly by internal_id order instead.
      groups = forced_split(members);
    }

    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::vector<std::uint8_t> child_prefix = prefix;
      child_prefix.push_back(static_cast<std::uint8_t>(g));
      if (static_cast<int>(groups[g].size()) > config.leaf_max) {
        cluster_node(groups[g], child_prefix);
      } else {
        append_leaf_docids(ids, std::move(groups[g]), child_prefix, leaf_width, out);
      }
    }
  }

  std::vector<std::vector<int>> forced_split(const std::vector<int>& members) const {
    int n = static_cast<int>(members.size());
    int parts = std::min<int>(config.branching,
                              (n + config.leaf_max - 1) / config.leaf_max);
    parts = std::max(parts, 2);
    std::vector<int> sorted = members;
    std::sort(sorted.begin(), sorted.end(),
              [&](int a, int b) { return ids[a] < ids[b]; });
    std::vector<std::vector<int>> groups(parts);
    int base = n / parts, extra = n % parts, pos = 0;
    for (int g = 0; g < parts; ++g) {
      int take = base + (g < extra ? 1 : 0);
      groups[g].assign(sorted.begin() + pos, sorted.begin() + pos + take);
      pos += take;
    }
    return groups;
  }
};

}  // namespace

DocidMap assign_docids(const std::vector<std::string>& ids,
                       const std::vector<std::vector<double>>& embeddings,
                       const DocidAssignConfig& config, std::uint64_t seed) {
  if (ids.empty()) throw std::invalid_argument("empty corpus");
  if (ids.size() != embeddings.size()) {
    throw std::invalid_argument("ids/embeddings size mismatch");
  }
  if (config.branching < 2 || config.branching > 10) {
    throw std::invalid_argument("branching must be in [2, 10]");
  }
  if (config.leaf_max < 1) throw std::invalid_argument("leaf_max must be positive");

  HierarchicalClusterer hc{ids, embeddings, config, seed,
                           leaf_index_width(config.leaf_max), {}};
  std::vector<int> all(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) all[i] = static_cast<int>(i);
  hc.cluster_node(all, {});
  if (hc.out.size() != ids.size()) {
    throw std::invalid_argument("duplicate internal_id in corpus");
  }
  return std::move(hc.out);
}

DecimalTrie DecimalTrie::build(const DocidMap& docid_map) {
  DecimalTrie trie;
  trie.nodes_.emplace_back();
  for (const auto& [doc_id, docid] : docid_map) {
    NodeRef node = 0;
    for (auto digit : docid.digits) {
      NodeRef& slot = trie.nodes_[node].child[digit];
      if (slot == kNoNode) {
        slot = static_cast<NodeRef>(trie.nodes_.size());
        trie.nodes_.emplace_back();
      }
      node = trie.nodes_[node].child[digit];
    }
    NodeRef& eos = trie.nodes_[node].child[kEosToken];
    if (eos != kNoNode) {
      throw std::invalid_argument(
          "duplicate docid '" + docid.to_string() + "' for documents '" +
          trie.doc_ids_[trie.nodes_[eos].doc] + "' and '" + doc_id + "'");
    }
    eos = static_cast<NodeRef>(trie.nodes_.size());
    trie.nodes_.emplace_back();
    trie.nodes_.back().doc = static_cast<std::int32_t>(trie.doc_ids_.size());
    trie.doc_ids_.push_back(doc_id);
    ++trie.leaf_count_;
    trie.max_depth_ = std::max(trie.max_depth_, static_cast<int>(docid.digits.size()) + 1);
  }
  return trie;
}

namespace {

DecimalTrie::NodeRef walk(const DecimalTrie& trie, const std::vector<int>& tokens) {
  DecimalTrie::NodeRef node = trie.root();
  for (int t : tokens) {
    if (t < 0 || t > kEosToken) return DecimalTrie::kNoNode;
    node = trie.child(node, t);
    if (node == DecimalTrie::kNoNode) return DecimalTrie::kNoNode;
  }
  return node;
}

}  // namespace

std::vector<int> DecimalTrie::allowed_tokens(const std::vector<int>& prefix) const {
  NodeRef node = walk(*this, prefix);
  if (node == kNoNode) throw std::invalid_argument("invalid prefix");
  std::vector<int> allowed;
  for (int t = 0; t <= kEosToken; ++t) {
    if (nodes_[node].child[t] != kNoNode) allowed.push_back(t);
  }
  if (allowed.empty()) throw std::invalid_argument("invalid prefix");
  return allowed;
}

bool DecimalTrie::contains_prefix(const std::vector<int>& prefix) const {
  return walk(*this, prefix) != kNoNode;
}

const std::string& DecimalTrie::resolve(const std::vector<int>& digits) const {
  std::vector<int> path = digits;
  path.push_back(kEosToken);
  NodeRef node = walk(*this, path);
  if (node == kNoNode || nodes_[node].doc < 0) {
    throw std::invalid_argument("unknown docid");
  }
  return doc_ids_[nodes_[node].doc];
}

const std::string& DecimalTrie::resolve(const Docid& docid) const {
  std::vector<int> digits;
  digits.reserve(docid.digits.size());
  for (auto d : docid.digits) digits.push_back(d);
  return resolve(digits);
}

void write_docid_map(const DocidMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const auto& [doc_id, docid] : map) {
    out << doc_id << '\t' << docid.to_string() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

DocidMap read_docid_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  DocidMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'id<TAB>digits'");
    }
    std::string doc_id = line.substr(0, tab);
    if (!map.emplace(doc_id, Docid::from_string(line.substr(tab + 1))).second) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": duplicate internal_id '" + doc_id + "'");
    }
  }
  return map;
}

}  // namespace listgen
