#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace listgen {

// Docid-side token space: digits 0..9, then EOS, then BOS. The trie indexes
// children by token id, so digits and EOS share the 0..10 range.
inline constexpr int kNumDigits = 10;
inline constexpr int kEosToken = 10;
inline constexpr int kBosToken = 11;
inline constexpr int kDocidVocab = 12;

struct Document {
  std::string internal_id;
  std::string text;
  std::optional<std::vector<double>> embedding;
};

// A structured semantic identifier: a sequence of decimal digits. EOS is
// implicit; model- and trie-facing views append it.
struct Docid {
  std::vector<std::uint8_t> digits;

  std::string to_string() const;
  static Docid from_string(std::string_view s);

  // Digit tokens with the EOS terminator appended.
  std::vector<int> tokens_with_eos() const;

  // Token count including the EOS step. This is the |id| used for length
  // normalization throughout.
  int length_with_eos() const { return static_cast<int>(digits.size()) + 1; }

  auto operator<=>(const Docid&) const = default;
};

using DocidMap = std::map<std::string, Docid>;

struct DocidAssignConfig {
  int branching = 10;
  int leaf_max = 100;
  int max_iters = 100;
};

// Hierarchical k-means over embeddings. Each recursion level appends the
// cluster digit; clusters of at most leaf_max members get a fixed-width
// leaf index per member (sorted by internal_id). The returned map is
// injective and deterministic in (embeddings, config, seed).
DocidMap assign_docids(const std::vector<std::string>& ids,
                       const std::vector<std::vector<double>>& embeddings,
                       const DocidAssignConfig& config, std::uint64_t seed);

// Prefix tree over all corpus docids. Immutable after build; concurrent
// readers are safe.
class DecimalTrie {
 public:
  static DecimalTrie build(const DocidMap& docid_map);

  // Tokens (digits and/or EOS) legal after the given prefix of digit tokens.
  // Never empty for a valid prefix. Throws "invalid prefix" otherwise.
  std::vector<int> allowed_tokens(const std::vector<int>& prefix) const;

  // Maps a full digit sequence (without EOS) back to its internal_id.
  // Throws "unknown docid" for non-leaf or unknown paths.
  const std::string& resolve(const std::vector<int>& digits) const;
  const std::string& resolve(const Docid& docid) const;

  bool contains_prefix(const std::vector<int>& prefix) const;
  std::size_t leaf_count() const { return leaf_count_; }
  std::size_t node_count() const { return nodes_.size(); }
  int max_depth() const { return max_depth_; }

  // Internal node handles, used by the beam decoder to walk the trie
  // without re-resolving prefixes.
  using NodeRef = std::int32_t;
  static constexpr NodeRef kNoNode = -1;
  NodeRef root() const { return 0; }
  NodeRef child(NodeRef node, int token) const { return nodes_[node].child[token]; }
  const std::string& leaf_id(NodeRef node) const { return doc_ids_[nodes_[node].doc]; }

 private:
  struct Node {
    std::array<NodeRef, 11> child;  // digits 0..9 and EOS
    std::int32_t doc = -1;
    Node() { child.fill(kNoNode); }
  };

  std::vector<Node> nodes_;
  std::vector<std::string> doc_ids_;
  std::size_t leaf_count_ = 0;
  int max_depth_ = 0;
};

// Docid map file: one "internal_id<TAB>digitstring" line per document.
void write_docid_map(const DocidMap& map, const std::string& path);
DocidMap read_docid_map(const std::string& path);

}  // namespace listgen
