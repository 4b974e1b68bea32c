#include "listgen/decoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace listgen {
namespace {

// An open beam carries the decoder state after feeding [BOS, digits] and
// the resulting next-token distribution, so expansion needs no extra
// forward passes before pruning.
struct OpenBeam {
  std::vector<std::uint8_t> digits;
  double logprob = 0.0;
  DecimalTrie::NodeRef node = 0;
  std::vector<double> state;
  LogProbs next_lp{};
};

struct Extension {
  std::vector<std::uint8_t> digits;
  double logprob = 0.0;
  DecimalTrie::NodeRef node = 0;
  int parent = -1;
  int token = -1;
};

bool scored_less(const ScoredDocid& a, const ScoredDocid& b) {
  if (a.seq_logprob != b.seq_logprob) return a.seq_logprob > b.seq_logprob;
  return a.docid < b.docid;
}

}  // namespace

std::vector<ScoredDocid> constrained_beam_search(const ScorerModel& model,
                                                 std::span<const int> query_tokens,
                                                 const DecimalTrie& trie,
                                                 int beam_width, int k) {
  if (trie.leaf_count() == 0) throw std::invalid_argument("empty trie");
  if (k < 1 || beam_width < k) {
    throw std::invalid_argument("beam_width >= k >= 1 required");
  }

  EncoderTrace enc = encode_query(model, query_tokens);

  std::vector<OpenBeam> open(1);
  open[0].node = trie.root();
  open[0].next_lp =
      decoder_step(model, enc, enc.pooled, kBosToken, &open[0].state, nullptr);

  std::vector<ScoredDocid> finished;

  while (!open.empty()) {
    // expand every open beam along its allowed tokens
    std::vector<Extension> extensions;
    for (std::size_t b = 0; b < open.size(); ++b) {
      for (int token = 0; token <= kEosToken; ++token) {
        DecimalTrie::NodeRef child = trie.child(open[b].node, token);
        if (child == DecimalTrie::kNoNode) continue;
        const double lp = open[b].logprob + open[b].next_lp[token];
        if (token == kEosToken) {
          ScoredDocid done;
          done.docid.digits = open[b].digits;
          done.internal_id = trie.leaf_id(child);
          done.seq_logprob = lp;
          finished.push_back(std::move(done));
        } else {
          Extension ext;
          ext.digits = open[b].digits;
          ext.digits.push_back(static_cast<std::uint8_t>(token));
          ext.logprob = lp;
          ext.node = child;
          ext.parent = static_cast<int>(b);
          ext.token = token;
          extensions.push_back(std::move(ext));
        }
      }
    }

    std::sort(finished.begin(), finished.end(), scored_less);
    if (static_cast<int>(finished.size()) > k) finished.resize(k);

    std::sort(extensions.begin(), extensions.end(),
              [](const Extension& a, const Extension& b) {
                if (a.logprob != b.logprob) return a.logprob > b.logprob;
                return a.digits < b.digits;
              });
    if (static_cast<int>(extensions.size()) > beam_width) {
      extensions.resize(beam_width);
    }
    if (extensions.empty()) break;

    // stop once k finished beams strictly outscore every open beam; open
    // scores only decrease from here
    if (static_cast<int>(finished.size()) >= k &&
        finished.back().seq_logprob > extensions.front().logprob) {
      break;
    }

    // materialize the survivors with one decoder step each
    std::vector<OpenBeam> next_open(extensions.size());
    for (std::size_t i = 0; i < extensions.size(); ++i) {
      Extension& ext = extensions[i];
      OpenBeam& beam = next_open[i];
      beam.digits = std::move(ext.digits);
      beam.logprob = ext.logprob;
      beam.node = ext.node;
      beam.next_lp = decoder_step(model, enc, open[ext.parent].state, ext.token,
                                  &beam.state, nullptr);
    }
    open = std::move(next_open);
  }

  std::sort(finished.begin(), finished.end(), scored_less);
  if (static_cast<int>(finished.size()) > k) finished.resize(k);
  return finished;
}

std::vector<ScoredDocid> exhaustive_rank(const ScorerModel& model,
                                         std::span<const int> query_tokens,
                                         const DocidMap& docid_map, int k) {
  constexpr std::size_t kGuard = 10000;
  if (docid_map.size() > kGuard) {
    throw std::invalid_argument("corpus too large for exhaustive ranking");
  }
  if (docid_map.empty()) throw std::invalid_argument("empty docid map");
  if (k < 1) throw std::invalid_argument("k must be positive");

  EncoderTrace enc = encode_query(model, query_tokens);
  std::vector<ScoredDocid> ranked;
  ranked.reserve(docid_map.size());
  for (const auto& [doc_id, docid] : docid_map) {
    ranked.push_back({docid, doc_id, sequence_logprob(model, enc, docid)});
  }
  std::sort(ranked.begin(), ranked.end(), scored_less);
  if (static_cast<int>(ranked.size()) > k) ranked.resize(k);
  return ranked;
}

}  // namespace listgen
