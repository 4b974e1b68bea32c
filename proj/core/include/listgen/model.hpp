#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "listgen/docids.hpp"

namespace listgen {

// Query-side and docid-side token tables. Query words are hashed into
// query_vocab buckets (id 0 reserved for UNK); the docid side is fixed at
// 12 tokens: digits 0..9, EOS, BOS.
struct ModelConfig {
  int query_vocab = 4096;
  int embed_dim = 32;
  int hidden_dim = 64;
  std::uint64_t seed = 1;
  std::uint64_t vocab_seed = 0;

  std::vector<int> tokenize_query(const std::string& text) const;
};

// Named parameter arrays of the scorer, in checkpoint order.
enum class Param : int {
  kQueryEmbed,  // query_vocab x E
  kEncW,        // H x E
  kEncB,        // H
  kDecEmbed,    // 12 x E
  kRnnU,        // H x H  (state -> state)
  kRnnW,        // H x E  (input -> state)
  kRnnB,        // H
  kAttnQ,       // H x H  (decoder state -> attention query)
  kAttnK,       // H x H  (encoder state -> attention key)
  kAttnB,       // H
  kAttnV,       // H
  kOutW,        // 12 x 2H  ([state; context] -> logits)
  kOutB,        // 12
};
inline constexpr int kParamCount = 13;

const char* param_name(Param p);

struct ParamShape {
  std::size_t rows = 0, cols = 0;
  std::size_t size() const { return rows * cols; }
};

// Offsets of every named array inside the flat parameter vector.
struct ParamLayout {
  std::array<ParamShape, kParamCount> shapes;
  std::array<std::size_t, kParamCount + 1> offsets;

  static ParamLayout for_config(const ModelConfig& config);
  std::size_t total() const { return offsets[kParamCount]; }
};

// The autoregressive scorer g: (query, docid prefix) -> log-distribution
// over the 12 docid tokens. A mean-pooled tanh encoder feeds a single-layer
// recurrent decoder with additive attention over the encoder token states.
// Forward passes are pure; training mutates params through optimizer_step.
struct ScorerModel {
  ModelConfig config;
  ParamLayout layout;
  std::vector<double> params;

  static ScorerModel init(const ModelConfig& config);

  std::span<double> param(Param p);
  std::span<const double> param(Param p) const;
};

// Gradients with the same flat layout as the model parameters.
struct GradientSet {
  std::vector<double> values;

  static GradientSet zeros_like(const ScorerModel& model);
  void accumulate(const GradientSet& other, double scale = 1.0);
  std::span<double> param(const ScorerModel& model, Param p);
};

using LogProbs = std::array<double, kDocidVocab>;

// Encoder activations for one query, reusable across decoder passes.
struct EncoderTrace {
  std::vector<int> tokens;
  std::vector<double> states;     // m x H, tanh token states
  std::vector<double> attn_keys;  // m x H, attn_k * state
  std::vector<double> pooled;     // H, mean of states
};

// Per-step decoder activations retained for the backward pass.
struct StepTrace {
  int input_token = 0;
  std::vector<double> state;       // H
  std::vector<double> attn_query;  // H (attn_q * state + attn_b)
  std::vector<double> attn_w;      // m, softmax attention weights
  LogProbs logits;
  LogProbs logprobs;
};

struct SequenceTrace {
  std::vector<StepTrace> steps;
  std::vector<int> targets;  // realized next tokens, digits then EOS
};

EncoderTrace encode_query(const ScorerModel& model, std::span<const int> query_tokens);

// One decoder step: feeds input_token on top of prev_state (H values; the
// encoder pooled state before the BOS step) and emits next-token log-probs.
LogProbs decoder_step(const ScorerModel& model, const EncoderTrace& enc,
                      std::span<const double> prev_state, int input_token,
                      std::vector<double>* next_state, StepTrace* trace);

// Log-distribution over the next docid token given a prefix that must start
// with BOS. logsumexp of the result is 0 within 1e-6.
LogProbs token_logprobs(const ScorerModel& model, std::span<const int> query_tokens,
                        std::span<const int> prefix);

// Teacher-forced log-likelihood of the full docid, EOS step included.
double sequence_logprob(const ScorerModel& model, std::span<const int> query_tokens,
                        const Docid& docid);
double sequence_logprob(const ScorerModel& model, const EncoderTrace& enc,
                        const Docid& docid);

// Teacher-forced forward pass retaining all activations.
SequenceTrace run_teacher_forced(const ScorerModel& model, const EncoderTrace& enc,
                                 const Docid& docid);

// Accumulates parameter gradients for one decoded sequence given
// d loss / d logprobs at every step. Chains through the decoder, the
// attention, and the shared encoder.
void backward_sequence(const ScorerModel& model, const EncoderTrace& enc,
                       const SequenceTrace& seq,
                       const std::vector<LogProbs>& grad_logprobs,
                       GradientSet& grads);

// A differentiable composition of module operations: returns the scalar
// loss and accumulates analytic parameter gradients.
using LossClosure = std::function<double(const ScorerModel&, GradientSet&)>;

// Runs the closure and returns its gradients. Throws "non-finite loss" if
// the loss or any gradient entry is not finite.
GradientSet parameter_gradients(const ScorerModel& model, const LossClosure& loss,
                                double* loss_value = nullptr);

}  // namespace listgen
