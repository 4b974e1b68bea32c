#include "listgen/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "listgen/rng.hpp"
#include "listgen/text.hpp"

namespace listgen {

std::vector<int> ModelConfig::tokenize_query(const std::string& text) const {
  return hash_tokens(text, query_vocab, vocab_seed);
}

const char* param_name(Param p) {
  switch (p) {
    case Param::kQueryEmbed: return "query_embed";
    case Param::kEncW: return "enc_w";
    case Param::kEncB: return "enc_b";
    case Param::kDecEmbed: return "dec_embed";
    case Param::kRnnU: return "rnn_u";
    case Param::kRnnW: return "rnn_w";
    case Param::kRnnB: return "rnn_b";
    case Param::kAttnQ: return "attn_q";
    case Param::kAttnK: return "attn_k";
    case Param::kAttnB: return "attn_b";
    case Param::kAttnV: return "attn_v";
    case Param::kOutW: return "out_w";
    case Param::kOutB: return "out_b";
  }
  return "?";
}

ParamLayout ParamLayout::for_config(const ModelConfig& config) {
  const std::size_t V = static_cast<std::size_t>(config.query_vocab);
  const std::size_t E = static_cast<std::size_t>(config.embed_dim);
  const std::size_t H = static_cast<std::size_t>(config.hidden_dim);
  ParamLayout layout;
  layout.shapes[static_cast<int>(Param::kQueryEmbed)] = {V, E};
  layout.shapes[static_cast<int>(Param::kEncW)] = {H, E};
  layout.shapes[static_cast<int>(Param::kEncB)] = {H, 1};
  layout.shapes[static_cast<int>(Param::kDecEmbed)] = {kDocidVocab, E};
  layout.shapes[static_cast<int>(Param::kRnnU)] = {H, H};
  layout.shapes[static_cast<int>(Param::kRnnW)] = {H, E};
  layout.shapes[static_cast<int>(Param::kRnnB)] = {H, 1};
  layout.shapes[static_cast<int>(Param::kAttnQ)] = {H, H};
  layout.shapes[static_cast<int>(Param::kAttnK)] = {H, H};
  layout.shapes[static_cast<int>(Param::kAttnB)] = {H, 1};
  layout.shapes[static_cast<int>(Param::kAttnV)] = {H, 1};
  layout.shapes[static_cast<int>(Param::kOutW)] = {kDocidVocab, 2 * H};
  layout.shapes[static_cast<int>(Param::kOutB)] = {kDocidVocab, 1};
  layout.offsets[0] = 0;
  for (int i = 0; i < kParamCount; ++i) {
    layout.offsets[i + 1] = layout.offsets[i] + layout.shapes[i].size();
  }
  return layout;
}

ScorerModel ScorerModel::init(const ModelConfig& config) {
  ScorerModel model;
  model.config = config;
  model.layout = ParamLayout::for_config(config);
  model.params.assign(model.layout.total(), 0.0);

  Rng rng(config.seed);
  auto fill_uniform = [&](Param p, double range) {
    for (double& v : model.param(p)) v = rng.uniform(-range, range);
  };
  auto fill_glorot = [&](Param p, std::size_t fan_in, std::size_t fan_out) {
    fill_uniform(p, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
  };

  const std::size_t E = static_cast<std::size_t>(config.embed_dim);
  const std::size_t H = static_cast<std::size_t>(config.hidden_dim);
  fill_uniform(Param::kQueryEmbed, 0.1);
  fill_uniform(Param::kDecEmbed, 0.1);
  fill_glorot(Param::kEncW, E, H);
  fill_glorot(Param::kRnnU, H, H);
  fill_glorot(Param::kRnnW, E, H);
  fill_glorot(Param::kAttnQ, H, H);
  fill_glorot(Param::kAttnK, H, H);
  fill_uniform(Param::kAttnV, 0.1);
  fill_glorot(Param::kOutW, 2 * H, kDocidVocab);
  // biases stay zero
  return model;
}

std::span<double> ScorerModel::param(Param p) {
  int i = static_cast<int>(p);
  return {params.data() + layout.offsets[i], layout.shapes[i].size()};
}

std::span<const double> ScorerModel::param(Param p) const {
  int i = static_cast<int>(p);
  return {params.data() + layout.offsets[i], layout.shapes[i].size()};
}

GradientSet GradientSet::zeros_like(const ScorerModel& model) {
  GradientSet g;
  g.values.assign(model.params.size(), 0.0);
  return g;
}

void GradientSet::accumulate(const GradientSet& other, double scale) {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
}

std::span<double> GradientSet::param(const ScorerModel& model, Param p) {
  int i = static_cast<int>(p);
  return {values.data() + model.layout.offsets[i], model.layout.shapes[i].size()};
}

namespace {

// y += A x, A is rows x cols row-major.
void matvec_acc(std::span<const double> A, const double* x, double* y,
                std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = A.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y += A^T x.
void matvec_t_acc(std::span<const double> A, const double* x, double* y,
                  std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = A.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * xr;
  }
}

// dA += x y^T (outer product accumulate), dA is rows x cols.
void outer_acc(std::span<double> dA, const double* x, const double* y,
               std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    double* row = dA.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += xr * y[c];
  }
}

double logsumexp(const LogProbs& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

void check_token(int token, int limit, const char* what) {
  if (token < 0 || token >= limit) {
    throw std::out_of_range(std::string(what) + " token id out of range: " +
                            std::to_string(token));
  }
}

}  // namespace

EncoderTrace encode_query(const ScorerModel& model, std::span<const int> query_tokens) {
  if (query_tokens.empty()) {
    throw std::invalid_argument("query token sequence must be non-empty");
  }
  const std::size_t E = static_cast<std::size_t>(model.config.embed_dim);
  const std::size_t H = static_cast<std::size_t>(model.config.hidden_dim);
  const std::size_t m = query_tokens.size();

  auto query_embed = model.param(Param::kQueryEmbed);
  auto enc_w = model.param(Param::kEncW);
  auto enc_b = model.param(Param::kEncB);
  auto attn_k = model.param(Param::kAttnK);

  EncoderTrace enc;
  enc.tokens.assign(query_tokens.begin(), query_tokens.end());
  enc.states.assign(m * H, 0.0);
  enc.attn_keys.assign(m * H, 0.0);
  enc.pooled.assign(H, 0.0);

  for (std::size_t i = 0; i < m; ++i) {
    check_token(enc.tokens[i], model.config.query_vocab, "query");
    const double* e = query_embed.data() + static_cast<std::size_t>(enc.tokens[i]) * E;
    double* h = enc.states.data() + i * H;
    for (std::size_t r = 0; r < H; ++r) h[r] = enc_b[r];
    matvec_acc(enc_w, e, h, H, E);
    for (std::size_t r = 0; r < H; ++r) h[r] = std::tanh(h[r]);
    matvec_acc(attn_k, h, enc.attn_keys.data() + i * H, H, H);
    for (std::size_t r = 0; r < H; ++r) enc.pooled[r] += h[r];
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t r = 0; r < H; ++r) enc.pooled[r] *= inv_m;
  return enc;
}

LogProbs decoder_step(const ScorerModel& model, const EncoderTrace& enc,
                      std::span<const double> prev_state, int input_token,
                      std::vector<double>* next_state, StepTrace* trace) {
  check_token(input_token, kDocidVocab, "docid");
  const std::size_t E = static_cast<std::size_t>(model.config.embed_dim);
  const std::size_t H = static_cast<std::size_t>(model.config.hidden_dim);
  const std::size_t m = enc.tokens.size();

  auto dec_embed = model.param(Param::kDecEmbed);
  auto rnn_u = model.param(Param::kRnnU);
  auto rnn_w = model.param(Param::kRnnW);
  auto rnn_b = model.param(Param::kRnnB);
  auto attn_q = model.param(Param::kAttnQ);
  auto attn_b = model.param(Param::kAttnB);
  auto attn_v = model.param(Param::kAttnV);
  auto out_w = model.param(Param::kOutW);
  auto out_b = model.param(Param::kOutB);

  // state update
  std::vector<double> state(H);
  for (std::size_t r = 0; r < H; ++r) state[r] = rnn_b[r];
  matvec_acc(rnn_u, prev_state.data(), state.data(), H, H);
  matvec_acc(rnn_w, dec_embed.data() + static_cast<std::size_t>(input_token) * E,
             state.data(), H, E);
  for (std::size_t r = 0; r < H; ++r) state[r] = std::tanh(state[r]);

  // additive attention over encoder token states
  std::vector<double> attn_query(H);
  for (std::size_t r = 0; r < H; ++r) attn_query[r] = attn_b[r];
  matvec_acc(attn_q, state.data(), attn_query.data(), H, H);

  std::vector<double> scores(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* key = enc.attn_keys.data() + i * H;
    double s = 0.0;
    for (std::size_t r = 0; r < H; ++r) {
      s += attn_v[r] * std::tanh(attn_query[r] + key[r]);
    }
    scores[i] = s;
  }
  double max_score = scores[0];
  for (double s : scores) max_score = std::max(max_score, s);
  double denom = 0.0;
  std::vector<double> attn_w(m);
  for (std::size_t i = 0; i < m; ++i) {
    attn_w[i] = std::exp(scores[i] - max_score);
    denom += attn_w[i];
  }
  for (std::size_t i = 0; i < m; ++i) attn_w[i] /= denom;

  std::vector<double> context(H, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* h = enc.states.data() + i * H;
    const double w = attn_w[i];
    for (std::size_t r = 0; r < H; ++r) context[r] += w * h[r];
  }

  // output projection over [state; context]
  LogProbs logits;
  for (int v = 0; v < kDocidVocab; ++v) {
    const double* row = out_w.data() + static_cast<std::size_t>(v) * 2 * H;
    double acc = out_b[v];
    for (std::size_t r = 0; r < H; ++r) acc += row[r] * state[r];
    for (std::size_t r = 0; r < H; ++r) acc += row[H + r] * context[r];
    logits[v] = acc;
  }
  LogProbs logprobs;
  const double lse = logsumexp(logits);
  for (int v = 0; v < kDocidVocab; ++v) logprobs[v] = logits[v] - lse;

  if (next_state) *next_state = state;
  if (trace) {
    trace->input_token = input_token;
    trace->state = std::move(state);
    trace->attn_query = std::move(attn_query);
    trace->attn_w = std::move(attn_w);
    trace->logits = logits;
    trace->logprobs = logprobs;
  }
  return logprobs;
}

LogProbs token_logprobs(const ScorerModel& model, std::span<const int> query_tokens,
                        std::span<const int> prefix) {
  if (prefix.empty() || prefix[0] != kBosToken) {
    throw std::invalid_argument("docid prefix must begin with BOS");
  }
  EncoderTrace enc = encode_query(model, query_tokens);
  std::vector<double> state = enc.pooled;
  LogProbs lp{};
  for (std::size_t t = 0; t < prefix.size(); ++t) {
    lp = decoder_step(model, enc, state, prefix[t], &state, nullptr);
  }
  return lp;
}

SequenceTrace run_teacher_forced(const ScorerModel& model, const EncoderTrace& enc,
                                 const Docid& docid) {
  SequenceTrace seq;
  seq.targets = docid.tokens_with_eos();
  seq.steps.resize(seq.targets.size());
  std::vector<double> state = enc.pooled;
  int input = kBosToken;
  for (std::size_t t = 0; t < seq.targets.size(); ++t) {
    decoder_step(model, enc, state, input, &state, &seq.steps[t]);
    input = seq.targets[t];
  }
  return seq;
}

double sequence_logprob(const ScorerModel& model, const EncoderTrace& enc,
                        const Docid& docid) {
  std::vector<double> state = enc.pooled;
  int input = kBosToken;
  double total = 0.0;
  for (int target : docid.tokens_with_eos()) {
    LogProbs lp = decoder_step(model, enc, state, input, &state, nullptr);
    total += lp[target];
    input = target;
  }
  return total;
}

double sequence_logprob(const ScorerModel& model, std::span<const int> query_tokens,
                        const Docid& docid) {
  EncoderTrace enc = encode_query(model, query_tokens);
  return sequence_logprob(model, enc, docid);
}

void backward_sequence(const ScorerModel& model, const EncoderTrace& enc,
                       const SequenceTrace& seq,
                       const std::vector<LogProbs>& grad_logprobs,
                       GradientSet& grads) {
  const std::size_t E = static_cast<std::size_t>(model.config.embed_dim);
  const std::size_t H = static_cast<std::size_t>(model.config.hidden_dim);
  const std::size_t m = enc.tokens.size();
  const std::size_t T = seq.steps.size();
  if (grad_logprobs.size() != T) {
    throw std::invalid_argument("grad_logprobs/steps size mismatch");
  }

  auto query_embed = model.param(Param::kQueryEmbed);
  auto enc_w = model.param(Param::kEncW);
  auto dec_embed = model.param(Param::kDecEmbed);
  auto rnn_u = model.param(Param::kRnnU);
  auto rnn_w = model.param(Param::kRnnW);
  auto attn_q = model.param(Param::kAttnQ);
  auto attn_k = model.param(Param::kAttnK);
  auto attn_v = model.param(Param::kAttnV);
  auto out_w = model.param(Param::kOutW);

  auto g_query_embed = grads.param(model, Param::kQueryEmbed);
  auto g_enc_w = grads.param(model, Param::kEncW);
  auto g_enc_b = grads.param(model, Param::kEncB);
  auto g_dec_embed = grads.param(model, Param::kDecEmbed);
  auto g_rnn_u = grads.param(model, Param::kRnnU);
  auto g_rnn_w = grads.param(model, Param::kRnnW);
  auto g_rnn_b = grads.param(model, Param::kRnnB);
  auto g_attn_q = grads.param(model, Param::kAttnQ);
  auto g_attn_k = grads.param(model, Param::kAttnK);
  auto g_attn_b = grads.param(model, Param::kAttnB);
  auto g_attn_v = grads.param(model, Param::kAttnV);
  auto g_out_w = grads.param(model, Param::kOutW);
  auto g_out_b = grads.param(model, Param::kOutB);

  std::vector<double> d_enc_states(m * H, 0.0);  // accumulated d loss / d h_i
  std::vector<double> d_pooled(H, 0.0);
  std::vector<double> d_state_next(H, 0.0);  // carried through BPTT

  std::vector<double> d_state(H), d_ctx(H), d_attn_query(H);
  std::vector<double> d_scores;
  std::vector<double> tanh_buf(H);

  for (std::size_t t = T; t-- > 0;) {
    const StepTrace& step = seq.steps[t];
    const auto& dlp = grad_logprobs[t];

    // log-softmax backward: dz = dlp - softmax(z) * sum(dlp)
    double dsum = 0.0;
    for (int v = 0; v < kDocidVocab; ++v) dsum += dlp[v];
    LogProbs dz;
    for (int v = 0; v < kDocidVocab; ++v) {
      dz[v] = dlp[v] - std::exp(step.logprobs[v]) * dsum;
    }

    // output projection
    std::fill(d_state.begin(), d_state.end(), 0.0);
    std::fill(d_ctx.begin(), d_ctx.end(), 0.0);
    for (int v = 0; v < kDocidVocab; ++v) {
      const double dv = dz[v];
      g_out_b[v] += dv;
      if (dv == 0.0) continue;
      double* grow = g_out_w.data() + static_cast<std::size_t>(v) * 2 * H;
      const double* row = out_w.data() + static_cast<std::size_t>(v) * 2 * H;
      // context is recomputed from attention weights and encoder states
      for (std::size_t r = 0; r < H; ++r) {
        grow[r] += dv * step.state[r];
        d_state[r] += dv * row[r];
        d_ctx[r] += dv * row[H + r];
      }
    }
    // context part of the out_w gradient and d_ctx -> attention weights
    d_scores.assign(m, 0.0);
    double d_ctx_dot_sum = 0.0;
    std::vector<double> dw(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* h = enc.states.data() + i * H;
      double dot = 0.0;
      for (std::size_t r = 0; r < H; ++r) dot += d_ctx[r] * h[r];
      dw[i] = dot;
      // dh_i += w_i * d_ctx
      double* dh = d_enc_states.data() + i * H;
      const double wi = step.attn_w[i];
      for (std::size_t r = 0; r < H; ++r) dh[r] += wi * d_ctx[r];
    }
    // out_w rows also need the context vector itself
    {
      std::vector<double> context(H, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double* h = enc.states.data() + i * H;
        const double wi = step.attn_w[i];
        for (std::size_t r = 0; r < H; ++r) context[r] += wi * h[r];
      }
      for (int v = 0; v < kDocidVocab; ++v) {
        const double dv = dz[v];
        if (dv == 0.0) continue;
        double* grow = g_out_w.data() + static_cast<std::size_t>(v) * 2 * H;
        for (std::size_t r = 0; r < H; ++r) grow[H + r] += dv * context[r];
      }
    }

    // softmax backward over attention weights
    double wdot = 0.0;
    for (std::size_t i = 0; i < m; ++i) wdot += step.attn_w[i] * dw[i];
    for (std::size_t i = 0; i < m; ++i) {
      d_scores[i] = step.attn_w[i] * (dw[i] - wdot);
    }

    // additive attention backward; u_i = tanh(attn_query + key_i) recomputed
    std::fill(d_attn_query.begin(), d_attn_query.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double ds = d_scores[i];
      if (ds == 0.0) continue;
      const double* key = enc.attn_keys.data() + i * H;
      double* dh = d_enc_states.data() + i * H;
      for (std::size_t r = 0; r < H; ++r) {
        const double u = std::tanh(step.attn_query[r] + key[r]);
        g_attn_v[r] += ds * u;
        const double dpre = ds * attn_v[r] * (1.0 - u * u);
        d_attn_query[r] += dpre;
        // key path: d attn_k += dpre h_i^T, dh_i += attn_k^T dpre
        tanh_buf[r] = dpre;
      }
      const double* h = enc.states.data() + i * H;
      outer_acc(g_attn_k, tanh_buf.data(), h, H, H);
      matvec_t_acc(attn_k, tanh_buf.data(), dh, H, H);
    }
    // attention query path
    for (std::size_t r = 0; r < H; ++r) g_attn_b[r] += d_attn_query[r];
    outer_acc(g_attn_q, d_attn_query.data(), step.state.data(), H, H);
    matvec_t_acc(attn_q, d_attn_query.data(), d_state.data(), H, H);

    // carry from step t+1 through the RNN
    for (std::size_t r = 0; r < H; ++r) d_state[r] += d_state_next[r];

    // tanh state backward
    for (std::size_t r = 0; r < H; ++r) {
      tanh_buf[r] = d_state[r] * (1.0 - step.state[r] * step.state[r]);
    }
    for (std::size_t r = 0; r < H; ++r) g_rnn_b[r] += tanh_buf[r];
    const double* x = dec_embed.data() + static_cast<std::size_t>(step.input_token) * E;
    outer_acc(g_rnn_w, tanh_buf.data(), x, H, E);
    matvec_t_acc(rnn_w, tanh_buf.data(),
                 g_dec_embed.data() + static_cast<std::size_t>(step.input_token) * E, H, E);
    const double* prev =
        (t == 0) ? enc.pooled.data() : seq.steps[t - 1].state.data();
    outer_acc(g_rnn_u, tanh_buf.data(), prev, H, H);
    std::fill(d_state_next.begin(), d_state_next.end(), 0.0);
    matvec_t_acc(rnn_u, tanh_buf.data(), d_state_next.data(), H, H);
  }
  // the remaining carry is d loss / d pooled
  for (std::size_t r = 0; r < H; ++r) d_pooled[r] += d_state_next[r];

  // encoder backward
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> da(H);
  for (std::size_t i = 0; i < m; ++i) {
    const double* h = enc.states.data() + i * H;
    double* dh = d_enc_states.data() + i * H;
    for (std::size_t r = 0; r < H; ++r) dh[r] += inv_m * d_pooled[r];
    for (std::size_t r = 0; r < H; ++r) da[r] = dh[r] * (1.0 - h[r] * h[r]);
    for (std::size_t r = 0; r < H; ++r) g_enc_b[r] += da[r];
    const double* e =
        query_embed.data() + static_cast<std::size_t>(enc.tokens[i]) * E;
    outer_acc(g_enc_w, da.data(), e, H, E);
    matvec_t_acc(enc_w, da.data(),
                 g_query_embed.data() + static_cast<std::size_t>(enc.tokens[i]) * E,
                 H, E);
  }
}

GradientSet parameter_gradients(const ScorerModel& model, const LossClosure& loss,
                                double* loss_value) {
  GradientSet grads = GradientSet::zeros_like(model);
  double value = loss(model, grads);
  if (!std::isfinite(value)) throw std::runtime_error("non-finite loss");
  for (double g : grads.values) {
    if (!std::isfinite(g)) throw std::runtime_error("non-finite loss");
  }
  if (loss_value) *loss_value = value;
  return grads;
}

}  // namespace listgen
