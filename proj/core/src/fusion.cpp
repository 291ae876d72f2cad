#include "dialoforge/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dialoforge/errors.hpp"
#include "dialoforge/rng.hpp"

namespace dialoforge::fusion {

std::string_view to_string(Expert e) {
  switch (e) {
    case Expert::speech: return "speech";
    case Expert::emotion: return "emotion";
    case Expert::beat: return "beat";
  }
  return "?";
}

void FusionConfig::validate() const {
  if (window_len < 1) throw ContractError("window_len must be >= 1");
  if (queries_per_window < 1) throw ContractError("queries_per_window must be >= 1");
  if (model_dim < 1) throw ContractError("model_dim must be >= 1");
}

std::size_t window_count(std::size_t n_frames, int window_len, WindowRounding rounding) {
  if (window_len < 1) throw ContractError("window_len must be >= 1");
  const auto l = static_cast<std::size_t>(window_len);
  return rounding == WindowRounding::ceil ? (n_frames + l - 1) / l : n_frames / l;
}

namespace {

using std::exp;
using std::log;
using std::sqrt;

template <typename S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + exp(-x));
  const S e = exp(x);
  return e / (S(1) + e);
}

template <typename S>
struct WindowT {
  MatrixX<S> frames;
  std::vector<char> valid;
  int valid_count = 0;
};

template <typename S>
std::vector<WindowT<S>> segment(const MatrixX<S>& f, int window_len, WindowRounding rounding) {
  const auto n = static_cast<std::size_t>(f.rows());
  const std::size_t count = window_count(n, window_len, rounding);
  std::vector<WindowT<S>> out(count);
  for (std::size_t w = 0; w < count; ++w) {
    auto& win = out[w];
    win.frames = MatrixX<S>::Zero(window_len, f.cols());
    win.valid.assign(static_cast<std::size_t>(window_len), 0);
    for (int i = 0; i < window_len; ++i) {
      const std::size_t src = w * static_cast<std::size_t>(window_len) + static_cast<std::size_t>(i);
      if (src >= n) break;
      win.frames.row(i) = f.row(static_cast<Eigen::Index>(src));
      win.valid[static_cast<std::size_t>(i)] = 1;
      ++win.valid_count;
    }
  }
  return out;
}

template <typename S>
struct WindowCache {
  MatrixX<S> qw, kw, vw, attn, ctx, hidden;
};

template <typename S>
WindowCache<S> qformer_forward(const BasicQFormerParams<S>& p, const WindowT<S>& win) {
  const Eigen::Index d = p.w_q.rows();
  if (win.frames.cols() != d || p.queries.cols() != d || p.w_k.rows() != d || p.w_v.rows() != d ||
      p.w_o.rows() != d || p.w_q.cols() != d || p.w_k.cols() != d || p.w_v.cols() != d || p.w_o.cols() != d) {
    throw ContractError("query-attention dimensions are inconsistent");
  }
  if (p.queries.rows() < 1) throw ContractError("at least one query is required");
  if (win.valid_count == 0) throw ContractError("every frame of the window is masked");
  WindowCache<S> c;
  c.qw = p.queries * p.w_q;
  c.kw = win.frames * p.w_k;
  c.vw = win.frames * p.w_v;
  const S scale = S(1) / sqrt(static_cast<S>(d));
  MatrixX<S> scores = (c.qw * c.kw.transpose()) * scale;
  const Eigen::Index k_rows = scores.rows();
  const Eigen::Index l = scores.cols();
  c.attn = MatrixX<S>::Zero(k_rows, l);
  for (Eigen::Index k = 0; k < k_rows; ++k) {
    S mx = -std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < l; ++j) {
      if (win.valid[static_cast<std::size_t>(j)] && scores(k, j) > mx) mx = scores(k, j);
    }
    S total = S(0);
    for (Eigen::Index j = 0; j < l; ++j) {
      if (!win.valid[static_cast<std::size_t>(j)]) continue;
      c.attn(k, j) = exp(scores(k, j) - mx);
      total += c.attn(k, j);
    }
    c.attn.row(k) /= total;
  }
  c.ctx = c.attn * c.vw;
  c.hidden = c.ctx * p.w_o;
  return c;
}

template <typename S>
struct ExpertCache {
  std::vector<WindowT<S>> windows;
  std::vector<WindowCache<S>> qf;
  MatrixX<S> hidden;  // R x D
  VectorX<S> weight;  // R
  // per_frame gate mode: sigmoid value of each frame, per window
  std::vector<std::vector<S>> frame_gates;
};

template <typename S>
struct TurnCache {
  std::array<ExpertCache<S>, kExperts> experts;
  MatrixX<S> concat;  // R x sum(D), gated
  MatrixX<S> fused;   // R x D_model
};

template <typename S>
ExpertCache<S> expert_forward(const BasicQFormerParams<S>& qp, const BasicGateParams<S>& gp, const FusionConfig& cfg,
                              const MatrixX<S>& frames) {
  if (frames.rows() < 1) throw ContractError("feature sequence has no frames");
  ExpertCache<S> e;
  e.windows = segment(frames, cfg.window_len, cfg.rounding);
  if (e.windows.empty()) throw ContractError("feature sequence is shorter than one window");
  const Eigen::Index k = qp.queries.rows();
  if (k != cfg.queries_per_window) throw ContractError("query count differs from queries_per_window");
  const Eigen::Index d = qp.w_q.rows();
  if (gp.weight.size() != d) throw ContractError("gate width differs from expert width");
  const auto w_count = static_cast<Eigen::Index>(e.windows.size());
  e.hidden.resize(w_count * k, d);
  e.qf.reserve(e.windows.size());
  for (Eigen::Index w = 0; w < w_count; ++w) {
    e.qf.push_back(qformer_forward(qp, e.windows[static_cast<std::size_t>(w)]));
    e.hidden.block(w * k, 0, k, d) = e.qf.back().hidden;
  }
  if (cfg.gate_mode == GateMode::per_window) {
    VectorX<S> pre = e.hidden * gp.weight;
    e.weight.resize(pre.size());
    for (Eigen::Index r = 0; r < pre.size(); ++r) e.weight(r) = sigmoid(pre(r) + gp.bias);
  } else {
    e.weight.resize(w_count * k);
    e.frame_gates.resize(e.windows.size());
    for (Eigen::Index w = 0; w < w_count; ++w) {
      const auto& win = e.windows[static_cast<std::size_t>(w)];
      auto& gates = e.frame_gates[static_cast<std::size_t>(w)];
      gates.assign(win.valid.size(), S(0));
      S total = S(0);
      for (std::size_t f = 0; f < win.valid.size(); ++f) {
        if (!win.valid[f]) continue;
        gates[f] = sigmoid(S(win.frames.row(static_cast<Eigen::Index>(f)).dot(gp.weight)) + gp.bias);
        total += gates[f];
      }
      e.weight.segment(w * k, k).setConstant(total / static_cast<S>(win.valid_count));
    }
  }
  return e;
}

template <typename S>
MatrixX<S> fuse(const std::array<const MatrixX<S>*, kExperts>& hidden, const std::array<const VectorX<S>*, kExperts>& w,
                const MatrixX<S>& projection, const VectorX<S>& bias, MatrixX<S>* concat_out) {
  const Eigen::Index rows = hidden[0]->rows();
  Eigen::Index width = 0;
  for (std::size_t e = 0; e < kExperts; ++e) {
    if (hidden[e]->rows() != rows) throw ContractError("window-frame counts differ across experts");
    if (w[e]->size() != rows) throw ContractError("gate count differs from window-frame count");
    width += hidden[e]->cols();
  }
  if (projection.rows() != width) throw ContractError("projection rows differ from concatenated width");
  if (bias.size() != projection.cols()) throw ContractError("projection bias width differs from model width");
  MatrixX<S> concat(rows, width);
  Eigen::Index off = 0;
  for (std::size_t e = 0; e < kExperts; ++e) {
    const Eigen::Index d = hidden[e]->cols();
    concat.block(0, off, rows, d) = w[e]->asDiagonal() * (*hidden[e]);
    off += d;
  }
  MatrixX<S> z = concat * projection;
  z.rowwise() += bias.transpose();
  if (concat_out) *concat_out = std::move(concat);
  return z;
}

template <typename S>
TurnCache<S> turn_forward(const BasicFusionParams<S>& p, const FusionConfig& cfg,
                          const std::array<MatrixX<S>, kExperts>& features) {
  cfg.validate();
  TurnCache<S> t;
  for (std::size_t e = 0; e < kExperts; ++e) {
    t.experts[e] = expert_forward(p.qformer[e], p.gate[e], cfg, features[e]);
  }
  t.fused = fuse<S>({&t.experts[0].hidden, &t.experts[1].hidden, &t.experts[2].hidden},
                    {&t.experts[0].weight, &t.experts[1].weight, &t.experts[2].weight}, p.projection,
                    p.projection_bias, &t.concat);
  return t;
}

// ---- decoder ----

template <typename S>
struct PositionCache {
  std::size_t turn = 0;
  int target = 0;
  std::vector<int> prefix;  // earlier tokens, in order
  VectorX<S> state, query, attn, ctx, h, probs;
  S nll = S(0);
};

template <typename S>
struct DecoderCache {
  std::vector<MatrixX<S>> memory;  // per turn: stacked Z_1..Z_t
  std::vector<MatrixX<S>> keys, values;
  std::vector<PositionCache<S>> positions;
};

template <typename S>
void check_decoder(const BasicDecoderParams<S>& d, Eigen::Index model_dim) {
  const Eigen::Index v = d.embedding.rows();
  const Eigen::Index dt = d.embedding.cols();
  const Eigen::Index da = d.w_query.cols();
  if (v < 2) throw ContractError("vocabulary must have at least 2 tokens");
  if (d.bos.size() != dt || d.w_query.rows() != dt || d.w_key.rows() != model_dim || d.w_key.cols() != da ||
      d.w_value.rows() != model_dim || d.w_value.cols() != dt || d.w_out.rows() != dt || d.w_out.cols() != v ||
      d.b_out.size() != v || da < 1) {
    throw ContractError("decoder dimensions are inconsistent");
  }
}

template <typename S>
DecoderCache<S> decoder_forward(const std::vector<MatrixX<S>>& fused, const std::vector<std::vector<int>>& targets,
                                const BasicDecoderParams<S>& d) {
  if (fused.empty()) throw ContractError("dialogue has no turns");
  if (fused.size() != targets.size()) throw ContractError("turn count differs between features and targets");
  const Eigen::Index model_dim = fused[0].cols();
  check_decoder(d, model_dim);
  const Eigen::Index v = d.embedding.rows();
  const S scale = S(1) / sqrt(static_cast<S>(d.w_query.cols()));

  DecoderCache<S> c;
  std::vector<int> history;
  Eigen::Index total_rows = 0;
  for (std::size_t t = 0; t < fused.size(); ++t) {
    if (fused[t].cols() != model_dim) throw ContractError("fused width differs across turns");
    if (targets[t].empty()) throw ContractError("turn " + std::to_string(t) + " has no target tokens");
    total_rows += fused[t].rows();
    MatrixX<S> mem(total_rows, model_dim);
    if (t > 0) mem.topRows(c.memory.back().rows()) = c.memory.back();
    mem.bottomRows(fused[t].rows()) = fused[t];
    c.memory.push_back(std::move(mem));
    c.keys.push_back(c.memory.back() * d.w_key);
    c.values.push_back(c.memory.back() * d.w_value);
    const auto& keys = c.keys.back();
    const auto& values = c.values.back();

    VectorX<S> sum = d.bos;
    for (int tok : history) sum += d.embedding.row(tok).transpose();
    for (int target : targets[t]) {
      if (target < 0 || target >= v) throw ContractError("target token out of vocabulary");
      PositionCache<S> p;
      p.turn = t;
      p.target = target;
      p.prefix = history;
      p.state = sum / static_cast<S>(history.size() + 1);
      p.query = d.w_query.transpose() * p.state;
      VectorX<S> e = (keys * p.query) * scale;
      const S mx = e.maxCoeff();
      p.attn = (e.array() - mx).exp().matrix();
      p.attn /= p.attn.sum();
      p.ctx = values.transpose() * p.attn;
      p.h = p.state + p.ctx;
      VectorX<S> logits = d.w_out.transpose() * p.h + d.b_out;
      const S lmax = logits.maxCoeff();
      p.probs = (logits.array() - lmax).exp().matrix();
      const S z = p.probs.sum();
      p.probs /= z;
      p.nll = (lmax + log(z)) - logits(target);
      c.positions.push_back(std::move(p));
      history.push_back(target);
      sum += d.embedding.row(target).transpose();
    }
  }
  return c;
}

template <typename S>
std::vector<MatrixX<S>> all_turns_forward(const BasicModel<S>& model, const FusionConfig& cfg,
                                          const std::vector<std::array<MatrixX<S>, kExperts>>& feats,
                                          std::vector<TurnCache<S>>* caches) {
  std::vector<MatrixX<S>> fused;
  fused.reserve(feats.size());
  for (const auto& f : feats) {
    TurnCache<S> tc = turn_forward(model.fusion, cfg, f);
    fused.push_back(tc.fused);
    if (caches) caches->push_back(std::move(tc));
  }
  return fused;
}

template <typename M>
M zeros_like(const M& m) {
  return M::Zero(m.rows(), m.cols());
}

Model zero_model_like(const Model& m) {
  Model g;
  for (std::size_t e = 0; e < kExperts; ++e) {
    const auto& q = m.fusion.qformer[e];
    g.fusion.qformer[e] = {zeros_like(q.queries), zeros_like(q.w_q), zeros_like(q.w_k), zeros_like(q.w_v),
                           zeros_like(q.w_o)};
    g.fusion.gate[e].weight = zeros_like(m.fusion.gate[e].weight);
    g.fusion.gate[e].bias = 0.0;
  }
  g.fusion.projection = zeros_like(m.fusion.projection);
  g.fusion.projection_bias = zeros_like(m.fusion.projection_bias);
  const auto& d = m.decoder;
  g.decoder = {zeros_like(d.embedding), zeros_like(d.bos), zeros_like(d.w_query), zeros_like(d.w_key),
               zeros_like(d.w_value), zeros_like(d.w_out), zeros_like(d.b_out)};
  return g;
}

template <typename S>
std::vector<std::array<MatrixX<S>, kExperts>> cast_features(const DialogueInstance& inst) {
  std::vector<std::array<MatrixX<S>, kExperts>> out;
  out.reserve(inst.turn_features.size());
  for (const auto& t : inst.turn_features) {
    out.push_back({t[0].template cast<S>(), t[1].template cast<S>(), t[2].template cast<S>()});
  }
  return out;
}

template <typename S, typename M>
void push_view(std::vector<ParamView<S>>& out, std::string name, M& m) {
  out.push_back({std::move(name), m.data(), m.rows(), m.cols()});
}

template <typename S>
std::vector<ParamView<S>> views(BasicModel<S>& m) {
  std::vector<ParamView<S>> out;
  for (std::size_t e = 0; e < kExperts; ++e) {
    const std::string p = std::string(to_string(static_cast<Expert>(e))) + ".";
    auto& q = m.fusion.qformer[e];
    push_view(out, p + "queries", q.queries);
    push_view(out, p + "w_q", q.w_q);
    push_view(out, p + "w_k", q.w_k);
    push_view(out, p + "w_v", q.w_v);
    push_view(out, p + "w_o", q.w_o);
    push_view(out, p + "gate.weight", m.fusion.gate[e].weight);
    out.push_back({p + "gate.bias", &m.fusion.gate[e].bias, 1, 1});
  }
  push_view(out, "projection", m.fusion.projection);
  push_view(out, "projection_bias", m.fusion.projection_bias);
  auto& d = m.decoder;
  push_view(out, "decoder.embedding", d.embedding);
  push_view(out, "decoder.bos", d.bos);
  push_view(out, "decoder.w_query", d.w_query);
  push_view(out, "decoder.w_key", d.w_key);
  push_view(out, "decoder.w_value", d.w_value);
  push_view(out, "decoder.w_out", d.w_out);
  push_view(out, "decoder.b_out", d.b_out);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Features

ExpertFeatures extract_mock_features(const Waveform& w, FeatureDims dims) {
  if (w.sample_rate != kCanonicalSampleRate) throw ContractError("feature extraction expects 16 kHz audio");
  if (w.samples.size() < static_cast<std::size_t>(kHopSamples)) {
    throw ContractError("waveform is shorter than one 160-sample hop");
  }
  if (dims.speech < 1 || dims.emotion < 1 || dims.beat < 1) throw ContractError("feature widths must be >= 1");
  constexpr int kStats = 12;
  constexpr int kBins[] = {1, 2, 4, 8, 16};  // 100, 200, 400, 800, 1600 Hz at 160-sample frames
  constexpr int kHighBin = 40;                // 4 kHz
  const auto n = static_cast<Eigen::Index>(w.samples.size() / kHopSamples);
  Matrix stats = Matrix::Zero(n, kStats);
  std::array<double, 5> prev_bands{};
  double prev_energy = 0.0;
  const double pi = std::acos(-1.0);
  auto bin_mag = [&](const double* x, int bin) {
    double re = 0.0, im = 0.0;
    for (int i = 0; i < kHopSamples; ++i) {
      const double ph = 2.0 * pi * bin * i / kHopSamples;
      re += x[i] * std::cos(ph);
      im -= x[i] * std::sin(ph);
    }
    return std::sqrt(re * re + im * im) / kHopSamples;
  };
  for (Eigen::Index f = 0; f < n; ++f) {
    const double* x = w.samples.data() + f * kHopSamples;
    double energy = 0.0, mean_abs = 0.0, pk = 0.0;
    int crossings = 0;
    for (int i = 0; i < kHopSamples; ++i) {
      energy += x[i] * x[i];
      mean_abs += std::abs(x[i]);
      pk = std::max(pk, std::abs(x[i]));
      if (i > 0 && ((x[i] >= 0.0) != (x[i - 1] >= 0.0)) && (x[i] != 0.0 || x[i - 1] != 0.0)) ++crossings;
    }
    energy /= kHopSamples;
    mean_abs /= kHopSamples;
    stats(f, 0) = energy;
    stats(f, 1) = mean_abs;
    stats(f, 2) = pk;
    stats(f, 3) = static_cast<double>(crossings) / (kHopSamples - 1);
    double flux = 0.0;
    for (std::size_t b = 0; b < 5; ++b) {
      const double m = bin_mag(x, kBins[b]);
      stats(f, 4 + static_cast<Eigen::Index>(b)) = m;
      flux += std::max(0.0, m - prev_bands[b]);
      prev_bands[b] = m;
    }
    stats(f, 9) = std::abs(energy - prev_energy);
    prev_energy = energy;
    stats(f, 10) = flux;
    stats(f, 11) = bin_mag(x, kHighBin);
  }

  ExpertFeatures out;
  const std::array<int, kExperts> widths{dims.speech, dims.emotion, dims.beat};
  for (std::size_t e = 0; e < kExperts; ++e) {
    CounterRng rng(derive_seed(0xFEA7, {e}));
    Matrix proj(kStats, widths[e]);
    for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = rng.gaussian() / std::sqrt(double(kStats));
    out[e].expert = static_cast<Expert>(e);
    out[e].frame_rate = static_cast<double>(kCanonicalSampleRate) / kHopSamples;
    out[e].frames = stats * proj;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward pieces (double)

std::vector<Window> segment_windows(const Matrix& frames, int window_len, WindowRounding rounding) {
  if (frames.rows() < 1) throw ContractError("segment_windows needs at least one frame");
  std::vector<Window> out;
  for (auto& w : segment<double>(frames, window_len, rounding)) {
    out.push_back({std::move(w.frames), std::move(w.valid), w.valid_count});
  }
  return out;
}

QFormerOutput qformer_window(const QFormerParams& params, const Window& window) {
  if (window.valid.size() != static_cast<std::size_t>(window.frames.rows())) {
    throw ContractError("mask length differs from window length");
  }
  WindowT<double> w{window.frames, window.valid,
                    static_cast<int>(std::count(window.valid.begin(), window.valid.end(), 1))};
  auto c = qformer_forward(params, w);
  return {std::move(c.hidden), std::move(c.attn)};
}

Matrix qformer_sequence(const QFormerParams& params, const Matrix& frames, const FusionConfig& cfg) {
  GateParams dummy{Vector::Zero(params.w_q.rows()), 0.0};
  return expert_forward(params, dummy, cfg, frames).hidden;
}

Vector gate_weights(const Matrix& hidden, const GateParams& gate) {
  if (gate.weight.size() != hidden.cols()) throw ContractError("gate width differs from hidden width");
  Vector pre = hidden * gate.weight;
  for (Eigen::Index r = 0; r < pre.size(); ++r) pre(r) = sigmoid(pre(r) + gate.bias);
  return pre;
}

Matrix fuse_project(const std::array<Matrix, kExperts>& hidden, const std::array<Vector, kExperts>& weights,
                    const Matrix& projection, const Vector& projection_bias) {
  return fuse<double>({&hidden[0], &hidden[1], &hidden[2]}, {&weights[0], &weights[1], &weights[2]}, projection,
                      projection_bias, nullptr);
}

Matrix mix_former(const FusionParams& params, const FusionConfig& cfg, const std::array<Matrix, kExperts>& features) {
  return turn_forward(params, cfg, features).fused;
}

std::vector<double> position_nll(const std::vector<Matrix>& fused_turns, const std::vector<std::vector<int>>& targets,
                                 const ToyDecoderParams& dec) {
  auto c = decoder_forward(fused_turns, targets, dec);
  std::vector<double> out;
  out.reserve(c.positions.size());
  for (const auto& p : c.positions) out.push_back(p.nll);
  return out;
}

double dialogue_nll(const std::vector<Matrix>& fused_turns, const std::vector<std::vector<int>>& targets,
                    const ToyDecoderParams& dec) {
  const auto terms = position_nll(fused_turns, targets, dec);
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

template <typename S>
S dialogue_loss(const BasicModel<S>& model, const FusionConfig& cfg,
                const std::vector<std::array<MatrixX<S>, kExperts>>& turn_features,
                const std::vector<std::vector<int>>& targets) {
  const auto fused = all_turns_forward<S>(model, cfg, turn_features, nullptr);
  const auto c = decoder_forward(fused, targets, model.decoder);
  S total = S(0);
  for (const auto& p : c.positions) total += p.nll;
  return total;
}

template double dialogue_loss<double>(const BasicModel<double>&, const FusionConfig&,
                                      const std::vector<std::array<MatrixX<double>, kExperts>>&,
                                      const std::vector<std::vector<int>>&);
template long double dialogue_loss<long double>(const BasicModel<long double>&, const FusionConfig&,
                                                const std::vector<std::array<MatrixX<long double>, kExperts>>&,
                                                const std::vector<std::vector<int>>&);

double dialogue_loss(const Model& model, const FusionConfig& cfg, const DialogueInstance& inst) {
  return dialogue_loss<double>(model, cfg, inst.turn_features, inst.targets);
}

// ---------------------------------------------------------------------------
// Backward

LossAndGradient backward(const Model& model, const FusionConfig& cfg, const DialogueInstance& inst) {
  std::vector<TurnCache<double>> turns;
  const auto fused = all_turns_forward(model, cfg, inst.turn_features, &turns);
  const auto dc = decoder_forward(fused, inst.targets, model.decoder);
  const auto& d = model.decoder;

  LossAndGradient out;
  out.grad = zero_model_like(model);
  auto& gd = out.grad.decoder;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(d.w_query.cols()));

  std::vector<Matrix> d_keys, d_values;
  for (std::size_t t = 0; t < fused.size(); ++t) {
    d_keys.push_back(zeros_like(dc.keys[t]));
    d_values.push_back(zeros_like(dc.values[t]));
  }

  for (const auto& p : dc.positions) {
    out.loss += p.nll;
    Vector dlogits = p.probs;
    dlogits(p.target) -= 1.0;
    gd.b_out += dlogits;
    gd.w_out += p.h * dlogits.transpose();
    const Vector dh = d.w_out * dlogits;
    Vector ds = dh;
    const Vector& dctx = dh;
    const auto& keys = dc.keys[p.turn];
    const auto& values = dc.values[p.turn];
    d_values[p.turn] += p.attn * dctx.transpose();
    const Vector da = values * dctx;
    const double mean = p.attn.dot(da);
    const Vector de = p.attn.cwiseProduct((da.array() - mean).matrix());
    const Vector dq = keys.transpose() * de * att_scale;
    d_keys[p.turn] += de * p.query.transpose() * att_scale;
    gd.w_query += p.state * dq.transpose();
    ds += d.w_query * dq;
    const double inv = 1.0 / static_cast<double>(p.prefix.size() + 1);
    gd.bos += ds * inv;
    for (int tok : p.prefix) gd.embedding.row(tok) += ds.transpose() * inv;
  }

  std::vector<Matrix> d_fused;
  for (const auto& z : fused) d_fused.push_back(zeros_like(z));
  for (std::size_t t = 0; t < fused.size(); ++t) {
    const Matrix& mem = dc.memory[t];
    gd.w_key += mem.transpose() * d_keys[t];
    gd.w_value += mem.transpose() * d_values[t];
    const Matrix d_mem = d_keys[t] * d.w_key.transpose() + d_values[t] * d.w_value.transpose();
    Eigen::Index row = 0;
    for (std::size_t u = 0; u <= t; ++u) {
      d_fused[u] += d_mem.middleRows(row, fused[u].rows());
      row += fused[u].rows();
    }
  }

  auto& gf = out.grad.fusion;
  const auto& f = model.fusion;
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const auto& tc = turns[t];
    const Matrix& dz = d_fused[t];
    gf.projection += tc.concat.transpose() * dz;
    gf.projection_bias += dz.colwise().sum().transpose();
    const Matrix d_concat = dz * f.projection.transpose();
    Eigen::Index off = 0;
    for (std::size_t e = 0; e < kExperts; ++e) {
      const auto& ec = tc.experts[e];
      const auto& qp = f.qformer[e];
      auto& gq = gf.qformer[e];
      auto& gg = gf.gate[e];
      const Eigen::Index dim = ec.hidden.cols();
      const Eigen::Index k = qp.queries.rows();
      const Matrix d_gated = d_concat.middleCols(off, dim);
      off += dim;
      Matrix d_hidden = ec.weight.asDiagonal() * d_gated;
      const Vector d_w = d_gated.cwiseProduct(ec.hidden).rowwise().sum();
      if (cfg.gate_mode == GateMode::per_window) {
        const Vector d_pre = d_w.cwiseProduct(ec.weight.cwiseProduct((1.0 - ec.weight.array()).matrix()));
        gg.weight += ec.hidden.transpose() * d_pre;
        gg.bias += d_pre.sum();
        d_hidden += d_pre * f.gate[e].weight.transpose();
      } else {
        for (std::size_t w = 0; w < ec.windows.size(); ++w) {
          const auto& win = ec.windows[w];
          const double dw_window = d_w.segment(static_cast<Eigen::Index>(w) * k, k).sum();
          for (std::size_t fr = 0; fr < win.valid.size(); ++fr) {
            if (!win.valid[fr]) continue;
            const double s = ec.frame_gates[w][fr];
            const double d_pre = dw_window / win.valid_count * s * (1.0 - s);
            gg.weight += d_pre * win.frames.row(static_cast<Eigen::Index>(fr)).transpose();
            gg.bias += d_pre;
          }
        }
      }
      const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
      for (std::size_t w = 0; w < ec.windows.size(); ++w) {
        const auto& win = ec.windows[w];
        const auto& qc = ec.qf[w];
        const Matrix d_h = d_hidden.middleRows(static_cast<Eigen::Index>(w) * k, k);
        gq.w_o += qc.ctx.transpose() * d_h;
        const Matrix d_ctx = d_h * qp.w_o.transpose();
        const Matrix d_attn = d_ctx * qc.vw.transpose();
        const Matrix d_vw = qc.attn.transpose() * d_ctx;
        Matrix d_scores(qc.attn.rows(), qc.attn.cols());
        for (Eigen::Index r = 0; r < qc.attn.rows(); ++r) {
          const double dot = qc.attn.row(r).dot(d_attn.row(r));
          d_scores.row(r) = qc.attn.row(r).cwiseProduct((d_attn.row(r).array() - dot).matrix());
        }
        const Matrix d_qw = d_scores * qc.kw * scale;
        const Matrix d_kw = d_scores.transpose() * qc.qw * scale;
        gq.queries += d_qw * qp.w_q.transpose();
        gq.w_q += qp.queries.transpose() * d_qw;
        gq.w_k += win.frames.transpose() * d_kw;
        gq.w_v += win.frames.transpose() * d_vw;
      }
    }
  }

  for (auto& v : param_views(out.grad)) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v.data[i])) throw NumericError("non-finite analytic gradient in " + v.name);
    }
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  return out;
}

std::vector<ParamView<double>> param_views(Model& model) { return views(model); }
std::vector<ParamView<long double>> param_views(BasicModel<long double>& model) { return views(model); }

std::size_t param_count(const Model& model) {
  Model copy = model;
  std::size_t n = 0;
  for (const auto& v : param_views(copy)) n += static_cast<std::size_t>(v.size());
  return n;
}

BasicModel<long double> to_extended(const Model& m) {
  using L = long double;
  BasicModel<L> x;
  for (std::size_t e = 0; e < kExperts; ++e) {
    const auto& q = m.fusion.qformer[e];
    x.fusion.qformer[e] = {q.queries.cast<L>(), q.w_q.cast<L>(), q.w_k.cast<L>(), q.w_v.cast<L>(), q.w_o.cast<L>()};
    x.fusion.gate[e] = {m.fusion.gate[e].weight.cast<L>(), static_cast<L>(m.fusion.gate[e].bias)};
  }
  x.fusion.projection = m.fusion.projection.cast<L>();
  x.fusion.projection_bias = m.fusion.projection_bias.cast<L>();
  const auto& d = m.decoder;
  x.decoder = {d.embedding.cast<L>(), d.bos.cast<L>(),   d.w_query.cast<L>(), d.w_key.cast<L>(),
               d.w_value.cast<L>(),   d.w_out.cast<L>(), d.b_out.cast<L>()};
  return x;
}

GradcheckReport compare_gradients(const Model& model, const FusionConfig& cfg, const DialogueInstance& inst,
                                  const Model& analytic, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ContractError("finite-difference step must be positive");
  using L = long double;
  BasicModel<L> x = to_extended(model);
  const auto feats = cast_features<L>(inst);
  auto xv = param_views(x);
  Model a = analytic;
  auto av = param_views(a);
  if (av.size() != xv.size()) throw ContractError("analytic gradient has a different parameter layout");

  GradcheckReport rep;
  rep.loss = static_cast<double>(dialogue_loss<L>(x, cfg, feats, inst.targets));
  const L h = static_cast<L>(eps);
  for (std::size_t p = 0; p < xv.size(); ++p) {
    if (av[p].rows != xv[p].rows || av[p].cols != xv[p].cols) {
      throw ContractError("analytic gradient shape differs for " + xv[p].name);
    }
    for (Eigen::Index i = 0; i < xv[p].size(); ++i) {
      L& theta = xv[p].data[i];
      const L orig = theta;
      auto at = [&](L offset) {
        theta = orig + offset;
        return dialogue_loss<L>(x, cfg, feats, inst.targets);
      };
      const L f1p = at(h), f1m = at(-h), f2p = at(2 * h), f2m = at(-2 * h);
      theta = orig;
      const double numeric = static_cast<double>((-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h));
      const double g = av[p].data[i];
      if (!std::isfinite(numeric) || !std::isfinite(g)) {
        throw NumericError("non-finite gradient for " + xv[p].name + "[" + std::to_string(i) + "]");
      }
      const double err = std::abs(g - numeric) / std::max({std::abs(g), std::abs(numeric), 1e-8});
      ++rep.checked;
      if (rep.worst_param.empty() || err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_param = xv[p].name;
        rep.worst_index = i;
        rep.worst_analytic = g;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

GradcheckReport backward_and_gradcheck(const Model& model, const FusionConfig& cfg, const DialogueInstance& inst,
                                       double eps) {
  if (eps < 1e-6 || eps > 1e-4) throw ContractError("eps must lie in [1e-6, 1e-4]");
  const auto lg = backward(model, cfg, inst);
  return compare_gradients(model, cfg, inst, lg.grad, eps);
}

// ---------------------------------------------------------------------------
// Random instances

namespace {

void fill_gaussian(Matrix& m, CounterRng& rng, double scale) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
}
void fill_gaussian(Vector& m, CounterRng& rng, double scale) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
}

}  // namespace

Model random_model(const ModelShape& s, std::uint64_t seed, double scale) {
  CounterRng rng(seed);
  Model m;
  int concat = 0;
  for (std::size_t e = 0; e < kExperts; ++e) {
    const int d = s.expert_dims[e];
    if (d < 1) throw ContractError("expert width must be >= 1");
    concat += d;
    auto& q = m.fusion.qformer[e];
    q.queries.resize(s.queries, d);
    q.w_q.resize(d, d);
    q.w_k.resize(d, d);
    q.w_v.resize(d, d);
    q.w_o.resize(d, d);
    for (Matrix* x : {&q.queries, &q.w_q, &q.w_k, &q.w_v, &q.w_o}) fill_gaussian(*x, rng, scale);
    m.fusion.gate[e].weight.resize(d);
    fill_gaussian(m.fusion.gate[e].weight, rng, scale);
    m.fusion.gate[e].bias = scale * rng.gaussian();
  }
  m.fusion.projection.resize(concat, s.model_dim);
  m.fusion.projection_bias.resize(s.model_dim);
  fill_gaussian(m.fusion.projection, rng, scale);
  fill_gaussian(m.fusion.projection_bias, rng, scale);
  auto& d = m.decoder;
  d.embedding.resize(s.vocab, s.token_dim);
  d.bos.resize(s.token_dim);
  d.w_query.resize(s.token_dim, s.attention_dim);
  d.w_key.resize(s.model_dim, s.attention_dim);
  d.w_value.resize(s.model_dim, s.token_dim);
  d.w_out.resize(s.token_dim, s.vocab);
  d.b_out.resize(s.vocab);
  for (Matrix* x : {&d.embedding, &d.w_query, &d.w_key, &d.w_value, &d.w_out}) fill_gaussian(*x, rng, scale);
  fill_gaussian(d.bos, rng, scale);
  fill_gaussian(d.b_out, rng, scale);
  return m;
}

RandomProblem random_problem(std::uint64_t seed, const InstanceLimits& lim) {
  if (lim.max_frames < 1 || lim.max_dim < 1 || lim.max_vocab < 2 || lim.max_turns < 1 || lim.max_tokens_per_turn < 1) {
    throw ContractError("instance limits are degenerate");
  }
  CounterRng rng(derive_seed(seed, {0x6C}));
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); };
  const int min_dim = std::min(2, lim.max_dim);
  ModelShape shape;
  for (auto& d : shape.expert_dims) d = pick(min_dim, lim.max_dim);
  shape.model_dim = pick(min_dim, lim.max_dim);
  shape.token_dim = pick(min_dim, lim.max_dim);
  shape.attention_dim = pick(min_dim, lim.max_dim);
  shape.vocab = pick(2, lim.max_vocab);
  shape.queries = lim.queries;

  RandomProblem out;
  out.cfg.window_len = lim.window_len;
  out.cfg.queries_per_window = lim.queries;
  out.cfg.model_dim = shape.model_dim;
  out.model = random_model(shape, derive_seed(seed, {0x9A}));
  const int turns = pick(1, lim.max_turns);
  for (int t = 0; t < turns; ++t) {
    const int n = pick(1, lim.max_frames);
    std::array<Matrix, kExperts> feats;
    for (std::size_t e = 0; e < kExperts; ++e) {
      feats[e].resize(n, shape.expert_dims[e]);
      fill_gaussian(feats[e], rng, 1.0);
    }
    out.instance.turn_features.push_back(std::move(feats));
    std::vector<int> tokens(static_cast<std::size_t>(pick(1, lim.max_tokens_per_turn)));
    for (auto& tok : tokens) tok = pick(0, shape.vocab - 1);
    out.instance.targets.push_back(std::move(tokens));
  }
  return out;
}

}  // namespace dialoforge::fusion
