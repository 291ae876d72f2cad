#pragma once

// Windowed query-attention fusion of three expert feature streams, a toy
// causal decoder over the fused frames, the summed multi-turn NLL, and its
// analytic gradient.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dialoforge/schema.hpp"

namespace dialoforge::fusion {

template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

enum class Expert { speech = 0, emotion = 1, beat = 2 };
inline constexpr std::size_t kExperts = 3;
std::string_view to_string(Expert e);

struct FeatureSeq {
  Expert expert = Expert::speech;
  Matrix frames;  // N x D_expert
  double frame_rate = 100.0;
};

/// Frame-aligned features of one utterance, indexed by Expert.
using ExpertFeatures = std::array<FeatureSeq, kExperts>;

enum class WindowRounding { ceil, floor };
enum class GateMode {
  per_window,  // one gate per window-level feature (row of H)
  per_frame,   // mean of per-frame gates over the window's valid frames
};

struct FusionConfig {
  int window_len = 17;
  int queries_per_window = 1;
  int model_dim = 16;
  WindowRounding rounding = WindowRounding::ceil;
  GateMode gate_mode = GateMode::per_window;

  void validate() const;
};

template <typename S>
struct BasicQFormerParams {
  MatrixX<S> queries;  // K x D
  MatrixX<S> w_q, w_k, w_v, w_o;  // D x D
};

template <typename S>
struct BasicGateParams {
  VectorX<S> weight;  // D
  S bias = S(0);
};

template <typename S>
struct BasicFusionParams {
  std::array<BasicQFormerParams<S>, kExperts> qformer;
  std::array<BasicGateParams<S>, kExperts> gate;
  MatrixX<S> projection;       // (D_s + D_e + D_b) x D_model
  VectorX<S> projection_bias;  // D_model
};

/// Token embedding + one causal cross-attention over fused frames + linear head.
template <typename S>
struct BasicDecoderParams {
  MatrixX<S> embedding;  // V x D_tok
  VectorX<S> bos;        // D_tok, start-of-sequence state
  MatrixX<S> w_query;    // D_tok x D_att
  MatrixX<S> w_key;      // D_model x D_att
  MatrixX<S> w_value;    // D_model x D_tok
  MatrixX<S> w_out;      // D_tok x V
  VectorX<S> b_out;      // V

  Eigen::Index vocab_size() const { return embedding.rows(); }
};

template <typename S>
struct BasicModel {
  BasicFusionParams<S> fusion;
  BasicDecoderParams<S> decoder;
};

using QFormerParams = BasicQFormerParams<double>;
using GateParams = BasicGateParams<double>;
using FusionParams = BasicFusionParams<double>;
using ToyDecoderParams = BasicDecoderParams<double>;
using Model = BasicModel<double>;

/// One dialogue: per turn, the expert features of the human utterance and the
/// response tokens to predict.
struct DialogueInstance {
  std::vector<std::array<Matrix, kExperts>> turn_features;
  std::vector<std::vector<int>> targets;
};

// ---------------------------------------------------------------------------
// Feature surrogates

inline constexpr int kHopSamples = 160;

struct FeatureDims {
  int speech = 8, emotion = 8, beat = 8;
};

/// Deterministic framewise statistics (energies, zero crossings, band
/// magnitudes, flux) over 160-sample hops, linearly projected to each expert's
/// width. N = floor(len / 160) for all three experts.
ExpertFeatures extract_mock_features(const Waveform& w, FeatureDims dims = {});

// ---------------------------------------------------------------------------
// Forward pieces

struct Window {
  Matrix frames;             // L x D, zero rows past the end
  std::vector<char> valid;   // L flags
  int valid_count = 0;
};

std::size_t window_count(std::size_t n_frames, int window_len, WindowRounding rounding = WindowRounding::ceil);
std::vector<Window> segment_windows(const Matrix& frames, int window_len,
                                    WindowRounding rounding = WindowRounding::ceil);

struct QFormerOutput {
  Matrix hidden;     // K x D
  Matrix attention;  // K x L, zero on masked frames
};

/// Single-head scaled dot-product cross-attention of the queries over one window.
QFormerOutput qformer_window(const QFormerParams& params, const Window& window);

/// Window-level features of a whole sequence, rows ordered (window, query).
Matrix qformer_sequence(const QFormerParams& params, const Matrix& frames, const FusionConfig& cfg);

/// sigmoid(H g + b), one weight per row of H.
Vector gate_weights(const Matrix& hidden, const GateParams& gate);

/// Per row: concat(w_s H_s, w_e H_e, w_b H_b) projected to D_model (+ bias).
Matrix fuse_project(const std::array<Matrix, kExperts>& hidden, const std::array<Vector, kExperts>& weights,
                    const Matrix& projection, const Vector& projection_bias);

/// Full fusion of one utterance's features: N frames -> window_count(N)·K rows.
Matrix mix_former(const FusionParams& params, const FusionConfig& cfg, const std::array<Matrix, kExperts>& features);

/// Sum over turns t and response positions j of -log p(target | Z_1..t, earlier tokens).
double dialogue_nll(const std::vector<Matrix>& fused_turns, const std::vector<std::vector<int>>& targets,
                    const ToyDecoderParams& dec);

/// Per-position NLL terms in (turn, position) order; their sum is dialogue_nll.
std::vector<double> position_nll(const std::vector<Matrix>& fused_turns, const std::vector<std::vector<int>>& targets,
                                 const ToyDecoderParams& dec);

/// mix_former on every turn followed by dialogue_nll.
template <typename S>
S dialogue_loss(const BasicModel<S>& model, const FusionConfig& cfg,
                const std::vector<std::array<MatrixX<S>, kExperts>>& turn_features,
                const std::vector<std::vector<int>>& targets);

double dialogue_loss(const Model& model, const FusionConfig& cfg, const DialogueInstance& inst);

// ---------------------------------------------------------------------------
// Gradients

struct LossAndGradient {
  double loss = 0.0;
  Model grad;  // same shapes as the model
};

/// Analytic gradient of dialogue_loss with respect to every parameter.
LossAndGradient backward(const Model& model, const FusionConfig& cfg, const DialogueInstance& inst);

/// A named flat view over one parameter tensor.
template <typename S>
struct ParamView {
  std::string name;
  S* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

std::vector<ParamView<double>> param_views(Model& model);
std::vector<ParamView<long double>> param_views(BasicModel<long double>& model);
std::size_t param_count(const Model& model);

BasicModel<long double> to_extended(const Model& model);

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  double loss = 0.0;
};

/// Compares `analytic` against fourth-order central finite differences of the
/// loss (evaluated in extended precision) with step eps. Error per entry is
/// |g_a - g_n| / max(|g_a|, |g_n|, 1e-8). Throws NumericError on non-finite values.
GradcheckReport compare_gradients(const Model& model, const FusionConfig& cfg, const DialogueInstance& inst,
                                  const Model& analytic, double eps);

/// backward() followed by compare_gradients(). eps must lie in [1e-6, 1e-4].
GradcheckReport backward_and_gradcheck(const Model& model, const FusionConfig& cfg, const DialogueInstance& inst,
                                       double eps = 1e-5);

// ---------------------------------------------------------------------------
// Random instances

struct ModelShape {
  std::array<int, kExperts> expert_dims{8, 8, 8};
  int model_dim = 16;
  int token_dim = 16;
  int attention_dim = 8;
  int vocab = 12;
  int queries = 1;
};

/// Gaussian parameters with standard deviation `scale`.
Model random_model(const ModelShape& shape, std::uint64_t seed, double scale = 0.5);

struct InstanceLimits {
  int max_frames = 40;
  int window_len = 17;
  int queries = 1;
  int max_dim = 8;
  int max_vocab = 12;
  int max_turns = 3;
  int max_tokens_per_turn = 4;
};

struct RandomProblem {
  Model model;
  FusionConfig cfg;
  DialogueInstance instance;
};

/// Random dimensions, parameters, features and targets within `limits`.
RandomProblem random_problem(std::uint64_t seed, const InstanceLimits& limits = {});

}  // namespace dialoforge::fusion
