#pragma once

// Recurrent predictor of a neighbour's action distribution.
//
// Network: x -> ReLU(Wp x + bp) -> gated recurrent cell (hidden H) -> heads.
//   r  = sigmoid(Wr h + Ur s + br)
//   u  = sigmoid(Wu h + Uu s + bu)
//   n  = tanh(Wn h + Un (r * s) + bn)
//   s' = (1 - u) * n + u * s
// Gaussian head: mu = Wmu s' + bmu, q = Wl s' + bl with q mapped onto the packed
// Cholesky factor; diagonal entries go through floor + (1 - floor) * exp(q) so
// they stay above diag_floor for every real output, and a zero output gives 1.
//
// Flat parameter order: Wp, bp, Wr, Ur, br, Wu, Uu, bu, Wn, Un, bn, Whead_mu,
// bhead_mu, Whead_l, bhead_l (Gaussian / diagonal heads) or Wlogits, blogits
// (categorical head). All matrices row-major.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgc/linalg.hpp"

namespace pgc {

enum class HeadKind { gaussian, diagonal, categorical };

const char* to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

struct NetShape {
    std::size_t obs_dim = 0;
    std::size_t hidden = 0;
    std::size_t action_dim = 0;
    HeadKind head = HeadKind::gaussian;
    std::size_t levels = 0;  // quantization levels per dimension, categorical head only
    bool prev_action = false;

    std::size_t input_dim() const { return obs_dim + (prev_action ? action_dim : 0); }
    std::size_t chol_outputs() const;  // d(d+1)/2, or d for the diagonal head
    std::size_t head_outputs() const;  // total head width
    std::size_t param_count() const;
};

struct GaussianParams {
    Vec mu;
    LowerTriangular chol;

    std::size_t dim() const { return mu.size(); }
};

struct RecurrentState {
    Vec hidden;

    static RecurrentState zeros(std::size_t h) { return RecurrentState{Vec(h, 0.0)}; }
};

class PredictorNet {
public:
    PredictorNet() = default;
    PredictorNet(NetShape shape, double diag_floor);

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    static PredictorNet initialized(NetShape shape, double diag_floor, std::uint64_t seed);

    const NetShape& shape() const { return shape_; }
    double diag_floor() const { return diag_floor_; }
    std::span<const double> weights() const { return weights_; }
    std::span<double> weights() { return weights_; }
    void set_weights(Vec w);

private:
    NetShape shape_;
    double diag_floor_ = 1e-3;
    Vec weights_;
};

/// Advances the recurrent state by one observation and emits the predicted
/// action distribution. prev_action is required iff the net was built with
/// NetShape::prev_action.
std::pair<RecurrentState, GaussianParams> predict_step(const PredictorNet& net, const RecurrentState& state,
                                                       std::span<const double> obs,
                                                       std::optional<std::span<const double>> prev_action = {});

/// Same as predict_step but returns the raw head outputs (logits for the
/// categorical head).
std::pair<RecurrentState, Vec> predict_raw(const PredictorNet& net, const RecurrentState& state,
                                           std::span<const double> obs,
                                           std::optional<std::span<const double>> prev_action = {});

/// Maps raw head outputs onto (mu, L).
GaussianParams gaussian_from_head(const NetShape& shape, double diag_floor, std::span<const double> head);

/// 2 * sum_k log L(k,k) + y^T y with y = L^{-1}(action - mu).
double nll(const GaussianParams& params, std::span<const double> action);

/// One episode as seen by an observer: the observer's (pair-ordered)
/// observation and the neighbour's executed action at each step. bins holds
/// quantized targets for the categorical head and is empty otherwise.
struct TrainingSample {
    std::vector<Vec> observations;
    std::vector<Vec> actions;
    std::vector<std::size_t> bins;

    std::size_t length() const { return observations.size(); }
};

struct TrainConfig {
    double learning_rate = 5e-4;
    std::size_t batch_size = 20;
    std::size_t epochs = 10;
    std::size_t bptt_len = 25;
    std::size_t hidden_size = 128;
    double diag_floor = 1e-3;
    double momentum = 0.9;
};

/// Mean per-step loss of one episode (Gaussian nll or categorical cross-entropy).
double sequence_loss(const PredictorNet& net, const TrainingSample& sample);

/// Mean per-step loss and its gradient, backpropagated through time with
/// truncation every bptt_len steps. grad must have param_count() entries and
/// is overwritten.
double sequence_loss_and_grad(const PredictorNet& net, const TrainingSample& sample, std::size_t bptt_len,
                              std::span<double> grad);

/// Gradient of the mean per-step nll over the weights.
Vec grad_nll(const PredictorNet& net, const TrainingSample& sample, std::size_t bptt_len = 25);

/// Max over parameters of |analytic - numeric| / max(1, |numeric|) using
/// central differences with step eps. eps must lie in (1e-8, 1e-3).
double gradient_check(const PredictorNet& net, const TrainingSample& sample, double eps);
double compare_gradient(const PredictorNet& net, const TrainingSample& sample, std::span<const double> analytic,
                        double eps);

/// Summed gradient and loss over a batch of episodes, divided by the batch
/// size. The serial version is the reference; the OpenMP version computes
/// per-episode gradients concurrently and reduces them in index order so
/// both return bit-identical results.
double batch_gradient_serial(const PredictorNet& net, std::span<const TrainingSample* const> batch,
                             std::size_t bptt_len, std::span<double> grad);
double batch_gradient_parallel(const PredictorNet& net, std::span<const TrainingSample* const> batch,
                               std::size_t bptt_len, std::span<double> grad);

struct TrainResult {
    PredictorNet net;
    std::vector<double> loss_curve;  // mean batch loss per epoch
};

/// Momentum SGD over shuffled mini-batches of episodes. Throws
/// DivergenceDetected when the loss becomes non-finite.
TrainResult train(PredictorNet net, std::span<const TrainingSample> data, const TrainConfig& cfg,
                  std::uint64_t seed);

}  // namespace pgc
