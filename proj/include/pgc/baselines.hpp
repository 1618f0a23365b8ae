#pragma once

// Discrete-action comparison detector: the action box is quantized into Q
// levels per dimension and a categorical head predicts the bin. Its head has
// Q^d outputs, e.g. 3^9 = 19683 for a nine-dimensional action, against
// d + d(d+1)/2 = 54 for the Gaussian head.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "pgc/detector.hpp"
#include "pgc/env.hpp"
#include "pgc/predictor.hpp"

namespace pgc {

/// Uniform per-dimension quantizer. Bins are closed on the right, the first
/// one also on the left: [low, low+s], (low+s, low+2s], ... so a point on an
/// interior boundary falls into the lower bin. Flat index = sum_k bin_k Q^k.
struct Quantizer {
    std::size_t levels = 3;
    Vec low;
    Vec high;

    static Quantizer for_box(const ActionBox& box, std::size_t levels);
    std::size_t dim() const { return low.size(); }
    std::size_t bins() const;
};

/// Throws OutOfBounds when the action leaves the box by more than 1e-9.
std::size_t quantize(const Quantizer& q, std::span<const double> action);

/// Centre of the bin.
Vec dequantize(const Quantizer& q, std::size_t bin);

/// Q^d, throwing InvalidConfig on overflow.
std::size_t categorical_head_size(std::size_t levels, std::size_t d);

struct CategoricalParams {
    Vec logits;

    Vec probabilities() const;
};

/// log p(bin) - log max_b p(b) <= 0.
double discrete_normality_score(const CategoricalParams& params, std::size_t bin);

std::pair<RecurrentState, CategoricalParams> predict_categorical(
    const PredictorNet& net, const RecurrentState& state, std::span<const double> obs,
    std::optional<std::span<const double>> prev_action = {});

/// Categorical cross-entropy training on quantized targets. Fills bins on a
/// copy of the data, so callers may pass plain Gaussian training samples.
TrainResult train_discrete(PredictorNet net, std::span<const TrainingSample> data, const Quantizer& q,
                           const TrainConfig& cfg, std::uint64_t seed);

/// Empirical mean and deviation of the categorical score on clean episodes.
/// The analytic Gaussian moments do not apply here.
StandardMoments calibrate_discrete(const PredictorNet& net, const Quantizer& q,
                                   std::span<const TrainingSample> validation);

}  // namespace pgc
