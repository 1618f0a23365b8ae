#include "pgc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pgc/errors.hpp"

namespace pgc {

Quantizer Quantizer::for_box(const ActionBox& box, std::size_t levels) {
    if (levels < 2) throw InvalidConfig("quantizer needs at least 2 levels");
    return Quantizer{levels, box.low, box.high};
}

std::size_t Quantizer::bins() const { return categorical_head_size(levels, dim()); }

std::size_t categorical_head_size(std::size_t levels, std::size_t d) {
    std::size_t n = 1;
    for (std::size_t k = 0; k < d; ++k) {
        if (n > std::numeric_limits<std::size_t>::max() / levels) throw InvalidConfig("categorical head size overflows");
        n *= levels;
    }
    return n;
}

std::size_t quantize(const Quantizer& q, std::span<const double> action) {
    if (action.size() != q.dim()) throw DimensionMismatch("quantize: action length");
    std::size_t index = 0, radix = 1;
    for (std::size_t k = 0; k < q.dim(); ++k) {
        const double lo = q.low[k], hi = q.high[k];
        if (action[k] < lo - 1e-9 || action[k] > hi + 1e-9) throw OutOfBounds("quantize: action outside the box");
        std::size_t bin = 0;
        if (hi > lo) {
            const double a = std::clamp(action[k], lo, hi);
            const double pos = (a - lo) / (hi - lo) * static_cast<double>(q.levels);
            const double up = std::ceil(pos) - 1.0;
            bin = up <= 0.0 ? 0 : std::min(static_cast<std::size_t>(up), q.levels - 1);
        }
        index += bin * radix;
        radix *= q.levels;
    }
    return index;
}

Vec dequantize(const Quantizer& q, std::size_t bin) {
    if (bin >= q.bins()) throw IndexOutOfRange("dequantize: bin out of range");
    Vec centre(q.dim());
    for (std::size_t k = 0; k < q.dim(); ++k) {
        const std::size_t b = bin % q.levels;
        bin /= q.levels;
        const double width = (q.high[k] - q.low[k]) / static_cast<double>(q.levels);
        centre[k] = q.low[k] + (static_cast<double>(b) + 0.5) * width;
    }
    return centre;
}

Vec CategoricalParams::probabilities() const {
    Vec p(logits.size());
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) z += p[k] = std::exp(logits[k] - mx);
    for (double& v : p) v /= z;
    return p;
}

double discrete_normality_score(const CategoricalParams& params, std::size_t bin) {
    if (bin >= params.logits.size()) throw IndexOutOfRange("discrete_normality_score: bin out of range");
    // log p(b) - log max p = logit_b - max logit; the normalizer cancels.
    const double mx = *std::max_element(params.logits.begin(), params.logits.end());
    return params.logits[bin] - mx;
}

std::pair<RecurrentState, CategoricalParams> predict_categorical(const PredictorNet& net,
                                                                 const RecurrentState& state,
                                                                 std::span<const double> obs,
                                                                 std::optional<std::span<const double>> prev_action) {
    if (net.shape().head != HeadKind::categorical) throw UnknownKind("predict_categorical needs a categorical head");
    auto [next, head] = predict_raw(net, state, obs, prev_action);
    return {std::move(next), CategoricalParams{std::move(head)}};
}

TrainResult train_discrete(PredictorNet net, std::span<const TrainingSample> data, const Quantizer& q,
                           const TrainConfig& cfg, std::uint64_t seed) {
    if (net.shape().head != HeadKind::categorical) throw UnknownKind("train_discrete needs a categorical head");
    if (net.shape().head_outputs() != q.bins()) throw DimensionMismatch("categorical head does not match quantizer");
    std::vector<TrainingSample> labelled(data.begin(), data.end());
    for (TrainingSample& s : labelled) {
        s.bins.clear();
        for (const Vec& a : s.actions) s.bins.push_back(quantize(q, a));
    }
    return train(std::move(net), labelled, cfg, seed);
}

StandardMoments calibrate_discrete(const PredictorNet& net, const Quantizer& q,
                                   std::span<const TrainingSample> validation) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const TrainingSample& s : validation) {
        RecurrentState state = RecurrentState::zeros(net.shape().hidden);
        Vec prev(net.shape().action_dim, 0.0);
        for (std::size_t t = 0; t < s.length(); ++t) {
            std::optional<std::span<const double>> pa;
            if (net.shape().prev_action) pa = std::span<const double>(prev);
            auto [next, params] = predict_categorical(net, state, s.observations[t], pa);
            const double score = discrete_normality_score(params, quantize(q, s.actions[t]));
            sum += score;
            sum_sq += score * score;
            ++n;
            state = std::move(next);
            prev = s.actions[t];
        }
    }
    if (n < 2) throw EmptySet("calibrate_discrete: need at least two validation steps");
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(sum_sq / static_cast<double>(n) - mean * mean, 1e-12);
    return StandardMoments{mean, std::sqrt(var), q.dim()};
}

}  // namespace pgc
