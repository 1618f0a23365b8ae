#include "pgc/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pgc/errors.hpp"
#include "pgc/rng.hpp"

namespace pgc {

const char* to_string(HeadKind kind) {
    switch (kind) {
        case HeadKind::gaussian: return "gaussian";
        case HeadKind::diagonal: return "diagonal";
        case HeadKind::categorical: return "categorical";
    }
    return "?";
}

HeadKind head_kind_from_string(const std::string& name) {
    if (name == "gaussian") return HeadKind::gaussian;
    if (name == "diagonal") return HeadKind::diagonal;
    if (name == "categorical") return HeadKind::categorical;
    throw UnknownKind("unknown head kind '" + name + "'");
}

std::size_t NetShape::chol_outputs() const {
    return head == HeadKind::diagonal ? action_dim : packed_size(action_dim);
}

std::size_t NetShape::head_outputs() const {
    if (head == HeadKind::categorical) {
        std::size_t n = 1;
        for (std::size_t k = 0; k < action_dim; ++k) n *= levels;
        return n;
    }
    return action_dim + chol_outputs();
}

std::size_t NetShape::param_count() const {
    const std::size_t in = input_dim(), h = hidden;
    const std::size_t trunk = h * in + h + 3 * (h * h + h * h + h);
    return trunk + head_outputs() * h + head_outputs();
}

namespace {

// Offsets of each block inside the flat weight vector.
struct Layout {
    std::size_t wp, bp, wr, ur, br, wu, uu, bu, wn, un, bn, wh, bh, end;

    explicit Layout(const NetShape& s) {
        const std::size_t in = s.input_dim(), h = s.hidden, out = s.head_outputs();
        std::size_t o = 0;
        auto take = [&o](std::size_t n) {
            const std::size_t at = o;
            o += n;
            return at;
        };
        wp = take(h * in);
        bp = take(h);
        wr = take(h * h);
        ur = take(h * h);
        br = take(h);
        wu = take(h * h);
        uu = take(h * h);
        bu = take(h);
        wn = take(h * h);
        un = take(h * h);
        bn = take(h);
        wh = take(out * h);
        bh = take(out);
        end = o;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out = W x + b, W is rows x cols row-major.
inline void affine(const double* w, const double* b, const double* x, std::size_t rows, std::size_t cols,
                   double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* wi = w + i * cols;
        double acc = b ? b[i] : 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += wi[j] * x[j];
        out[i] = acc;
    }
}

// out += W x
inline void matvec_add(const double* w, const double* x, std::size_t rows, std::size_t cols, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* wi = w + i * cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += wi[j] * x[j];
        out[i] += acc;
    }
}

// dx += W^T dy ; dW += dy x^T
inline void backprop_linear(const double* w, const double* x, const double* dy, std::size_t rows, std::size_t cols,
                            double* dw, double* dx) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double g = dy[i];
        if (g == 0.0) continue;
        const double* wi = w + i * cols;
        double* dwi = dw + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            dwi[j] += g * x[j];
            if (dx) dx[j] += g * wi[j];
        }
    }
}

struct StepCache {
    Vec x, pre, h0, s_prev, r, u, n, rs, s, head;
};

void assemble_input(const NetShape& shape, std::span<const double> obs, std::optional<std::span<const double>> prev,
                    Vec& x) {
    if (obs.size() != shape.obs_dim)
        throw DimensionMismatch("predictor input: expected observation length " + std::to_string(shape.obs_dim) +
                                ", got " + std::to_string(obs.size()));
    x.assign(obs.begin(), obs.end());
    if (shape.prev_action) {
        if (!prev) {
            x.insert(x.end(), shape.action_dim, 0.0);
        } else {
            if (prev->size() != shape.action_dim)
                throw DimensionMismatch("predictor input: previous action has wrong length");
            x.insert(x.end(), prev->begin(), prev->end());
        }
    }
}

void forward_step(const NetShape& shape, const Layout& lay, const double* w, const Vec& s_prev, StepCache& c) {
    const std::size_t in = shape.input_dim(), h = shape.hidden;
    c.s_prev = s_prev;
    c.pre.resize(h);
    c.h0.resize(h);
    affine(w + lay.wp, w + lay.bp, c.x.data(), h, in, c.pre.data());
    for (std::size_t k = 0; k < h; ++k) c.h0[k] = c.pre[k] > 0.0 ? c.pre[k] : 0.0;

    c.r.resize(h);
    c.u.resize(h);
    c.n.resize(h);
    c.rs.resize(h);
    c.s.resize(h);
    affine(w + lay.wr, w + lay.br, c.h0.data(), h, h, c.r.data());
    matvec_add(w + lay.ur, s_prev.data(), h, h, c.r.data());
    affine(w + lay.wu, w + lay.bu, c.h0.data(), h, h, c.u.data());
    matvec_add(w + lay.uu, s_prev.data(), h, h, c.u.data());
    for (std::size_t k = 0; k < h; ++k) {
        c.r[k] = sigmoid(c.r[k]);
        c.u[k] = sigmoid(c.u[k]);
        c.rs[k] = c.r[k] * s_prev[k];
    }
    affine(w + lay.wn, w + lay.bn, c.h0.data(), h, h, c.n.data());
    matvec_add(w + lay.un, c.rs.data(), h, h, c.n.data());
    for (std::size_t k = 0; k < h; ++k) {
        c.n[k] = std::tanh(c.n[k]);
        c.s[k] = (1.0 - c.u[k]) * c.n[k] + c.u[k] * s_prev[k];
    }
    c.head.resize(shape.head_outputs());
    affine(w + lay.wh, w + lay.bh, c.s.data(), shape.head_outputs(), h, c.head.data());
}

// Fills dhead with d(loss)/d(head outputs) and returns the loss for one step.
double head_loss_grad(const NetShape& shape, double diag_floor, const Vec& head, std::span<const double> action,
                      std::size_t bin, double* dhead) {
    if (shape.head == HeadKind::categorical) {
        const std::size_t n = head.size();
        if (bin >= n) throw IndexOutOfRange("categorical target bin out of range");
        const double mx = *std::max_element(head.begin(), head.end());
        double z = 0.0;
        for (double v : head) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        if (dhead) {
            for (std::size_t k = 0; k < n; ++k) dhead[k] = std::exp(head[k] - lse);
            dhead[bin] -= 1.0;
        }
        return lse - head[bin];
    }

    const std::size_t d = shape.action_dim;
    const GaussianParams p = gaussian_from_head(shape, diag_floor, head);
    if (action.size() != d) throw DimensionMismatch("target action has wrong length");
    Vec e(d);
    for (std::size_t k = 0; k < d; ++k) e[k] = action[k] - p.mu[k];
    const Vec y = forward_substitute(p.chol, e);
    double loss = 2.0 * log_diagonal_sum(p.chol);
    for (double v : y) loss += v * v;
    if (!dhead) return loss;

    const Vec g = backward_substitute_transposed(p.chol, y);
    for (std::size_t k = 0; k < d; ++k) dhead[k] = -2.0 * g[k];
    double* dq = dhead + d;
    if (shape.head == HeadKind::diagonal) {
        for (std::size_t k = 0; k < d; ++k) {
            const double l = p.chol.diag(k);
            const double dl = -2.0 * g[k] * y[k] + 2.0 / l;
            dq[k] = dl * (l - diag_floor);
        }
    } else {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                double dl = -2.0 * g[i] * y[j];
                if (i == j) {
                    const double l = p.chol.diag(i);
                    dl += 2.0 / l;
                    dl *= (l - diag_floor);
                }
                dq[packed_index(i, j)] = dl;
            }
    }
    return loss;
}

std::span<const double> prev_target(const TrainingSample& sample, std::size_t t, const Vec& zeros) {
    return t == 0 ? std::span<const double>(zeros) : std::span<const double>(sample.actions[t - 1]);
}

void check_sample(const NetShape& shape, const TrainingSample& sample) {
    if (sample.length() == 0) throw EmptySet("training sample has no steps");
    if (sample.actions.size() != sample.length())
        throw DimensionMismatch("training sample: observations and actions differ in length");
    if (shape.head == HeadKind::categorical && sample.bins.size() != sample.length())
        throw DimensionMismatch("training sample: categorical head needs one bin per step");
}

}  // namespace

PredictorNet::PredictorNet(NetShape shape, double diag_floor)
    : shape_(shape), diag_floor_(diag_floor), weights_(shape.param_count(), 0.0) {
    if (shape.hidden == 0 || shape.action_dim == 0 || shape.obs_dim == 0)
        throw InvalidConfig("predictor shape must have positive dimensions");
    if (shape.head == HeadKind::categorical && shape.levels < 2)
        throw InvalidConfig("categorical head needs at least 2 levels");
    if (!(diag_floor > 0.0) || diag_floor >= 1.0) throw InvalidConfig("diag_floor must lie in (0, 1)");
}

PredictorNet PredictorNet::initialized(NetShape shape, double diag_floor, std::uint64_t seed) {
    PredictorNet net(shape, diag_floor);
    const Layout lay(shape);
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::init)}));
    auto fill = [&](std::size_t at, std::size_t count, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t k = 0; k < count; ++k) net.weights_[at + k] = dist(rng);
    };
    const std::size_t in = shape.input_dim(), h = shape.hidden;
    fill(lay.wp, h * in, in);
    for (std::size_t blk : {lay.wr, lay.ur, lay.wu, lay.uu, lay.wn, lay.un}) fill(blk, h * h, h);
    fill(lay.wh, shape.head_outputs() * h, h);
    // Small head weights start the predicted distribution near N(0, I).
    for (std::size_t k = 0; k < shape.head_outputs() * h; ++k) net.weights_[lay.wh + k] *= 0.1;
    return net;
}

void PredictorNet::set_weights(Vec w) {
    if (w.size() != shape_.param_count())
        throw DimensionMismatch("set_weights: expected " + std::to_string(shape_.param_count()) + " parameters");
    weights_ = std::move(w);
}

GaussianParams gaussian_from_head(const NetShape& shape, double diag_floor, std::span<const double> head) {
    const std::size_t d = shape.action_dim;
    if (head.size() != d + shape.chol_outputs()) throw DimensionMismatch("gaussian head width mismatch");
    GaussianParams p{Vec(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(d)), LowerTriangular(d)};
    const double* q = head.data() + d;
    if (shape.head == HeadKind::diagonal) {
        for (std::size_t k = 0; k < d; ++k) p.chol.at(k, k) = diag_floor + (1.0 - diag_floor) * std::exp(q[k]);
    } else {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double v = q[packed_index(i, j)];
                p.chol.at(i, j) = i == j ? diag_floor + (1.0 - diag_floor) * std::exp(v) : v;
            }
    }
    return p;
}

std::pair<RecurrentState, Vec> predict_raw(const PredictorNet& net, const RecurrentState& state,
                                           std::span<const double> obs,
                                           std::optional<std::span<const double>> prev_action) {
    const NetShape& shape = net.shape();
    if (state.hidden.size() != shape.hidden) throw DimensionMismatch("recurrent state has wrong hidden size");
    if (prev_action && !shape.prev_action) throw DimensionMismatch("net does not take a previous action");
    const Layout lay(shape);
    StepCache c;
    assemble_input(shape, obs, prev_action, c.x);
    forward_step(shape, lay, net.weights().data(), state.hidden, c);
    return {RecurrentState{std::move(c.s)}, std::move(c.head)};
}

std::pair<RecurrentState, GaussianParams> predict_step(const PredictorNet& net, const RecurrentState& state,
                                                       std::span<const double> obs,
                                                       std::optional<std::span<const double>> prev_action) {
    if (net.shape().head == HeadKind::categorical) throw UnknownKind("predict_step needs a Gaussian head");
    auto [next, head] = predict_raw(net, state, obs, prev_action);
    return {std::move(next), gaussian_from_head(net.shape(), net.diag_floor(), head)};
}

double nll(const GaussianParams& params, std::span<const double> action) {
    return 2.0 * log_diagonal_sum(params.chol) + mahalanobis_sq(action, params.mu, params.chol);
}

double sequence_loss(const PredictorNet& net, const TrainingSample& sample) {
    const NetShape& shape = net.shape();
    check_sample(shape, sample);
    const Layout lay(shape);
    const Vec zeros(shape.action_dim, 0.0);
    Vec s(shape.hidden, 0.0);
    StepCache c;
    double total = 0.0;
    for (std::size_t t = 0; t < sample.length(); ++t) {
        assemble_input(shape, sample.observations[t], prev_target(sample, t, zeros), c.x);
        forward_step(shape, lay, net.weights().data(), s, c);
        total += head_loss_grad(shape, net.diag_floor(), c.head, sample.actions[t],
                                sample.bins.empty() ? 0 : sample.bins[t], nullptr);
        s = c.s;
    }
    return total / static_cast<double>(sample.length());
}

double sequence_loss_and_grad(const PredictorNet& net, const TrainingSample& sample, std::size_t bptt_len,
                              std::span<double> grad) {
    const NetShape& shape = net.shape();
    check_sample(shape, sample);
    if (grad.size() != shape.param_count()) throw DimensionMismatch("gradient buffer has wrong length");
    if (bptt_len == 0) throw InvalidConfig("bptt_len must be positive");
    const Layout lay(shape);
    const double* w = net.weights().data();
    double* g = grad.data();
    std::fill(grad.begin(), grad.end(), 0.0);

    const std::size_t steps = sample.length(), h = shape.hidden, in = shape.input_dim(), out = shape.head_outputs();
    const double scale = 1.0 / static_cast<double>(steps);
    const Vec zeros(shape.action_dim, 0.0);

    std::vector<StepCache> tape(steps);
    Vec s(h, 0.0);
    double total = 0.0;
    std::vector<Vec> dheads(steps, Vec(out));
    for (std::size_t t = 0; t < steps; ++t) {
        StepCache& c = tape[t];
        assemble_input(shape, sample.observations[t], prev_target(sample, t, zeros), c.x);
        forward_step(shape, lay, w, s, c);
        total += head_loss_grad(shape, net.diag_floor(), c.head, sample.actions[t],
                                sample.bins.empty() ? 0 : sample.bins[t], dheads[t].data());
        for (double& v : dheads[t]) v *= scale;
        s = c.s;
    }

    Vec ds(h), ds_carry(h, 0.0), dn(h), du(h), dr(h), da(h), drs(h), dh0(h), dpre(h);
    for (std::size_t t = steps; t-- > 0;) {
        const StepCache& c = tape[t];
        if ((t + 1) % bptt_len == 0) std::fill(ds_carry.begin(), ds_carry.end(), 0.0);
        ds = ds_carry;

        // heads
        backprop_linear(w + lay.wh, c.s.data(), dheads[t].data(), out, h, g + lay.wh, ds.data());
        for (std::size_t k = 0; k < out; ++k) g[lay.bh + k] += dheads[t][k];

        // s = (1-u) n + u s_prev
        std::fill(ds_carry.begin(), ds_carry.end(), 0.0);
        std::fill(dh0.begin(), dh0.end(), 0.0);
        std::fill(drs.begin(), drs.end(), 0.0);
        for (std::size_t k = 0; k < h; ++k) {
            dn[k] = ds[k] * (1.0 - c.u[k]);
            du[k] = ds[k] * (c.s_prev[k] - c.n[k]);
            ds_carry[k] = ds[k] * c.u[k];
        }
        // candidate
        for (std::size_t k = 0; k < h; ++k) da[k] = dn[k] * (1.0 - c.n[k] * c.n[k]);
        backprop_linear(w + lay.wn, c.h0.data(), da.data(), h, h, g + lay.wn, dh0.data());
        backprop_linear(w + lay.un, c.rs.data(), da.data(), h, h, g + lay.un, drs.data());
        for (std::size_t k = 0; k < h; ++k) {
            g[lay.bn + k] += da[k];
            dr[k] = drs[k] * c.s_prev[k];
            ds_carry[k] += drs[k] * c.r[k];
        }
        // update gate
        for (std::size_t k = 0; k < h; ++k) da[k] = du[k] * c.u[k] * (1.0 - c.u[k]);
        backprop_linear(w + lay.wu, c.h0.data(), da.data(), h, h, g + lay.wu, dh0.data());
        backprop_linear(w + lay.uu, c.s_prev.data(), da.data(), h, h, g + lay.uu, ds_carry.data());
        for (std::size_t k = 0; k < h; ++k) g[lay.bu + k] += da[k];
        // reset gate
        for (std::size_t k = 0; k < h; ++k) da[k] = dr[k] * c.r[k] * (1.0 - c.r[k]);
        backprop_linear(w + lay.wr, c.h0.data(), da.data(), h, h, g + lay.wr, dh0.data());
        backprop_linear(w + lay.ur, c.s_prev.data(), da.data(), h, h, g + lay.ur, ds_carry.data());
        for (std::size_t k = 0; k < h; ++k) g[lay.br + k] += da[k];
        // preprocessing
        for (std::size_t k = 0; k < h; ++k) dpre[k] = c.pre[k] > 0.0 ? dh0[k] : 0.0;
        backprop_linear(w + lay.wp, c.x.data(), dpre.data(), h, in, g + lay.wp, nullptr);
        for (std::size_t k = 0; k < h; ++k) g[lay.bp + k] += dpre[k];
    }
    return total * scale;
}

Vec grad_nll(const PredictorNet& net, const TrainingSample& sample, std::size_t bptt_len) {
    Vec grad(net.shape().param_count());
    sequence_loss_and_grad(net, sample, bptt_len, grad);
    return grad;
}

double compare_gradient(const PredictorNet& net, const TrainingSample& sample, std::span<const double> analytic,
                        double eps) {
    if (!(eps > 1e-8 && eps < 1e-3)) throw InvalidConfig("gradient_check: eps must lie in (1e-8, 1e-3)");
    if (analytic.size() != net.shape().param_count()) throw DimensionMismatch("analytic gradient length");
    PredictorNet probe = net;
    double worst = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        const double orig = probe.weights()[k];
        probe.weights()[k] = orig + eps;
        const double up = sequence_loss(probe, sample);
        probe.weights()[k] = orig - eps;
        const double down = sequence_loss(probe, sample);
        probe.weights()[k] = orig;
        const double numeric = (up - down) / (2.0 * eps);
        worst = std::max(worst, std::abs(analytic[k] - numeric) / std::max(1.0, std::abs(numeric)));
    }
    return worst;
}

double gradient_check(const PredictorNet& net, const TrainingSample& sample, double eps) {
    const Vec analytic = grad_nll(net, sample, std::max<std::size_t>(sample.length(), 1));
    return compare_gradient(net, sample, analytic, eps);
}

double batch_gradient_serial(const PredictorNet& net, std::span<const TrainingSample* const> batch,
                             std::size_t bptt_len, std::span<double> grad) {
    if (batch.empty()) throw EmptySet("empty batch");
    std::fill(grad.begin(), grad.end(), 0.0);
    Vec one(grad.size());
    double loss = 0.0;
    for (const TrainingSample* sample : batch) {
        loss += sequence_loss_and_grad(net, *sample, bptt_len, one);
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += one[k];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& v : grad) v *= inv;
    return loss * inv;
}

double batch_gradient_parallel(const PredictorNet& net, std::span<const TrainingSample* const> batch,
                               std::size_t bptt_len, std::span<double> grad) {
    if (batch.empty()) throw EmptySet("empty batch");
    const std::size_t n = batch.size(), p = grad.size();
    std::vector<Vec> parts(n, Vec(p));
    Vec losses(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long b = 0; b < count; ++b) {
        const auto i = static_cast<std::size_t>(b);
        losses[i] = sequence_loss_and_grad(net, *batch[i], bptt_len, parts[i]);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        loss += losses[i];
        for (std::size_t k = 0; k < p; ++k) grad[k] += parts[i][k];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : grad) v *= inv;
    return loss * inv;
}

TrainResult train(PredictorNet net, std::span<const TrainingSample> data, const TrainConfig& cfg,
                  std::uint64_t seed) {
    if (data.empty()) throw EmptySet("train: no training episodes");
    if (cfg.batch_size == 0 || cfg.epochs == 0 || cfg.bptt_len == 0 || !(cfg.learning_rate > 0.0))
        throw InvalidConfig("train: learning rate, batch size, epochs and bptt_len must be positive");

    const std::size_t p = net.shape().param_count();
    Vec grad(p), velocity(p, 0.0);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<const TrainingSample*> batch;
    TrainResult result{std::move(net), {}};
    PredictorNet& model = result.net;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::shuffle), epoch}));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
                batch.push_back(&data[order[k]]);
            const double loss = batch_gradient_parallel(model, batch, cfg.bptt_len, grad);
            if (!std::isfinite(loss))
                throw DivergenceDetected("train: loss became non-finite in epoch " + std::to_string(epoch));
            auto w = model.weights();
            for (std::size_t k = 0; k < p; ++k) {
                velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * grad[k];
                w[k] += velocity[k];
            }
            epoch_loss += loss;
            ++batches;
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
    }
    return result;
}

}  // namespace pgc
