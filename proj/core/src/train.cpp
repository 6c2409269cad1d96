#include "geocon/train.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "geocon/rng.hpp"

namespace geocon {

std::size_t window_count(std::size_t len, std::size_t h, std::size_t horizon) {
  return len >= h + horizon ? len - h - horizon + 1 : 0;
}

WindowSet make_windows(const FeaturePanel& panel, std::size_t h, std::size_t horizon,
                       IndexRange range, const WindowOptions& options) {
  if (h < 1 || horizon < 1) throw Error("lags and horizon must be >= 1");
  if (range.end > panel.timesteps()) throw Error("window range extends past the panel");
  std::vector<std::size_t> channels = options.feature_channels;
  if (channels.empty()) {
    channels.resize(panel.features());
    for (std::size_t f = 0; f < channels.size(); ++f) channels[f] = f;
  }
  for (std::size_t c : channels) {
    if (c >= panel.features()) throw Error("feature channel out of range");
  }
  if (options.target_channel >= panel.features()) throw Error("target channel out of range");

  WindowSet out;
  // origin o: inputs o-h+1..o, targets o+1..o+horizon
  std::size_t first = range.begin + h - 1;
  if (options.inputs_may_precede_range) {
    first = std::max(range.begin == 0 ? std::size_t{0} : range.begin - 1, h - 1);
  }
  if (range.end < horizon + 1 || range.end - horizon - 1 + 1 <= first) {
    out.warnings.push_back("range [" + std::to_string(range.begin) + ", " +
                           std::to_string(range.end) + ") too short for h=" + std::to_string(h) +
                           ", omega=" + std::to_string(horizon) + "; no samples");
    return out;
  }
  const std::size_t last = range.end - horizon - 1;
  const std::size_t N = panel.counties();
  const std::size_t F = channels.size();
  for (std::size_t o = first; o <= last; ++o) {
    Tensor in(Shape{h, N, F});
    for (std::size_t k = 0; k < h; ++k) {
      const std::size_t t = o + 1 - h + k;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f) in.at(k, n, f) = panel.value(t, n, channels[f]);
    }
    Tensor target = Tensor::matrix(horizon, N);
    for (std::size_t k = 0; k < horizon; ++k)
      for (std::size_t n = 0; n < N; ++n) target(k, n) = panel.value(o + 1 + k, n, options.target_channel);
    out.inputs.push_back(std::move(in));
    out.targets.push_back(std::move(target));
    out.origins.push_back(o);
  }
  return out;
}

Split split_80_20(std::size_t timesteps) {
  const auto train = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(timesteps)));
  if (train == 0 || train >= timesteps) {
    throw Error("cannot split " + std::to_string(timesteps) + " days into non-empty train/test");
  }
  return {{0, train}, {train, timesteps}};
}

bool AmsGrad::step(ParamSet& params, const std::vector<Tensor>& grads) {
  ++attempts_;
  if (grads.size() != params.size()) throw Error("gradient count does not match parameters");
  for (std::size_t p = 0; p < grads.size(); ++p) {
    if (grads[p].shape() != params[p].second.shape()) {
      throw ShapeError("gradient for '" + params[p].first + "' has shape " +
                       shape_string(grads[p].shape()));
    }
    if (!grads[p].all_finite()) {
      events_.push_back("step " + std::to_string(attempts_) + ": non-finite gradient for '" +
                        params[p].first + "'; update skipped");
      return false;
    }
  }
  if (moments_.empty()) initialize(params);
  const auto& c = config_;
  for (std::size_t p = 0; p < grads.size(); ++p) {
    Moments& mo = moments_[p];
    Tensor& theta = params[p].second;
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < g.size(); ++i) {
      mo.m[i] = c.beta1 * mo.m[i] + (1.0 - c.beta1) * g[i];
      mo.v[i] = c.beta2 * mo.v[i] + (1.0 - c.beta2) * g[i] * g[i];
      mo.v_hat[i] = std::max(mo.v_hat[i], mo.v[i]);
      theta[i] -= c.lr * mo.m[i] / (std::sqrt(mo.v_hat[i]) + c.eps);
    }
  }
  ++steps_;
  return true;
}

void AmsGrad::initialize(const ParamSet& params) {
  moments_.clear();
  for (const auto& [name, t] : params) {
    moments_.push_back({Tensor(t.shape()), Tensor(t.shape()), Tensor(t.shape())});
  }
}

Batch make_batch(const WindowSet& windows) {
  if (windows.empty()) throw Error("cannot batch an empty window set");
  const Shape& s = windows.inputs.front().shape();
  const std::size_t h = s[0];
  const std::size_t N = s[1];
  const std::size_t F = s[2];
  const std::size_t B = windows.size();
  const std::size_t horizon = windows.targets.front().rows();
  Batch batch;
  batch.samples = B;
  batch.nodes = N;
  batch.steps.assign(h, Tensor::matrix(B * N, F));
  batch.targets = Tensor::matrix(B * N, horizon);
  for (std::size_t b = 0; b < B; ++b) {
    const Tensor& in = windows.inputs[b];
    for (std::size_t t = 0; t < h; ++t)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f) batch.steps[t](b * N + n, f) = in.at(t, n, f);
    const Tensor& tg = windows.targets[b];
    for (std::size_t k = 0; k < horizon; ++k)
      for (std::size_t n = 0; n < N; ++n) batch.targets(b * N + n, k) = tg(k, n);
  }
  return batch;
}

namespace {

// Batched activations are a few hundred KB each; above glibc's default mmap
// threshold every tape node would map and unmap pages.
void keep_buffers_on_heap() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

}  // namespace

TrainResult train_model(const ModelSpec& spec, const WindowSet& windows, const nd::Adjacency* adj,
                        const TrainOptions& options) {
  keep_buffers_on_heap();
  spec.validate();
  if (windows.empty()) throw Error("train_model: no training windows");
  TrainResult result;
  result.params = init_params(spec, options.seed);
  if (options.epochs == 0) return result;

  const Batch batch = make_batch(windows);
  const SeedSplitter splitter(options.seed);
  auto dropout_rng = splitter.stream("dropout");
  AmsGrad optimizer(options.optimizer);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double loss_value = 0.0;
    std::vector<Tensor> grads;
    try {
      nd::Tape tape;
      BoundParams bound(tape, result.params, true);
      ForwardOptions fo;
      fo.dropout_rng = &dropout_rng;
      nd::Var pred = forward_batch(tape, batch.steps, adj, bound, spec, fo);
      nd::Var loss = nd::mse_loss(pred, batch.targets);
      loss_value = loss.value().item();
      tape.backward(loss);
      for (const auto& [name, v] : bound.vars()) grads.push_back(v.grad());
    } catch (const Error& e) {
      result.failed = true;
      result.failure = "epoch " + std::to_string(epoch + 1) + ": " + e.what();
      return result;
    }
    result.loss_curve.push_back(loss_value);
    if (!std::isfinite(loss_value)) {
      result.failed = true;
      result.failure = "non-finite loss at epoch " + std::to_string(epoch + 1);
      return result;
    }
    if (loss_value > options.divergence_factor * result.loss_curve.front()) {
      result.failed = true;
      result.failure = "diverged at epoch " + std::to_string(epoch + 1);
      return result;
    }
    if (!optimizer.step(result.params, grads)) ++result.skipped_steps;
  }
  return result;
}

std::vector<Tensor> predict(const ModelSpec& spec, const ParamSet& params, const nd::Adjacency* adj,
                            const WindowSet& windows) {
  std::vector<Tensor> out;
  if (windows.empty()) return out;
  const Batch batch = make_batch(windows);
  nd::Tape tape;
  BoundParams bound(tape, params, false);
  const Tensor pred = forward_batch(tape, batch.steps, adj, bound, spec).value();
  const std::size_t N = batch.nodes;
  const std::size_t horizon = pred.cols();
  for (std::size_t b = 0; b < batch.samples; ++b) {
    Tensor f = Tensor::matrix(horizon, N);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t k = 0; k < horizon; ++k) f(k, n) = pred(b * N + n, k);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace geocon
