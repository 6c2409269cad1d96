#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geocon/ingest.hpp"
#include "geocon/models.hpp"

namespace geocon {

/// Sliding stride-1 samples: inputs are h x N x F, targets omega x N.
struct WindowSet {
  std::vector<Tensor> inputs;
  std::vector<Tensor> targets;
  std::vector<std::size_t> origins;  // panel index of each sample's last input day
  std::vector<std::string> warnings;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
};

struct WindowOptions {
  std::size_t target_channel = 0;
  /// Channels fed to the model, in order; empty means every channel.
  std::vector<std::size_t> feature_channels;
  /// Allow input lags before range.begin (targets always stay inside range).
  bool inputs_may_precede_range = false;
};

/// Number of in-range samples: len - h - omega + 1 when positive, else 0.
std::size_t window_count(std::size_t len, std::size_t h, std::size_t horizon);

/// Builds samples whose targets lie in `range`. Too-short ranges yield an
/// empty set with a warning.
WindowSet make_windows(const FeaturePanel& panel, std::size_t h, std::size_t horizon,
                       IndexRange range, const WindowOptions& options = {});

struct Split {
  IndexRange train;
  IndexRange test;
};

/// First floor(0.8 T) days train, the rest test. Throws when either side is empty.
Split split_80_20(std::size_t timesteps);

struct AmsGradConfig {
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AMSGrad without bias correction:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  vhat <- max(vhat, v)
///   theta <- theta - lr m / (sqrt(vhat) + eps)
class AmsGrad {
 public:
  struct Moments {
    Tensor m;
    Tensor v;
    Tensor v_hat;
  };

  explicit AmsGrad(AmsGradConfig config = {}) : config_(config) {}

  /// Applies one update. A step with any non-finite gradient is skipped
  /// entirely (state untouched), logged in events(), and returns false.
  bool step(ParamSet& params, const std::vector<Tensor>& grads);
  /// Zero moments shaped like `params`; step() calls this on first use.
  void initialize(const ParamSet& params);

  const AmsGradConfig& config() const noexcept { return config_; }
  std::size_t steps() const noexcept { return steps_; }
  const std::vector<Moments>& moments() const noexcept { return moments_; }
  std::vector<Moments>& moments() noexcept { return moments_; }
  const std::vector<std::string>& events() const noexcept { return events_; }

 private:
  AmsGradConfig config_;
  std::vector<Moments> moments_;
  std::size_t steps_ = 0;
  std::size_t attempts_ = 0;
  std::vector<std::string> events_;
};

/// All samples stacked: steps[t] is (B*N) x F, targets (B*N) x omega.
struct Batch {
  std::vector<Tensor> steps;
  Tensor targets;
  std::size_t samples = 0;
  std::size_t nodes = 0;
};

Batch make_batch(const WindowSet& windows);

struct TrainOptions {
  std::size_t epochs = 150;
  AmsGradConfig optimizer;
  std::uint64_t seed = 0;
  /// A run aborts once the epoch loss exceeds this multiple of the first.
  double divergence_factor = 1e6;
};

struct TrainResult {
  ParamSet params;
  std::vector<double> loss_curve;
  bool failed = false;
  std::string failure;
  std::size_t skipped_steps = 0;
};

/// Full-batch training on mean MSE over every sample, node and horizon.
/// Deterministic for a given seed. spec.output_nodes and spec.input_features
/// must match the windows.
TrainResult train_model(const ModelSpec& spec, const WindowSet& windows, const nd::Adjacency* adj,
                        const TrainOptions& options);

/// Dropout-free forecasts, one omega x N tensor per sample.
std::vector<Tensor> predict(const ModelSpec& spec, const ParamSet& params, const nd::Adjacency* adj,
                            const WindowSet& windows);

}  // namespace geocon
