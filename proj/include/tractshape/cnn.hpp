#pragma once
// From-scratch 1D convolutional network: forward pass, exact reverse-mode
// gradients, and SGD training. The reference architecture is three
// conv(k=5, 64 kernels, stride 1, zero pad 2) -> batchnorm -> ReLU blocks,
// a channel-major flatten, and a fully connected head 64*L -> 512 -> 128 -> d
// with ReLU after the two hidden affines (d = 2 for classification, 1 for
// regression). Every dimension is configurable through Cnn1dSpec so tests can
// run tiny models through the same code path.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tractshape/types.hpp"

namespace tractshape {

// A batch of 1D multi-channel signals stored as a single
// channels x (batch*length) matrix; sample b occupies the column block
// [b*length, (b+1)*length). One matrix per layer keeps the convolutions and
// batch-norm reductions as single dense operations over the whole batch.
struct FeatureBatch {
  Eigen::MatrixXd values;
  int batch = 0;
  int length = 0;
  std::vector<std::string> subject_ids;  // optional provenance, size batch

  int channels() const { return static_cast<int>(values.rows()); }
  Eigen::MatrixXd sample(int b) const {
    return values.middleCols(static_cast<Eigen::Index>(b) * length, length);
  }
  // Single-channel batch from one vector per sample (all equal length).
  static FeatureBatch from_vectors(const std::vector<Eigen::VectorXd>& rows);
  // Multi-channel batch from one channels x length matrix per sample.
  static FeatureBatch from_samples(const std::vector<Eigen::MatrixXd>& samples);
};

struct BatchNorm1d {
  Eigen::VectorXd gamma, beta;
  Eigen::VectorXd running_mean, running_var;
  bool initialized = false;  // running stats valid (set by first train batch)
  double eps = 1e-5;
  double momentum = 0.1;  // running <- (1-momentum)*running + momentum*batch
};

struct ConvBlock {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 5;
  // weight(o, ki*in_channels + c) multiplies input channel c at kernel tap ki;
  // this layout lets patch extraction copy contiguous channel blocks.
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  BatchNorm1d bn;
};

struct AffineLayer {
  Eigen::MatrixXd weight;  // in x out
  Eigen::VectorXd bias;    // out
};

struct Cnn1dSpec {
  int input_length = kAtlasClusterCount;
  int input_channels = 1;
  int conv_blocks = 3;
  int conv_channels = 64;
  int kernel_size = 5;  // odd; zero padding (kernel_size-1)/2 preserves length
  std::vector<int> head_dims = {512, 128};
  int output_dim = 2;  // 2 = class logits, 1 = scalar regression
};

bool operator==(const Cnn1dSpec& a, const Cnn1dSpec& b);
void validate_spec(const Cnn1dSpec& spec);

struct Cnn1dModel {
  Cnn1dSpec spec;
  std::vector<ConvBlock> blocks;
  std::vector<AffineLayer> head;  // head_dims then the output layer
  bool train_mode = true;
  // Regression targets may be z-scored with training-set statistics; keep the
  // parameters so predictions can be mapped back to the original scale.
  bool targets_standardized = false;
  double target_mean = 0.0;
  double target_std = 1.0;
};

// Flat named view of one parameter array. parameter_views enumerates the
// trainable parameters in a fixed canonical order (per block: conv weight,
// conv bias, bn gamma, bn beta; then per head layer: weight, bias), which
// defines the layout of gradients and SGD momentum buffers. state_views
// appends the batch-norm running statistics for serialization and equality.
struct ParamView {
  std::string name;
  double* data = nullptr;
  Eigen::Index size = 0;
};
std::vector<ParamView> parameter_views(Cnn1dModel& m);
std::vector<ParamView> state_views(Cnn1dModel& m);

// Per-parameter gradients, aligned with parameter_views (column-major
// flattening of each parameter array).
using GradList = std::vector<Eigen::VectorXd>;

// Seeded initialization: weights uniform in +-sqrt(6/fan_in), biases zero,
// gamma 1, beta 0, running stats (0, 1) but flagged uninitialized.
Cnn1dModel init_cnn(const Cnn1dSpec& spec, std::uint64_t seed);
// Mark running stats (0, 1) as valid so an untrained model can run in eval
// mode (otherwise eval before any training batch is an error).
void init_running_stats(Cnn1dModel& m);

// ---- individual layer operations ----

// out[o, t] = bias[o] + sum_{c,ki} weight(o, ki*Cin+c) * in_padded[c, t*stride+ki]
FeatureBatch conv1d_forward(const FeatureBatch& input,
                            const Eigen::MatrixXd& weight,
                            const Eigen::VectorXd& bias, int pad = 2,
                            int stride = 1);
// Train mode normalizes with per-channel batch statistics (population
// variance over batch*length) and updates the running stats; eval mode uses
// the running stats and fails if they were never initialized.
FeatureBatch batchnorm1d_forward(BatchNorm1d& bn, const FeatureBatch& input,
                                 bool train_mode);
Eigen::MatrixXd affine_forward(const Eigen::MatrixXd& input,
                               const Eigen::MatrixXd& weight,
                               const Eigen::VectorXd& bias);

struct LossValue {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // d loss / d logits (or predictions), batch x d
};
// Mean over the batch of -log softmax(logits)[label]; log-sum-exp stabilized.
LossValue softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                const std::vector<int>& labels);
// Mean of (pred - target)^2 over the batch; pred is batch x 1.
LossValue mse_loss(const Eigen::MatrixXd& pred, const Eigen::VectorXd& targets);
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

// ---- whole-network forward / backward ----

struct ForwardCache {
  FeatureBatch input;
  struct BlockCache {
    Eigen::MatrixXd patches;  // (kernel*Cin) x (batch*length) im2col matrix
    Eigen::MatrixXd xhat;     // batch-normalized conv output (pre scale/shift)
    Eigen::VectorXd std;      // per-channel sqrt(var + eps)
    Eigen::MatrixXd activ;    // post-ReLU block output
  };
  std::vector<BlockCache> blocks;
  std::vector<Eigen::MatrixXd> head_in;  // input of each affine, batch x n
  Eigen::MatrixXd logits;                // batch x d
};

// Train-mode forward: batch-norm uses batch statistics and updates running
// stats; fills the cache consumed by cnn_backward. Returns logits.
Eigen::MatrixXd cnn_forward_train(Cnn1dModel& m, const FeatureBatch& input,
                                  ForwardCache& cache);
// Eval-mode forward: pure function of (model, input); per-sample outputs are
// independent of batch composition.
Eigen::MatrixXd cnn_forward(const Cnn1dModel& m, const FeatureBatch& input);

// Exact gradients of the scalar loss w.r.t. every trainable parameter, given
// the cache of the corresponding train-mode forward and d loss/d logits.
GradList cnn_backward(const Cnn1dModel& m, const ForwardCache& cache,
                      const Eigen::MatrixXd& dlogits);

struct SgdState {
  std::vector<Eigen::VectorXd> velocity;  // parameter_views order
};
// v <- momentum*v + g; p <- p - lr*v  (momentum 0 is plain SGD).
void sgd_step(Cnn1dModel& m, const GradList& grads, SgdState& state, double lr,
              double momentum);

// ---- training ----

enum class LossKind { cross_entropy, mean_squared_error };

struct TrainConfig {
  double learning_rate = 0.1;
  int batch_size = 8;
  int epochs = 300;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::mean_squared_error;
  bool standardize_targets = true;  // regression only
};

struct CnnDataset {
  FeatureBatch inputs;
  std::vector<int> labels;  // classification targets; empty for regression
  Eigen::VectorXd targets;  // regression targets; size 0 for classification
};

struct CnnTrainResult {
  Cnn1dModel model;                // returned in eval mode
  std::vector<double> loss_trace;  // mean per-sample loss per epoch
};

// Seeded end-to-end training: init, then per epoch a seeded shuffle and fixed
// batch partition (last partial batch kept), forward/backward/sgd_step per
// batch. Inputs are expected already normalized per subject. A non-finite
// batch loss aborts with a divergence error naming the epoch.
CnnTrainResult train_cnn(const CnnDataset& data, const Cnn1dSpec& spec,
                         const TrainConfig& config);

// Eval-mode predictions: classification -> per-class softmax probabilities
// (batch x d), regression -> batch x 1 scalars mapped back through the target
// standardization if it was applied during training.
Eigen::MatrixXd cnn_predict(const Cnn1dModel& m, const FeatureBatch& input);
Eigen::MatrixXd cnn_predict(const Cnn1dModel& m,
                            const std::vector<Eigen::VectorXd>& inputs);

// JSON checkpoint with the architecture descriptor and full-precision
// parameters; cnn_from_json(cnn_to_json(m)) reproduces m bit-for-bit.
std::string cnn_to_json(const Cnn1dModel& m);
Cnn1dModel cnn_from_json(const std::string& text);
// Bitwise comparison of spec, parameters, running stats, and flags.
bool exactly_equal(const Cnn1dModel& a, const Cnn1dModel& b);

}  // namespace tractshape
