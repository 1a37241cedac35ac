#include "tractshape/cnn.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include <nlohmann/json.hpp>

#include "tractshape/error.hpp"
#include "tractshape/rng.hpp"

namespace tractshape {

namespace {

Eigen::Index total_cols(int batch, int length) {
  return static_cast<Eigen::Index>(batch) * length;
}

// im2col for the stride-1 length-preserving case used by the network. Row
// block [ki*Cin, (ki+1)*Cin) of the result holds the input shifted by
// (ki - pad) columns, zero outside each sample's own column block.
Eigen::MatrixXd build_patches(const FeatureBatch& input, int kernel, int pad) {
  const int cin = input.channels();
  const int length = input.length;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(kernel) * cin, total_cols(input.batch, length));
  for (int b = 0; b < input.batch; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * length;
    for (int ki = 0; ki < kernel; ++ki) {
      const int offset = ki - pad;
      const int lo = std::max(0, -offset);
      const int hi = std::min(length, length - offset);
      if (hi <= lo) continue;
      patches.block(static_cast<Eigen::Index>(ki) * cin, base + lo, cin,
                    hi - lo) = input.values.block(0, base + lo + offset, cin,
                                                  hi - lo);
    }
  }
  return patches;
}

// Adjoint of build_patches: scatter-add patch gradients back onto the input.
Eigen::MatrixXd scatter_patches(const Eigen::MatrixXd& dpatches, int batch,
                                int cin, int length, int kernel, int pad) {
  Eigen::MatrixXd dx =
      Eigen::MatrixXd::Zero(cin, total_cols(batch, length));
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * length;
    for (int ki = 0; ki < kernel; ++ki) {
      const int offset = ki - pad;
      const int lo = std::max(0, -offset);
      const int hi = std::min(length, length - offset);
      if (hi <= lo) continue;
      dx.block(0, base + lo + offset, cin, hi - lo) +=
          dpatches.block(static_cast<Eigen::Index>(ki) * cin, base + lo, cin,
                         hi - lo);
    }
  }
  return dx;
}

// Eval-mode batch norm as a per-channel affine map; pure, no state update.
Eigen::MatrixXd bn_eval(const BatchNorm1d& bn, const Eigen::MatrixXd& x) {
  if (!bn.initialized)
    fail(Errc::no_reference,
         "batch-norm eval requested before any training update initialized "
         "the running statistics");
  const Eigen::ArrayXd scale =
      bn.gamma.array() / (bn.running_var.array() + bn.eps).sqrt();
  const Eigen::ArrayXd shift =
      bn.beta.array() - scale * bn.running_mean.array();
  return ((x.array().colwise() * scale).colwise() + shift).matrix();
}

void check_channel_params(const BatchNorm1d& bn, int channels) {
  if (bn.gamma.size() != channels || bn.beta.size() != channels ||
      bn.running_mean.size() != channels || bn.running_var.size() != channels)
    fail(Errc::dimension_mismatch,
         "batch-norm parameter size does not match the channel count");
}

// Allocate all parameter arrays for a spec without filling the weights.
Cnn1dModel make_shell(const Cnn1dSpec& spec) {
  validate_spec(spec);
  Cnn1dModel m;
  m.spec = spec;
  int cin = spec.input_channels;
  for (int i = 0; i < spec.conv_blocks; ++i) {
    ConvBlock block;
    block.in_channels = cin;
    block.out_channels = spec.conv_channels;
    block.kernel = spec.kernel_size;
    block.weight.resize(block.out_channels,
                        static_cast<Eigen::Index>(block.kernel) * cin);
    block.bias = Eigen::VectorXd::Zero(block.out_channels);
    block.bn.gamma = Eigen::VectorXd::Ones(block.out_channels);
    block.bn.beta = Eigen::VectorXd::Zero(block.out_channels);
    block.bn.running_mean = Eigen::VectorXd::Zero(block.out_channels);
    block.bn.running_var = Eigen::VectorXd::Ones(block.out_channels);
    m.blocks.push_back(std::move(block));
    cin = spec.conv_channels;
  }
  int in_dim = spec.conv_channels * spec.input_length;
  std::vector<int> dims = spec.head_dims;
  dims.push_back(spec.output_dim);
  for (int out_dim : dims) {
    AffineLayer layer;
    layer.weight.resize(in_dim, out_dim);
    layer.bias = Eigen::VectorXd::Zero(out_dim);
    m.head.push_back(std::move(layer));
    in_dim = out_dim;
  }
  return m;
}

void fill_uniform(Eigen::MatrixXd& mat, double limit, Rng& rng) {
  for (Eigen::Index i = 0; i < mat.size(); ++i)
    mat.data()[i] = rng.uniform(-limit, limit);
}

Cnn1dModel init_with_rng(const Cnn1dSpec& spec, Rng& rng) {
  Cnn1dModel m = make_shell(spec);
  for (ConvBlock& block : m.blocks) {
    const double fan_in = static_cast<double>(block.in_channels) * block.kernel;
    fill_uniform(block.weight, std::sqrt(6.0 / fan_in), rng);
  }
  for (AffineLayer& layer : m.head)
    fill_uniform(layer.weight,
                 std::sqrt(6.0 / static_cast<double>(layer.weight.rows())),
                 rng);
  return m;
}

std::vector<ParamView> collect_views(Cnn1dModel& m, bool with_running) {
  std::vector<ParamView> views;
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    ConvBlock& b = m.blocks[i];
    const std::string prefix = "block" + std::to_string(i) + ".";
    views.push_back({prefix + "conv_w", b.weight.data(), b.weight.size()});
    views.push_back({prefix + "conv_b", b.bias.data(), b.bias.size()});
    views.push_back({prefix + "bn_gamma", b.bn.gamma.data(), b.bn.gamma.size()});
    views.push_back({prefix + "bn_beta", b.bn.beta.data(), b.bn.beta.size()});
    if (with_running) {
      views.push_back({prefix + "bn_running_mean", b.bn.running_mean.data(),
                       b.bn.running_mean.size()});
      views.push_back({prefix + "bn_running_var", b.bn.running_var.data(),
                       b.bn.running_var.size()});
    }
  }
  for (std::size_t j = 0; j < m.head.size(); ++j) {
    AffineLayer& h = m.head[j];
    const std::string prefix = "head" + std::to_string(j) + ".";
    views.push_back({prefix + "w", h.weight.data(), h.weight.size()});
    views.push_back({prefix + "b", h.bias.data(), h.bias.size()});
  }
  return views;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& mat) {
  return Eigen::Map<const Eigen::VectorXd>(mat.data(), mat.size());
}

std::vector<double> to_std(const double* data, Eigen::Index n) {
  return std::vector<double>(data, data + n);
}

void from_std(const nlohmann::json& arr, double* data, Eigen::Index n,
              const std::string& name) {
  if (static_cast<Eigen::Index>(arr.size()) != n)
    fail(Errc::format_error, "checkpoint array '" + name +
                                 "' has size " + std::to_string(arr.size()) +
                                 ", expected " + std::to_string(n));
  for (Eigen::Index i = 0; i < n; ++i)
    data[i] = arr[static_cast<std::size_t>(i)].get<double>();
}

}  // namespace

FeatureBatch FeatureBatch::from_vectors(
    const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) fail(Errc::invalid_input, "empty batch");
  FeatureBatch out;
  out.batch = static_cast<int>(rows.size());
  out.length = static_cast<int>(rows.front().size());
  out.values.resize(1, total_cols(out.batch, out.length));
  for (int b = 0; b < out.batch; ++b) {
    if (rows[b].size() != out.length)
      fail(Errc::dimension_mismatch, "batch samples have unequal lengths");
    out.values.block(0, static_cast<Eigen::Index>(b) * out.length, 1,
                     out.length) = rows[b].transpose();
  }
  return out;
}

FeatureBatch FeatureBatch::from_samples(
    const std::vector<Eigen::MatrixXd>& samples) {
  if (samples.empty()) fail(Errc::invalid_input, "empty batch");
  FeatureBatch out;
  out.batch = static_cast<int>(samples.size());
  out.length = static_cast<int>(samples.front().cols());
  const Eigen::Index channels = samples.front().rows();
  out.values.resize(channels, total_cols(out.batch, out.length));
  for (int b = 0; b < out.batch; ++b) {
    if (samples[b].rows() != channels || samples[b].cols() != out.length)
      fail(Errc::dimension_mismatch, "batch samples have unequal shapes");
    out.values.middleCols(static_cast<Eigen::Index>(b) * out.length,
                          out.length) = samples[b];
  }
  return out;
}

bool operator==(const Cnn1dSpec& a, const Cnn1dSpec& b) {
  return a.input_length == b.input_length &&
         a.input_channels == b.input_channels &&
         a.conv_blocks == b.conv_blocks &&
         a.conv_channels == b.conv_channels &&
         a.kernel_size == b.kernel_size && a.head_dims == b.head_dims &&
         a.output_dim == b.output_dim;
}

void validate_spec(const Cnn1dSpec& spec) {
  if (spec.input_length < 1 || spec.input_channels < 1 ||
      spec.conv_blocks < 1 || spec.conv_channels < 1 || spec.output_dim < 1)
    fail(Errc::invalid_input, "network dimensions must be positive");
  if (spec.kernel_size < 1 || spec.kernel_size % 2 == 0)
    fail(Errc::invalid_input,
         "kernel size must be odd so zero padding can preserve length");
  for (int d : spec.head_dims)
    if (d < 1) fail(Errc::invalid_input, "head dimensions must be positive");
}

Cnn1dModel init_cnn(const Cnn1dSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return init_with_rng(spec, rng);
}

void init_running_stats(Cnn1dModel& m) {
  for (ConvBlock& block : m.blocks) {
    block.bn.running_mean.setZero();
    block.bn.running_var.setOnes();
    block.bn.initialized = true;
  }
}

std::vector<ParamView> parameter_views(Cnn1dModel& m) {
  return collect_views(m, false);
}

std::vector<ParamView> state_views(Cnn1dModel& m) {
  return collect_views(m, true);
}

FeatureBatch conv1d_forward(const FeatureBatch& input,
                            const Eigen::MatrixXd& weight,
                            const Eigen::VectorXd& bias, int pad, int stride) {
  const int cin = input.channels();
  const int kernel = static_cast<int>(weight.cols()) / std::max(cin, 1);
  if (pad < 0 || stride < 1) fail(Errc::invalid_input, "bad pad or stride");
  if (cin < 1 || weight.cols() != static_cast<Eigen::Index>(kernel) * cin)
    fail(Errc::dimension_mismatch,
         "conv weight columns are not a multiple of the input channel count");
  if (bias.size() != weight.rows())
    fail(Errc::dimension_mismatch, "conv bias size != output channel count");
  if (input.length + 2 * pad < kernel)
    fail(Errc::invalid_input, "kernel longer than padded input");

  FeatureBatch out;
  out.batch = input.batch;
  out.subject_ids = input.subject_ids;
  if (stride == 1 && 2 * pad < kernel) {
    out.length = input.length + 2 * pad - kernel + 1;
    // For stride 1 the padded sliding windows are the shifted copies produced
    // by build_patches; trim to the valid output length per sample.
    const Eigen::MatrixXd patches = build_patches(input, kernel, pad);
    const Eigen::MatrixXd full = (weight * patches).colwise() + bias;
    if (out.length == input.length) {
      out.values = full;
    } else {
      out.values.resize(weight.rows(), total_cols(out.batch, out.length));
      for (int b = 0; b < out.batch; ++b)
        out.values.middleCols(static_cast<Eigen::Index>(b) * out.length,
                              out.length) =
            full.middleCols(static_cast<Eigen::Index>(b) * input.length,
                            out.length);
    }
    return out;
  }

  out.length = (input.length + 2 * pad - kernel) / stride + 1;
  out.values.resize(weight.rows(), total_cols(out.batch, out.length));
  for (int b = 0; b < out.batch; ++b) {
    for (int t = 0; t < out.length; ++t) {
      Eigen::VectorXd window =
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kernel) * cin);
      for (int ki = 0; ki < kernel; ++ki) {
        const int pos = t * stride + ki - pad;
        if (pos >= 0 && pos < input.length)
          window.segment(static_cast<Eigen::Index>(ki) * cin, cin) =
              input.values.col(static_cast<Eigen::Index>(b) * input.length +
                               pos);
      }
      out.values.col(static_cast<Eigen::Index>(b) * out.length + t) =
          weight * window + bias;
    }
  }
  return out;
}

FeatureBatch batchnorm1d_forward(BatchNorm1d& bn, const FeatureBatch& input,
                                 bool train_mode) {
  check_channel_params(bn, input.channels());
  FeatureBatch out;
  out.batch = input.batch;
  out.length = input.length;
  out.subject_ids = input.subject_ids;
  if (!train_mode) {
    out.values = bn_eval(bn, input.values);
    return out;
  }
  const double n = static_cast<double>(input.values.cols());
  const Eigen::VectorXd mean = input.values.rowwise().mean();
  const Eigen::MatrixXd centered = input.values.colwise() - mean;
  const Eigen::ArrayXd var = centered.rowwise().squaredNorm().array() / n;
  const Eigen::ArrayXd std = (var + bn.eps).sqrt();
  const Eigen::MatrixXd xhat =
      (centered.array().colwise() / std).matrix();
  out.values = ((xhat.array().colwise() * bn.gamma.array()).colwise() +
                bn.beta.array())
                   .matrix();
  bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * mean;
  bn.running_var =
      ((1.0 - bn.momentum) * bn.running_var.array() + bn.momentum * var)
          .matrix();
  bn.initialized = true;
  return out;
}

Eigen::MatrixXd affine_forward(const Eigen::MatrixXd& input,
                               const Eigen::MatrixXd& weight,
                               const Eigen::VectorXd& bias) {
  if (input.cols() != weight.rows() || weight.cols() != bias.size())
    fail(Errc::dimension_mismatch, "affine layer shape mismatch");
  return (input * weight).rowwise() + bias.transpose();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  const Eigen::ArrayXd row_max = logits.rowwise().maxCoeff();
  Eigen::ArrayXXd shifted =
      (logits.array().colwise() - row_max).exp();
  const Eigen::ArrayXd sums = shifted.rowwise().sum();
  return (shifted.colwise() / sums).matrix();
}

LossValue softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                const std::vector<int>& labels) {
  const Eigen::Index batch = logits.rows();
  if (static_cast<Eigen::Index>(labels.size()) != batch)
    fail(Errc::dimension_mismatch, "one label per row required");
  for (int y : labels)
    if (y < 0 || y >= logits.cols())
      fail(Errc::invalid_input, "class label out of range");
  LossValue out;
  const Eigen::MatrixXd probs = softmax_rows(logits);
  double loss = 0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    // -log p directly from the log-sum-exp for stability
    const double row_max = logits.row(b).maxCoeff();
    const double lse =
        row_max +
        std::log((logits.row(b).array() - row_max).exp().sum());
    loss += lse - logits(b, labels[static_cast<std::size_t>(b)]);
  }
  out.loss = loss / static_cast<double>(batch);
  out.grad = probs;
  for (Eigen::Index b = 0; b < batch; ++b)
    out.grad(b, labels[static_cast<std::size_t>(b)]) -= 1.0;
  out.grad /= static_cast<double>(batch);
  return out;
}

LossValue mse_loss(const Eigen::MatrixXd& pred,
                   const Eigen::VectorXd& targets) {
  if (pred.cols() != 1 || pred.rows() != targets.size())
    fail(Errc::dimension_mismatch, "prediction/target shape mismatch");
  LossValue out;
  const Eigen::VectorXd diff = pred.col(0) - targets;
  const double n = static_cast<double>(pred.rows());
  out.loss = diff.squaredNorm() / n;
  out.grad = (2.0 / n) * diff;
  return out;
}

Eigen::MatrixXd cnn_forward_train(Cnn1dModel& m, const FeatureBatch& input,
                                  ForwardCache& cache) {
  if (input.channels() != m.spec.input_channels ||
      input.length != m.spec.input_length)
    fail(Errc::dimension_mismatch, "input shape does not match the network");
  const int pad = (m.spec.kernel_size - 1) / 2;
  const Eigen::Index bl = total_cols(input.batch, input.length);
  cache.input = input;
  cache.blocks.assign(m.blocks.size(), {});
  cache.head_in.assign(m.head.size(), {});

  FeatureBatch x = input;
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    ConvBlock& block = m.blocks[i];
    ForwardCache::BlockCache& bc = cache.blocks[i];
    bc.patches = build_patches(x, block.kernel, pad);
    Eigen::MatrixXd z = (block.weight * bc.patches).colwise() + block.bias;

    check_channel_params(block.bn, block.out_channels);
    const double n = static_cast<double>(bl);
    const Eigen::VectorXd mean = z.rowwise().mean();
    z.colwise() -= mean;  // z is now centered
    const Eigen::ArrayXd var = z.rowwise().squaredNorm().array() / n;
    bc.std = (var + block.bn.eps).sqrt();
    bc.xhat = (z.array().colwise() / bc.std.array()).matrix();
    block.bn.running_mean = (1.0 - block.bn.momentum) * block.bn.running_mean +
                            block.bn.momentum * mean;
    block.bn.running_var =
        ((1.0 - block.bn.momentum) * block.bn.running_var.array() +
         block.bn.momentum * var)
            .matrix();
    block.bn.initialized = true;

    bc.activ = ((bc.xhat.array().colwise() * block.bn.gamma.array())
                    .colwise() +
                block.bn.beta.array())
                   .max(0.0)
                   .matrix();
    x.values = bc.activ;
    x.length = input.length;
  }

  // channel-major flatten: flat(b, c*L + t) = x(c, b*L + t)
  const int length = input.length;
  const int channels = m.spec.conv_channels;
  Eigen::MatrixXd flat(input.batch,
                       static_cast<Eigen::Index>(channels) * length);
  for (int b = 0; b < input.batch; ++b)
    for (int c = 0; c < channels; ++c)
      flat.block(b, static_cast<Eigen::Index>(c) * length, 1, length) =
          x.values.block(c, static_cast<Eigen::Index>(b) * length, 1, length);

  Eigen::MatrixXd a = std::move(flat);
  for (std::size_t j = 0; j < m.head.size(); ++j) {
    cache.head_in[j] = a;
    Eigen::MatrixXd pre = affine_forward(a, m.head[j].weight, m.head[j].bias);
    if (j + 1 < m.head.size())
      a = pre.array().max(0.0).matrix();
    else
      a = std::move(pre);
  }
  cache.logits = a;
  return cache.logits;
}

Eigen::MatrixXd cnn_forward(const Cnn1dModel& m, const FeatureBatch& input) {
  if (input.channels() != m.spec.input_channels ||
      input.length != m.spec.input_length)
    fail(Errc::dimension_mismatch, "input shape does not match the network");
  const int pad = (m.spec.kernel_size - 1) / 2;
  FeatureBatch x = input;
  for (const ConvBlock& block : m.blocks) {
    const Eigen::MatrixXd patches = build_patches(x, block.kernel, pad);
    Eigen::MatrixXd z = (block.weight * patches).colwise() + block.bias;
    check_channel_params(block.bn, block.out_channels);
    x.values = bn_eval(block.bn, z).array().max(0.0).matrix();
  }
  const int length = input.length;
  const int channels = m.spec.conv_channels;
  Eigen::MatrixXd flat(input.batch,
                       static_cast<Eigen::Index>(channels) * length);
  for (int b = 0; b < input.batch; ++b)
    for (int c = 0; c < channels; ++c)
      flat.block(b, static_cast<Eigen::Index>(c) * length, 1, length) =
          x.values.block(c, static_cast<Eigen::Index>(b) * length, 1, length);
  Eigen::MatrixXd a = std::move(flat);
  for (std::size_t j = 0; j < m.head.size(); ++j) {
    a = affine_forward(a, m.head[j].weight, m.head[j].bias);
    if (j + 1 < m.head.size()) a = a.array().max(0.0).matrix();
  }
  return a;
}

GradList cnn_backward(const Cnn1dModel& m, const ForwardCache& cache,
                      const Eigen::MatrixXd& dlogits) {
  const std::size_t nb = m.blocks.size();
  GradList grads(4 * nb + 2 * m.head.size());
  const int length = cache.input.length;
  const int batch = cache.input.batch;
  const int pad = (m.spec.kernel_size - 1) / 2;
  const double n = static_cast<double>(total_cols(batch, length));

  // head, in reverse
  Eigen::MatrixXd d = dlogits;
  for (std::size_t j = m.head.size(); j-- > 0;) {
    grads[4 * nb + 2 * j] = flatten(cache.head_in[j].transpose() * d);
    grads[4 * nb + 2 * j + 1] = d.colwise().sum().transpose();
    d = d * m.head[j].weight.transpose();
    // head_in[j] for j >= 1 is a ReLU output; gate the gradient there
    if (j > 0)
      d = (d.array() * (cache.head_in[j].array() > 0.0).cast<double>())
              .matrix();
  }

  // unflatten back to channels x (batch*length)
  const int channels = m.spec.conv_channels;
  Eigen::MatrixXd dx(channels, total_cols(batch, length));
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < channels; ++c)
      dx.block(c, static_cast<Eigen::Index>(b) * length, 1, length) =
          d.block(b, static_cast<Eigen::Index>(c) * length, 1, length);

  for (std::size_t i = nb; i-- > 0;) {
    const ConvBlock& block = m.blocks[i];
    const ForwardCache::BlockCache& bc = cache.blocks[i];
    // ReLU
    Eigen::MatrixXd dy =
        (dx.array() * (bc.activ.array() > 0.0).cast<double>()).matrix();
    // batch norm: dgamma/dbeta, then the batch-statistics chain rule
    Eigen::VectorXd dgamma(block.out_channels), dbeta(block.out_channels);
    Eigen::MatrixXd dz(dy.rows(), dy.cols());
    for (int c = 0; c < block.out_channels; ++c) {
      const double s1 = dy.row(c).sum();
      const double s2 = dy.row(c).dot(bc.xhat.row(c));
      dgamma[c] = s2;
      dbeta[c] = s1;
      dz.row(c) = ((block.bn.gamma[c] / bc.std[c]) *
                   (dy.row(c).array() - s1 / n -
                    bc.xhat.row(c).array() * (s2 / n)))
                      .matrix();
    }
    grads[4 * i] = flatten(dz * bc.patches.transpose());
    grads[4 * i + 1] = dz.rowwise().sum();
    grads[4 * i + 2] = dgamma;
    grads[4 * i + 3] = dbeta;
    if (i > 0) {
      const Eigen::MatrixXd dpatches = block.weight.transpose() * dz;
      dx = scatter_patches(dpatches, batch, block.in_channels, length,
                           block.kernel, pad);
    }
  }
  return grads;
}

void sgd_step(Cnn1dModel& m, const GradList& grads, SgdState& state, double lr,
              double momentum) {
  std::vector<ParamView> views = parameter_views(m);
  if (grads.size() != views.size())
    fail(Errc::dimension_mismatch, "gradient list does not match parameters");
  if (state.velocity.empty()) {
    state.velocity.reserve(views.size());
    for (const ParamView& v : views)
      state.velocity.push_back(Eigen::VectorXd::Zero(v.size));
  }
  if (state.velocity.size() != views.size())
    fail(Errc::dimension_mismatch, "optimizer state does not match parameters");
  for (std::size_t k = 0; k < views.size(); ++k) {
    if (grads[k].size() != views[k].size)
      fail(Errc::dimension_mismatch,
           "gradient size mismatch for " + views[k].name);
    state.velocity[k] = momentum * state.velocity[k] + grads[k];
    Eigen::Map<Eigen::VectorXd> p(views[k].data, views[k].size);
    p -= lr * state.velocity[k];
  }
}

CnnTrainResult train_cnn(const CnnDataset& data, const Cnn1dSpec& spec,
                         const TrainConfig& config) {
  validate_spec(spec);
  if (config.learning_rate <= 0 || config.batch_size < 1 ||
      config.epochs < 1 || config.momentum < 0 || config.momentum >= 1)
    fail(Errc::invalid_input, "bad training configuration");
  const int n = data.inputs.batch;
  if (n < 1) fail(Errc::invalid_input, "empty training set");
  if (data.inputs.channels() != spec.input_channels ||
      data.inputs.length != spec.input_length)
    fail(Errc::dimension_mismatch, "input shape does not match the network");
  if (!data.inputs.values.allFinite())
    fail(Errc::invalid_data, "non-finite training input");

  const bool classify = config.loss == LossKind::cross_entropy;
  if (classify) {
    if (static_cast<int>(data.labels.size()) != n)
      fail(Errc::invalid_input, "one class label per sample required");
    if (spec.output_dim < 2)
      fail(Errc::invalid_input,
           "cross-entropy training needs >= 2 output logits");
    for (int y : data.labels)
      if (y < 0 || y >= spec.output_dim)
        fail(Errc::invalid_input, "class label out of range");
  } else {
    if (data.targets.size() != n)
      fail(Errc::invalid_input, "one regression target per sample required");
    if (spec.output_dim != 1)
      fail(Errc::invalid_input, "regression head must have one output");
    if (!data.targets.allFinite())
      fail(Errc::invalid_data, "non-finite regression target");
  }

  Rng rng(config.seed);
  CnnTrainResult result;
  result.model = init_with_rng(spec, rng);
  Cnn1dModel& model = result.model;

  Eigen::VectorXd targets = data.targets;
  if (!classify && config.standardize_targets) {
    const double mean = targets.mean();
    double sd = 0.0;
    if (n > 1)
      sd = std::sqrt((targets.array() - mean).square().sum() /
                     static_cast<double>(n - 1));
    if (sd <= 0.0) sd = 1.0;
    targets = (targets.array() - mean) / sd;
    model.targets_standardized = true;
    model.target_mean = mean;
    model.target_std = sd;
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  SgdState state;
  ForwardCache cache;
  const int length = spec.input_length;
  const int channels = spec.input_channels;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int count = std::min(config.batch_size, n - start);
      FeatureBatch batch;
      batch.batch = count;
      batch.length = length;
      batch.values.resize(channels, total_cols(count, length));
      std::vector<int> batch_labels(classify ? count : 0);
      Eigen::VectorXd batch_targets(classify ? 0 : count);
      for (int i = 0; i < count; ++i) {
        const int src = order[start + i];
        batch.values.middleCols(static_cast<Eigen::Index>(i) * length,
                                length) =
            data.inputs.values.middleCols(
                static_cast<Eigen::Index>(src) * length, length);
        if (classify)
          batch_labels[i] = data.labels[src];
        else
          batch_targets[i] = targets[src];
      }

      const Eigen::MatrixXd logits = cnn_forward_train(model, batch, cache);
      const LossValue loss = classify
                                 ? softmax_cross_entropy(logits, batch_labels)
                                 : mse_loss(logits, batch_targets);
      if (!std::isfinite(loss.loss))
        fail(Errc::diverged, "training loss diverged at epoch " +
                                 std::to_string(epoch + 1));
      const GradList grads = cnn_backward(model, cache, loss.grad);
      sgd_step(model, grads, state, config.learning_rate, config.momentum);
      epoch_loss += loss.loss * count;
    }
    result.loss_trace.push_back(epoch_loss / n);
  }
  model.train_mode = false;
  return result;
}

Eigen::MatrixXd cnn_predict(const Cnn1dModel& m, const FeatureBatch& input) {
  Eigen::MatrixXd logits = cnn_forward(m, input);
  if (m.spec.output_dim >= 2) return softmax_rows(logits);
  if (m.targets_standardized)
    logits = (logits.array() * m.target_std + m.target_mean).matrix();
  return logits;
}

Eigen::MatrixXd cnn_predict(const Cnn1dModel& m,
                            const std::vector<Eigen::VectorXd>& inputs) {
  return cnn_predict(m, FeatureBatch::from_vectors(inputs));
}

std::string cnn_to_json(const Cnn1dModel& m) {
  nlohmann::json j;
  j["kind"] = "cnn1d";
  j["spec"] = {{"input_length", m.spec.input_length},
               {"input_channels", m.spec.input_channels},
               {"conv_blocks", m.spec.conv_blocks},
               {"conv_channels", m.spec.conv_channels},
               {"kernel_size", m.spec.kernel_size},
               {"head_dims", m.spec.head_dims},
               {"output_dim", m.spec.output_dim}};
  j["blocks"] = nlohmann::json::array();
  for (const ConvBlock& b : m.blocks) {
    j["blocks"].push_back(
        {{"weight", to_std(b.weight.data(), b.weight.size())},
         {"bias", to_std(b.bias.data(), b.bias.size())},
         {"bn_gamma", to_std(b.bn.gamma.data(), b.bn.gamma.size())},
         {"bn_beta", to_std(b.bn.beta.data(), b.bn.beta.size())},
         {"bn_running_mean",
          to_std(b.bn.running_mean.data(), b.bn.running_mean.size())},
         {"bn_running_var",
          to_std(b.bn.running_var.data(), b.bn.running_var.size())},
         {"bn_initialized", b.bn.initialized}});
  }
  j["head"] = nlohmann::json::array();
  for (const AffineLayer& h : m.head)
    j["head"].push_back({{"weight", to_std(h.weight.data(), h.weight.size())},
                         {"bias", to_std(h.bias.data(), h.bias.size())}});
  j["train_mode"] = m.train_mode;
  j["targets_standardized"] = m.targets_standardized;
  j["target_mean"] = m.target_mean;
  j["target_std"] = m.target_std;
  return j.dump(2);
}

Cnn1dModel cnn_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_error, std::string("bad checkpoint JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("kind", "") != "cnn1d")
    fail(Errc::format_error, "not a cnn1d checkpoint");
  Cnn1dSpec spec;
  const nlohmann::json& s = j.at("spec");
  spec.input_length = s.at("input_length").get<int>();
  spec.input_channels = s.at("input_channels").get<int>();
  spec.conv_blocks = s.at("conv_blocks").get<int>();
  spec.conv_channels = s.at("conv_channels").get<int>();
  spec.kernel_size = s.at("kernel_size").get<int>();
  spec.head_dims = s.at("head_dims").get<std::vector<int>>();
  spec.output_dim = s.at("output_dim").get<int>();

  Cnn1dModel m = make_shell(spec);
  if (j.at("blocks").size() != m.blocks.size() ||
      j.at("head").size() != m.head.size())
    fail(Errc::format_error, "checkpoint layer count mismatch");
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const nlohmann::json& jb = j["blocks"][i];
    ConvBlock& b = m.blocks[i];
    from_std(jb.at("weight"), b.weight.data(), b.weight.size(), "weight");
    from_std(jb.at("bias"), b.bias.data(), b.bias.size(), "bias");
    from_std(jb.at("bn_gamma"), b.bn.gamma.data(), b.bn.gamma.size(),
             "bn_gamma");
    from_std(jb.at("bn_beta"), b.bn.beta.data(), b.bn.beta.size(), "bn_beta");
    from_std(jb.at("bn_running_mean"), b.bn.running_mean.data(),
             b.bn.running_mean.size(), "bn_running_mean");
    from_std(jb.at("bn_running_var"), b.bn.running_var.data(),
             b.bn.running_var.size(), "bn_running_var");
    b.bn.initialized = jb.at("bn_initialized").get<bool>();
  }
  for (std::size_t i = 0; i < m.head.size(); ++i) {
    const nlohmann::json& jh = j["head"][i];
    AffineLayer& h = m.head[i];
    from_std(jh.at("weight"), h.weight.data(), h.weight.size(), "weight");
    from_std(jh.at("bias"), h.bias.data(), h.bias.size(), "bias");
  }
  m.train_mode = j.at("train_mode").get<bool>();
  m.targets_standardized = j.at("targets_standardized").get<bool>();
  m.target_mean = j.at("target_mean").get<double>();
  m.target_std = j.at("target_std").get<double>();
  return m;
}

bool exactly_equal(const Cnn1dModel& a, const Cnn1dModel& b) {
  if (!(a.spec == b.spec)) return false;
  if (a.train_mode != b.train_mode ||
      a.targets_standardized != b.targets_standardized)
    return false;
  if (std::memcmp(&a.target_mean, &b.target_mean, sizeof(double)) != 0 ||
      std::memcmp(&a.target_std, &b.target_std, sizeof(double)) != 0)
    return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i)
    if (a.blocks[i].bn.initialized != b.blocks[i].bn.initialized) return false;
  Cnn1dModel& ma = const_cast<Cnn1dModel&>(a);
  Cnn1dModel& mb = const_cast<Cnn1dModel&>(b);
  const std::vector<ParamView> va = state_views(ma);
  const std::vector<ParamView> vb = state_views(mb);
  if (va.size() != vb.size()) return false;
  for (std::size_t k = 0; k < va.size(); ++k) {
    if (va[k].size != vb[k].size) return false;
    if (std::memcmp(va[k].data, vb[k].data,
                    static_cast<std::size_t>(va[k].size) * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace tractshape
