#include "streamforge/cnn/cnn.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace streamforge::cnn {

namespace {

constexpr double kBnEpsilon = 1e-5;
constexpr double kBnMomentum = 0.1;

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// out[n,o,y,x] = b[o] + sum_{i,dy,dx} w[o,i,dy,dx] * in[n,i,y+dy-1,x+dx-1]
void conv3x3_forward(const double* in, int n, int ic, int oc, int h, int w,
                     const double* weight, const double* bias, double* out) {
  const int plane = h * w;
  for (int s = 0; s < n; ++s) {
    const double* in_s = in + static_cast<std::size_t>(s) * ic * plane;
    double* out_s = out + static_cast<std::size_t>(s) * oc * plane;
    for (int o = 0; o < oc; ++o) {
      double* out_map = out_s + static_cast<std::size_t>(o) * plane;
      for (int p = 0; p < plane; ++p) out_map[p] = bias[o];
      const double* w_o = weight + static_cast<std::size_t>(o) * ic * 9;
      for (int i = 0; i < ic; ++i) {
        const double* in_map = in_s + static_cast<std::size_t>(i) * plane;
        const double* w_oi = w_o + static_cast<std::size_t>(i) * 9;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int dy = 0; dy < 3; ++dy) {
              const int sy = y + dy - 1;
              if (sy < 0 || sy >= h) continue;
              for (int dx = 0; dx < 3; ++dx) {
                const int sx = x + dx - 1;
                if (sx < 0 || sx >= w) continue;
                sum += w_oi[dy * 3 + dx] * in_map[sy * w + sx];
              }
            }
            out_map[y * w + x] += sum;
          }
        }
      }
    }
  }
}

/// Accumulates gradients for the forward above.  `din` may be null for the
/// first layer.
void conv3x3_backward(const double* in, const double* dout, int n, int ic,
                      int oc, int h, int w, const double* weight,
                      double* dweight, double* dbias, double* din) {
  const int plane = h * w;
  for (int s = 0; s < n; ++s) {
    const double* in_s = in + static_cast<std::size_t>(s) * ic * plane;
    const double* dout_s = dout + static_cast<std::size_t>(s) * oc * plane;
    double* din_s = din ? din + static_cast<std::size_t>(s) * ic * plane : nullptr;
    for (int o = 0; o < oc; ++o) {
      const double* dout_map = dout_s + static_cast<std::size_t>(o) * plane;
      for (int p = 0; p < plane; ++p) dbias[o] += dout_map[p];
      const double* w_o = weight + static_cast<std::size_t>(o) * ic * 9;
      double* dw_o = dweight + static_cast<std::size_t>(o) * ic * 9;
      for (int i = 0; i < ic; ++i) {
        const double* in_map = in_s + static_cast<std::size_t>(i) * plane;
        const double* w_oi = w_o + static_cast<std::size_t>(i) * 9;
        double* dw_oi = dw_o + static_cast<std::size_t>(i) * 9;
        double* din_map = din_s ? din_s + static_cast<std::size_t>(i) * plane : nullptr;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const double g = dout_map[y * w + x];
            if (g == 0.0) continue;
            for (int dy = 0; dy < 3; ++dy) {
              const int sy = y + dy - 1;
              if (sy < 0 || sy >= h) continue;
              for (int dx = 0; dx < 3; ++dx) {
                const int sx = x + dx - 1;
                if (sx < 0 || sx >= w) continue;
                dw_oi[dy * 3 + dx] += g * in_map[sy * w + sx];
                if (din_map) din_map[sy * w + sx] += g * w_oi[dy * 3 + dx];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

struct CnnModel::Cache {
  int n = 0;
  std::vector<double> x0;
  std::array<std::vector<double>, 3> conv_out;  // pre-normalization
  std::array<std::vector<double>, 3> norm;      // normalized (pre scale/shift)
  std::array<std::vector<double>, 3> act;       // post-ReLU
  std::array<std::vector<double>, 3> mean;
  std::array<std::vector<double>, 3> var;
  std::vector<double> gap;
  std::vector<double> logits;
};

CnnModel::CnnModel(int in_channels, int height, int width,
                   const CnnConfig& config, unsigned seed)
    : in_c_(in_channels), h_(height), w_(width), channels_(config.channels) {
  if (in_c_ < 1 || h_ < 1 || w_ < 1) {
    throw CnnError("model input dimensions must be positive");
  }
  if (config.kernel != 3) {
    throw CnnError("the convolution kernel is fixed at 3x3");
  }
  for (int c : channels_) {
    if (c < 1) throw CnnError("layer channel counts must be positive");
  }

  std::size_t offset = 0;
  int prev = in_c_;
  for (int l = 0; l < 3; ++l) {
    const int out = channels_[static_cast<std::size_t>(l)];
    Block& b = blocks_[static_cast<std::size_t>(l)];
    b.in_c = prev;
    b.out_c = out;
    b.conv_w = offset;
    offset += static_cast<std::size_t>(out) * prev * 9;
    b.conv_b = offset;
    offset += static_cast<std::size_t>(out);
    b.bn_gamma = offset;
    offset += static_cast<std::size_t>(out);
    b.bn_beta = offset;
    offset += static_cast<std::size_t>(out);
    prev = out;
  }
  fc_w_ = offset;
  offset += static_cast<std::size_t>(prev);
  fc_b_ = offset;
  offset += 1;
  params_.assign(offset, 0.0);

  std::size_t run_offset = 0;
  for (int l = 0; l < 3; ++l) {
    run_mean_[static_cast<std::size_t>(l)] = run_offset;
    run_offset += static_cast<std::size_t>(channels_[static_cast<std::size_t>(l)]);
    run_var_[static_cast<std::size_t>(l)] = run_offset;
    run_offset += static_cast<std::size_t>(channels_[static_cast<std::size_t>(l)]);
  }
  running_.assign(run_offset, 0.0);
  for (int l = 0; l < 3; ++l) {
    double* rv = running_.data() + run_var_[static_cast<std::size_t>(l)];
    for (int c = 0; c < channels_[static_cast<std::size_t>(l)]; ++c) rv[c] = 1.0;
  }

  std::mt19937_64 rng(seed);
  for (int l = 0; l < 3; ++l) {
    const Block& b = blocks_[static_cast<std::size_t>(l)];
    const double stddev = std::sqrt(2.0 / (static_cast<double>(b.in_c) * 9.0));
    std::normal_distribution<double> dist(0.0, stddev);
    const std::size_t count = static_cast<std::size_t>(b.out_c) * b.in_c * 9;
    for (std::size_t i = 0; i < count; ++i) params_[b.conv_w + i] = dist(rng);
    for (int c = 0; c < b.out_c; ++c) {
      params_[b.conv_b + static_cast<std::size_t>(c)] = 0.0;
      params_[b.bn_gamma + static_cast<std::size_t>(c)] = 1.0;
      params_[b.bn_beta + static_cast<std::size_t>(c)] = 0.0;
    }
  }
  {
    const int c3 = channels_[2];
    std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / c3));
    for (int c = 0; c < c3; ++c) params_[fc_w_ + static_cast<std::size_t>(c)] = dist(rng);
    params_[fc_b_] = 0.0;
  }
}

double CnnModel::forward(const std::vector<const encode::SolutionTensor*>& xs,
                         const std::vector<int>& ys, bool training,
                         Cache* cache) const {
  const int n = static_cast<int>(xs.size());
  if (n == 0) throw CnnError("empty batch");
  if (ys.size() != xs.size()) throw CnnError("batch labels do not match inputs");
  const int plane = h_ * w_;
  for (const encode::SolutionTensor* t : xs) {
    if (t->channels != in_c_ || t->height != h_ || t->width != w_) {
      std::ostringstream msg;
      msg << "input tensor is " << t->channels << "x" << t->height << "x"
          << t->width << " but the model expects " << in_c_ << "x" << h_ << "x"
          << w_;
      throw CnnError(msg.str());
    }
  }

  Cache local;
  Cache& c = cache ? *cache : local;
  c.n = n;
  c.x0.assign(static_cast<std::size_t>(n) * in_c_ * plane, 0.0);
  for (int s = 0; s < n; ++s) {
    const std::vector<double>& d = xs[static_cast<std::size_t>(s)]->data;
    std::copy(d.begin(), d.end(),
              c.x0.begin() + static_cast<std::size_t>(s) * in_c_ * plane);
  }

  const double* prev = c.x0.data();
  int prev_c = in_c_;
  for (int l = 0; l < 3; ++l) {
    const Block& b = blocks_[static_cast<std::size_t>(l)];
    const std::size_t count = static_cast<std::size_t>(n) * b.out_c * plane;
    auto& conv_out = c.conv_out[static_cast<std::size_t>(l)];
    auto& norm = c.norm[static_cast<std::size_t>(l)];
    auto& act = c.act[static_cast<std::size_t>(l)];
    auto& mean = c.mean[static_cast<std::size_t>(l)];
    auto& var = c.var[static_cast<std::size_t>(l)];
    conv_out.assign(count, 0.0);
    conv3x3_forward(prev, n, prev_c, b.out_c, h_, w_,
                    params_.data() + b.conv_w, params_.data() + b.conv_b,
                    conv_out.data());

    mean.assign(static_cast<std::size_t>(b.out_c), 0.0);
    var.assign(static_cast<std::size_t>(b.out_c), 0.0);
    if (training) {
      const double m = static_cast<double>(n) * plane;
      for (int ch = 0; ch < b.out_c; ++ch) {
        double sum = 0.0;
        for (int s = 0; s < n; ++s) {
          const double* map = conv_out.data() +
                              (static_cast<std::size_t>(s) * b.out_c + ch) * plane;
          for (int p = 0; p < plane; ++p) sum += map[p];
        }
        const double mu = sum / m;
        double sq = 0.0;
        for (int s = 0; s < n; ++s) {
          const double* map = conv_out.data() +
                              (static_cast<std::size_t>(s) * b.out_c + ch) * plane;
          for (int p = 0; p < plane; ++p) {
            const double d = map[p] - mu;
            sq += d * d;
          }
        }
        mean[static_cast<std::size_t>(ch)] = mu;
        var[static_cast<std::size_t>(ch)] = sq / m;
      }
    } else {
      const double* rm = running_.data() + run_mean_[static_cast<std::size_t>(l)];
      const double* rv = running_.data() + run_var_[static_cast<std::size_t>(l)];
      for (int ch = 0; ch < b.out_c; ++ch) {
        mean[static_cast<std::size_t>(ch)] = rm[ch];
        var[static_cast<std::size_t>(ch)] = rv[ch];
      }
    }

    norm.assign(count, 0.0);
    act.assign(count, 0.0);
    const double* gamma = params_.data() + b.bn_gamma;
    const double* beta = params_.data() + b.bn_beta;
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < b.out_c; ++ch) {
        const std::size_t base = (static_cast<std::size_t>(s) * b.out_c + ch) * plane;
        const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(ch)] + kBnEpsilon);
        const double mu = mean[static_cast<std::size_t>(ch)];
        for (int p = 0; p < plane; ++p) {
          const double xn = (conv_out[base + p] - mu) * inv;
          norm[base + p] = xn;
          const double y = gamma[ch] * xn + beta[ch];
          act[base + p] = y > 0.0 ? y : 0.0;
        }
      }
    }
    prev = act.data();
    prev_c = b.out_c;
  }

  const int c3 = channels_[2];
  c.gap.assign(static_cast<std::size_t>(n) * c3, 0.0);
  const auto& a3 = c.act[2];
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c3; ++ch) {
      const double* map = a3.data() + (static_cast<std::size_t>(s) * c3 + ch) * plane;
      double sum = 0.0;
      for (int p = 0; p < plane; ++p) sum += map[p];
      c.gap[static_cast<std::size_t>(s) * c3 + ch] = sum / plane;
    }
  }

  c.logits.assign(static_cast<std::size_t>(n), 0.0);
  const double* fw = params_.data() + fc_w_;
  double loss = 0.0;
  for (int s = 0; s < n; ++s) {
    double z = params_[fc_b_];
    for (int ch = 0; ch < c3; ++ch) {
      z += fw[ch] * c.gap[static_cast<std::size_t>(s) * c3 + ch];
    }
    c.logits[static_cast<std::size_t>(s)] = z;
    loss += softplus(-static_cast<double>(ys[static_cast<std::size_t>(s)]) * z);
  }
  return loss / n;
}

double CnnModel::training_loss(
    const std::vector<const encode::SolutionTensor*>& xs,
    const std::vector<int>& ys) const {
  return forward(xs, ys, /*training=*/true, nullptr);
}

double CnnModel::training_loss_and_grad(
    const std::vector<const encode::SolutionTensor*>& xs,
    const std::vector<int>& ys, std::vector<double>& grad) const {
  Cache c;
  const double loss = forward(xs, ys, /*training=*/true, &c);
  backward(c, ys, grad);
  return loss;
}

void CnnModel::backward(const Cache& c, const std::vector<int>& ys,
                        std::vector<double>& grad) const {
  grad.assign(params_.size(), 0.0);

  const int n = c.n;
  const int plane = h_ * w_;
  const int c3 = channels_[2];

  // Loss and fully connected head.
  std::vector<double> dlogit(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s) {
    const double y = static_cast<double>(ys[static_cast<std::size_t>(s)]);
    dlogit[static_cast<std::size_t>(s)] =
        -y * sigmoid(-y * c.logits[static_cast<std::size_t>(s)]) / n;
  }
  std::vector<double> dgap(static_cast<std::size_t>(n) * c3, 0.0);
  const double* fw = params_.data() + fc_w_;
  for (int s = 0; s < n; ++s) {
    const double g = dlogit[static_cast<std::size_t>(s)];
    grad[fc_b_] += g;
    for (int ch = 0; ch < c3; ++ch) {
      grad[fc_w_ + static_cast<std::size_t>(ch)] +=
          g * c.gap[static_cast<std::size_t>(s) * c3 + ch];
      dgap[static_cast<std::size_t>(s) * c3 + ch] = g * fw[ch];
    }
  }

  // Global average pooling.
  std::vector<double> dact(static_cast<std::size_t>(n) * c3 * plane, 0.0);
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c3; ++ch) {
      const double g = dgap[static_cast<std::size_t>(s) * c3 + ch] / plane;
      double* map = dact.data() + (static_cast<std::size_t>(s) * c3 + ch) * plane;
      for (int p = 0; p < plane; ++p) map[p] = g;
    }
  }

  for (int l = 2; l >= 0; --l) {
    const Block& b = blocks_[static_cast<std::size_t>(l)];
    const auto& act = c.act[static_cast<std::size_t>(l)];
    const auto& norm = c.norm[static_cast<std::size_t>(l)];
    const auto& var = c.var[static_cast<std::size_t>(l)];
    const double* gamma = params_.data() + b.bn_gamma;
    const double m = static_cast<double>(n) * plane;

    // ReLU.
    std::vector<double> dbn(dact.size(), 0.0);
    for (std::size_t i = 0; i < dact.size(); ++i) {
      dbn[i] = act[i] > 0.0 ? dact[i] : 0.0;
    }

    // Batch normalization (biased batch variance).
    std::vector<double> dconv(dact.size(), 0.0);
    for (int ch = 0; ch < b.out_c; ++ch) {
      double sum_dy = 0.0;
      double sum_dy_xn = 0.0;
      for (int s = 0; s < n; ++s) {
        const std::size_t base = (static_cast<std::size_t>(s) * b.out_c + ch) * plane;
        for (int p = 0; p < plane; ++p) {
          sum_dy += dbn[base + p];
          sum_dy_xn += dbn[base + p] * norm[base + p];
        }
      }
      grad[b.bn_beta + static_cast<std::size_t>(ch)] += sum_dy;
      grad[b.bn_gamma + static_cast<std::size_t>(ch)] += sum_dy_xn;
      const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(ch)] + kBnEpsilon);
      const double scale = gamma[ch] * inv;
      const double mean_dy = sum_dy / m;
      const double mean_dy_xn = sum_dy_xn / m;
      for (int s = 0; s < n; ++s) {
        const std::size_t base = (static_cast<std::size_t>(s) * b.out_c + ch) * plane;
        for (int p = 0; p < plane; ++p) {
          dconv[base + p] =
              scale * (dbn[base + p] - mean_dy - norm[base + p] * mean_dy_xn);
        }
      }
    }

    // Convolution.
    const double* input =
        l == 0 ? c.x0.data() : c.act[static_cast<std::size_t>(l - 1)].data();
    std::vector<double> dinput;
    double* dinput_ptr = nullptr;
    if (l > 0) {
      dinput.assign(static_cast<std::size_t>(n) * b.in_c * plane, 0.0);
      dinput_ptr = dinput.data();
    }
    conv3x3_backward(input, dconv.data(), n, b.in_c, b.out_c, h_, w_,
                     params_.data() + b.conv_w, grad.data() + b.conv_w,
                     grad.data() + b.conv_b, dinput_ptr);
    dact = std::move(dinput);
  }
}

double CnnModel::train_step(const std::vector<const encode::SolutionTensor*>& xs,
                            const std::vector<int>& ys,
                            std::vector<double>& grad) {
  Cache c;
  const double loss = forward(xs, ys, /*training=*/true, &c);
  for (int l = 0; l < 3; ++l) {
    const Block& b = blocks_[static_cast<std::size_t>(l)];
    double* rm = running_.data() + run_mean_[static_cast<std::size_t>(l)];
    double* rv = running_.data() + run_var_[static_cast<std::size_t>(l)];
    const auto& mean = c.mean[static_cast<std::size_t>(l)];
    const auto& var = c.var[static_cast<std::size_t>(l)];
    for (int ch = 0; ch < b.out_c; ++ch) {
      rm[ch] = (1.0 - kBnMomentum) * rm[ch] +
               kBnMomentum * mean[static_cast<std::size_t>(ch)];
      rv[ch] = (1.0 - kBnMomentum) * rv[ch] +
               kBnMomentum * var[static_cast<std::size_t>(ch)];
    }
  }
  backward(c, ys, grad);
  return loss;
}

double CnnModel::logit(const encode::SolutionTensor& x) const {
  std::vector<const encode::SolutionTensor*> xs{&x};
  std::vector<int> ys{1};
  Cache c;
  forward(xs, ys, /*training=*/false, &c);
  return c.logits[0];
}

std::vector<double> CnnModel::activation_map(const encode::SolutionTensor& x,
                                             int layer, int filter) const {
  if (layer < 0 || layer > 2) throw CnnError("layer index out of range");
  if (filter < 0 || filter >= channels_[static_cast<std::size_t>(layer)]) {
    throw CnnError("filter index out of range");
  }
  std::vector<const encode::SolutionTensor*> xs{&x};
  std::vector<int> ys{1};
  Cache c;
  forward(xs, ys, /*training=*/false, &c);
  const int plane = h_ * w_;
  const auto& act = c.act[static_cast<std::size_t>(layer)];
  const std::size_t base = static_cast<std::size_t>(filter) * plane;
  return std::vector<double>(act.begin() + static_cast<std::ptrdiff_t>(base),
                             act.begin() + static_cast<std::ptrdiff_t>(base + plane));
}

std::array<std::vector<double>, 3> CnnModel::activations(
    const encode::SolutionTensor& x) const {
  std::vector<const encode::SolutionTensor*> xs{&x};
  std::vector<int> ys{1};
  Cache c;
  forward(xs, ys, /*training=*/false, &c);
  return {std::move(c.act[0]), std::move(c.act[1]), std::move(c.act[2])};
}

double CnnModel::mean_activation(const encode::SolutionTensor& x, int layer,
                                 int filter) const {
  const std::vector<double> map = activation_map(x, layer, filter);
  double sum = 0.0;
  for (double v : map) sum += v;
  return sum / static_cast<double>(map.size());
}

void save_model(const CnnModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CnnError("cannot open model file for writing: " + path);
  out << "streamforge-cnn 1\n";
  out << "input " << model.in_c_ << " " << model.h_ << " " << model.w_ << "\n";
  out << "channels " << model.channels_[0] << " " << model.channels_[1] << " "
      << model.channels_[2] << "\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "params " << model.params_.size() << "\n";
  for (std::size_t i = 0; i < model.params_.size(); ++i) {
    out << model.params_[i] << (i + 1 == model.params_.size() ? "\n" : " ");
  }
  out << "running " << model.running_.size() << "\n";
  for (std::size_t i = 0; i < model.running_.size(); ++i) {
    out << model.running_[i] << (i + 1 == model.running_.size() ? "\n" : " ");
  }
  if (!out) throw CnnError("failed to write model file: " + path);
}

CnnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CnnError("cannot open model file: " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "streamforge-cnn") {
    throw CnnError("not a model file: " + path);
  }
  if (version != 1) {
    throw CnnError("unsupported model file version " + std::to_string(version));
  }
  std::string key;
  int in_c = 0, h = 0, w = 0;
  if (!(in >> key >> in_c >> h >> w) || key != "input") {
    throw CnnError("malformed model file: missing input dimensions");
  }
  CnnConfig config;
  if (!(in >> key >> config.channels[0] >> config.channels[1] >>
        config.channels[2]) ||
      key != "channels") {
    throw CnnError("malformed model file: missing channel counts");
  }
  CnnModel model(in_c, h, w, config, /*seed=*/0);
  std::size_t count = 0;
  if (!(in >> key >> count) || key != "params" || count != model.params_.size()) {
    throw CnnError("malformed model file: parameter count mismatch");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> model.params_[i])) {
      throw CnnError("malformed model file: truncated parameters");
    }
  }
  if (!(in >> key >> count) || key != "running" ||
      count != model.running_.size()) {
    throw CnnError("malformed model file: running statistics mismatch");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> model.running_[i])) {
      throw CnnError("malformed model file: truncated running statistics");
    }
  }
  return model;
}

}  // namespace streamforge::cnn
