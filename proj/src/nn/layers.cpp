// Copyright 2026 The ltbackdoor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ltb/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ltb/errors.hpp"

namespace ltb::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Eigen's vectorised kernels peel an unaligned head, so the summation order
// (and the last bits of the result) depends on where the operands live.
// Products therefore run on Eigen-owned copies, which are always aligned.
RowMat load(const double* p, int rows, int cols) { return Eigen::Map<const RowMat>(p, rows, cols); }

void store(const RowMat& m, double* dst) { std::copy(m.data(), m.data() + m.size(), dst); }

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng,
               bool bias, std::string name)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      has_bias_(bias),
      weight_(name + ".weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_(name + ".bias", bias ? static_cast<std::size_t>(out_channels) : 0) {
  if (in_ <= 0 || out_ <= 0 || k_ <= 0 || stride_ <= 0 || pad_ < 0) {
    throw DomainError("Conv2d: invalid geometry");
  }
  const double std = std::sqrt(2.0 / (in_ * k_ * k_));
  for (double& v : weight_.value) v = std * rng.normal();
}

void Conv2d::im2col(const double* img, int H, int W, double* col) const {
  // Row r = (c, ky, kx), column p = output pixel; row-major [ckk][P].
  const int P = out_h_ * out_w_;
  for (int c = 0; c < in_; ++c) {
    const double* plane = img + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        double* row = col + (static_cast<std::size_t>(c) * k_ * k_ + ky * k_ + kx) * P;
        for (int oy = 0; oy < out_h_; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          double* dst = row + oy * out_w_;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + out_w_, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < out_w_; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void Conv2d::col2im(const double* col, int H, int W, double* img) const {
  const int P = out_h_ * out_w_;
  for (int c = 0; c < in_; ++c) {
    double* plane = img + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const double* row = col + (static_cast<std::size_t>(c) * k_ * k_ + ky * k_ + kx) * P;
        for (int oy = 0; oy < out_h_; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= H) continue;
          const double* src = row + oy * out_w_;
          double* dst = plane + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < out_w_; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x, Mode /*mode*/) {
  if (x.c() != in_) {
    throw DomainError("Conv2d: expected " + std::to_string(in_) + " input channels, got " +
                      std::to_string(x.c()));
  }
  input_ = x;
  const int N = x.n(), H = x.h(), W = x.w();
  out_h_ = (H + 2 * pad_ - k_) / stride_ + 1;
  out_w_ = (W + 2 * pad_ - k_) / stride_ + 1;
  if (out_h_ <= 0 || out_w_ <= 0) throw DomainError("Conv2d: input smaller than kernel");
  const int P = out_h_ * out_w_;
  const int ckk = in_ * k_ * k_;
  Tensor y(Shape{N, out_, out_h_, out_w_});
  const RowMat wm = load(weight_.value.data(), out_, ckk);
  RowMat col(ckk, P), ym(out_, P);
  const std::size_t in_size = x.shape().sample_size();
  const std::size_t out_size = y.shape().sample_size();
  for (int n = 0; n < N; ++n) {
    im2col(x.data() + n * in_size, H, W, col.data());
    ym.noalias() = wm * col;
    double* dst = y.data() + n * out_size;
    store(ym, dst);
    if (has_bias_) {
      for (int o = 0; o < out_; ++o) {
        const double b = bias_.value[static_cast<std::size_t>(o)];
        for (int p = 0; p < P; ++p) dst[static_cast<std::size_t>(o) * P + p] += b;
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Shape in_shape = input_.shape();
  const int N = in_shape.n, H = in_shape.h, W = in_shape.w;
  const int P = out_h_ * out_w_;
  const int ckk = in_ * k_ * k_;
  if (grad_out.shape() != Shape{N, out_, out_h_, out_w_}) {
    throw DomainError("Conv2d::backward: gradient shape mismatch");
  }
  const RowMat wm = load(weight_.value.data(), out_, ckk);
  RowMat wg = RowMat::Zero(out_, ckk), col(ckk, P), dcol(ckk, P);
  Tensor dx(in_shape);
  const std::size_t in_size = in_shape.sample_size();
  const std::size_t out_size = grad_out.shape().sample_size();
  for (int n = 0; n < N; ++n) {
    const double* g = grad_out.data() + n * out_size;
    const RowMat dy = load(g, out_, P);
    im2col(input_.data() + n * in_size, H, W, col.data());
    wg.noalias() += dy * col.transpose();
    if (has_bias_) {
      for (int o = 0; o < out_; ++o) {
        double sum = 0.0;
        for (int p = 0; p < P; ++p) sum += g[static_cast<std::size_t>(o) * P + p];
        bias_.grad[static_cast<std::size_t>(o)] += sum;
      }
    }
    dcol.noalias() = wm.transpose() * dy;
    col2im(dcol.data(), H, W, dx.data() + n * in_size);
  }
  for (std::size_t i = 0; i < weight_.grad.size(); ++i) weight_.grad[i] += wg.data()[i];
  return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, std::string name)
    : channels_(channels),
      gamma_(name + ".gamma", static_cast<std::size_t>(channels)),
      beta_(name + ".beta", static_cast<std::size_t>(channels)),
      running_mean_(static_cast<std::size_t>(channels), 0.0),
      running_var_(static_cast<std::size_t>(channels), 1.0) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  if (x.c() != channels_) throw DomainError("BatchNorm2d: channel mismatch");
  last_mode_ = mode;
  const int N = x.n(), C = channels_;
  const std::size_t hw = static_cast<std::size_t>(x.h()) * x.w();
  const double m = static_cast<double>(N) * static_cast<double>(hw);
  xhat_ = Tensor(x.shape());
  inv_std_.assign(static_cast<std::size_t>(C), 0.0);
  Tensor y(x.shape());

  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      if (m < 2) throw DomainError("BatchNorm2d: training needs more than one value per channel");
      double s = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      mean = s / m;
      double sq = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / m;
      running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * var * m / (m - 1.0);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double xh = (x[off + i] - mean) * inv;
        xhat_[off + i] = xh;
        y[off + i] = gamma_.value[c] * xh + beta_.value[c];
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  const Shape s = xhat_.shape();
  if (grad_out.shape() != s) throw DomainError("BatchNorm2d::backward: gradient shape mismatch");
  const int N = s.n, C = channels_;
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
  const double m = static_cast<double>(N) * static_cast<double>(hw);
  Tensor dx(s);
  for (int c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xh += grad_out[off + i] * xhat_[off + i];
      }
    }
    gamma_.grad[c] += sum_dy_xh;
    beta_.grad[c] += sum_dy;
    const double g = gamma_.value[c] * inv_std_[c];
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        if (last_mode_ == Mode::kTrain) {
          dx[off + i] = g / m * (m * grad_out[off + i] - sum_dy - xhat_[off + i] * sum_dy_xh);
        } else {
          dx[off + i] = g * grad_out[off + i];
        }
      }
    }
  }
  return dx;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<std::vector<double>*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ---------------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x, Mode /*mode*/) {
  Tensor y = x;
  mask_ = Tensor(x.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    if (y[i] > 0.0) {
      mask_[i] = 1.0;
    } else {
      y[i] = 0.0;
    }
  }
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] *= mask_[i];
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, Mode /*mode*/) {
  y_ = x;
  for (double& v : y_.values()) v = 1.0 / (1.0 + std::exp(-v));
  return y_;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] *= y_[i] * (1.0 - y_[i]);
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, Rng& rng, std::string name)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", static_cast<std::size_t>(in_features) * out_features),
      bias_(name + ".bias", static_cast<std::size_t>(out_features)) {
  if (in_ <= 0 || out_ <= 0) throw DomainError("Linear: invalid size");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  for (double& v : weight_.value) v = rng.uniform(-bound, bound);
  for (double& v : bias_.value) v = rng.uniform(-bound, bound);
}

Tensor Linear::forward(const Tensor& x, Mode /*mode*/) {
  if (static_cast<int>(x.shape().sample_size()) != in_) {
    throw DomainError("Linear: expected " + std::to_string(in_) + " features, got " +
                      std::to_string(x.shape().sample_size()));
  }
  x_ = x;
  const int N = x.n();
  const RowMat xm = load(x.data(), N, in_);
  const RowMat wm = load(weight_.value.data(), out_, in_);
  Tensor y(Shape{N, out_, 1, 1});
  const RowMat ym = xm * wm.transpose();
  store(ym, y.data());
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < out_; ++o) y[static_cast<std::size_t>(n) * out_ + o] += bias_.value[o];
  }
  return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const int N = x_.n();
  if (grad_out.numel() != static_cast<std::size_t>(N) * out_) {
    throw DomainError("Linear::backward: gradient shape mismatch");
  }
  const RowMat gm = load(grad_out.data(), N, out_);
  const RowMat xm = load(x_.data(), N, in_);
  const RowMat wg = gm.transpose() * xm;
  for (std::size_t i = 0; i < weight_.grad.size(); ++i) weight_.grad[i] += wg.data()[i];
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < out_; ++o) bias_.grad[o] += gm(n, o);
  }
  const RowMat wm = load(weight_.value.data(), out_, in_);
  Tensor dx(x_.shape());
  const RowMat dm = gm * wm;
  store(dm, dx.data());
  return dx;
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- pooling / resampling

Tensor GlobalAvgPool::forward(const Tensor& x, Mode /*mode*/) {
  in_shape_ = x.shape();
  const std::size_t hw = static_cast<std::size_t>(x.h()) * x.w();
  Tensor y(Shape{x.n(), x.c(), 1, 1});
  for (std::size_t i = 0; i < y.numel(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += x[i * hw + j];
    y[i] = s / static_cast<double>(hw);
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  const std::size_t hw = static_cast<std::size_t>(in_shape_.h) * in_shape_.w;
  Tensor dx(in_shape_);
  for (std::size_t i = 0; i < grad_out.numel(); ++i) {
    const double g = grad_out[i] / static_cast<double>(hw);
    for (std::size_t j = 0; j < hw; ++j) dx[i * hw + j] = g;
  }
  return dx;
}

Tensor Upsample2x::forward(const Tensor& x, Mode /*mode*/) {
  in_shape_ = x.shape();
  Tensor y(Shape{x.n(), x.c(), x.h() * 2, x.w() * 2});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int yy = 0; yy < y.h(); ++yy) {
        for (int xx = 0; xx < y.w(); ++xx) y.at(n, c, yy, xx) = x.at(n, c, yy / 2, xx / 2);
      }
    }
  }
  return y;
}

Tensor Upsample2x::backward(const Tensor& grad_out) {
  Tensor dx(in_shape_);
  for (int n = 0; n < grad_out.n(); ++n) {
    for (int c = 0; c < grad_out.c(); ++c) {
      for (int yy = 0; yy < grad_out.h(); ++yy) {
        for (int xx = 0; xx < grad_out.w(); ++xx) {
          dx.at(n, c, yy / 2, xx / 2) += grad_out.at(n, c, yy, xx);
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- containers

Tensor Sequential::forward(const Tensor& x, Mode mode) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect_params(std::vector<Param*>& out) {
  for (auto& layer : layers_) layer->collect_params(out);
}

void Sequential::collect_buffers(std::vector<std::vector<double>*>& out) {
  for (auto& layer : layers_) layer->collect_buffers(out);
}

ResidualBlock::ResidualBlock(int in_channels, int out_channels, int stride, Rng& rng,
                             const std::string& name) {
  main_.add<Conv2d>(in_channels, out_channels, 3, stride, 1, rng, false, name + ".conv1");
  main_.add<BatchNorm2d>(out_channels, name + ".bn1");
  main_.add<ReLU>();
  main_.add<Conv2d>(out_channels, out_channels, 3, 1, 1, rng, false, name + ".conv2");
  main_.add<BatchNorm2d>(out_channels, name + ".bn2");
  if (stride != 1 || in_channels != out_channels) {
    shortcut_.add<Conv2d>(in_channels, out_channels, 1, stride, 0, rng, false, name + ".proj");
    shortcut_.add<BatchNorm2d>(out_channels, name + ".proj_bn");
  }
}

Tensor ResidualBlock::forward(const Tensor& x, Mode mode) {
  Tensor a = main_.forward(x, mode);
  if (shortcut_.size() == 0) {
    a += x;
  } else {
    a += shortcut_.forward(x, mode);
  }
  return out_relu_.forward(a, mode);
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
  const Tensor g = out_relu_.backward(grad_out);
  Tensor dx = main_.backward(g);
  if (shortcut_.size() == 0) {
    dx += g;
  } else {
    dx += shortcut_.backward(g);
  }
  return dx;
}

void ResidualBlock::collect_params(std::vector<Param*>& out) {
  main_.collect_params(out);
  shortcut_.collect_params(out);
}

void ResidualBlock::collect_buffers(std::vector<std::vector<double>*>& out) {
  main_.collect_buffers(out);
  shortcut_.collect_buffers(out);
}

std::size_t parameter_count(const std::vector<Param*>& params) {
  std::size_t n = 0;
  for (const Param* p : params) n += p->value.size();
  return n;
}

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace ltb::nn
