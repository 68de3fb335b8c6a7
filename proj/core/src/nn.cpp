#include "eiqa/nn.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "eiqa/errors.hpp"

namespace eiqa::nn {

namespace {

void fill_normal(double* data, Eigen::Index n, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < n; ++i) data[i] = normal(rng);
}

void fill_uniform(double* data, Eigen::Index n, double bound, Rng& rng) {
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (Eigen::Index i = 0; i < n; ++i) data[i] = uniform(rng);
}

}  // namespace

Dense make_dense(int in, int out, double init_std, Rng& rng) {
  Dense d{Matrix(out, in), Vector(out)};
  fill_normal(d.weight.data(), d.weight.size(), init_std, rng);
  fill_uniform(d.bias.data(), d.bias.size(), 1.0 / std::sqrt(static_cast<double>(in)), rng);
  return d;
}

Matrix dense_forward(const Dense& layer, const Matrix& x) {
  if (x.rows() != layer.weight.cols()) throw InvalidArgument("dense layer input width mismatch");
  Matrix y = layer.weight * x;
  y.colwise() += layer.bias;
  return y;
}

Matrix dense_backward(const Dense& layer, Dense& grad, const Matrix& x, const Matrix& dy) {
  grad.weight.noalias() += dy * x.transpose();
  grad.bias += dy.rowwise().sum();
  return layer.weight.transpose() * dy;
}

Conv2d make_conv(int in_channels, int out_channels, int stride, Rng& rng) {
  Conv2d c{Matrix(out_channels, 9 * in_channels), Vector(out_channels), stride};
  fill_normal(c.weight.data(), c.weight.size(), std::sqrt(2.0 / (9.0 * in_channels)), rng);
  fill_uniform(c.bias.data(), c.bias.size(), 1.0 / std::sqrt(9.0 * in_channels), rng);
  return c;
}

FeatureGeometry conv_output_geometry(const Conv2d& conv, const FeatureGeometry& in) {
  return {in.batch, (in.height - 1) / conv.stride + 1, (in.width - 1) / conv.stride + 1};
}

Matrix conv_forward(const Conv2d& conv, const Matrix& x, const FeatureGeometry& in, ConvCache& cache) {
  const Eigen::Index channels = conv.weight.cols() / 9;
  if (x.rows() != channels || x.cols() != static_cast<Eigen::Index>(in.batch) * in.height * in.width)
    throw InvalidArgument("conv input shape mismatch");
  const FeatureGeometry out = conv_output_geometry(conv, in);
  cache.in = in;
  cache.out = out;
  cache.columns.setZero(9 * channels, static_cast<Eigen::Index>(out.batch) * out.height * out.width);
  const std::size_t block = static_cast<std::size_t>(channels) * sizeof(double);
  for (int n = 0; n < in.batch; ++n)
    for (int oy = 0; oy < out.height; ++oy)
      for (int ox = 0; ox < out.width; ++ox) {
        const Eigen::Index col = (static_cast<Eigen::Index>(n) * out.height + oy) * out.width + ox;
        double* dst = cache.columns.col(col).data();
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * conv.stride - 1 + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * conv.stride - 1 + kx;
            if (ix < 0 || ix >= in.width) continue;
            const Eigen::Index src = (static_cast<Eigen::Index>(n) * in.height + iy) * in.width + ix;
            std::memcpy(dst + (ky * 3 + kx) * channels, x.col(src).data(), block);
          }
        }
      }
  Matrix y = conv.weight * cache.columns;
  y.colwise() += conv.bias;
  return y;
}

Matrix conv_backward(const Conv2d& conv, Conv2d& grad, const ConvCache& cache, const Matrix& dy) {
  grad.weight.noalias() += dy * cache.columns.transpose();
  grad.bias += dy.rowwise().sum();
  const Matrix dcols = conv.weight.transpose() * dy;
  const Eigen::Index channels = conv.weight.cols() / 9;
  const auto& in = cache.in;
  const auto& out = cache.out;
  Matrix dx = Matrix::Zero(channels, static_cast<Eigen::Index>(in.batch) * in.height * in.width);
  for (int n = 0; n < in.batch; ++n)
    for (int oy = 0; oy < out.height; ++oy)
      for (int ox = 0; ox < out.width; ++ox) {
        const Eigen::Index col = (static_cast<Eigen::Index>(n) * out.height + oy) * out.width + ox;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * conv.stride - 1 + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * conv.stride - 1 + kx;
            if (ix < 0 || ix >= in.width) continue;
            const Eigen::Index dst = (static_cast<Eigen::Index>(n) * in.height + iy) * in.width + ix;
            dx.col(dst) += dcols.col(col).segment((ky * 3 + kx) * channels, channels);
          }
        }
      }
  return dx;
}

Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
}

Matrix gelu_backward(const Matrix& pre, const Matrix& dy) {
  static const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const Matrix slope = pre.unaryExpr([](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    return cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
  });
  return slope.cwiseProduct(dy);
}

Matrix global_average_pool(const Matrix& x, const FeatureGeometry& geom) {
  const Eigen::Index hw = static_cast<Eigen::Index>(geom.height) * geom.width;
  Matrix y(x.rows(), geom.batch);
  for (int n = 0; n < geom.batch; ++n) y.col(n) = x.middleCols(n * hw, hw).rowwise().mean();
  return y;
}

Matrix global_average_pool_backward(const Matrix& dy, const FeatureGeometry& geom) {
  const Eigen::Index hw = static_cast<Eigen::Index>(geom.height) * geom.width;
  Matrix dx(dy.rows(), geom.batch * hw);
  for (int n = 0; n < geom.batch; ++n) dx.middleCols(n * hw, hw).colwise() = dy.col(n) / static_cast<double>(hw);
  return dx;
}

Matrix l2_normalize(const Matrix& x) {
  Matrix y = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.col(j) /= std::max(x.col(j).norm(), 1e-12);
  return y;
}

Matrix l2_normalize_backward(const Matrix& x, const Matrix& u, const Matrix& dy) {
  Matrix dx(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double norm = std::max(x.col(j).norm(), 1e-12);
    dx.col(j) = (dy.col(j) - u.col(j) * u.col(j).dot(dy.col(j))) / norm;
  }
  return dx;
}

ConvBackbone make_backbone(int in_channels, const std::vector<int>& widths, Rng& rng) {
  if (widths.empty()) throw InvalidArgument("backbone needs at least one block");
  ConvBackbone net;
  int channels = in_channels;
  for (int w : widths) {
    net.blocks.push_back(make_conv(channels, w, 2, rng));
    channels = w;
  }
  return net;
}

Matrix backbone_forward(const ConvBackbone& net, const Matrix& x, const FeatureGeometry& in, BackboneTape* tape) {
  Matrix act = x;
  FeatureGeometry geom = in;
  ConvCache scratch;
  if (tape) {
    tape->conv.assign(net.blocks.size(), {});
    tape->pre_activation.assign(net.blocks.size(), {});
  }
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    ConvCache& cache = tape ? tape->conv[i] : scratch;
    Matrix pre = conv_forward(net.blocks[i], act, geom, cache);
    geom = cache.out;
    act = gelu(pre);
    if (tape) tape->pre_activation[i] = std::move(pre);
  }
  if (tape) tape->pooled = geom;
  return global_average_pool(act, geom);
}

Matrix backbone_backward(const ConvBackbone& net, ConvBackbone& grad, const BackboneTape& tape, const Matrix& dy) {
  Matrix d = global_average_pool_backward(dy, tape.pooled);
  for (std::size_t i = net.blocks.size(); i-- > 0;) {
    d = gelu_backward(tape.pre_activation[i], d);
    d = conv_backward(net.blocks[i], grad.blocks[i], tape.conv[i], d);
  }
  return d;
}

Mlp make_mlp(int in, int hidden, int out, Rng& rng) {
  Mlp m;
  m.first = make_dense(in, hidden, std::sqrt(2.0 / in), rng);
  m.second = make_dense(hidden, out, std::sqrt(1.0 / hidden), rng);
  return m;
}

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpTape* tape) {
  Matrix pre = dense_forward(mlp.first, x);
  Matrix hidden = gelu(pre);
  Matrix y = dense_forward(mlp.second, hidden);
  if (tape) {
    tape->input = x;
    tape->hidden_pre = std::move(pre);
    tape->hidden = std::move(hidden);
  }
  return y;
}

Matrix mlp_backward(const Mlp& mlp, Mlp& grad, const MlpTape& tape, const Matrix& dy) {
  Matrix dh = dense_backward(mlp.second, grad.second, tape.hidden, dy);
  dh = gelu_backward(tape.hidden_pre, dh);
  return dense_backward(mlp.first, grad.first, tape.input, dh);
}

}  // namespace eiqa::nn
