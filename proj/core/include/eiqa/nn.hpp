#pragma once

#include <Eigen/Dense>
#include <vector>

#include "eiqa/rng.hpp"

namespace eiqa::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Activations are (features, batch) matrices. Feature maps use
// (channels, batch * height * width) so each column is one pixel's channel
// vector and a 3x3 im2col patch is nine contiguous channel blocks.

struct Dense {
  Matrix weight;  // out x in
  Vector bias;    // out
};

Dense make_dense(int in, int out, double init_std, Rng& rng);
Matrix dense_forward(const Dense& layer, const Matrix& x);
// Accumulates into grad; returns d(loss)/d(x).
Matrix dense_backward(const Dense& layer, Dense& grad, const Matrix& x, const Matrix& dy);

// 3x3 convolution, padding 1.
struct Conv2d {
  Matrix weight;  // out x (9 * in), column = tap * in + channel
  Vector bias;
  int stride = 1;
};

struct FeatureGeometry {
  int batch = 0;
  int height = 0;
  int width = 0;
};

struct ConvCache {
  Matrix columns;
  FeatureGeometry in;
  FeatureGeometry out;
};

Conv2d make_conv(int in_channels, int out_channels, int stride, Rng& rng);
FeatureGeometry conv_output_geometry(const Conv2d& conv, const FeatureGeometry& in);
Matrix conv_forward(const Conv2d& conv, const Matrix& x, const FeatureGeometry& in, ConvCache& cache);
Matrix conv_backward(const Conv2d& conv, Conv2d& grad, const ConvCache& cache, const Matrix& dy);

// Exact GELU, x * Phi(x).
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& pre_activation, const Matrix& dy);

Matrix global_average_pool(const Matrix& x, const FeatureGeometry& geom);
Matrix global_average_pool_backward(const Matrix& dy, const FeatureGeometry& geom);

// Column-wise x / max(||x||, 1e-12).
Matrix l2_normalize(const Matrix& x);
Matrix l2_normalize_backward(const Matrix& x, const Matrix& normalized, const Matrix& dy);

// Stack of conv(3x3) + GELU blocks followed by global average pooling.
struct ConvBackbone {
  std::vector<Conv2d> blocks;
};

struct BackboneTape {
  std::vector<ConvCache> conv;
  std::vector<Matrix> pre_activation;
  FeatureGeometry pooled;
};

ConvBackbone make_backbone(int in_channels, const std::vector<int>& widths, Rng& rng);
// Returns (last width, batch). `tape` may be null for inference.
Matrix backbone_forward(const ConvBackbone& net, const Matrix& x, const FeatureGeometry& in, BackboneTape* tape);
// Returns d(loss)/d(input) in the input layout.
Matrix backbone_backward(const ConvBackbone& net, ConvBackbone& grad, const BackboneTape& tape, const Matrix& dy);

// Two affine layers with one GELU between them.
struct Mlp {
  Dense first;
  Dense second;
};

struct MlpTape {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
};

Mlp make_mlp(int in, int hidden, int out, Rng& rng);
Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpTape* tape);
Matrix mlp_backward(const Mlp& mlp, Mlp& grad, const MlpTape& tape, const Matrix& dy);

}  // namespace eiqa::nn
