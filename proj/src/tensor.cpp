#include "svkit/tensor.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "svkit/common.h"

namespace svkit {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int conv_output_size(int in, int kernel, int stride, int pad) {
  check(stride >= 1, "conv: stride must be positive");
  const int span = in + 2 * pad - kernel;
  check(span >= 0, "conv: kernel larger than padded input");
  return span / stride + 1;
}

Tensor3 conv2d(const Tensor3& x, std::span<const float> kernel, int kernel_size,
               int out_channels, int stride) {
  check(kernel_size == 1 || kernel_size == 3, "conv2d: kernel must be 1x1 or 3x3");
  const int pad = kernel_size / 2;
  const std::size_t patch = static_cast<std::size_t>(kernel_size) * kernel_size * x.channels;
  check(kernel.size() == patch * static_cast<std::size_t>(out_channels),
        "conv2d: kernel of size " + std::to_string(kernel.size()) +
            " does not match input channels " + std::to_string(x.channels));
  const int out_t = conv_output_size(x.time, kernel_size, stride, pad);
  const int out_f = conv_output_size(x.freq, kernel_size, stride, pad);
  Tensor3 y(out_t, out_f, out_channels);

  // im2col: one row per output position, (ky, kx, c) per column.
  RowMatrixF cols(static_cast<Eigen::Index>(out_t) * out_f, static_cast<Eigen::Index>(patch));
  for (int t = 0; t < out_t; ++t) {
    for (int f = 0; f < out_f; ++f) {
      float* row = cols.data() + (static_cast<std::size_t>(t) * out_f + f) * patch;
      for (int ky = 0; ky < kernel_size; ++ky) {
        const int it = t * stride + ky - pad;
        for (int kx = 0; kx < kernel_size; ++kx) {
          const int jf = f * stride + kx - pad;
          float* dst = row + (static_cast<std::size_t>(ky) * kernel_size + kx) * x.channels;
          if (it < 0 || it >= x.time || jf < 0 || jf >= x.freq) {
            std::fill(dst, dst + x.channels, 0.0f);
          } else {
            const float* src = x.data.data() + x.index(it, jf, 0);
            std::copy(src, src + x.channels, dst);
          }
        }
      }
    }
  }
  Eigen::Map<const RowMatrixF> w(kernel.data(), static_cast<Eigen::Index>(patch), out_channels);
  Eigen::Map<RowMatrixF> out(y.data.data(), cols.rows(), out_channels);
  out.noalias() = cols * w;
  return y;
}

void batchnorm_infer(Tensor3& x, const BatchNormView& bn, double eps) {
  const auto c = static_cast<std::size_t>(x.channels);
  check(bn.gamma.size() == c && bn.beta.size() == c && bn.mean.size() == c && bn.var.size() == c,
        "batchnorm: missing or mis-sized statistics");
  std::vector<float> scale(c), shift(c);
  for (std::size_t i = 0; i < c; ++i) {
    check(bn.var[i] >= 0.0f, "batchnorm: negative running variance");
    const double s = bn.gamma[i] / std::sqrt(static_cast<double>(bn.var[i]) + eps);
    check(std::isfinite(s), "batchnorm: zero variance with eps = 0");
    scale[i] = static_cast<float>(s);
    shift[i] = static_cast<float>(bn.beta[i] - s * bn.mean[i]);
  }
  for (std::size_t i = 0; i < x.data.size(); i += c) {
    for (std::size_t k = 0; k < c; ++k) x.data[i + k] = x.data[i + k] * scale[k] + shift[k];
  }
}

void relu_inplace(std::span<float> values) {
  for (float& v : values) v = std::max(v, 0.0f);
}

}  // namespace svkit
