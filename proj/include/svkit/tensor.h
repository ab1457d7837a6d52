#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace svkit {

/// Activation volume laid out (time, freq, channels), channels fastest. A
/// frame's (freq, channel) slab is contiguous, freq-major.
struct Tensor3 {
  int time = 0;
  int freq = 0;
  int channels = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int t, int f, int c)
      : time(t), freq(f), channels(c),
        data(static_cast<std::size_t>(t) * f * c, 0.0f) {}

  std::size_t index(int t, int f, int c) const {
    return (static_cast<std::size_t>(t) * freq + f) * channels + c;
  }
  float& at(int t, int f, int c) { return data[index(t, f, c)]; }
  float at(int t, int f, int c) const { return data[index(t, f, c)]; }
};

int conv_output_size(int in, int kernel, int stride, int pad);

/// 2-D convolution without bias. `kernel` is (k, k, in_channels,
/// out_channels) row-major; padding is k/2 on every side.
Tensor3 conv2d(const Tensor3& x, std::span<const float> kernel, int kernel_size,
               int out_channels, int stride);

struct BatchNormView {
  std::span<const float> gamma;
  std::span<const float> beta;
  std::span<const float> mean;
  std::span<const float> var;
};

/// In-place inference batch norm over the channel axis.
void batchnorm_infer(Tensor3& x, const BatchNormView& bn, double eps = 1e-5);

void relu_inplace(std::span<float> values);

}  // namespace svkit
