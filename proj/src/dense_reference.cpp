// Dense evaluation of the detector network, used to measure what the sparse
// engine saves. Every voxel and every kernel tap is computed, zeros included.
#include "hieum/detector.hpp"

#include "hieum/error.hpp"
#include "hieum/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace hieum {

using sparse::BatchNormLayer;
using sparse::ConvLayer;
using sparse::ConvMode;
using sparse::Dims3;

namespace {

// Channel-first dense volume: data[((c * T + t) * H + y) * W + x].
struct DenseTensor {
  Dims3 shape;
  int channels = 0;
  std::vector<float> data;

  std::size_t plane() const { return static_cast<std::size_t>(shape.t) * shape.y * shape.x; }
  float* row(int c, int t, int y) {
    return data.data() + ((static_cast<std::size_t>(c) * shape.t + t) * shape.y + y) * shape.x;
  }
  const float* row(int c, int t, int y) const {
    return data.data() + ((static_cast<std::size_t>(c) * shape.t + t) * shape.y + y) * shape.x;
  }
  void release() { std::vector<float>().swap(data); }
};

template <typename S>
Dims3 output_shape(const ConvLayer<S>& layer, Dims3 in, Dims3 target) {
  switch (layer.mode) {
    case ConvMode::Submanifold:
      return in;
    case ConvMode::Strided:
      return {(in.t + layer.stride.t - 1) / layer.stride.t, (in.y + layer.stride.y - 1) / layer.stride.y,
              (in.x + layer.stride.x - 1) / layer.stride.x};
    case ConvMode::Transposed:
      return target;
  }
  return in;
}

template <typename S>
std::uint64_t layer_macs(const ConvLayer<S>& layer, Dims3 in, Dims3 target) {
  const Dims3 out = output_shape(layer, in, target);
  const auto taps = static_cast<std::uint64_t>(layer.kernel.volume()) * layer.in_channels * layer.out_channels;
  if (layer.mode == ConvMode::Transposed) {
    // Each coarse input voxel is scattered through every kernel tap.
    return static_cast<std::uint64_t>(in.t) * in.y * in.x * taps;
  }
  return static_cast<std::uint64_t>(out.t) * out.y * out.x * taps;
}

// Input channel ci of the concatenation [a, b].
inline const DenseTensor& pick(const DenseTensor& a, const DenseTensor* b, int& ci) {
  if (ci < a.channels) return a;
  ci -= a.channels;
  return *b;
}

// Convolution over the channel concatenation [a, b]; b may be null. Output rows
// are independent, and every tap is applied as an axpy along x.
template <typename S>
DenseTensor conv(const DenseTensor& a, const DenseTensor* b, const ConvLayer<S>& layer, Dims3 target,
                 std::uint64_t& macs) {
  const int Cin = a.channels + (b ? b->channels : 0);
  if (Cin != layer.in_channels) throw Error(ErrorCode::ShapeMismatch, "dense channel mismatch");
  const int Co = layer.out_channels;
  DenseTensor out;
  out.shape = output_shape(layer, a.shape, target);
  out.channels = Co;
  out.data.assign(out.plane() * static_cast<std::size_t>(Co), 0.0f);
  macs += layer_macs(layer, a.shape, target);

  const std::vector<float> W(layer.weight.value.begin(), layer.weight.value.end());  // [tap][ci][co]
  const Dims3 k = layer.kernel;
  const Dims3 s = layer.stride;
  const Dims3 pad = layer.mode == ConvMode::Submanifold ? Dims3{k.t / 2, k.y / 2, k.x / 2} : sparse::padding(k, s);
  const Dims3 in = a.shape;
  const Dims3 os = out.shape;
  auto w = [&](int tap, int ci, int co) {
    return W[(static_cast<std::size_t>(tap) * Cin + ci) * Co + co];
  };

  const std::size_t rows = static_cast<std::size_t>(os.t) * os.y;
  parallel_for(rows, 1, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      const int ot = static_cast<int>(r / static_cast<std::size_t>(os.y));
      const int oy = static_cast<int>(r % static_cast<std::size_t>(os.y));
      for (int co = 0; co < Co; ++co) {
        float* __restrict dst = out.row(co, ot, oy);
        if (!layer.bias.value.empty()) std::fill(dst, dst + os.x, static_cast<float>(layer.bias.value[static_cast<std::size_t>(co)]));
        for (int dt = 0; dt < k.t; ++dt) {
          for (int dy = 0; dy < k.y; ++dy) {
            for (int dx = 0; dx < k.x; ++dx) {
              const int tap = (dt * k.y + dy) * k.x + dx;
              if (layer.mode == ConvMode::Transposed) {
                // Output o takes input i with i * s + tap - pad == o.
                const int nt = ot + pad.t - dt, ny = oy + pad.y - dy;
                if (nt < 0 || ny < 0 || nt % s.t || ny % s.y) continue;
                const int it = nt / s.t, iy = ny / s.y;
                if (it >= in.t || iy >= in.y) continue;
                for (int ci = 0; ci < Cin; ++ci) {
                  int c = ci;
                  const float* __restrict src = pick(a, b, c).row(c, it, iy);
                  const float wv = w(tap, ci, co);
                  for (int ix = 0; ix < in.x; ++ix) {
                    const int ox = ix * s.x + dx - pad.x;
                    if (ox >= 0 && ox < os.x) dst[ox] += wv * src[ix];
                  }
                }
                continue;
              }
              const int it = ot * s.t + dt - pad.t;
              const int iy = oy * s.y + dy - pad.y;
              if (it < 0 || iy < 0 || it >= in.t || iy >= in.y) continue;
              // Valid ox: 0 <= ox * s.x + dx - pad.x < in.x.
              const int shift = dx - pad.x;
              int lo = 0;
              while (lo < os.x && lo * s.x + shift < 0) ++lo;
              int hi = os.x;
              while (hi > lo && (hi - 1) * s.x + shift >= in.x) --hi;
              auto src_row = [&](int ci) {
                int c = ci;
                return pick(a, b, c).row(c, it, iy) + shift;
              };
              int ci = 0;
              if (s.x == 1) {
                // Four input channels per sweep halves the traffic on dst.
                for (; ci + 4 <= Cin; ci += 4) {
                  const float* __restrict s0 = src_row(ci);
                  const float* __restrict s1 = src_row(ci + 1);
                  const float* __restrict s2 = src_row(ci + 2);
                  const float* __restrict s3 = src_row(ci + 3);
                  const float w0 = w(tap, ci, co), w1 = w(tap, ci + 1, co), w2 = w(tap, ci + 2, co),
                              w3 = w(tap, ci + 3, co);
                  for (int ox = lo; ox < hi; ++ox) dst[ox] += w0 * s0[ox] + w1 * s1[ox] + w2 * s2[ox] + w3 * s3[ox];
                }
              }
              for (; ci < Cin; ++ci) {
                const float* __restrict sp = src_row(ci);
                const float wv = w(tap, ci, co);
                for (int ox = lo; ox < hi; ++ox) dst[ox] += wv * sp[ox * s.x];
              }
            }
          }
        }
      }
    }
  });
  return out;
}

template <typename S>
void bn_relu(DenseTensor& x, const BatchNormLayer<S>& bn, bool relu) {
  const std::size_t P = x.plane();
  for (int c = 0; c < x.channels; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    const double inv = 1.0 / std::sqrt(static_cast<double>(bn.running_var[uc]) + bn.eps);
    const auto scale = static_cast<float>(static_cast<double>(bn.gamma.value[uc]) * inv);
    const auto shift = static_cast<float>(bn.beta.value[uc] - static_cast<double>(bn.running_mean[uc]) * bn.gamma.value[uc] * inv);
    float* p = x.data.data() + uc * P;
    for (std::size_t i = 0; i < P; ++i) {
      const float y = p[i] * scale + shift;
      p[i] = relu && y < 0.0f ? 0.0f : y;
    }
  }
}

void relu(DenseTensor& x) {
  for (auto& v : x.data) v = v < 0.0f ? 0.0f : v;
}

// Channel-first planes to the N x C row layout of HeadOutput.
template <typename S>
std::vector<S> interleave(const DenseTensor& x) {
  const std::size_t P = x.plane();
  const auto C = static_cast<std::size_t>(x.channels);
  std::vector<S> out(P * C);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < P; ++i) out[i * C + c] = static_cast<S>(x.data[c * P + i]);
  }
  return out;
}

}  // namespace

template <typename S>
HeadOutput<S> Detector<S>::dense_predict(std::span<const float> input, Dims3 shape, std::uint64_t* macs) const {
  if (input.size() != static_cast<std::size_t>(shape.volume())) {
    throw Error(ErrorCode::ShapeMismatch, "dense input does not match its shape");
  }
  std::uint64_t count = 0;
  DenseTensor x{shape, 1, std::vector<float>(input.begin(), input.end())};
  {
    DenseTensor y = conv(x, nullptr, stem_, shape, count);
    x.release();
    bn_relu(y, stem_bn_, true);
    x = std::move(y);
  }
  std::vector<DenseTensor> skips;
  for (int l = 1; l < cfg_.depth; ++l) {
    const auto& L = levels_[static_cast<std::size_t>(l)];
    DenseTensor y = conv(x, nullptr, L.down, x.shape, count);
    bn_relu(y, L.down_bn, true);
    skips.push_back(std::move(x));
    x = conv(y, nullptr, L.conv, y.shape, count);
    y.release();
    bn_relu(x, L.bn, true);
  }
  for (int l = cfg_.depth - 1; l >= 1; --l) {
    const auto& L = levels_[static_cast<std::size_t>(l)];
    DenseTensor skip = std::move(skips.back());
    skips.pop_back();
    DenseTensor up = conv(x, nullptr, L.up, skip.shape, count);
    x.release();
    bn_relu(up, L.up_bn, true);
    x = conv(skip, &up, L.fuse, skip.shape, count);
    skip.release();
    up.release();
    bn_relu(x, L.fuse_bn, true);
  }
  auto branch = [&](const Branch& b) {
    DenseTensor h = conv(x, nullptr, b.conv, shape, count);
    relu(h);
    return interleave<S>(conv(h, nullptr, b.out, shape, count));
  };
  HeadOutput<S> out;
  out.center_logits = branch(center_);
  out.sizes = branch(size_);
  out.offsets = branch(offset_);
  if (macs) *macs = count;
  return out;
}

template HeadOutput<float> Detector<float>::dense_predict(std::span<const float>, Dims3, std::uint64_t*) const;
template HeadOutput<double> Detector<double>::dense_predict(std::span<const float>, Dims3, std::uint64_t*) const;

std::uint64_t dense_macs(const NetworkConfig& cfg, Dims3 shape) {
  const auto w = cfg.widths();
  const auto v0 = static_cast<std::uint64_t>(shape.volume());
  std::uint64_t total = v0 * 27 * w[0];  // stem
  Dims3 s = shape;
  for (int l = 1; l < cfg.depth; ++l) {
    const Dims3 fine = s;
    s = {s.t, (s.y + 1) / 2, (s.x + 1) / 2};
    const auto v = static_cast<std::uint64_t>(s.volume());
    const auto ci = static_cast<std::uint64_t>(w[static_cast<std::size_t>(l - 1)]);
    const auto co = static_cast<std::uint64_t>(w[static_cast<std::size_t>(l)]);
    total += v * 4 * ci * co;                                   // down
    total += v * 27 * co * co;                                  // conv
    total += v * 4 * co * ci;                                   // up
    total += static_cast<std::uint64_t>(fine.volume()) * 27 * 2 * ci * ci;  // fuse
  }
  const auto c0 = static_cast<std::uint64_t>(w[0]);
  total += 3 * v0 * 27 * c0 * c0;      // branch hidden layers
  total += v0 * c0 * (1 + 2 + 2);      // branch outputs
  return total;
}

}  // namespace hieum
