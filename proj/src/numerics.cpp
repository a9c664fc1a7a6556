#include "snnforge/numerics.hpp"

#include <string>

namespace snnforge {

Tensor affine(const Tensor& weight, const Tensor& bias, const Tensor& x) {
    if (weight.rank() != 2) {
        throw DimensionError("affine: weight must be 2-d, got " + shape_str(weight.shape()));
    }
    const std::size_t out = weight.extent(0);
    const std::size_t in = weight.extent(1);
    if (x.size() != in) {
        throw DimensionError("affine: input has " + std::to_string(x.size()) +
                             " values but weight expects " + std::to_string(in));
    }
    if (bias.size() != out) {
        throw DimensionError("affine: bias has " + std::to_string(bias.size()) +
                             " values but weight produces " + std::to_string(out));
    }
    Tensor y({out});
    const double* w = weight.data();
    const double* xv = x.data();
    for (std::size_t i = 0; i < out; ++i) {
        double acc = 0.0;
        const double* row = w + i * in;
        for (std::size_t j = 0; j < in; ++j) {
            const double xj = xv[j];
            if (xj != 0.0) acc += row[j] * xj;
        }
        y[i] = acc + bias[i];
    }
    return y;
}

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t padding, const char* what) {
    if (stride == 0) throw ConfigError(std::string(what) + ": stride must be positive");
    const std::size_t padded = in + 2 * padding;
    if (padded < k) {
        throw ConfigError(std::string(what) + ": window " + std::to_string(k) +
                          " exceeds padded extent " + std::to_string(padded));
    }
    const std::size_t span = padded - k;
    if (span % stride != 0) {
        throw ConfigError(std::string(what) + ": extent " + std::to_string(in) +
                          " with window " + std::to_string(k) + ", stride " +
                          std::to_string(stride) + ", padding " + std::to_string(padding) +
                          " gives a non-integral output size");
    }
    return span / stride + 1;
}

Tensor conv2d(const Tensor& kernel, const Tensor& bias, const Tensor& x,
              std::size_t stride, std::size_t padding) {
    if (kernel.rank() != 4) {
        throw DimensionError("conv2d: kernel must be 4-d, got " + shape_str(kernel.shape()));
    }
    Tensor input = x;
    if (x.rank() == 2) {
        input = x.reshaped({1, x.extent(0), x.extent(1)});
    } else if (x.rank() != 3) {
        throw DimensionError("conv2d: input must be 2-d or 3-d, got " + shape_str(x.shape()));
    }
    const std::size_t oc = kernel.extent(0);
    const std::size_t ic = kernel.extent(1);
    const std::size_t kh = kernel.extent(2);
    const std::size_t kw = kernel.extent(3);
    if (input.extent(0) != ic) {
        throw DimensionError("conv2d: input has " + std::to_string(input.extent(0)) +
                             " channels but kernel expects " + std::to_string(ic));
    }
    if (bias.size() != oc) {
        throw DimensionError("conv2d: bias has " + std::to_string(bias.size()) +
                             " values but kernel produces " + std::to_string(oc) + " channels");
    }
    const std::size_t h = input.extent(1);
    const std::size_t w = input.extent(2);
    const std::size_t oh = conv_out_extent(h, kh, stride, padding, "conv2d");
    const std::size_t ow = conv_out_extent(w, kw, stride, padding, "conv2d");

    Tensor y({oc, oh, ow});
    const double* kv = kernel.data();
    const double* xv = input.data();
    for (std::size_t o = 0; o < oc; ++o) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < ic; ++i) {
                    for (std::size_t kr = 0; kr < kh; ++kr) {
                        // signed row index into the padded input
                        const long long rr =
                            static_cast<long long>(r * stride + kr) - static_cast<long long>(padding);
                        if (rr < 0 || rr >= static_cast<long long>(h)) continue;
                        for (std::size_t kc = 0; kc < kw; ++kc) {
                            const long long cc =
                                static_cast<long long>(c * stride + kc) - static_cast<long long>(padding);
                            if (cc < 0 || cc >= static_cast<long long>(w)) continue;
                            const double xval =
                                xv[(i * h + static_cast<std::size_t>(rr)) * w + static_cast<std::size_t>(cc)];
                            if (xval != 0.0) {
                                acc += kv[((o * ic + i) * kh + kr) * kw + kc] * xval;
                            }
                        }
                    }
                }
                y[(o * oh + r) * ow + c] = acc + bias[o];
            }
        }
    }
    return y;
}

Tensor avgpool(const Tensor& x, std::size_t k, std::size_t stride) {
    if (k == 0) throw ConfigError("avgpool: window must be positive");
    Tensor input = x;
    if (x.rank() == 2) {
        input = x.reshaped({1, x.extent(0), x.extent(1)});
    } else if (x.rank() != 3) {
        throw DimensionError("avgpool: input must be 2-d or 3-d, got " + shape_str(x.shape()));
    }
    const std::size_t ch = input.extent(0);
    const std::size_t h = input.extent(1);
    const std::size_t w = input.extent(2);
    const std::size_t oh = conv_out_extent(h, k, stride, 0, "avgpool");
    const std::size_t ow = conv_out_extent(w, k, stride, 0, "avgpool");

    Tensor y({ch, oh, ow});
    const double* xv = input.data();
    const double inv = 1.0 / static_cast<double>(k * k);
    for (std::size_t i = 0; i < ch; ++i) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double acc = 0.0;
                for (std::size_t kr = 0; kr < k; ++kr) {
                    for (std::size_t kc = 0; kc < k; ++kc) {
                        acc += xv[(i * h + r * stride + kr) * w + c * stride + kc];
                    }
                }
                y[(i * oh + r) * ow + c] = acc * inv;
            }
        }
    }
    return y;
}

}  // namespace snnforge
