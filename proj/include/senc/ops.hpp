#pragma once

#include <span>
#include <utility>
#include <vector>

#include "senc/tensor.hpp"

namespace senc::ad {

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);

// ---- elementwise; shapes must match exactly or one side is a scalar ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor pow(const Tensor& x, double e);
Tensor scale(const Tensor& x, double a);
Tensor add_scalar(const Tensor& x, double a);
Tensor clamp_min(const Tensor& x, double m);

// ---- reductions / shape ----
Tensor softmax(const Tensor& x, int axis);  // rank-2; axis 0 = down columns, 1 = along rows
Tensor sum(const Tensor& x);                // scalar
Tensor sum_axis(const Tensor& x, int axis); // rank-2; axis 0 -> 1xC, axis 1 -> Nx1
Tensor concat_cols(std::span<const Tensor> parts);
Tensor stack_rows(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& x, std::vector<int> idx);
Tensor weighted_gather(const Tensor& x, std::vector<std::pair<int, double>> taps);  // 1xC
Tensor repeat_rows(const Tensor& row, int n);  // 1xC -> nxC
Tensor repeat_cols(const Tensor& col, int d);  // Nx1 -> Nxd

// 3x3/pad-1 patch extraction for the conv stem: x is (h*w)xC, output is
// (ho*wo)x(9C) with ho = h/stride, wo = w/stride.
Tensor im2col3x3(const Tensor& x, int h, int w, int stride);

}  // namespace senc::ad
