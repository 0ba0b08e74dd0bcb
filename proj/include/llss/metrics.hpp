// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Image quality metrics on [0,1] float tensors.
//
// MS-SSIM follows the common multi-scale construction: 11x11 Gaussian window
// (sigma 1.5), valid-only filtering, k1 = 0.01, k2 = 0.03, scale weights
// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333), contrast-structure terms clamped
// at zero before exponentiation, 2x2 average-pool downsampling with symmetric
// padding to even dims. Five scales need min(H, W) >= 176 (the window must
// fit after four halvings); smaller images automatically use as many scales
// as fit, with the weights renormalized to sum to one. The per-scale values
// of the two views' metrics average over channels.
#pragma once

#include "llss/tensor.hpp"

namespace llss {

// Mean squared error over all elements.
double mse(const TensorF& a, const TensorF& b);

// 10*log10(1/mse) for [0,1] images; mse is floored at 1e-12 (120 dB cap) so
// lossless content stays finite.
double psnr(const TensorF& a, const TensorF& b);

// Number of MS-SSIM scales used for a given image size (1..5).
int ms_ssim_scales(int h, int w);

// x, y: (3,H,W) or (N,3,H,W) in [0,1]. Throws DataError if min(H,W) < 16.
double ms_ssim(const TensorF& x, const TensorF& y);

// Single-scale SSIM (mean over space and channels), same window convention.
double ssim(const TensorF& x, const TensorF& y);

}  // namespace llss
