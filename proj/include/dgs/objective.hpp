#pragma once

#include "dgs/image.hpp"

namespace dgs {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kDefaultLambdaSsim = 0.2;

struct LossReport {
    double total = 0.0;
    double l1 = 0.0;
    double dssim = 0.0;
    Image d_total_d_rgb;
};

/// total = (1 - λ)·L1 + λ·(1 - SSIM)/2 with the exact gradient image.
/// L1 uses sign(0) = 0. With λ = 0 the SSIM term is skipped, so images smaller
/// than the window are accepted.
LossReport compute_loss(const Image &rendered, const Image &target, double lambda_ssim = kDefaultLambdaSsim);

/// 10·log10(1/MSE); identical images give +infinity.
double psnr(const Image &a, const Image &b);

/// Mean SSIM over all 11×11 windows that fit entirely inside the image
/// (Gaussian weights, σ = 1.5), averaged over channels.
double ssim(const Image &a, const Image &b);

/// Squared-error sum ‖a − b‖² and its gradient 2(a − b) with respect to a.
double l2_loss(const Image &a, const Image &b, Image *d_a = nullptr);

} // namespace dgs
