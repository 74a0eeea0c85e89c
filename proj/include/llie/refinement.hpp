#pragma once

#include <torch/torch.h>

#include "llie/image.hpp"
#include "llie/manifest.hpp"

namespace llie {

/// logit(clamp(x, eps, 1-eps)).
torch::Tensor safe_logit(const torch::Tensor& x, double eps);

/// Channel-Guidance: dual channel/spatial attention gating a residual
/// refinement of the reflectance map.
///
///   features  = relu(conv3x3(R))
///   channel   = sigmoid(MLP(GAP(features)))              (B,F,1,1)
///   spatial   = sigmoid(conv7x7([mean_c, max_c]))        (B,1,H,W)
///   residual  = conv3x3(features * channel * spatial)
///   R_f       = R + R(1-R) tanh(residual)
///
/// The bounded residual keeps R_f inside (0,1) whenever R is, and reduces to
/// the identity exactly when the refinement conv outputs zero.
class ChannelGuidanceImpl : public torch::nn::Module {
public:
    explicit ChannelGuidanceImpl(const ChannelGuidanceConfig& cfg);

    torch::Tensor forward(const torch::Tensor& reflectance);

    torch::Tensor features(const torch::Tensor& reflectance);
    torch::Tensor channel_attention(const torch::Tensor& features);
    torch::Tensor spatial_attention(const torch::Tensor& features);

    torch::nn::Conv2d& refine_conv() { return refine_; }
    torch::nn::Linear& mlp_in() { return fc1_; }
    torch::nn::Linear& mlp_out() { return fc2_; }

private:
    torch::nn::Conv2d head_{nullptr};
    torch::nn::Linear fc1_{nullptr};
    torch::nn::Linear fc2_{nullptr};
    torch::nn::Conv2d spatial_{nullptr};
    torch::nn::Conv2d refine_{nullptr};
};
TORCH_MODULE(ChannelGuidance);

/// Colour Enhancement: multi-scale illumination features modulated by
/// statistics-conditioned weights.
///
///   f       = concat(relu(conv_k(L)) for k in kernels)
///   weights = sigmoid(MLP(GAP(f)))
///   L_f     = sigmoid(logit(L) + conv1x1(f * weights))
class ColorEnhancementImpl : public torch::nn::Module {
public:
    ColorEnhancementImpl(const ColorEnhancementConfig& cfg, double eps);

    torch::Tensor forward(const torch::Tensor& illumination);

    torch::Tensor multiscale_features(const torch::Tensor& illumination);
    torch::Tensor modulation_weights(const torch::Tensor& features);

    torch::nn::Linear& mlp_in() { return fc1_; }
    torch::nn::Linear& mlp_out() { return fc2_; }

private:
    double eps_;
    torch::nn::ModuleList branches_;
    torch::nn::Linear fc1_{nullptr};
    torch::nn::Linear fc2_{nullptr};
    torch::nn::Conv2d fuse_{nullptr};
};
TORCH_MODULE(ColorEnhancement);

/// Binary map of pixels whose Rec.709 luma exceeds `threshold`, (B,1,H,W).
torch::Tensor saturation_prior(const torch::Tensor& img, double threshold);

enum class MaskMode { Learned, ForceZero, ForceOne };

struct OecOutput {
    torch::Tensor image;      // mask * corrected + (1 - mask) * input
    torch::Tensor mask;       // (B,1,H,W) in [0,1]
    torch::Tensor corrected;  // (B,3,H,W) in (0,1)
    torch::Tensor prior;      // (B,1,H,W) binary
};

/// Over-Exposure Correction: dilated residual blocks whose updates pass
/// through exposure-sensitive gates (conditioned on the saturation prior),
/// then a learned mask blends the corrected image with the input.
class OverExposureCorrectionImpl : public torch::nn::Module {
public:
    OverExposureCorrectionImpl(const ExposureCorrectionConfig& cfg, double eps);

    OecOutput forward(const torch::Tensor& img, MaskMode mode = MaskMode::Learned);

private:
    double threshold_;
    double eps_;
    torch::nn::Conv2d head_{nullptr};
    torch::nn::ModuleList block_a_;
    torch::nn::ModuleList block_b_;
    torch::nn::ModuleList gates_;
    torch::nn::Conv2d correct_{nullptr};
    torch::nn::Conv2d mask_{nullptr};
};
TORCH_MODULE(OverExposureCorrection);

/// clamp(L_f, eps, 1)^lambda broadcast over the reflectance channels, times R_f.
torch::Tensor recompose(const torch::Tensor& reflectance, const torch::Tensor& illumination, double lambda,
                        double eps = 1e-4);
ImageTensor recompose(const ImageTensor& reflectance, const ImageTensor& illumination, double lambda,
                      double eps = 1e-4);

struct RefinedPair {
    ImageTensor reflectance_f;
    ImageTensor illumination_f;
};

struct EnhancedImage {
    ImageTensor image;
    ImageTensor blend_mask;
};

}  // namespace llie
