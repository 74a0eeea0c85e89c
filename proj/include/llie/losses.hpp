#pragma once

#include <string>
#include <utility>

#include <torch/torch.h>

#include "llie/features.hpp"
#include "llie/manifest.hpp"
#include "llie/model.hpp"

namespace llie {

struct RetinexBreakdown {
    double reconstruction = 0.0;
    double pseudo_reflectance = 0.0;
    double smoothness = 0.0;
    double gradient_reg = 0.0;
};

struct LossReport {
    double projection = 0.0;
    double consistency = 0.0;
    double retinex = 0.0;
    double perceptual = 0.0;
    double total = 0.0;
    RetinexBreakdown retinex_breakdown;
};

/// Differentiable Retinex sub-terms, before weighting.
struct RetinexTerms {
    torch::Tensor reconstruction;
    torch::Tensor pseudo_reflectance;
    torch::Tensor smoothness;
    torch::Tensor gradient_reg;
    torch::Tensor weighted;
};

/// Differentiable objective terms plus the weighted total.
struct LossTerms {
    torch::Tensor projection;
    torch::Tensor consistency;
    torch::Tensor retinex;
    torch::Tensor perceptual;
    torch::Tensor total;
    RetinexTerms retinex_terms;

    LossReport report() const;
};

/// Mean squared deviation of the projection i from the input I.
torch::Tensor projection_loss(const torch::Tensor& projection, const torch::Tensor& input);

/// Mean squared difference of the refined reflectances of both exposures.
torch::Tensor consistency_loss(const torch::Tensor& reflectance_a, const torch::Tensor& reflectance_b);

/// Forward differences along x and y with a reflected boundary sample, so the
/// last column/row compares against its mirrored neighbour.
std::pair<torch::Tensor, torch::Tensor> forward_gradients(const torch::Tensor& x);

/// (a) |L*R - i|^2, (b) |R - i / stopgrad(clamp(L))|^2, (c) mean |dL/dx| + |dL/dy|,
/// (d) mean (dL/dx)^2 + (dL/dy)^2. All terms are means over elements.
RetinexTerms retinex_loss(const torch::Tensor& reflectance, const torch::Tensor& illumination,
                          const torch::Tensor& projection, const RetinexCoefficients& coeffs = {},
                          double eps = 1e-4);

/// Feature-space distance; throws DependencyError when `extractor` is null.
torch::Tensor perceptual_loss(const FeatureExtractor* extractor, const torch::Tensor& a, const torch::Tensor& b);

/// The weighted four-term objective for a batch of exposure pairs, given the
/// forward artifacts of both members. The perceptual term is skipped (zero)
/// when its weight is zero; it compares each enhanced output against its own
/// projection, treated as a fixed target.
LossTerms total_loss(const LossWeights& weights, const RetinexCoefficients& coeffs, const ForwardArtifacts& a,
                     const ForwardArtifacts& b, const FeatureExtractor* extractor, double eps = 1e-4,
                     double retinex_lambda = 1.0);

}  // namespace llie
