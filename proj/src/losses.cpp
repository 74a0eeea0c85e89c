#include "llie/losses.hpp"

#include "llie/error.hpp"

namespace llie {

using torch::indexing::None;
using torch::indexing::Slice;

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* who) {
    if (!a.sizes().equals(b.sizes())) fail(ErrorKind::ShapeError, std::string(who) + ": shape mismatch");
}

double scalar(const torch::Tensor& t) { return t.defined() ? t.detach().to(torch::kFloat64).item<double>() : 0.0; }

}  // namespace

LossReport LossTerms::report() const {
    LossReport r;
    r.projection = scalar(projection);
    r.consistency = scalar(consistency);
    r.retinex = scalar(retinex);
    r.perceptual = scalar(perceptual);
    r.total = scalar(total);
    r.retinex_breakdown = {scalar(retinex_terms.reconstruction), scalar(retinex_terms.pseudo_reflectance),
                           scalar(retinex_terms.smoothness), scalar(retinex_terms.gradient_reg)};
    return r;
}

torch::Tensor projection_loss(const torch::Tensor& projection, const torch::Tensor& input) {
    require_same_shape(projection, input, "projection_loss");
    return (projection - input).square().mean();
}

torch::Tensor consistency_loss(const torch::Tensor& reflectance_a, const torch::Tensor& reflectance_b) {
    require_same_shape(reflectance_a, reflectance_b, "consistency_loss");
    return (reflectance_a - reflectance_b).square().mean();
}

std::pair<torch::Tensor, torch::Tensor> forward_gradients(const torch::Tensor& x) {
    const int64_t h = x.size(-2);
    const int64_t w = x.size(-1);
    if (h < 2 || w < 2) fail(ErrorKind::ShapeError, "gradients need at least 2x2 maps");
    // x[..., w] := x[..., w-2] (reflect, edge not repeated)
    auto right = torch::cat({x.index({"...", Slice(1, None)}), x.index({"...", Slice(w - 2, w - 1)})}, -1);
    auto down = torch::cat({x.index({"...", Slice(1, None), Slice()}), x.index({"...", Slice(h - 2, h - 1), Slice()})},
                           -2);
    return {right - x, down - x};
}

RetinexTerms retinex_loss(const torch::Tensor& reflectance, const torch::Tensor& illumination,
                          const torch::Tensor& projection, const RetinexCoefficients& coeffs, double eps) {
    require_same_shape(reflectance, projection, "retinex_loss");
    if (illumination.dim() != reflectance.dim() || illumination.size(-1) != reflectance.size(-1) ||
        illumination.size(-2) != reflectance.size(-2) || illumination.size(-3) != 1) {
        fail(ErrorKind::ShapeError, "retinex_loss: illumination must be single-channel with matching size");
    }
    RetinexTerms t;
    t.reconstruction = (illumination * reflectance - projection).square().mean();
    auto pseudo = projection / illumination.detach().clamp(eps, 1.0);
    t.pseudo_reflectance = (reflectance - pseudo).square().mean();
    auto [gx, gy] = forward_gradients(illumination);
    t.smoothness = gx.abs().mean() + gy.abs().mean();
    t.gradient_reg = (gx.square() + gy.square()).mean();
    t.weighted = coeffs.reconstruction * t.reconstruction + coeffs.pseudo_reflectance * t.pseudo_reflectance +
                 coeffs.smoothness * t.smoothness + coeffs.gradient_reg * t.gradient_reg;
    return t;
}

torch::Tensor perceptual_loss(const FeatureExtractor* extractor, const torch::Tensor& a, const torch::Tensor& b) {
    if (extractor == nullptr) fail(ErrorKind::DependencyError, "perceptual loss needs a feature extractor");
    return feature_distance(*extractor, a, b);
}

LossTerms total_loss(const LossWeights& weights, const RetinexCoefficients& coeffs, const ForwardArtifacts& a,
                     const ForwardArtifacts& b, const FeatureExtractor* extractor, double eps, double retinex_lambda) {
    weights.validate();
    LossTerms t;
    t.projection = 0.5 * (projection_loss(a.projection, a.input) + projection_loss(b.projection, b.input));
    t.consistency = consistency_loss(a.reflectance_f, b.reflectance_f);

    auto member_retinex = [&](const ForwardArtifacts& f) {
        auto illum = f.illumination_f;
        if (retinex_lambda != 1.0) illum = illum.clamp(eps, 1.0).pow(retinex_lambda);
        return retinex_loss(f.reflectance_f, illum, f.projection, coeffs, eps);
    };
    auto ra = member_retinex(a);
    auto rb = member_retinex(b);
    t.retinex_terms.reconstruction = 0.5 * (ra.reconstruction + rb.reconstruction);
    t.retinex_terms.pseudo_reflectance = 0.5 * (ra.pseudo_reflectance + rb.pseudo_reflectance);
    t.retinex_terms.smoothness = 0.5 * (ra.smoothness + rb.smoothness);
    t.retinex_terms.gradient_reg = 0.5 * (ra.gradient_reg + rb.gradient_reg);
    t.retinex_terms.weighted = 0.5 * (ra.weighted + rb.weighted);
    t.retinex = t.retinex_terms.weighted;

    if (weights.perceptual > 0.0) {
        t.perceptual = 0.5 * (perceptual_loss(extractor, a.enhanced, a.projection.detach()) +
                              perceptual_loss(extractor, b.enhanced, b.projection.detach()));
    } else {
        t.perceptual = torch::zeros({}, t.projection.options());
    }

    t.total = weights.projection * t.projection + weights.consistency * t.consistency +
              weights.retinex * t.retinex + weights.perceptual * t.perceptual;
    return t;
}

}  // namespace llie
