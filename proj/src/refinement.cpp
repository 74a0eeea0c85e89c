#include "llie/refinement.hpp"

#include "llie/decomposition.hpp"
#include "llie/error.hpp"

namespace llie {

namespace {

torch::nn::Conv2d make_conv(int64_t in, int64_t out, int64_t kernel, int64_t dilation = 1) {
    return torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, kernel).padding(dilation * (kernel / 2)).dilation(dilation));
}

}  // namespace

torch::Tensor safe_logit(const torch::Tensor& x, double eps) {
    auto c = x.clamp(eps, 1.0 - eps);
    return torch::log(c) - torch::log1p(-c);
}

ChannelGuidanceImpl::ChannelGuidanceImpl(const ChannelGuidanceConfig& cfg) {
    const int64_t hidden = std::max<int64_t>(1, cfg.features / cfg.reduction);
    head_ = register_module("head", make_conv(3, cfg.features, 3));
    fc1_ = register_module("fc1", torch::nn::Linear(cfg.features, hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(hidden, cfg.features));
    spatial_ = register_module("spatial", make_conv(2, 1, cfg.spatial_kernel));
    refine_ = register_module("refine", make_conv(cfg.features, 3, 3));
    kaiming_init(*this);
}

torch::Tensor ChannelGuidanceImpl::features(const torch::Tensor& reflectance) {
    return torch::relu(head_->forward(reflectance));
}

torch::Tensor ChannelGuidanceImpl::channel_attention(const torch::Tensor& f) {
    auto pooled = f.mean({2, 3});
    auto w = torch::sigmoid(fc2_->forward(torch::relu(fc1_->forward(pooled))));
    return w.unsqueeze(-1).unsqueeze(-1);
}

torch::Tensor ChannelGuidanceImpl::spatial_attention(const torch::Tensor& f) {
    auto cues = torch::cat({f.mean(1, true), std::get<0>(f.max(1, true))}, 1);
    return torch::sigmoid(spatial_->forward(cues));
}

torch::Tensor ChannelGuidanceImpl::forward(const torch::Tensor& reflectance) {
    require_batch(reflectance, 3, "cg");
    auto f = features(reflectance);
    auto gated = f * channel_attention(f) * spatial_attention(f);
    auto residual = torch::tanh(refine_->forward(gated));
    return reflectance + reflectance * (1.0 - reflectance) * residual;
}

ColorEnhancementImpl::ColorEnhancementImpl(const ColorEnhancementConfig& cfg, double eps) : eps_(eps) {
    for (auto k : cfg.kernels) branches_->push_back(make_conv(1, cfg.features, k));
    register_module("branches", branches_);
    const int64_t total = cfg.features * static_cast<int64_t>(cfg.kernels.size());
    fc1_ = register_module("fc1", torch::nn::Linear(total, cfg.hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(cfg.hidden, total));
    fuse_ = register_module("fuse", make_conv(total, 1, 1));
    kaiming_init(*this);
}

torch::Tensor ColorEnhancementImpl::multiscale_features(const torch::Tensor& illumination) {
    std::vector<torch::Tensor> parts;
    parts.reserve(branches_->size());
    for (const auto& b : *branches_) parts.push_back(torch::relu(b->as<torch::nn::Conv2d>()->forward(illumination)));
    return torch::cat(parts, 1);
}

torch::Tensor ColorEnhancementImpl::modulation_weights(const torch::Tensor& f) {
    auto stats = f.mean({2, 3});
    auto w = torch::sigmoid(fc2_->forward(torch::relu(fc1_->forward(stats))));
    return w.unsqueeze(-1).unsqueeze(-1);
}

torch::Tensor ColorEnhancementImpl::forward(const torch::Tensor& illumination) {
    require_batch(illumination, 1, "ce");
    auto f = multiscale_features(illumination);
    auto modulated = f * modulation_weights(f);
    return torch::sigmoid(safe_logit(illumination, eps_) + fuse_->forward(modulated));
}

torch::Tensor saturation_prior(const torch::Tensor& img, double threshold) {
    require_batch(img, 3, "saturation_prior");
    return (luma(img) > threshold).to(img.scalar_type());
}

OverExposureCorrectionImpl::OverExposureCorrectionImpl(const ExposureCorrectionConfig& cfg, double eps)
    : threshold_(cfg.saturation_threshold), eps_(eps) {
    head_ = register_module("head", make_conv(3, cfg.features, 3));
    for (auto d : cfg.dilations) {
        block_a_->push_back(make_conv(cfg.features, cfg.features, 3, d));
        block_b_->push_back(make_conv(cfg.features, cfg.features, 3, d));
        gates_->push_back(make_conv(cfg.features + 1, cfg.features, 1));
    }
    register_module("block_a", block_a_);
    register_module("block_b", block_b_);
    register_module("gates", gates_);
    correct_ = register_module("correct", make_conv(cfg.features, 3, 3));
    mask_ = register_module("mask", make_conv(cfg.features, 1, 3));
    kaiming_init(*this);
}

OecOutput OverExposureCorrectionImpl::forward(const torch::Tensor& img, MaskMode mode) {
    require_batch(img, 3, "oec");
    OecOutput out;
    out.prior = saturation_prior(img, threshold_);

    auto h = torch::relu(head_->forward(img));
    for (size_t k = 0; k < block_a_->size(); ++k) {
        auto update = block_b_[k]->as<torch::nn::Conv2d>()->forward(
            torch::relu(block_a_[k]->as<torch::nn::Conv2d>()->forward(h)));
        auto gate = torch::sigmoid(gates_[k]->as<torch::nn::Conv2d>()->forward(torch::cat({h, out.prior}, 1)));
        h = h + gate * update;
    }
    out.corrected = torch::sigmoid(safe_logit(img, eps_) + correct_->forward(h));

    switch (mode) {
        case MaskMode::Learned: out.mask = torch::sigmoid(mask_->forward(h)); break;
        case MaskMode::ForceZero: out.mask = torch::zeros_like(out.prior); break;
        case MaskMode::ForceOne: out.mask = torch::ones_like(out.prior); break;
    }
    out.image = out.mask * out.corrected + (1.0 - out.mask) * img;
    return out;
}

torch::Tensor recompose(const torch::Tensor& reflectance, const torch::Tensor& illumination, double lambda,
                        double eps) {
    if (!(lambda > 0.0)) fail(ErrorKind::InvalidInput, "lambda must be > 0");
    if (reflectance.dim() != illumination.dim() || reflectance.dim() < 3) {
        fail(ErrorKind::ShapeError, "recompose: rank mismatch");
    }
    const int64_t cdim = reflectance.dim() - 3;
    const auto rs = reflectance.sizes();
    const auto ls = illumination.sizes();
    if (rs[cdim + 1] != ls[cdim + 1] || rs[cdim + 2] != ls[cdim + 2] ||
        (ls[cdim] != 1 && ls[cdim] != rs[cdim]) || (cdim == 1 && rs[0] != ls[0])) {
        fail(ErrorKind::ShapeError, "recompose: incompatible reflectance/illumination shapes");
    }
    return illumination.clamp(eps, 1.0).pow(lambda) * reflectance;
}

ImageTensor recompose(const ImageTensor& reflectance, const ImageTensor& illumination, double lambda, double eps) {
    return ImageTensor::clamped(recompose(reflectance.tensor(), illumination.tensor(), lambda, eps));
}

}  // namespace llie
