#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <torch/script.h>
#include <torch/torch.h>

namespace llie {

/// Differentiable image -> feature-pyramid map used by the perceptual loss
/// and the LPIPS-like distance. Input is (B,3,H,W) in [0,1].
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<torch::Tensor> features(const torch::Tensor& batch) const = 0;
    virtual std::string name() const = 0;
};

/// Built-in fixed backbone: opponent-colour transform followed, at each of
/// `levels` pyramid levels, by a Gaussian-derivative filter bank (blur, d/dx,
/// d/dy, Laplacian), half-wave rectified into positive and negative parts.
/// Bias-free and positively homogeneous, so unit-normalised features ignore
/// global exposure.
class FilterBankExtractor final : public FeatureExtractor {
public:
    explicit FilterBankExtractor(int levels = 3, double sigma = 1.0);

    std::vector<torch::Tensor> features(const torch::Tensor& batch) const override;
    std::string name() const override { return "filterbank"; }

private:
    int levels_;
    torch::Tensor opponent_;  // (3,3)
    torch::Tensor bank_;      // (8,1,k,k) applied depthwise per opponent channel
};

/// TorchScript backbone (e.g. a traced VGG trunk) returning a list or tuple
/// of feature maps.
class ScriptedExtractor final : public FeatureExtractor {
public:
    explicit ScriptedExtractor(const std::filesystem::path& path);

    std::vector<torch::Tensor> features(const torch::Tensor& batch) const override;
    std::string name() const override { return "torchscript:" + path_.filename().string(); }

private:
    std::filesystem::path path_;
    mutable torch::jit::script::Module module_;
};

/// "filterbank", "none", a path to a TorchScript file, or "cache:<file>"
/// resolved under $LLIE_CACHE. Returns nullptr for "none"; throws
/// DependencyError when a scripted model cannot be found or loaded.
std::shared_ptr<FeatureExtractor> make_extractor(const std::string& spec);

/// Mean over layers of the spatially averaged squared distance between
/// channel-unit-normalised feature vectors. Differentiable in `a` and `b`.
torch::Tensor feature_distance(const FeatureExtractor& extractor, const torch::Tensor& a, const torch::Tensor& b);

}  // namespace llie
