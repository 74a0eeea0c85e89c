#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <torch/torch.h>

#include "llie/decomposition.hpp"
#include "llie/image.hpp"
#include "llie/manifest.hpp"
#include "llie/refinement.hpp"

namespace llie {

/// Which refinement stages run. A disabled stage is an identity pass-through.
struct ModuleToggles {
    bool use_cg = true;
    bool use_ce = true;
    bool use_oec = true;
    bool operator==(const ModuleToggles&) const = default;
};

/// Every intermediate of one batched forward pass.
struct ForwardArtifacts {
    torch::Tensor input;           // I
    torch::Tensor projection;      // i
    torch::Tensor reflectance;     // R
    torch::Tensor illumination;    // L
    torch::Tensor reflectance_f;   // R_f
    torch::Tensor illumination_f;  // L_f
    torch::Tensor recomposed;      // L_f^lambda * R_f
    torch::Tensor enhanced;        // I_f after over-exposure correction
    torch::Tensor blend_mask;
};

/// decompose -> CG -> CE -> recompose -> OEC, in that fixed order.
class EnhancerImpl : public torch::nn::Module {
public:
    explicit EnhancerImpl(const ModelConfig& cfg);

    ForwardArtifacts forward(const torch::Tensor& batch, const ModuleToggles& toggles = {},
                             MaskMode mask_mode = MaskMode::Learned);

    const ModelConfig& config() const { return cfg_; }

    ConvStack n_net{nullptr};
    ConvStack r_net{nullptr};
    ConvStack l_net{nullptr};
    ChannelGuidance cg{nullptr};
    ColorEnhancement ce{nullptr};
    OverExposureCorrection oec{nullptr};

private:
    ModelConfig cfg_;
};
TORCH_MODULE(Enhancer);

/// Parameters of all six networks plus the manifest describing them.
class ModelBundle {
public:
    explicit ModelBundle(Manifest manifest = {}, uint64_t init_seed = 0);

    Enhancer& net() { return net_; }
    const Enhancer& net() const { return net_; }
    Manifest& manifest() { return manifest_; }
    const Manifest& manifest() const { return manifest_; }
    const ModelConfig& config() const { return manifest_.model; }

    /// Deep copy with independent parameter storage.
    ModelBundle clone() const;

private:
    Manifest manifest_;
    Enhancer net_{nullptr};
};

DecompositionResult decompose(ModelBundle& bundle, const ImageTensor& img);
EnhancedImage enhance(ModelBundle& bundle, const ImageTensor& img, const ModuleToggles& toggles = {});
/// Full inference artifacts for a single image (no gradient tracking).
ForwardArtifacts infer(ModelBundle& bundle, const ImageTensor& img, const ModuleToggles& toggles = {});

/// Checkpoint directory: manifest.json + tensors.pt (+ optimizer.pt when given).
/// Written to a sibling temp directory first and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, const ModelBundle& bundle,
                     torch::optim::Optimizer* optimizer = nullptr);
/// Fails closed (CheckpointError) on a missing, corrupt or mismatched checkpoint.
ModelBundle load_checkpoint(const std::filesystem::path& dir);
/// Returns false when the checkpoint carries no optimizer state.
bool load_optimizer_state(const std::filesystem::path& dir, torch::optim::Optimizer& optimizer);

}  // namespace llie
