#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace llie {

/// Weights of the four objective terms: projection, consistency, Retinex, perceptual.
struct LossWeights {
    double projection = 0.5;
    double consistency = 1.0;
    double retinex = 1.0;
    double perceptual = 0.1;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

/// Internal coefficients of the Retinex term.
struct RetinexCoefficients {
    double reconstruction = 1.0;
    double pseudo_reflectance = 0.5;
    double smoothness = 0.1;
    double gradient_reg = 0.01;

    void validate() const;
    bool operator==(const RetinexCoefficients&) const = default;
};

struct ChannelGuidanceConfig {
    int64_t features = 16;
    int64_t reduction = 8;
    int64_t spatial_kernel = 7;
    bool operator==(const ChannelGuidanceConfig&) const = default;
};

struct ColorEnhancementConfig {
    int64_t features = 8;
    std::vector<int64_t> kernels{3, 5, 7};
    int64_t hidden = 8;
    bool operator==(const ColorEnhancementConfig&) const = default;
};

struct ExposureCorrectionConfig {
    int64_t features = 16;
    std::vector<int64_t> dilations{1, 2, 4};
    double saturation_threshold = 0.95;
    bool operator==(const ExposureCorrectionConfig&) const = default;
};

/// Architecture hyperparameters for all six networks plus recomposition settings.
struct ModelConfig {
    std::vector<int64_t> n_net_widths{3, 32, 32, 3};
    std::vector<int64_t> r_net_widths{3, 32, 32, 32, 3};
    std::vector<int64_t> l_net_widths{3, 32, 32, 32, 1};
    int64_t kernel_size = 3;
    ChannelGuidanceConfig cg;
    ColorEnhancementConfig ce;
    ExposureCorrectionConfig oec;
    double lambda = 0.2;
    double illumination_epsilon = 1e-4;
    // The Retinex reconstruction term uses the physical model (exponent 1);
    // lambda only shapes the enhanced output.
    bool lambda_in_retinex_loss = false;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

inline constexpr const char* kManifestFormat = "llie-checkpoint";
inline constexpr int kManifestVersion = 1;
inline constexpr const char* kArchitecture = "retinex-ncg-ce-oec";

struct Manifest {
    ModelConfig model;
    LossWeights weights;
    RetinexCoefficients retinex;
    int64_t iteration = 0;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const Manifest&) const = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const RetinexCoefficients& c);
void from_json(const nlohmann::json& j, RetinexCoefficients& c);
void to_json(nlohmann::json& j, const ModelConfig& m);
void from_json(const nlohmann::json& j, ModelConfig& m);
void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

std::string dump_manifest(const Manifest& m);
/// Throws CheckpointError when the text is not a manifest this build supports.
Manifest parse_manifest(const std::string& text);

}  // namespace llie
