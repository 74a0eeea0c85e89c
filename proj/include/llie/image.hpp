#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

namespace llie {

/// Float image in [0,1], channels-first (C,H,W), C in {1,3}, H,W >= 8.
///
/// The wrapped tensor is always float32 and contiguous. Construction validates
/// the invariants; use `ImageTensor::clamped` when the source may stray outside
/// the unit range.
class ImageTensor {
public:
    static constexpr int64_t kMinSide = 8;

    ImageTensor() = default;
    explicit ImageTensor(torch::Tensor chw);

    static ImageTensor clamped(const torch::Tensor& chw);
    static ImageTensor filled(int64_t channels, int64_t height, int64_t width, float value);

    const torch::Tensor& tensor() const noexcept { return data_; }
    torch::Tensor batched() const { return data_.unsqueeze(0); }

    int64_t channels() const { return data_.size(0); }
    int64_t height() const { return data_.size(1); }
    int64_t width() const { return data_.size(2); }
    bool empty() const noexcept { return !data_.defined(); }

    static constexpr const char* color_space() { return "sRGB-normalized"; }

private:
    torch::Tensor data_;
};

/// Two observations of one scene under different illumination.
struct ExposurePair {
    ImageTensor low_a;
    ImageTensor low_b;
    std::string scene_id;

    ExposurePair() = default;
    ExposurePair(ImageTensor a, ImageTensor b, std::string id);
};

ImageTensor load_image(const std::filesystem::path& path);
void save_image(const ImageTensor& img, const std::filesystem::path& path);

/// Bilinear resampling of any (C,H,W) or (B,C,H,W) float tensor.
torch::Tensor resize_bilinear(const torch::Tensor& img, int64_t height, int64_t width,
                              bool align_corners = false);
ImageTensor resize(const ImageTensor& img, int64_t height, int64_t width, bool align_corners = false);

/// Rec.709 luma of a (3,H,W) or (B,3,H,W) tensor; single-channel inputs pass through.
torch::Tensor luma(const torch::Tensor& img);
double mean_luma(const ImageTensor& img);

ImageTensor flip_horizontal(const ImageTensor& img);
/// Rotation about the image centre, bilinear, reflection-padded borders.
ImageTensor rotate(const ImageTensor& img, double degrees);

struct AugmentParams {
    bool flip = false;
    double angle_degrees = 0.0;
    double gain_a = 1.0;
    double gain_b = 1.0;
};

inline constexpr double kMaxRotationDegrees = 15.0;
inline constexpr double kMinBrightnessGain = 0.9;
inline constexpr double kMaxBrightnessGain = 1.1;

AugmentParams sample_augment_params(uint64_t seed);
ExposurePair apply_augment(const ExposurePair& pair, const AugmentParams& params);
ExposurePair augment(const ExposurePair& pair, uint64_t seed);

struct ExposureParams {
    double gain = 1.0;
    double gamma = 1.0;
};

ExposureParams sample_exposure_params(uint64_t seed);
/// clamp(gain * img^gamma); spatially uniform, so reflectance is untouched.
ImageTensor apply_gain_gamma(const ImageTensor& img, double gain, double gamma);
ExposurePair synth_second_exposure(const ImageTensor& img, uint64_t seed,
                                   std::string scene_id = "synthetic");

/// Mixes two 64-bit values into a well-spread seed.
uint64_t mix_seed(uint64_t a, uint64_t b);

}  // namespace llie
