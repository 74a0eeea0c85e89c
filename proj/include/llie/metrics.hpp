#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "llie/features.hpp"
#include "llie/image.hpp"

namespace llie {

/// Reported in place of +inf for identical images.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) over all elements, peak 1.0.
double psnr(const ImageTensor& a, const ImageTensor& b);

/// Windowed SSIM on Rec.709 luma (the channel itself for gray input):
/// 11-tap Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, averaged over the
/// windows that lie fully inside the image.
double ssim(const ImageTensor& a, const ImageTensor& b);

/// LPIPS-like distance in the extractor's feature space. Not calibrated LPIPS.
double perceptual_distance(const FeatureExtractor* extractor, const ImageTensor& a, const ImageTensor& b);

// ---------------------------------------------------------------------------
// NIQE

inline constexpr int kNiqePatch = 96;
inline constexpr int kNiqeFeatures = 36;

/// Multivariate Gaussian model of pristine patch statistics.
struct NsParams {
    std::vector<double> mean;        // kNiqeFeatures
    std::vector<double> covariance;  // row-major kNiqeFeatures^2
    std::string source;
};

NsParams load_ns_params(const std::filesystem::path& path);
void save_ns_params(const NsParams& params, const std::filesystem::path& path);
/// The model fitted on the bundled corpus, `data/niqe_params.json`.
std::filesystem::path default_ns_params_path();

/// Luma scaled to [0,255] in double precision, as NIQE consumes it.
cv::Mat niqe_gray(const ImageTensor& img);

/// One row of 36 features per 96x96 patch over a centred grid: GGD shape and
/// variance of the MSCN map plus AGGD shape, mean and left/right variance of
/// the four neighbour products, at full and half resolution. Also returns
/// each patch's sharpness (mean local deviation) in `sharpness` when given.
cv::Mat niqe_patch_features(const cv::Mat& gray, std::vector<double>* sharpness = nullptr);

/// Fits the pristine model from the sharpest patches (sharpness above
/// `threshold` times the image maximum) of each image. The model is averaged
/// with its mirror image (diagonal features swapped) so scores do not change
/// under horizontal flips.
NsParams fit_ns_params(const std::vector<ImageTensor>& images, double threshold = 0.75);

/// Distance between the image's patch statistics and the pristine model.
/// Lower is more natural. Throws InvalidInput below one 96x96 patch.
double niqe(const ImageTensor& img, const NsParams& params);

}  // namespace llie
