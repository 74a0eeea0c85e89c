#include "llie/image.hpp"

#include <cmath>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "llie/error.hpp"

namespace llie {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

namespace {

void validate_chw(const torch::Tensor& t) {
    if (!t.defined()) fail(ErrorKind::InvalidInput, "undefined image tensor");
    if (t.dim() != 3) fail(ErrorKind::ShapeError, "image must be (C,H,W), got " + std::to_string(t.dim()) + " dims");
    if (t.size(0) != 1 && t.size(0) != 3) {
        fail(ErrorKind::ShapeError, "image must have 1 or 3 channels, got " + std::to_string(t.size(0)));
    }
    if (t.size(1) < ImageTensor::kMinSide || t.size(2) < ImageTensor::kMinSide) {
        fail(ErrorKind::InvalidInput, "image sides must be >= 8, got " + std::to_string(t.size(1)) + "x" +
                                          std::to_string(t.size(2)));
    }
}

// (C,H,W) float32 tensor <-> HWC cv::Mat, RGB order kept.
cv::Mat to_mat(const torch::Tensor& chw) {
    auto hwc = chw.permute({1, 2, 0}).contiguous();
    const int h = static_cast<int>(hwc.size(0));
    const int w = static_cast<int>(hwc.size(1));
    const int c = static_cast<int>(hwc.size(2));
    cv::Mat m(h, w, CV_32FC(c), hwc.data_ptr<float>());
    return m.clone();
}

torch::Tensor from_mat(const cv::Mat& m) {
    cv::Mat cont = m.isContinuous() ? m : m.clone();
    auto t = torch::from_blob(cont.data, {cont.rows, cont.cols, cont.channels()}, torch::kFloat32);
    return t.permute({2, 0, 1}).contiguous().clone();
}

}  // namespace

ImageTensor::ImageTensor(torch::Tensor chw) {
    validate_chw(chw);
    data_ = chw.to(torch::kFloat32).contiguous();
    if (!torch::isfinite(data_).all().item<bool>()) fail(ErrorKind::InvalidInput, "image contains NaN/Inf");
    if (data_.min().item<float>() < 0.0f || data_.max().item<float>() > 1.0f) {
        fail(ErrorKind::InvalidInput, "image values outside [0,1]");
    }
}

ImageTensor ImageTensor::clamped(const torch::Tensor& chw) {
    validate_chw(chw);
    auto t = chw.detach().to(torch::kFloat32);
    if (!torch::isfinite(t).all().item<bool>()) fail(ErrorKind::InvalidInput, "image contains NaN/Inf");
    return ImageTensor(t.clamp(0.0, 1.0));
}

ImageTensor ImageTensor::filled(int64_t channels, int64_t height, int64_t width, float value) {
    return ImageTensor(torch::full({channels, height, width}, value, torch::kFloat32));
}

ExposurePair::ExposurePair(ImageTensor a, ImageTensor b, std::string id)
    : low_a(std::move(a)), low_b(std::move(b)), scene_id(std::move(id)) {
    if (scene_id.empty()) fail(ErrorKind::InvalidInput, "exposure pair needs a scene id");
    if (!low_a.tensor().sizes().equals(low_b.tensor().sizes())) {
        fail(ErrorKind::ShapeError, "exposure pair members differ in shape");
    }
}

ImageTensor load_image(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) fail(ErrorKind::NotFound, path.string());

    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty()) fail(ErrorKind::DecodeError, "cannot decode " + path.string());
    if (raw.rows == 0 || raw.cols == 0) fail(ErrorKind::InvalidInput, "zero-area image " + path.string());

    float scale = 0.0f;
    switch (raw.depth()) {
        case CV_8U: scale = 255.0f; break;
        case CV_16U: scale = 65535.0f; break;
        default: fail(ErrorKind::DecodeError, "unsupported bit depth in " + path.string());
    }

    cv::Mat rgb;
    switch (raw.channels()) {
        case 1: cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB); break;
        case 3: cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB); break;
        case 4: cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB); break;
        default: fail(ErrorKind::DecodeError, "unsupported channel count in " + path.string());
    }

    const auto dtype = rgb.depth() == CV_8U ? torch::kUInt8 : torch::kInt32;
    cv::Mat src = rgb;
    if (rgb.depth() == CV_16U) rgb.convertTo(src, CV_32S);
    auto hwc = torch::from_blob(src.data, {src.rows, src.cols, 3}, dtype);
    // Divide in float32 so the 8-bit levels map to exactly v/255.
    auto chw = hwc.permute({2, 0, 1}).to(torch::kFloat32).div(scale).contiguous();
    return ImageTensor(chw);
}

void save_image(const ImageTensor& img, const fs::path& path) {
    if (img.empty()) fail(ErrorKind::InvalidInput, "cannot save an empty image");
    auto t = img.tensor();
    if (t.size(0) == 1) t = t.expand({3, t.size(1), t.size(2)});
    auto u8 = t.mul(255.0f).round().clamp(0, 255).to(torch::kUInt8).permute({1, 2, 0}).contiguous();
    cv::Mat rgb(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC3, u8.data_ptr<uint8_t>());
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);

    const auto parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(parent, ec)) fail(ErrorKind::IoError, "directory does not exist: " + parent.string());
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), bgr, {cv::IMWRITE_PNG_COMPRESSION, 3});
    } catch (const cv::Exception& e) {
        fail(ErrorKind::IoError, path.string() + ": " + e.what());
    }
    if (!ok) fail(ErrorKind::IoError, "cannot write " + path.string());
}

torch::Tensor resize_bilinear(const torch::Tensor& img, int64_t height, int64_t width, bool align_corners) {
    if (height <= 0 || width <= 0) fail(ErrorKind::InvalidInput, "resize target must be positive");
    if (img.dim() != 3 && img.dim() != 4) fail(ErrorKind::ShapeError, "resize expects (C,H,W) or (B,C,H,W)");
    const bool unbatched = img.dim() == 3;
    auto x = unbatched ? img.unsqueeze(0) : img;
    if (x.size(2) == height && x.size(3) == width) return img.clone();
    auto y = F::interpolate(x, F::InterpolateFuncOptions()
                                   .size(std::vector<int64_t>{height, width})
                                   .mode(torch::kBilinear)
                                   .align_corners(align_corners));
    return unbatched ? y.squeeze(0) : y;
}

ImageTensor resize(const ImageTensor& img, int64_t height, int64_t width, bool align_corners) {
    if (height < ImageTensor::kMinSide || width < ImageTensor::kMinSide) {
        fail(ErrorKind::InvalidInput, "resize target must be at least 8x8");
    }
    return ImageTensor::clamped(resize_bilinear(img.tensor(), height, width, align_corners));
}

torch::Tensor luma(const torch::Tensor& img) {
    const int64_t channel_dim = img.dim() == 4 ? 1 : 0;
    if (img.size(channel_dim) == 1) return img;
    auto r = img.select(channel_dim, 0);
    auto g = img.select(channel_dim, 1);
    auto b = img.select(channel_dim, 2);
    return (0.2126 * r + 0.7152 * g + 0.0722 * b).unsqueeze(channel_dim);
}

double mean_luma(const ImageTensor& img) {
    return luma(img.tensor().to(torch::kFloat64)).mean().item<double>();
}

ImageTensor flip_horizontal(const ImageTensor& img) {
    return ImageTensor(img.tensor().flip({2}));
}

ImageTensor rotate(const ImageTensor& img, double degrees) {
    if (degrees == 0.0) return img;
    cv::Mat src = to_mat(img.tensor());
    const cv::Point2f centre(static_cast<float>(src.cols - 1) / 2.0f, static_cast<float>(src.rows - 1) / 2.0f);
    cv::Mat rot = cv::getRotationMatrix2D(centre, degrees, 1.0);
    cv::Mat dst;
    cv::warpAffine(src, dst, rot, src.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
    return ImageTensor::clamped(from_mat(dst));
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
    // splitmix64 finaliser over a combined word
    uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

AugmentParams sample_augment_params(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> angle(-kMaxRotationDegrees, kMaxRotationDegrees);
    std::uniform_real_distribution<double> gain(kMinBrightnessGain, kMaxBrightnessGain);
    AugmentParams p;
    p.flip = coin(rng);
    p.angle_degrees = angle(rng);
    p.gain_a = gain(rng);
    p.gain_b = gain(rng);
    return p;
}

ExposurePair apply_augment(const ExposurePair& pair, const AugmentParams& params) {
    auto geometric = [&](const ImageTensor& img) {
        ImageTensor out = params.flip ? flip_horizontal(img) : img;
        return rotate(out, params.angle_degrees);
    };
    auto a = geometric(pair.low_a).tensor().mul(params.gain_a);
    auto b = geometric(pair.low_b).tensor().mul(params.gain_b);
    return {ImageTensor::clamped(a), ImageTensor::clamped(b), pair.scene_id};
}

ExposurePair augment(const ExposurePair& pair, uint64_t seed) {
    return apply_augment(pair, sample_augment_params(seed));
}

ExposureParams sample_exposure_params(uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0xE4905E));
    std::uniform_real_distribution<double> gain(0.7, 1.3);
    std::uniform_real_distribution<double> gamma(0.8, 1.2);
    ExposureParams p;
    p.gain = gain(rng);
    p.gamma = gamma(rng);
    return p;
}

ImageTensor apply_gain_gamma(const ImageTensor& img, double gain, double gamma) {
    if (!(gain > 0.0) || !(gamma > 0.0)) fail(ErrorKind::InvalidInput, "gain and gamma must be positive");
    auto t = img.tensor().to(torch::kFloat64).pow(gamma).mul(gain).clamp(0.0, 1.0);
    return ImageTensor(t.to(torch::kFloat32));
}

ExposurePair synth_second_exposure(const ImageTensor& img, uint64_t seed, std::string scene_id) {
    const auto p = sample_exposure_params(seed);
    return {img, apply_gain_gamma(img, p.gain, p.gamma), std::move(scene_id)};
}

}  // namespace llie
