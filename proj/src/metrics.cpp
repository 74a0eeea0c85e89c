#include "llie/metrics.hpp"

#include <cmath>

#include <opencv2/imgproc.hpp>

#include "llie/error.hpp"

namespace llie {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* who) {
    if (a.empty() || b.empty()) fail(ErrorKind::InvalidInput, std::string(who) + ": empty image");
    if (!a.tensor().sizes().equals(b.tensor().sizes())) {
        fail(ErrorKind::ShapeError, std::string(who) + ": shape mismatch");
    }
}

cv::Mat luma_mat(const ImageTensor& img) {
    auto y = luma(img.tensor().to(torch::kFloat64)).squeeze(0).contiguous();
    return cv::Mat(static_cast<int>(y.size(0)), static_cast<int>(y.size(1)), CV_64F, y.data_ptr<double>()).clone();
}

cv::Mat gaussian_filter(const cv::Mat& x) {
    static const cv::Mat k = cv::getGaussianKernel(kSsimWindow, kSsimSigma, CV_64F);
    cv::Mat out;
    cv::sepFilter2D(x, out, CV_64F, k, k, cv::Point(-1, -1), 0.0, cv::BORDER_REFLECT);
    return out;
}

}  // namespace

double psnr(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "psnr");
    const double mse =
        (a.tensor().to(torch::kFloat64) - b.tensor().to(torch::kFloat64)).square().mean().item<double>();
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "ssim");
    if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
        fail(ErrorKind::InvalidInput, "ssim: image smaller than the 11x11 window");
    }
    const cv::Mat x = luma_mat(a);
    const cv::Mat y = luma_mat(b);

    const cv::Mat mx = gaussian_filter(x);
    const cv::Mat my = gaussian_filter(y);
    const cv::Mat vx = gaussian_filter(x.mul(x)) - mx.mul(mx);
    const cv::Mat vy = gaussian_filter(y.mul(y)) - my.mul(my);
    const cv::Mat cxy = gaussian_filter(x.mul(y)) - mx.mul(my);

    const double c1 = kK1 * kK1;
    const double c2 = kK2 * kK2;
    cv::Mat num = (2.0 * mx.mul(my) + c1).mul(2.0 * cxy + c2);
    cv::Mat den = (mx.mul(mx) + my.mul(my) + c1).mul(vx + vy + c2);
    cv::Mat map;
    cv::divide(num, den, map);

    const int r = kSsimWindow / 2;
    const cv::Rect valid(r, r, x.cols - 2 * r, x.rows - 2 * r);
    return cv::mean(map(valid))[0];
}

double perceptual_distance(const FeatureExtractor* extractor, const ImageTensor& a, const ImageTensor& b) {
    if (extractor == nullptr) fail(ErrorKind::DependencyError, "perceptual distance needs a feature extractor");
    require_same_shape(a, b, "perceptual_distance");
    if (a.channels() != 3) fail(ErrorKind::ShapeError, "perceptual distance needs RGB images");
    torch::NoGradGuard no_grad;
    auto d = feature_distance(*extractor, a.batched(), b.batched());
    return std::max(0.0, d.to(torch::kFloat64).item<double>());
}

}  // namespace llie
