#include "llie/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>
#include <opencv2/imgproc.hpp>

#include "llie/error.hpp"

namespace llie {

namespace {

using nlohmann::json;

constexpr int kPerScale = kNiqeFeatures / 2;
constexpr double kTiny = 1e-12;

struct GammaGrid {
    std::vector<double> shape;
    std::vector<double> ggd_ratio;   // G(1/a)G(3/a) / G(2/a)^2
    std::vector<double> aggd_ratio;  // G(2/a)^2 / (G(1/a)G(3/a))

    GammaGrid() {
        for (int k = 0; k <= 9800; ++k) {
            const double a = 0.2 + 0.001 * k;
            const double g1 = std::tgamma(1.0 / a);
            const double g2 = std::tgamma(2.0 / a);
            const double g3 = std::tgamma(3.0 / a);
            shape.push_back(a);
            ggd_ratio.push_back(g1 * g3 / (g2 * g2));
            aggd_ratio.push_back(g2 * g2 / (g1 * g3));
        }
    }

    static const GammaGrid& get() {
        static const GammaGrid grid;
        return grid;
    }

    double closest(const std::vector<double>& table, double target) const {
        size_t best = 0;
        double err = std::abs(table[0] - target);
        for (size_t k = 1; k < table.size(); ++k) {
            const double e = std::abs(table[k] - target);
            if (e < err) {
                err = e;
                best = k;
            }
        }
        return shape[best];
    }
};

void ggd_features(const std::vector<double>& v, double* out) {
    double sq = 0.0, ab = 0.0;
    for (double x : v) {
        sq += x * x;
        ab += std::abs(x);
    }
    sq /= static_cast<double>(v.size());
    ab /= static_cast<double>(v.size());
    const double rho = sq / (ab * ab + kTiny);
    out[0] = GammaGrid::get().closest(GammaGrid::get().ggd_ratio, rho);
    out[1] = sq;
}

void aggd_features(const std::vector<double>& v, double* out) {
    double left = 0.0, right = 0.0, sq = 0.0, ab = 0.0;
    size_t nl = 0, nr = 0;
    for (double x : v) {
        if (x < 0) {
            left += x * x;
            ++nl;
        } else if (x > 0) {
            right += x * x;
            ++nr;
        }
        sq += x * x;
        ab += std::abs(x);
    }
    const double n = static_cast<double>(v.size());
    const double left_std = nl ? std::sqrt(left / static_cast<double>(nl)) : 0.0;
    const double right_std = nr ? std::sqrt(right / static_cast<double>(nr)) : 0.0;
    const double g = left_std / (right_std + kTiny);
    const double rhat = (ab / n) * (ab / n) / (sq / n + kTiny);
    const double rnorm = rhat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));
    const double alpha = GammaGrid::get().closest(GammaGrid::get().aggd_ratio, rnorm);
    const double g1 = std::tgamma(1.0 / alpha);
    const double g2 = std::tgamma(2.0 / alpha);
    const double g3 = std::tgamma(3.0 / alpha);
    out[0] = alpha;
    out[1] = (right_std - left_std) * (g2 / g1) * std::sqrt(g1 / g3);
    out[2] = left_std * left_std;
    out[3] = right_std * right_std;
}

// Mean-subtracted contrast-normalised coefficients and the local deviation.
void mscn(const cv::Mat& img, cv::Mat& coeffs, cv::Mat& deviation) {
    cv::Mat mu, mu_sq;
    cv::GaussianBlur(img, mu, cv::Size(7, 7), 7.0 / 6.0, 7.0 / 6.0, cv::BORDER_REPLICATE);
    cv::GaussianBlur(img.mul(img), mu_sq, cv::Size(7, 7), 7.0 / 6.0, 7.0 / 6.0, cv::BORDER_REPLICATE);
    deviation = cv::abs(mu_sq - mu.mul(mu));
    cv::sqrt(deviation, deviation);
    coeffs = (img - mu) / (deviation + 1.0);
}

// Features of one square MSCN patch. Neighbour products wrap around inside
// the patch, which keeps the statistics exact under mirroring.
void patch_features(const cv::Mat& m, double* out) {
    const int p = m.rows;
    std::vector<double> values(m.begin<double>(), m.end<double>());
    ggd_features(values, out);
    constexpr std::array<std::array<int, 2>, 4> shifts{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};
    std::vector<double> prod(values.size());
    for (size_t s = 0; s < shifts.size(); ++s) {
        const auto [dy, dx] = shifts[s];
        for (int y = 0; y < p; ++y) {
            const double* row = m.ptr<double>(y);
            const double* nrow = m.ptr<double>((y + dy + p) % p);
            for (int x = 0; x < p; ++x) prod[static_cast<size_t>(y * p + x)] = row[x] * nrow[(x + dx + p) % p];
        }
        aggd_features(prod, out + 2 + 4 * s);
    }
}

cv::Mat to_mat(const std::vector<double>& v, int rows, int cols) {
    return cv::Mat(rows, cols, CV_64F, const_cast<double*>(v.data())).clone();
}

// Horizontal mirroring swaps the two diagonal orientations.
cv::Mat mirror_permutation() {
    cv::Mat p = cv::Mat::zeros(kNiqeFeatures, kNiqeFeatures, CV_64F);
    for (int k = 0; k < kNiqeFeatures; ++k) {
        int j = k;
        const int local = k % kPerScale;
        if (local >= 10 && local < 14) j = k + 4;
        else if (local >= 14 && local < 18) j = k - 4;
        p.at<double>(j, k) = 1.0;
    }
    return p;
}

void mean_and_cov(const cv::Mat& rows, cv::Mat& mean, cv::Mat& cov) {
    cv::calcCovarMatrix(rows, cov, mean, cv::COVAR_NORMAL | cv::COVAR_ROWS, CV_64F);
    if (rows.rows > 1) cov /= static_cast<double>(rows.rows - 1);
    else cov = cv::Mat::zeros(kNiqeFeatures, kNiqeFeatures, CV_64F);
}

}  // namespace

cv::Mat niqe_gray(const ImageTensor& img) {
    auto y = (luma(img.tensor().to(torch::kFloat64)) * 255.0).squeeze(0).contiguous();
    return cv::Mat(static_cast<int>(y.size(0)), static_cast<int>(y.size(1)), CV_64F, y.data_ptr<double>()).clone();
}

cv::Mat niqe_patch_features(const cv::Mat& gray, std::vector<double>* sharpness) {
    const int rows = gray.rows / kNiqePatch * kNiqePatch;
    const int cols = gray.cols / kNiqePatch * kNiqePatch;
    if (rows == 0 || cols == 0) fail(ErrorKind::InvalidInput, "niqe needs at least one 96x96 patch");
    const cv::Mat crop = gray(cv::Rect((gray.cols - cols) / 2, (gray.rows - rows) / 2, cols, rows)).clone();

    const int ny = rows / kNiqePatch;
    const int nx = cols / kNiqePatch;
    cv::Mat feats(ny * nx, kNiqeFeatures, CV_64F);
    if (sharpness) sharpness->assign(static_cast<size_t>(ny * nx), 0.0);

    cv::Mat scaled = crop;
    for (int scale = 0; scale < 2; ++scale) {
        if (scale == 1) cv::resize(crop, scaled, cv::Size(cols / 2, rows / 2), 0, 0, cv::INTER_AREA);
        cv::Mat coeffs, deviation;
        mscn(scaled, coeffs, deviation);
        const int p = kNiqePatch >> scale;
        for (int py = 0; py < ny; ++py) {
            for (int px = 0; px < nx; ++px) {
                const cv::Rect r(px * p, py * p, p, p);
                const int idx = py * nx + px;
                patch_features(coeffs(r).clone(), feats.ptr<double>(idx) + scale * kPerScale);
                if (scale == 0 && sharpness) (*sharpness)[static_cast<size_t>(idx)] = cv::mean(deviation(r))[0];
            }
        }
    }
    return feats;
}

NsParams fit_ns_params(const std::vector<ImageTensor>& images, double threshold) {
    if (images.empty()) fail(ErrorKind::InvalidInput, "niqe fit needs at least one image");
    cv::Mat selected;
    for (const auto& img : images) {
        std::vector<double> sharp;
        const cv::Mat feats = niqe_patch_features(niqe_gray(img), &sharp);
        const double cut = threshold * *std::max_element(sharp.begin(), sharp.end());
        for (int k = 0; k < feats.rows; ++k) {
            if (sharp[static_cast<size_t>(k)] > cut) selected.push_back(feats.row(k));
        }
    }
    if (selected.rows < 2) fail(ErrorKind::InvalidInput, "niqe fit selected fewer than two patches");

    cv::Mat mean, cov;
    mean_and_cov(selected, mean, cov);
    const cv::Mat p = mirror_permutation();
    const cv::Mat mean_s = 0.5 * (mean.t() + p * mean.t());
    const cv::Mat cov_s = 0.5 * (cov + p * cov * p.t());

    NsParams out;
    out.mean.assign(mean_s.begin<double>(), mean_s.end<double>());
    out.covariance.assign(cov_s.begin<double>(), cov_s.end<double>());
    out.source = "fitted on " + std::to_string(images.size()) + " images, " + std::to_string(selected.rows) +
                 " patches";
    return out;
}

double niqe(const ImageTensor& img, const NsParams& params) {
    if (params.mean.size() != kNiqeFeatures || params.covariance.size() != kNiqeFeatures * kNiqeFeatures) {
        fail(ErrorKind::DependencyError, "niqe parameters have the wrong size");
    }
    const cv::Mat feats = niqe_patch_features(niqe_gray(img));
    cv::Mat mean, cov;
    mean_and_cov(feats, mean, cov);

    const cv::Mat mu = to_mat(params.mean, 1, kNiqeFeatures);
    const cv::Mat sigma = to_mat(params.covariance, kNiqeFeatures, kNiqeFeatures);
    cv::Mat inv;
    cv::invert(0.5 * (sigma + cov), inv, cv::DECOMP_SVD);
    const cv::Mat d = mean - mu;
    const double q = cv::Mat(d * inv * d.t()).at<double>(0, 0);
    if (!std::isfinite(q)) throw NumericalError("niqe", "non-finite distance");
    return std::sqrt(std::max(0.0, q));
}

std::filesystem::path default_ns_params_path() { return std::filesystem::path(LLIE_DATA_DIR) / "niqe_params.json"; }

NsParams load_ns_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::DependencyError, "niqe parameters not found: " + path.string());
    NsParams p;
    try {
        const json j = json::parse(in);
        p.mean = j.at("mean").get<std::vector<double>>();
        for (const auto& row : j.at("covariance")) {
            const auto r = row.get<std::vector<double>>();
            p.covariance.insert(p.covariance.end(), r.begin(), r.end());
        }
        p.source = j.value("source", path.string());
    } catch (const json::exception& e) {
        fail(ErrorKind::DependencyError, "malformed niqe parameters " + path.string() + ": " + e.what());
    }
    if (p.mean.size() != kNiqeFeatures || p.covariance.size() != kNiqeFeatures * kNiqeFeatures) {
        fail(ErrorKind::DependencyError, "niqe parameters must hold 36 means and a 36x36 covariance");
    }
    return p;
}

void save_ns_params(const NsParams& params, const std::filesystem::path& path) {
    json cov = json::array();
    for (int r = 0; r < kNiqeFeatures; ++r) {
        cov.push_back(std::vector<double>(params.covariance.begin() + r * kNiqeFeatures,
                                          params.covariance.begin() + (r + 1) * kNiqeFeatures));
    }
    const json j{{"format", "llie-niqe"}, {"features", kNiqeFeatures}, {"patch", kNiqePatch},
                 {"source", params.source}, {"mean", params.mean},   {"covariance", cov}};
    std::ofstream out(path);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    out << j.dump(1) << '\n';
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
}

}  // namespace llie
