#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <torch/torch.h>

#include "llie/image.hpp"
#include "llie/manifest.hpp"

namespace llie::test {

inline std::filesystem::path assets() { return LLIE_TEST_ASSETS; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("llie_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Narrow networks for fast unit tests.
inline ModelConfig small_model() {
    ModelConfig m;
    m.n_net_widths = {3, 8, 8, 3};
    m.r_net_widths = {3, 8, 8, 8, 3};
    m.l_net_widths = {3, 8, 8, 8, 1};
    m.cg.features = 8;
    m.cg.reduction = 4;
    m.ce.features = 4;
    m.ce.hidden = 4;
    m.oec.features = 8;
    return m;
}

inline ImageTensor random_image(int64_t c, int64_t h, int64_t w, uint64_t seed, double lo = 0.0, double hi = 1.0) {
    torch::manual_seed(seed);
    return ImageTensor(torch::rand({c, h, w}) * (hi - lo) + lo);
}

struct GradCheck {
    int checked = 0;
    int skipped_kinks = 0;
    int nonzero = 0;  // coordinates with a gradient above the floor
    double worst = 0.0;
    std::string worst_at;
};

/// Compares the autograd gradient of `loss()` with central differences at
/// `per_tensor` random coordinates of each parameter. Coordinates where the
/// one-sided slopes disagree by more than `kink_tol` (a ReLU/abs/clamp kink
/// inside +-h) have no derivative there and are skipped. Relative error uses a floor of 1e-7 on the
/// denominator so exactly-zero gradients compare as equal.
inline GradCheck grad_check(const std::function<torch::Tensor()>& loss,
                            const std::vector<std::pair<std::string, torch::Tensor>>& params, int per_tensor,
                            uint64_t seed, double h = 1e-4, double kink_tol = 1e-3,
                            std::function<torch::Tensor()> fd_loss = {}) {
    if (!fd_loss) fd_loss = loss;
    for (const auto& [_, p] : params) {
        if (p.grad().defined()) p.mutable_grad().zero_();
    }
    loss().backward();

    GradCheck out;
    std::mt19937_64 rng(seed);
    torch::NoGradGuard no_grad;
    const double f0 = fd_loss().item<double>();
    for (const auto& [name, p] : params) {
        auto flat = p.view({-1});
        const auto grad = p.grad().defined() ? p.grad().view({-1}) : torch::zeros_like(flat);
        std::uniform_int_distribution<int64_t> pick(0, flat.numel() - 1);
        for (int k = 0; k < per_tensor; ++k) {
            const auto idx = pick(rng);
            const double orig = flat[idx].item<double>();
            flat[idx] = orig + h;
            const double fp = fd_loss().item<double>();
            flat[idx] = orig - h;
            const double fm = fd_loss().item<double>();
            flat[idx] = orig;
            const double fwd = (fp - f0) / h;
            const double bwd = (f0 - fm) / h;
            if (std::abs(fwd - bwd) > kink_tol * std::max({std::abs(fwd), std::abs(bwd), 1e-6})) {
                ++out.skipped_kinks;
                continue;
            }
            const double numeric = (fp - fm) / (2.0 * h);
            const double analytic = grad[idx].item<double>();
            const double rel =
                std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-7});
            ++out.checked;
            if (std::abs(analytic) > 1e-7) ++out.nonzero;
            if (rel > out.worst) {
                out.worst = rel;
                out.worst_at = name + "[" + std::to_string(idx) + "] analytic=" + std::to_string(analytic) +
                               " numeric=" + std::to_string(numeric);
            }
        }
    }
    return out;
}

inline std::vector<std::pair<std::string, torch::Tensor>> named(const torch::nn::Module& m) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& item : m.named_parameters()) out.emplace_back(item.key(), item.value());
    return out;
}

}  // namespace llie::test
