#include "llie/features.hpp"

#include <cmath>
#include <cstdlib>

#include "llie/decomposition.hpp"
#include "llie/error.hpp"

namespace llie {

namespace F = torch::nn::functional;

namespace {

torch::Tensor gaussian_bank(double sigma) {
    const int64_t radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
    auto x = torch::arange(-radius, radius + 1, torch::kFloat64);
    auto g = torch::exp(-x.square() / (2.0 * sigma * sigma));
    g = g / g.sum();
    auto gauss = g.unsqueeze(1) * g.unsqueeze(0);
    auto xx = x.unsqueeze(0).expand_as(gauss);
    auto yy = x.unsqueeze(1).expand_as(gauss);
    auto dx = -xx / (sigma * sigma) * gauss;
    auto dy = -yy / (sigma * sigma) * gauss;
    auto lap = ((xx.square() + yy.square()) / std::pow(sigma, 4) - 2.0 / (sigma * sigma)) * gauss;
    lap = lap - lap.mean();
    auto bank = torch::stack({gauss, -gauss, dx, -dx, dy, -dy, lap, -lap});
    return bank.unsqueeze(1).to(torch::kFloat32);
}

}  // namespace

FilterBankExtractor::FilterBankExtractor(int levels, double sigma) : levels_(levels) {
    if (levels < 1) fail(ErrorKind::InvalidInput, "filter bank needs at least one level");
    opponent_ = torch::tensor({{1.0f / 3, 1.0f / 3, 1.0f / 3}, {0.5f, -0.5f, 0.0f}, {0.25f, 0.25f, -0.5f}});
    bank_ = gaussian_bank(sigma);
}

std::vector<torch::Tensor> FilterBankExtractor::features(const torch::Tensor& batch) const {
    require_batch(batch, 3, "feature extractor");
    const auto dtype = batch.scalar_type();
    auto x = torch::einsum("oc,bchw->bohw", {opponent_.to(dtype), batch});
    const auto bank = bank_.to(dtype);
    const int64_t pad = bank.size(-1) / 2;
    const int64_t per_channel = bank.size(0);

    std::vector<torch::Tensor> out;
    out.reserve(levels_);
    for (int level = 0; level < levels_; ++level) {
        const auto b = x.size(0);
        const auto c = x.size(1);
        const auto h = x.size(2);
        const auto w = x.size(3);
        auto flat = x.reshape({b * c, 1, h, w});
        flat = F::pad(flat, F::PadFuncOptions({pad, pad, pad, pad}).mode(torch::kReplicate));
        auto responses = F::conv2d(flat, bank).reshape({b, c * per_channel, h, w});
        out.push_back(torch::relu(responses));
        if (level + 1 < levels_) {
            if (h < 2 || w < 2) break;
            x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
        }
    }
    return out;
}

ScriptedExtractor::ScriptedExtractor(const std::filesystem::path& path) : path_(path) {
    if (!std::filesystem::exists(path)) fail(ErrorKind::DependencyError, "feature extractor not found: " + path.string());
    try {
        module_ = torch::jit::load(path.string());
        module_.eval();
    } catch (const c10::Error& e) {
        fail(ErrorKind::DependencyError, "cannot load feature extractor " + path.string() + ": " +
                                             e.what_without_backtrace());
    }
}

std::vector<torch::Tensor> ScriptedExtractor::features(const torch::Tensor& batch) const {
    require_batch(batch, 3, "feature extractor");
    auto result = module_.forward({batch});
    std::vector<torch::Tensor> out;
    if (result.isTensor()) {
        out.push_back(result.toTensor());
    } else if (result.isTuple()) {
        for (const auto& v : result.toTupleRef().elements()) out.push_back(v.toTensor());
    } else if (result.isList()) {
        for (const auto& v : result.toList()) out.push_back(v.get().toTensor());
    } else {
        fail(ErrorKind::DependencyError, "feature extractor must return tensors");
    }
    return out;
}

std::shared_ptr<FeatureExtractor> make_extractor(const std::string& spec) {
    if (spec.empty() || spec == "filterbank") return std::make_shared<FilterBankExtractor>();
    if (spec == "none") return nullptr;
    std::filesystem::path path = spec;
    if (spec.rfind("cache:", 0) == 0) {
        const char* cache = std::getenv("LLIE_CACHE");
        if (cache == nullptr) fail(ErrorKind::DependencyError, "LLIE_CACHE is not set; cannot resolve " + spec);
        path = std::filesystem::path(cache) / spec.substr(6);
    }
    return std::make_shared<ScriptedExtractor>(path);
}

torch::Tensor feature_distance(const FeatureExtractor& extractor, const torch::Tensor& a, const torch::Tensor& b) {
    if (!a.sizes().equals(b.sizes())) fail(ErrorKind::ShapeError, "feature distance needs equal shapes");
    auto fa = extractor.features(a);
    auto fb = extractor.features(b);
    if (fa.empty() || fa.size() != fb.size()) fail(ErrorKind::DependencyError, "extractor returned no features");
    constexpr double kNormEps = 1e-6;
    auto total = torch::zeros({}, a.options());
    for (size_t k = 0; k < fa.size(); ++k) {
        auto na = fa[k] / (fa[k].norm(2, 1, true) + kNormEps);
        auto nb = fb[k] / (fb[k].norm(2, 1, true) + kNormEps);
        total = total + (na - nb).square().sum(1).mean();
    }
    return total / static_cast<double>(fa.size());
}

}  // namespace llie
