#include "llie/model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "llie/error.hpp"

namespace llie {

namespace fs = std::filesystem;

EnhancerImpl::EnhancerImpl(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    n_net = register_module("n_net", ConvStack(cfg_.n_net_widths, cfg_.kernel_size, "n_net"));
    r_net = register_module("r_net", ConvStack(cfg_.r_net_widths, cfg_.kernel_size, "r_net"));
    l_net = register_module("l_net", ConvStack(cfg_.l_net_widths, cfg_.kernel_size, "l_net"));
    cg = register_module("cg", ChannelGuidance(cfg_.cg));
    ce = register_module("ce", ColorEnhancement(cfg_.ce, cfg_.illumination_epsilon));
    oec = register_module("oec", OverExposureCorrection(cfg_.oec, cfg_.illumination_epsilon));
}

ForwardArtifacts EnhancerImpl::forward(const torch::Tensor& batch, const ModuleToggles& toggles, MaskMode mask_mode) {
    require_batch(batch, 3, "enhancer");
    ForwardArtifacts a;
    a.input = batch;
    a.projection = n_net->forward(batch);
    a.reflectance = r_net->forward(a.projection);
    a.illumination = l_net->forward(a.projection);
    a.reflectance_f = toggles.use_cg ? cg->forward(a.reflectance) : a.reflectance;
    a.illumination_f = toggles.use_ce ? ce->forward(a.illumination) : a.illumination;
    a.recomposed = recompose(a.reflectance_f, a.illumination_f, cfg_.lambda, cfg_.illumination_epsilon);
    if (toggles.use_oec) {
        auto out = oec->forward(a.recomposed, mask_mode);
        a.enhanced = out.image;
        a.blend_mask = out.mask;
    } else {
        a.enhanced = a.recomposed;
        a.blend_mask = torch::zeros_like(a.illumination);
    }
    return a;
}

ModelBundle::ModelBundle(Manifest manifest, uint64_t init_seed) : manifest_(std::move(manifest)) {
    manifest_.model.validate();
    torch::manual_seed(init_seed);
    net_ = Enhancer(manifest_.model);
}

ModelBundle ModelBundle::clone() const {
    ModelBundle copy(manifest_);
    torch::NoGradGuard no_grad;
    copy.net_->to(net_->parameters().front().scalar_type());
    auto src = net_->named_parameters();
    auto dst = copy.net_->named_parameters();
    for (auto& p : dst) p.value().copy_(src[p.key()]);
    return copy;
}

ForwardArtifacts infer(ModelBundle& bundle, const ImageTensor& img, const ModuleToggles& toggles) {
    torch::NoGradGuard no_grad;
    bundle.net()->eval();
    auto dtype = bundle.net()->parameters().front().scalar_type();
    return bundle.net()->forward(img.batched().to(dtype), toggles);
}

DecompositionResult decompose(ModelBundle& bundle, const ImageTensor& img) {
    auto a = infer(bundle, img);
    return {ImageTensor::clamped(a.projection.squeeze(0)), ImageTensor::clamped(a.reflectance.squeeze(0)),
            ImageTensor::clamped(a.illumination.squeeze(0))};
}

EnhancedImage enhance(ModelBundle& bundle, const ImageTensor& img, const ModuleToggles& toggles) {
    auto a = infer(bundle, img, toggles);
    if (!torch::isfinite(a.enhanced).all().item<bool>()) {
        throw NumericalError("enhanced", "non-finite output");
    }
    return {ImageTensor::clamped(a.enhanced.squeeze(0)), ImageTensor::clamped(a.blend_mask.squeeze(0))};
}

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kTensorFile = "tensors.pt";
constexpr const char* kOptimizerFile = "optimizer.pt";

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    if (!in) fail(ErrorKind::CheckpointError, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ModelBundle& bundle, torch::optim::Optimizer* optimizer) {
    fs::path tmp = dir;
    tmp += ".tmp";
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp, ec);
    if (ec) fail(ErrorKind::IoError, "cannot create " + tmp.string() + ": " + ec.message());

    {
        std::ofstream out(tmp / kManifestFile);
        if (!out) fail(ErrorKind::IoError, "cannot write manifest in " + tmp.string());
        out << dump_manifest(bundle.manifest());
    }
    try {
        torch::serialize::OutputArchive archive;
        for (const auto& p : bundle.net()->named_parameters()) archive.write(p.key(), p.value().detach());
        archive.save_to((tmp / kTensorFile).string());
        if (optimizer != nullptr) torch::save(*optimizer, (tmp / kOptimizerFile).string());
    } catch (const c10::Error& e) {
        fail(ErrorKind::IoError, std::string("cannot write tensors: ") + e.what_without_backtrace());
    }

    fs::remove_all(dir, ec);
    fs::rename(tmp, dir, ec);
    if (ec) fail(ErrorKind::IoError, "cannot move checkpoint into " + dir.string() + ": " + ec.message());
}

ModelBundle load_checkpoint(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) fail(ErrorKind::CheckpointError, "no checkpoint at " + dir.string());
    Manifest manifest = parse_manifest(read_text(dir / kManifestFile));
    ModelBundle bundle(manifest);

    torch::serialize::InputArchive archive;
    try {
        archive.load_from((dir / kTensorFile).string());
    } catch (const c10::Error& e) {
        fail(ErrorKind::CheckpointError, std::string("corrupt tensor file: ") + e.what_without_backtrace());
    }

    torch::NoGradGuard no_grad;
    auto params = bundle.net()->named_parameters();
    std::set<std::string> expected;
    for (auto& p : params) {
        expected.insert(p.key());
        torch::Tensor stored;
        if (!archive.try_read(p.key(), stored)) fail(ErrorKind::CheckpointError, "missing tensor " + p.key());
        if (!stored.sizes().equals(p.value().sizes())) {
            fail(ErrorKind::CheckpointError, "shape mismatch for " + p.key());
        }
        if (!torch::isfinite(stored).all().item<bool>()) {
            fail(ErrorKind::CheckpointError, "non-finite values in " + p.key());
        }
        p.value().copy_(stored);
    }
    for (const auto& key : archive.keys()) {
        if (!expected.contains(key)) fail(ErrorKind::CheckpointError, "unexpected tensor " + key);
    }
    return bundle;
}

bool load_optimizer_state(const fs::path& dir, torch::optim::Optimizer& optimizer) {
    const auto file = dir / kOptimizerFile;
    if (!fs::exists(file)) return false;
    try {
        torch::load(optimizer, file.string());
    } catch (const c10::Error& e) {
        fail(ErrorKind::CheckpointError, std::string("corrupt optimizer state: ") + e.what_without_backtrace());
    }
    return true;
}

}  // namespace llie
