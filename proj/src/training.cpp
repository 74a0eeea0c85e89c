#include "llie/training.hpp"

#include <ATen/autocast_mode.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "llie/error.hpp"

namespace llie {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::Full ? "full" : "reduced"; }
std::string to_string(LrSchedule s) { return s == LrSchedule::Constant ? "constant" : "cosine"; }

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail(ErrorKind::InvalidInput, "learning_rate must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        fail(ErrorKind::InvalidInput, "beta1/beta2 must lie in (0,1)");
    }
    if (batch_size <= 0) fail(ErrorKind::InvalidInput, "batch_size must be positive");
    if (max_iterations <= 0) fail(ErrorKind::InvalidInput, "max_iterations must be positive");
    if (image_size < ImageTensor::kMinSide) fail(ErrorKind::InvalidInput, "image_size must be >= 8");
    if (checkpoint_every <= 0) fail(ErrorKind::InvalidInput, "checkpoint_every must be positive");
    if (!(clip_norm > 0.0)) fail(ErrorKind::InvalidInput, "clip_norm must be positive");
    weights.validate();
    retinex.validate();
    model.validate();
}

json to_json(const TrainConfig& cfg) {
    return json{{"learning_rate", cfg.learning_rate},
                {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},
                {"batch_size", cfg.batch_size},
                {"max_iterations", cfg.max_iterations},
                {"image_size", cfg.image_size},
                {"seed", cfg.seed},
                {"precision", to_string(cfg.precision)},
                {"checkpoint_every", cfg.checkpoint_every},
                {"lr_schedule", to_string(cfg.lr_schedule)},
                {"clip_norm", cfg.clip_norm},
                {"augment", cfg.augment},
                {"extractor", cfg.extractor},
                {"use_cg", cfg.toggles.use_cg},
                {"use_ce", cfg.toggles.use_ce},
                {"use_oec", cfg.toggles.use_oec}};
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

PairDataset PairDataset::from_directory(const fs::path& root, uint64_t synth_seed) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) fail(ErrorKind::NotFound, "dataset directory " + root.string());

    std::vector<fs::path> subdirs;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) subdirs.push_back(e.path());
        else if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    std::sort(files.begin(), files.end());

    PairDataset ds;
    for (const auto& d : subdirs) {
        if (fs::exists(d / "a.png") && fs::exists(d / "b.png")) {
            ds.entries_.push_back({d.filename().string(), d / "a.png", d / "b.png", 0, std::nullopt});
        }
    }
    for (size_t k = 0; k < files.size(); ++k) {
        ds.entries_.push_back(
            {files[k].stem().string(), files[k], {}, mix_seed(synth_seed, k), std::nullopt});
    }
    if (ds.entries_.empty()) fail(ErrorKind::InvalidInput, "dataset " + root.string() + " contains no images");
    return ds;
}

PairDataset PairDataset::from_pairs(std::vector<ExposurePair> pairs) {
    if (pairs.empty()) fail(ErrorKind::InvalidInput, "dataset is empty");
    PairDataset ds;
    for (auto& p : pairs) ds.entries_.push_back({p.scene_id, {}, {}, 0, std::move(p)});
    return ds;
}

ExposurePair PairDataset::get(size_t index) const {
    const auto& e = entries_.at(index);
    if (e.pair) return *e.pair;
    auto a = load_image(e.path_a);
    if (e.path_b.empty()) return synth_second_exposure(a, e.synth_seed, e.scene_id);
    auto b = load_image(e.path_b);
    if (b.height() != a.height() || b.width() != a.width()) b = resize(b, a.height(), a.width());
    return {a, b, e.scene_id};
}

// ---------------------------------------------------------------------------
// Batch stream

BatchStream::BatchStream(const PairDataset& data, int64_t batch_size, int64_t image_size, uint64_t seed, bool augment)
    : data_(&data), batch_size_(batch_size), image_size_(image_size), seed_(seed), augment_(augment) {
    if (data.empty()) fail(ErrorKind::InvalidInput, "dataset is empty");
    if (batch_size <= 0) fail(ErrorKind::InvalidInput, "batch_size must be positive");
}

size_t BatchStream::dataset_index(int64_t sample) const {
    const auto n = static_cast<int64_t>(data_->size());
    const int64_t epoch = sample / n;
    if (epoch != cached_epoch_) {
        permutation_.resize(static_cast<size_t>(n));
        std::iota(permutation_.begin(), permutation_.end(), size_t{0});
        std::mt19937_64 rng(mix_seed(seed_, static_cast<uint64_t>(epoch)));
        std::shuffle(permutation_.begin(), permutation_.end(), rng);
        cached_epoch_ = epoch;
    }
    return permutation_[static_cast<size_t>(sample % n)];
}

std::vector<ExposurePair> BatchStream::batch(int64_t iteration) const {
    if (iteration < 1) fail(ErrorKind::InvalidInput, "iterations are 1-based");
    std::vector<ExposurePair> out;
    out.reserve(static_cast<size_t>(batch_size_));
    for (int64_t k = 0; k < batch_size_; ++k) {
        const int64_t sample = (iteration - 1) * batch_size_ + k;
        auto pair = data_->get(dataset_index(sample));
        if (augment_) pair = augment(pair, mix_seed(seed_ ^ 0xA06E47ULL, static_cast<uint64_t>(sample)));
        pair = {resize(pair.low_a, image_size_, image_size_), resize(pair.low_b, image_size_, image_size_),
                pair.scene_id};
        out.push_back(std::move(pair));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Step

namespace {

class AutocastGuard {
public:
    explicit AutocastGuard(bool enable) : enabled_(enable) {
        if (!enabled_) return;
        previous_ = at::autocast::is_autocast_enabled(at::kCPU);
        previous_dtype_ = at::autocast::get_autocast_dtype(at::kCPU);
        at::autocast::set_autocast_dtype(at::kCPU, at::kBFloat16);
        at::autocast::set_autocast_enabled(at::kCPU, true);
    }
    ~AutocastGuard() {
        if (!enabled_) return;
        at::autocast::set_autocast_enabled(at::kCPU, previous_);
        at::autocast::set_autocast_dtype(at::kCPU, previous_dtype_);
        at::autocast::clear_cache();
    }
    AutocastGuard(const AutocastGuard&) = delete;
    AutocastGuard& operator=(const AutocastGuard&) = delete;

private:
    bool enabled_;
    bool previous_ = false;
    at::ScalarType previous_dtype_ = at::kBFloat16;
};

ForwardArtifacts to_dtype(ForwardArtifacts a, torch::ScalarType dtype) {
    for (auto* t : {&a.input, &a.projection, &a.reflectance, &a.illumination, &a.reflectance_f, &a.illumination_f,
                    &a.recomposed, &a.enhanced, &a.blend_mask}) {
        *t = t->to(dtype);
    }
    return a;
}

ForwardArtifacts slice_batch(const ForwardArtifacts& a, int64_t begin, int64_t end) {
    ForwardArtifacts out;
    auto s = [&](const torch::Tensor& t) { return t.slice(0, begin, end); };
    out.input = s(a.input);
    out.projection = s(a.projection);
    out.reflectance = s(a.reflectance);
    out.illumination = s(a.illumination);
    out.reflectance_f = s(a.reflectance_f);
    out.illumination_f = s(a.illumination_f);
    out.recomposed = s(a.recomposed);
    out.enhanced = s(a.enhanced);
    out.blend_mask = s(a.blend_mask);
    return out;
}

void check_finite(const LossReport& r) {
    const std::pair<const char*, double> terms[] = {
        {"projection", r.projection},
        {"consistency", r.consistency},
        {"retinex.reconstruction", r.retinex_breakdown.reconstruction},
        {"retinex.pseudo_reflectance", r.retinex_breakdown.pseudo_reflectance},
        {"retinex.smoothness", r.retinex_breakdown.smoothness},
        {"retinex.gradient_reg", r.retinex_breakdown.gradient_reg},
        {"perceptual", r.perceptual},
        {"total", r.total},
    };
    for (const auto& [name, value] : terms) {
        if (!std::isfinite(value)) throw NumericalError(name, "loss term is not finite");
    }
}

double global_grad_norm(const std::vector<torch::Tensor>& params) {
    double sq = 0.0;
    for (const auto& p : params) {
        if (p.grad().defined()) sq += p.grad().to(torch::kFloat64).square().sum().item<double>();
    }
    return std::sqrt(sq);
}

}  // namespace

StepResult train_step(ModelBundle& bundle, torch::optim::Adam& optimizer, const std::vector<ExposurePair>& batch,
                      const TrainConfig& cfg, const FeatureExtractor* extractor, LossScaler& scaler) {
    if (batch.empty()) fail(ErrorKind::InvalidInput, "empty batch");
    auto net = bundle.net();
    net->train();
    const auto dtype = net->parameters().front().scalar_type();

    std::vector<torch::Tensor> as, bs;
    for (const auto& p : batch) {
        as.push_back(p.low_a.tensor());
        bs.push_back(p.low_b.tensor());
    }
    const int64_t n = static_cast<int64_t>(batch.size());
    auto inputs = torch::cat({torch::stack(as), torch::stack(bs)}).to(dtype);

    const bool reduced = cfg.precision == Precision::Reduced;
    ForwardArtifacts all;
    {
        AutocastGuard autocast(reduced);
        all = net->forward(inputs, cfg.toggles);
    }
    if (reduced) all = to_dtype(std::move(all), dtype);

    const auto& mc = bundle.config();
    const double retinex_lambda = mc.lambda_in_retinex_loss ? mc.lambda : 1.0;
    auto terms = total_loss(cfg.weights, cfg.retinex, slice_batch(all, 0, n), slice_batch(all, n, 2 * n), extractor,
                            mc.illumination_epsilon, retinex_lambda);

    StepResult result;
    result.report = terms.report();
    check_finite(result.report);

    optimizer.zero_grad();
    auto params = net->parameters();
    if (scaler.enabled) {
        (terms.total * scaler.scale).backward();
        torch::NoGradGuard no_grad;
        for (auto& p : params)
            if (p.grad().defined()) p.grad().div_(scaler.scale);
        result.grad_norm = global_grad_norm(params);
        if (!std::isfinite(result.grad_norm)) {
            scaler.scale *= scaler.backoff_factor;
            scaler.good_steps = 0;
            optimizer.zero_grad();
            result.skipped = true;
            return result;
        }
        if (++scaler.good_steps % scaler.growth_interval == 0) scaler.scale *= scaler.growth_factor;
    } else {
        terms.total.backward();
    }

    result.grad_norm = torch::nn::utils::clip_grad_norm_(params, cfg.clip_norm);
    if (!std::isfinite(result.grad_norm)) throw NumericalError("gradient", "gradient norm is not finite");
    result.clipped_norm = global_grad_norm(params);
    optimizer.step();
    return result;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig cfg, const PairDataset& data)
    : cfg_(std::move(cfg)),
      data_(&data),
      stream_(data, cfg_.batch_size, cfg_.image_size, cfg_.seed, cfg_.augment),
      bundle_(Manifest{cfg_.model, cfg_.weights, cfg_.retinex, 0, json::object()}, cfg_.seed) {
    cfg_.validate();
    extractor_ = cfg_.weights.perceptual > 0.0 ? make_extractor(cfg_.extractor) : nullptr;
    scaler_.enabled = cfg_.precision == Precision::Reduced;
    init_optimizer();
}

Trainer::Trainer(TrainConfig cfg, const PairDataset& data, const fs::path& checkpoint)
    : cfg_(std::move(cfg)),
      data_(&data),
      stream_(data, cfg_.batch_size, cfg_.image_size, cfg_.seed, cfg_.augment),
      bundle_(load_checkpoint(checkpoint)) {
    cfg_.validate();
    if (!(bundle_.config() == cfg_.model)) {
        fail(ErrorKind::CheckpointError, "checkpoint architecture differs from the run configuration");
    }
    extractor_ = cfg_.weights.perceptual > 0.0 ? make_extractor(cfg_.extractor) : nullptr;
    init_optimizer();
    if (!load_optimizer_state(checkpoint, *optimizer_)) {
        fail(ErrorKind::CheckpointError, "checkpoint has no optimizer state to resume from");
    }
    iteration_ = bundle_.manifest().iteration;
    const auto& extra = bundle_.manifest().extra;
    scaler_.enabled = cfg_.precision == Precision::Reduced;
    if (extra.contains("loss_scaler")) {
        const auto& s = extra.at("loss_scaler");
        scaler_.scale = s.value("scale", scaler_.scale);
        scaler_.good_steps = s.value("good_steps", int64_t{0});
    }
}

void Trainer::init_optimizer() {
    optimizer_ = std::make_unique<torch::optim::Adam>(
        bundle_.net()->parameters(),
        torch::optim::AdamOptions(cfg_.learning_rate).betas({cfg_.beta1, cfg_.beta2}));
}

double Trainer::current_lr() const {
    if (cfg_.lr_schedule == LrSchedule::Constant) return cfg_.learning_rate;
    const double progress = static_cast<double>(iteration_) / static_cast<double>(cfg_.max_iterations);
    return cfg_.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

StepResult Trainer::step() {
    const double lr = current_lr();
    for (auto& group : optimizer_->param_groups()) {
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
    auto batch = stream_.batch(iteration_ + 1);
    auto result = train_step(bundle_, *optimizer_, batch, cfg_, extractor_.get(), scaler_);
    ++iteration_;
    bundle_.manifest().iteration = iteration_;
    return result;
}

void Trainer::save(const fs::path& dir) {
    auto& m = bundle_.manifest();
    m.iteration = iteration_;
    m.weights = cfg_.weights;
    m.retinex = cfg_.retinex;
    m.extra["train_config"] = to_json(cfg_);
    m.extra["loss_scaler"] = {{"scale", scaler_.scale}, {"good_steps", scaler_.good_steps}};
    save_checkpoint(dir, bundle_, optimizer_.get());
}

fs::path checkpoint_dir(const fs::path& run_dir, int64_t iteration) {
    return run_dir / ("ckpt_" + std::to_string(iteration));
}

namespace {

constexpr const char* kLogHeader =
    "iteration,total,projection,consistency,retinex,perceptual,reconstruction,pseudo_reflectance,smoothness,"
    "gradient_reg,grad_norm,skipped,seconds";

// Keeps the header and rows up to `iteration`, so a resumed run continues a clean log.
void truncate_log(const fs::path& log, int64_t iteration) {
    std::ifstream in(log);
    if (!in) return;
    std::vector<std::string> keep;
    std::string line;
    while (std::getline(in, line)) {
        if (keep.empty()) {
            keep.push_back(line);
            continue;
        }
        if (std::stoll(line.substr(0, line.find(','))) <= iteration) keep.push_back(line);
    }
    in.close();
    std::ofstream out(log, std::ios::trunc);
    for (const auto& l : keep) out << l << '\n';
}

}  // namespace

fs::path train(const TrainConfig& cfg, const PairDataset& data, const fs::path& run_dir,
               const std::optional<fs::path>& resume, const StepCallback& on_step) {
    cfg.validate();
    auto trainer = resume ? Trainer(cfg, data, *resume) : Trainer(cfg, data);

    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) fail(ErrorKind::IoError, "cannot create run directory " + run_dir.string());

    const auto log_path = run_dir / "log.csv";
    if (resume && fs::exists(log_path)) {
        truncate_log(log_path, trainer.iteration());
    } else {
        std::ofstream(log_path, std::ios::trunc) << kLogHeader << '\n';
    }
    std::ofstream log(log_path, std::ios::app);
    log.precision(9);

    fs::path last;
    while (trainer.iteration() < cfg.max_iterations) {
        const auto t0 = std::chrono::steady_clock::now();
        auto r = trainer.step();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto& rep = r.report;
        log << trainer.iteration() << ',' << rep.total << ',' << rep.projection << ',' << rep.consistency << ','
            << rep.retinex << ',' << rep.perceptual << ',' << rep.retinex_breakdown.reconstruction << ','
            << rep.retinex_breakdown.pseudo_reflectance << ',' << rep.retinex_breakdown.smoothness << ','
            << rep.retinex_breakdown.gradient_reg << ',' << r.grad_norm << ',' << (r.skipped ? 1 : 0) << ','
            << secs << '\n';
        if (on_step) on_step(trainer.iteration(), r);
        if (trainer.iteration() % cfg.checkpoint_every == 0 || trainer.iteration() == cfg.max_iterations) {
            log.flush();
            last = checkpoint_dir(run_dir, trainer.iteration());
            trainer.save(last);
        }
    }
    if (last.empty()) {
        // Resumed at or beyond max_iterations: nothing to run, re-emit the state.
        last = checkpoint_dir(run_dir, trainer.iteration());
        if (!fs::exists(last)) trainer.save(last);
    }
    return last;
}

}  // namespace llie
