#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "llie/features.hpp"
#include "llie/image.hpp"
#include "llie/losses.hpp"
#include "llie/manifest.hpp"
#include "llie/model.hpp"

namespace llie {

enum class Precision { Full, Reduced };
enum class LrSchedule { Constant, Cosine };

std::string to_string(Precision p);
std::string to_string(LrSchedule s);

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int64_t batch_size = 4;
    int64_t max_iterations = 200000;
    int64_t image_size = 512;
    uint64_t seed = 0;
    Precision precision = Precision::Full;
    int64_t checkpoint_every = 5000;
    LrSchedule lr_schedule = LrSchedule::Constant;
    double clip_norm = 5.0;
    bool augment = true;
    std::string extractor = "filterbank";
    LossWeights weights;
    RetinexCoefficients retinex;
    ModelConfig model;
    ModuleToggles toggles;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

/// Source of exposure pairs. Real pairs come from `root/<scene>/{a,b}.png`;
/// a flat directory of images is paired with `synth_second_exposure`, seeded
/// per scene so each scene keeps the same partner across epochs.
class PairDataset {
public:
    static PairDataset from_directory(const std::filesystem::path& root, uint64_t synth_seed = 0);
    static PairDataset from_pairs(std::vector<ExposurePair> pairs);

    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    ExposurePair get(size_t index) const;
    const std::string& scene_id(size_t index) const { return entries_.at(index).scene_id; }

private:
    struct Entry {
        std::string scene_id;
        std::filesystem::path path_a;
        std::filesystem::path path_b;  // empty -> synthesise
        uint64_t synth_seed = 0;
        std::optional<ExposurePair> pair;
    };
    std::vector<Entry> entries_;
};

/// Seeded, epoch-shuffled, infinitely cycling stream of augmented and resized
/// batches. Addressable by iteration, so a resumed run sees exactly the
/// batches the uninterrupted run would have seen.
class BatchStream {
public:
    BatchStream(const PairDataset& data, int64_t batch_size, int64_t image_size, uint64_t seed, bool augment = true);

    /// Batch for 1-based `iteration`.
    std::vector<ExposurePair> batch(int64_t iteration) const;
    size_t dataset_index(int64_t sample) const;

private:
    const PairDataset* data_;
    int64_t batch_size_;
    int64_t image_size_;
    uint64_t seed_;
    bool augment_;
    mutable int64_t cached_epoch_ = -1;
    mutable std::vector<size_t> permutation_;
};

/// Dynamic loss scaling for reduced precision: scale the loss, unscale the
/// gradients, skip the step and back off when any gradient is non-finite.
struct LossScaler {
    bool enabled = false;
    double scale = 65536.0;
    double growth_factor = 2.0;
    double backoff_factor = 0.5;
    int64_t growth_interval = 2000;
    int64_t good_steps = 0;
};

struct StepResult {
    LossReport report;        // pre-step values
    double grad_norm = 0.0;   // before clipping
    double clipped_norm = 0.0;
    bool skipped = false;     // reduced precision overflow
};

/// One optimisation step on the weighted objective averaged over the batch.
/// Throws NumericalError naming the first non-finite term.
StepResult train_step(ModelBundle& bundle, torch::optim::Adam& optimizer, const std::vector<ExposurePair>& batch,
                      const TrainConfig& cfg, const FeatureExtractor* extractor, LossScaler& scaler);

/// Stateful training driver owning the bundle, optimizer and stream position.
class Trainer {
public:
    Trainer(TrainConfig cfg, const PairDataset& data);
    /// Continues from a checkpoint written by `save`.
    Trainer(TrainConfig cfg, const PairDataset& data, const std::filesystem::path& checkpoint);

    StepResult step();
    void save(const std::filesystem::path& dir);

    int64_t iteration() const { return iteration_; }
    ModelBundle& bundle() { return bundle_; }
    torch::optim::Adam& optimizer() { return *optimizer_; }
    const TrainConfig& config() const { return cfg_; }
    const LossScaler& scaler() const { return scaler_; }
    const FeatureExtractor* extractor() const { return extractor_.get(); }

private:
    void init_optimizer();
    double current_lr() const;

    TrainConfig cfg_;
    const PairDataset* data_;
    BatchStream stream_;
    ModelBundle bundle_;
    std::unique_ptr<torch::optim::Adam> optimizer_;
    std::shared_ptr<FeatureExtractor> extractor_;
    LossScaler scaler_;
    int64_t iteration_ = 0;
};

using StepCallback = std::function<void(int64_t iteration, const StepResult&)>;

/// Runs to cfg.max_iterations, writing `run/ckpt_<iter>/` every
/// checkpoint_every iterations (and at the end) plus `run/log.csv`.
/// Returns the final checkpoint directory.
std::filesystem::path train(const TrainConfig& cfg, const PairDataset& data, const std::filesystem::path& run_dir,
                            const std::optional<std::filesystem::path>& resume = std::nullopt,
                            const StepCallback& on_step = {});

std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, int64_t iteration);

}  // namespace llie
