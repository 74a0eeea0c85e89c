#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "llie/config.hpp"
#include "llie/error.hpp"
#include "llie/evaluate.hpp"
#include "llie/model.hpp"

namespace llie {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitCheckpoint = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(ErrorKind kind);

struct TrainOptions {
    std::optional<std::filesystem::path> config;
    Overrides overrides;
    std::optional<std::filesystem::path> resume;
    int64_t log_every = 100;
};

struct EnhanceOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path input_dir;
    std::filesystem::path output_dir;
    ModuleToggles toggles;
};

struct DecomposeOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path image;
    std::filesystem::path output_dir;
};

struct EvaluateOptions {
    std::filesystem::path enhanced_dir;
    std::optional<std::filesystem::path> reference_dir;
    std::optional<std::filesystem::path> output_dir;  // metrics.csv + metrics.md
    std::string extractor = "filterbank";
    std::string niqe_params;  // empty -> bundled model
    bool with_niqe = true;
};

enum class AblationMode { Inference, Retrain };

struct AblateOptions {
    AblationMode mode = AblationMode::Inference;
    std::optional<std::filesystem::path> checkpoint;  // inference mode
    std::optional<std::filesystem::path> config;      // retrain mode
    Overrides overrides;
    std::filesystem::path input_dir;
    std::filesystem::path reference_dir;
    std::filesystem::path output_dir;
    std::string extractor = "filterbank";
};

struct BenchOptions {
    std::optional<std::filesystem::path> checkpoint;  // default: freshly initialised model
    int64_t size = 512;
    int64_t iterations = 50;
    int64_t warmup = 5;
    std::optional<std::filesystem::path> output_dir;  // bench.csv + bench.md
};

struct NiqeFitOptions {
    std::filesystem::path corpus_dir;
    std::filesystem::path output;
    double threshold = 0.75;
};

struct SynthOptions {
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> reference_dir;  // bright originals, same names
    int64_t count = 16;
    int64_t size = 128;
    uint64_t seed = 0;
    bool low_light = true;
};

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int cmd_enhance(const EnhanceOptions& opts, std::ostream& out, std::ostream& err);
int cmd_decompose(const DecomposeOptions& opts, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_ablate(const AblateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& err);
int cmd_niqe_fit(const NiqeFitOptions& opts, std::ostream& out, std::ostream& err);
int cmd_synth_data(const SynthOptions& opts, std::ostream& out, std::ostream& err);

// ---------------------------------------------------------------------------
// Pieces the commands are built from.

struct AblationVariant {
    std::string label;  // table row label
    std::string slug;   // directory name
    ModuleToggles toggles;
};

/// "w/o OEC", "w/o CG", "w/o CE", "Ours", in table order.
const std::vector<AblationVariant>& ablation_variants();

struct AblationRow {
    AblationVariant variant;
    MetricRow metrics;                  // dataset means
    std::optional<double> final_loss;   // retrain mode only
};

std::vector<AblationRow> run_ablation(const AblateOptions& opts, std::ostream& log);
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_markdown(const std::vector<AblationRow>& rows);

struct BenchStats {
    int64_t size = 0;
    int64_t iterations = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double stddev_ms = 0.0;
    double cv = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
    std::string hardware;
};

BenchStats bench(ModelBundle& bundle, int64_t size, int64_t iterations, int64_t warmup);
BenchStats summarise_latencies(std::vector<double> ms);
std::string hardware_description();

/// Enhances every image of `input_dir` into `output_dir` (names kept, PNG),
/// staging the files first. Returns per-image milliseconds in file order.
std::vector<std::pair<std::string, double>> enhance_dir(ModelBundle& bundle, const std::filesystem::path& input_dir,
                                                        const std::filesystem::path& output_dir,
                                                        const ModuleToggles& toggles = {});

/// Sibling temp directory used while a command's outputs are being written.
std::filesystem::path staging_dir_for(const std::filesystem::path& output_dir);

}  // namespace llie
