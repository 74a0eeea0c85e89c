#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "llie/features.hpp"
#include "llie/metrics.hpp"

namespace llie {

struct MetricRow {
    std::string filename;
    std::optional<double> psnr;
    std::optional<double> ssim;
    std::optional<double> perceptual;
    std::optional<double> niqe;
};

/// Per-image rows plus the arithmetic mean of each populated column.
struct MetricReport {
    std::vector<MetricRow> rows;
    MetricRow mean;
    bool has_reference = false;
};

/// Image files (png/jpg/jpeg) directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Scores every image in `enhanced`. Full-reference columns (PSNR, SSIM,
/// LPIPS-like) are filled only when `reference` is given, in which case both
/// directories must hold the same filenames (PairingError otherwise). NIQE is
/// filled when `ns_params` is given. `extractor` may be null to skip the
/// perceptual column.
MetricReport evaluate_dir(const std::filesystem::path& enhanced, const std::optional<std::filesystem::path>& reference,
                          const FeatureExtractor* extractor, const NsParams* ns_params);

MetricRow mean_row(const std::vector<MetricRow>& rows);

/// `filename,psnr,ssim,perc_dist,niqe`, one line per image then a `mean` line.
/// Missing values are left empty.
std::string to_csv(const MetricReport& report);
/// Markdown table in PSNR, SSIM, LPIPS-like, NIQE order with arrows.
std::string to_markdown(const MetricReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace llie
