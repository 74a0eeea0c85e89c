#include "llie/evaluate.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "llie/error.hpp"

namespace llie {

namespace fs = std::filesystem;

namespace {

bool is_image(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::string cell(const std::optional<double>& v, int precision) {
    if (!v) return "";
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << *v;
    return os.str();
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) fail(ErrorKind::NotFound, "directory " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image(e.path())) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

MetricRow mean_row(const std::vector<MetricRow>& rows) {
    MetricRow m;
    m.filename = "mean";
    auto average = [&](std::optional<double> MetricRow::*field) -> std::optional<double> {
        double sum = 0.0;
        size_t n = 0;
        for (const auto& r : rows) {
            if (r.*field) {
                sum += *(r.*field);
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    };
    m.psnr = average(&MetricRow::psnr);
    m.ssim = average(&MetricRow::ssim);
    m.perceptual = average(&MetricRow::perceptual);
    m.niqe = average(&MetricRow::niqe);
    return m;
}

MetricReport evaluate_dir(const fs::path& enhanced, const std::optional<fs::path>& reference,
                          const FeatureExtractor* extractor, const NsParams* ns_params) {
    const auto outputs = list_images(enhanced);
    if (outputs.empty()) fail(ErrorKind::InvalidInput, "no images in " + enhanced.string());

    MetricReport report;
    report.has_reference = reference.has_value();
    if (reference) {
        std::set<std::string> mine, theirs;
        for (const auto& p : outputs) mine.insert(p.filename().string());
        for (const auto& p : list_images(*reference)) theirs.insert(p.filename().string());
        std::vector<std::string> offenders;
        std::set_symmetric_difference(mine.begin(), mine.end(), theirs.begin(), theirs.end(),
                                      std::back_inserter(offenders));
        if (!offenders.empty()) throw PairingError(offenders);
    }

    for (const auto& path : outputs) {
        MetricRow row;
        row.filename = path.filename().string();
        const auto img = load_image(path);
        if (reference) {
            const auto ref = load_image(*reference / path.filename());
            row.psnr = psnr(img, ref);
            row.ssim = ssim(img, ref);
            if (extractor) row.perceptual = perceptual_distance(extractor, img, ref);
        }
        if (ns_params) row.niqe = niqe(img, *ns_params);
        report.rows.push_back(std::move(row));
    }
    report.mean = mean_row(report.rows);
    return report;
}

std::string to_csv(const MetricReport& report) {
    std::ostringstream os;
    os << "filename,psnr,ssim,perc_dist,niqe\n";
    auto line = [&](const MetricRow& r) {
        os << r.filename << ',' << cell(r.psnr, 6) << ',' << cell(r.ssim, 6) << ',' << cell(r.perceptual, 6) << ','
           << cell(r.niqe, 6) << '\n';
    };
    for (const auto& r : report.rows) line(r);
    line(report.mean);
    return os.str();
}

std::string to_markdown(const MetricReport& report) {
    std::ostringstream os;
    os << "| Image | PSNR↑ | SSIM↑ | LPIPS-like↓ | NIQE↓ |\n";
    os << "|---|---|---|---|---|\n";
    auto dash = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
    auto line = [&](const MetricRow& r, bool bold) {
        const std::string name = bold ? "**" + r.filename + "**" : r.filename;
        os << "| " << name << " | " << dash(cell(r.psnr, 3)) << " | " << dash(cell(r.ssim, 4)) << " | "
           << dash(cell(r.perceptual, 4)) << " | " << dash(cell(r.niqe, 3)) << " |\n";
    };
    for (const auto& r : report.rows) line(r, false);
    line(report.mean, true);
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
}

}  // namespace llie
