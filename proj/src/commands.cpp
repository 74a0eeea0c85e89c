#include "llie/commands.hpp"

#include <torch/version.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "llie/synthetic.hpp"

namespace llie {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        fn();
        return kExitOk;
    } catch (const PairingError& e) {
        err << "error: " << e.what() << '\n';
        for (const auto& name : e.offenders()) err << "  unpaired: " << name << '\n';
        return exit_code_for(e.kind());
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const c10::Error& e) {
        err << "error: " << e.what_without_backtrace() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

void require_dir(const fs::path& dir, const std::string& what) {
    std::error_code ec;
    if (dir.empty()) fail(ErrorKind::InvalidInput, what + " is not set");
    if (!fs::is_directory(dir, ec)) fail(ErrorKind::NotFound, what + " " + dir.string() + " does not exist");
}

void write_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    write_text(tmp, text);
    fs::rename(tmp, path);
}

// Moves every file of `staging` into `output_dir` and drops the staging dir.
void publish(const fs::path& staging, const fs::path& output_dir) {
    fs::create_directories(output_dir);
    for (const auto& e : fs::directory_iterator(staging)) fs::rename(e.path(), output_dir / e.path().filename());
    fs::remove_all(staging);
}

// Full-resolution activations are tens of MB each. By default glibc serves
// them with mmap and unmaps them on free, so every forward pass pays fresh
// page faults; keep them on the heap and reuse the pages instead.
void keep_freed_buffers() {
#if defined(__GLIBC__)
    static const bool once = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
        return true;
    }();
    (void)once;
#endif
}

std::string fixed(double v, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string opt_cell(const std::optional<double>& v, int precision, const std::string& missing) {
    return v ? fixed(*v, precision) : missing;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::CheckpointError: return kExitCheckpoint;
        case ErrorKind::NumericalError: return kExitNumerical;
        default: return kExitInput;
    }
}

fs::path staging_dir_for(const fs::path& output_dir) {
    auto abs = fs::absolute(output_dir).lexically_normal();
    if (abs.filename().empty()) abs = abs.parent_path();
    return abs.parent_path() / ("." + abs.filename().string() + ".staging");
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        RunConfig cfg;
        if (opts.config) cfg = load_config(*opts.config);
        apply_overrides(cfg, opts.overrides);
        cfg.train.validate();
        require_dir(cfg.train_dir, "dataset directory (data.train_dir)");
        if (cfg.run_dir.empty()) fail(ErrorKind::ConfigError, "train.run_dir is not set");
        if (opts.resume && !fs::is_directory(*opts.resume)) {
            fail(ErrorKind::CheckpointError, "resume checkpoint " + opts.resume->string() + " does not exist");
        }
        const auto data = PairDataset::from_directory(cfg.train_dir, cfg.synth_seed);

        fs::create_directories(cfg.run_dir);
        write_atomic(cfg.run_dir / "config.ini", to_ini(cfg));
        out << "training on " << data.size() << " scenes, " << cfg.train.max_iterations << " iterations -> "
            << cfg.run_dir.string() << '\n';

        auto t0 = Clock::now();
        const auto every = std::max<int64_t>(1, opts.log_every);
        auto on_step = [&](int64_t it, const StepResult& r) {
            if (it % every != 0 && it != cfg.train.max_iterations) return;
            const auto& rep = r.report;
            out << "iter " << it << " total=" << rep.total << " proj=" << rep.projection
                << " cons=" << rep.consistency << " retinex=" << rep.retinex << " perc=" << rep.perceptual << " ("
                << fixed(elapsed_ms(t0) / 1000.0 / static_cast<double>(every), 3) << " s/it)\n";
            out.flush();
            t0 = Clock::now();
        };
        const auto last = train(cfg.train, data, cfg.run_dir, opts.resume, on_step);
        out << "checkpoint: " << last.string() << '\n';
    });
}

// ---------------------------------------------------------------------------
// enhance / decompose

std::vector<std::pair<std::string, double>> enhance_dir(ModelBundle& bundle, const fs::path& input_dir,
                                                        const fs::path& output_dir, const ModuleToggles& toggles) {
    const auto inputs = list_images(input_dir);
    if (inputs.empty()) fail(ErrorKind::InvalidInput, "no images in " + input_dir.string());
    std::set<std::string> names;
    for (const auto& p : inputs) {
        if (!names.insert(p.stem().string() + ".png").second) {
            fail(ErrorKind::InvalidInput, "two inputs map to " + p.stem().string() + ".png");
        }
    }

    keep_freed_buffers();
    const auto staging = staging_dir_for(output_dir);
    fs::remove_all(staging);
    fs::create_directories(staging);
    std::vector<std::pair<std::string, double>> timings;
    try {
        for (const auto& path : inputs) {
            const auto img = load_image(path);
            const auto t0 = Clock::now();
            const auto result = enhance(bundle, img, toggles);
            const double ms = elapsed_ms(t0);
            const auto name = path.stem().string() + ".png";
            save_image(result.image, staging / name);
            timings.emplace_back(name, ms);
        }
        publish(staging, output_dir);
    } catch (...) {
        fs::remove_all(staging);
        throw;
    }
    return timings;
}

int cmd_enhance(const EnhanceOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto bundle = load_checkpoint(opts.checkpoint);
        require_dir(opts.input_dir, "input directory");
        const auto timings = enhance_dir(bundle, opts.input_dir, opts.output_dir, opts.toggles);

        std::ostringstream csv;
        csv << "filename,ms\n";
        double total = 0.0;
        for (const auto& [name, ms] : timings) {
            csv << name << ',' << fixed(ms, 3) << '\n';
            total += ms;
        }
        const double mean = total / static_cast<double>(timings.size());
        csv << "mean," << fixed(mean, 3) << '\n';
        write_atomic(opts.output_dir / "timing.csv", csv.str());
        out << "enhanced " << timings.size() << " images into " << opts.output_dir.string() << ", mean "
            << fixed(mean, 2) << " ms/image\n";
    });
}

int cmd_decompose(const DecomposeOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto bundle = load_checkpoint(opts.checkpoint);
        const auto img = load_image(opts.image);
        const auto a = infer(bundle, img);
        auto single = [](const torch::Tensor& t) { return ImageTensor::clamped(t.squeeze(0)); };
        const auto stem = opts.image.stem().string();

        const auto staging = staging_dir_for(opts.output_dir);
        fs::remove_all(staging);
        fs::create_directories(staging);
        try {
            save_image(single(a.projection), staging / (stem + "_i.png"));
            save_image(single(a.reflectance_f), staging / (stem + "_r.png"));
            save_image(single(a.illumination_f.expand_as(a.reflectance_f)), staging / (stem + "_l.png"));
            save_image(single(a.illumination_f * a.reflectance_f), staging / (stem + "_recon.png"));
            publish(staging, opts.output_dir);
        } catch (...) {
            fs::remove_all(staging);
            throw;
        }
        out << "wrote " << stem << "_{i,r,l,recon}.png to " << opts.output_dir.string() << '\n';
    });
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        require_dir(opts.enhanced_dir, "enhanced directory");
        if (opts.reference_dir) require_dir(*opts.reference_dir, "reference directory");
        std::shared_ptr<FeatureExtractor> extractor;
        if (opts.reference_dir) extractor = make_extractor(opts.extractor);
        std::optional<NsParams> params;
        if (opts.with_niqe) {
            params = load_ns_params(opts.niqe_params.empty() ? default_ns_params_path() : fs::path(opts.niqe_params));
        }
        const auto report =
            evaluate_dir(opts.enhanced_dir, opts.reference_dir, extractor.get(), params ? &*params : nullptr);
        const auto md = to_markdown(report);
        if (opts.output_dir) {
            fs::create_directories(*opts.output_dir);
            write_atomic(*opts.output_dir / "metrics.csv", to_csv(report));
            write_atomic(*opts.output_dir / "metrics.md", md);
        }
        out << md;
    });
}

// ---------------------------------------------------------------------------
// ablate

const std::vector<AblationVariant>& ablation_variants() {
    static const std::vector<AblationVariant> variants = {
        {"w/o OEC", "no_oec", {true, true, false}},
        {"w/o CG", "no_cg", {false, true, true}},
        {"w/o CE", "no_ce", {true, false, true}},
        {"Ours", "full", {true, true, true}},
    };
    return variants;
}

std::vector<AblationRow> run_ablation(const AblateOptions& opts, std::ostream& log) {
    require_dir(opts.input_dir, "input directory");
    require_dir(opts.reference_dir, "reference directory");
    if (opts.output_dir.empty()) fail(ErrorKind::InvalidInput, "output directory is not set");
    {
        std::set<std::string> expected, present;
        for (const auto& p : list_images(opts.input_dir)) expected.insert(p.stem().string() + ".png");
        for (const auto& p : list_images(opts.reference_dir)) present.insert(p.filename().string());
        std::vector<std::string> offenders;
        std::set_symmetric_difference(expected.begin(), expected.end(), present.begin(), present.end(),
                                      std::back_inserter(offenders));
        if (!offenders.empty()) throw PairingError(offenders);
    }
    const auto extractor = make_extractor(opts.extractor);

    std::optional<ModelBundle> shared;
    std::optional<RunConfig> cfg;
    std::optional<PairDataset> data;
    if (opts.mode == AblationMode::Inference) {
        if (!opts.checkpoint) fail(ErrorKind::InvalidInput, "inference ablation needs a checkpoint");
        shared = load_checkpoint(*opts.checkpoint);
    } else {
        cfg.emplace();
        if (opts.config) cfg = load_config(*opts.config);
        apply_overrides(*cfg, opts.overrides);
        cfg->train.validate();
        require_dir(cfg->train_dir, "dataset directory (data.train_dir)");
        data = PairDataset::from_directory(cfg->train_dir, cfg->synth_seed);
    }

    std::vector<AblationRow> rows;
    for (const auto& variant : ablation_variants()) {
        AblationRow row{variant, {}, std::nullopt};
        const auto variant_dir = opts.output_dir / variant.slug;
        if (shared) {
            enhance_dir(*shared, opts.input_dir, variant_dir / "enhanced", variant.toggles);
        } else {
            auto tc = cfg->train;
            tc.toggles = variant.toggles;
            std::vector<double> totals;
            log << variant.label << ": training " << tc.max_iterations << " iterations\n";
            const auto last = train(tc, *data, variant_dir / "run", std::nullopt,
                                    [&](int64_t, const StepResult& r) { totals.push_back(r.report.total); });
            const size_t tail = std::min<size_t>(100, totals.size());
            row.final_loss =
                std::accumulate(totals.end() - static_cast<std::ptrdiff_t>(tail), totals.end(), 0.0) /
                static_cast<double>(tail);
            auto bundle = load_checkpoint(last);
            enhance_dir(bundle, opts.input_dir, variant_dir / "enhanced", variant.toggles);
        }
        const auto report = evaluate_dir(variant_dir / "enhanced", opts.reference_dir, extractor.get(), nullptr);
        row.metrics = report.mean;
        row.metrics.filename = variant.label;
        log << variant.label << ": PSNR " << opt_cell(row.metrics.psnr, 3, "-") << " SSIM "
            << opt_cell(row.metrics.ssim, 4, "-") << '\n';
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "method,psnr,ssim,perc_dist,final_loss\n";
    for (const auto& r : rows) {
        os << r.variant.label << ',' << opt_cell(r.metrics.psnr, 6, "") << ',' << opt_cell(r.metrics.ssim, 6, "")
           << ',' << opt_cell(r.metrics.perceptual, 6, "") << ',' << opt_cell(r.final_loss, 6, "") << '\n';
    }
    return os.str();
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
    const bool losses = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.final_loss.has_value(); });
    std::ostringstream os;
    os << "| Method | PSNR↑ | SSIM↑ | LPIPS-like↓ |" << (losses ? " Train loss↓ |" : "") << '\n';
    os << "|---|---|---|---|" << (losses ? "---|" : "") << '\n';
    for (const auto& r : rows) {
        os << "| " << r.variant.label << " | " << opt_cell(r.metrics.psnr, 3, "-") << " | "
           << opt_cell(r.metrics.ssim, 4, "-") << " | " << opt_cell(r.metrics.perceptual, 4, "-") << " |";
        if (losses) os << ' ' << opt_cell(r.final_loss, 5, "-") << " |";
        os << '\n';
    }
    return os.str();
}

int cmd_ablate(const AblateOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto rows = run_ablation(opts, out);
        const auto md = ablation_markdown(rows);
        write_atomic(opts.output_dir / "ablation.csv", ablation_csv(rows));
        write_atomic(opts.output_dir / "ablation.md", md);
        out << md;
    });
}

// ---------------------------------------------------------------------------
// bench

std::string hardware_description() {
    std::string cpu = "unknown CPU";
    std::ifstream info("/proc/cpuinfo");
    std::string line;
    while (std::getline(info, line)) {
        if (line.rfind("model name", 0) == 0) {
            cpu = line.substr(line.find(':') + 2);
            break;
        }
    }
    std::ostringstream os;
    os << cpu << ", " << std::thread::hardware_concurrency() << " logical cores, " << at::get_num_threads()
       << " torch threads, libtorch " << TORCH_VERSION;
    return os.str();
}

BenchStats summarise_latencies(std::vector<double> ms) {
    if (ms.empty()) fail(ErrorKind::InvalidInput, "no latencies to summarise");
    std::sort(ms.begin(), ms.end());
    const auto n = ms.size();
    BenchStats s;
    s.iterations = static_cast<int64_t>(n);
    s.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(n);
    s.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
    const auto rank = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(n)));
    s.p95_ms = ms[std::max<size_t>(rank, 1) - 1];
    double sq = 0.0;
    for (double v : ms) sq += (v - s.mean_ms) * (v - s.mean_ms);
    s.stddev_ms = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0.0;
    s.cv = s.mean_ms > 0.0 ? s.stddev_ms / s.mean_ms : 0.0;
    s.min_ms = ms.front();
    s.max_ms = ms.back();
    return s;
}

BenchStats bench(ModelBundle& bundle, int64_t size, int64_t iterations, int64_t warmup) {
    if (size < ImageTensor::kMinSide) fail(ErrorKind::InvalidInput, "bench size must be >= 8");
    if (iterations < 1 || warmup < 0) fail(ErrorKind::InvalidInput, "bench needs iterations >= 1, warmup >= 0");
    keep_freed_buffers();
    const auto img = low_light_version(textured_scene(0, size, size), 0);
    for (int64_t k = 0; k < warmup; ++k) enhance(bundle, img);
    std::vector<double> ms;
    ms.reserve(static_cast<size_t>(iterations));
    for (int64_t k = 0; k < iterations; ++k) {
        const auto t0 = Clock::now();
        enhance(bundle, img);
        ms.push_back(elapsed_ms(t0));
    }
    auto stats = summarise_latencies(std::move(ms));
    stats.size = size;
    stats.hardware = hardware_description();
    return stats;
}

int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        ModelBundle bundle = opts.checkpoint ? load_checkpoint(*opts.checkpoint) : ModelBundle{};
        const auto s = bench(bundle, opts.size, opts.iterations, opts.warmup);

        std::ostringstream md;
        md << "resolution: " << s.size << "x" << s.size << "\n"
           << "hardware: " << s.hardware << "\n"
           << "iterations: " << s.iterations << " (warmup " << opts.warmup << ")\n\n"
           << "| mean ms | median ms | p95 ms | std ms | CV |\n|---|---|---|---|---|\n"
           << "| " << fixed(s.mean_ms, 2) << " | " << fixed(s.median_ms, 2) << " | " << fixed(s.p95_ms, 2) << " | "
           << fixed(s.stddev_ms, 2) << " | " << fixed(s.cv, 4) << " |\n";
        if (opts.output_dir) {
            fs::create_directories(*opts.output_dir);
            std::ostringstream csv;
            csv << "size,iterations,mean_ms,median_ms,p95_ms,stddev_ms,cv,hardware\n"
                << s.size << ',' << s.iterations << ',' << fixed(s.mean_ms, 4) << ',' << fixed(s.median_ms, 4) << ','
                << fixed(s.p95_ms, 4) << ',' << fixed(s.stddev_ms, 4) << ',' << fixed(s.cv, 6) << ",\""
                << s.hardware << "\"\n";
            write_atomic(*opts.output_dir / "bench.csv", csv.str());
            write_atomic(*opts.output_dir / "bench.md", md.str());
        }
        out << md.str();
    });
}

// ---------------------------------------------------------------------------
// niqe-fit / synth-data

int cmd_niqe_fit(const NiqeFitOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        require_dir(opts.corpus_dir, "corpus directory");
        std::vector<ImageTensor> images;
        for (const auto& p : list_images(opts.corpus_dir)) images.push_back(load_image(p));
        auto params = fit_ns_params(images, opts.threshold);
        params.source = opts.corpus_dir.filename().string() + ": " + params.source;
        save_ns_params(params, opts.output);
        out << "niqe model (" << params.source << ") -> " << opts.output.string() << '\n';
    });
}

int cmd_synth_data(const SynthOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opts.count < 1) fail(ErrorKind::InvalidInput, "count must be >= 1");
        if (opts.size < ImageTensor::kMinSide) fail(ErrorKind::InvalidInput, "size must be >= 8");
        fs::create_directories(opts.output_dir);
        if (opts.reference_dir) fs::create_directories(*opts.reference_dir);
        for (int64_t k = 0; k < opts.count; ++k) {
            std::ostringstream name;
            name << "scene_" << std::setw(3) << std::setfill('0') << k << ".png";
            const auto scene = textured_scene(mix_seed(opts.seed, static_cast<uint64_t>(k)), opts.size, opts.size);
            const auto img =
                opts.low_light ? low_light_version(scene, mix_seed(opts.seed ^ 0x10ULL, static_cast<uint64_t>(k)))
                               : scene;
            save_image(img, opts.output_dir / name.str());
            if (opts.reference_dir) save_image(scene, *opts.reference_dir / name.str());
        }
        out << "wrote " << opts.count << " images to " << opts.output_dir.string() << '\n';
    });
}

}  // namespace llie
