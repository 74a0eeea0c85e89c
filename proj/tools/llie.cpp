// llie: train, enhance, decompose, evaluate, ablate and benchmark the
// Retinex enhancer from the command line.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "llie/commands.hpp"

namespace {

using namespace llie;

void add_toggle_flags(CLI::App* cmd, ModuleToggles& t) {
    cmd->add_flag("!--no-cg", t.use_cg, "Bypass channel guidance");
    cmd->add_flag("!--no-ce", t.use_ce, "Bypass colour enhancement");
    cmd->add_flag("!--no-oec", t.use_oec, "Bypass over-exposure correction");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised low-light enhancement toolkit"};
    app.require_subcommand(1);

    // train
    TrainOptions train;
    std::string train_config;
    std::vector<std::string> sets;
    std::string resume;
    std::string lr, iters, data_dir, run_dir, precision, seed, batch, size;
    auto* t = app.add_subcommand("train", "Train on a dataset directory");
    t->add_option("--config", train_config, "INI run configuration")->check(CLI::ExistingFile);
    t->add_option("--set", sets, "Override any key: section.key=value (repeatable)");
    t->add_option("--resume", resume, "Checkpoint directory to continue from");
    t->add_option("--learning-rate", lr, "train.learning_rate");
    t->add_option("--max-iterations", iters, "train.max_iterations");
    t->add_option("--batch-size", batch, "train.batch_size");
    t->add_option("--image-size", size, "train.image_size");
    t->add_option("--seed", seed, "train.seed");
    t->add_option("--precision", precision, "full or reduced");
    t->add_option("--data", data_dir, "data.train_dir");
    t->add_option("--run-dir", run_dir, "train.run_dir");
    t->add_option("--log-every", train.log_every, "Print a loss line every N iterations");

    // enhance
    EnhanceOptions enh;
    auto* e = app.add_subcommand("enhance", "Enhance every image of a directory");
    e->add_option("--checkpoint", enh.checkpoint)->required();
    e->add_option("--input", enh.input_dir)->required();
    e->add_option("--output", enh.output_dir)->required();
    add_toggle_flags(e, enh.toggles);

    // decompose
    DecomposeOptions dec;
    auto* d = app.add_subcommand("decompose", "Write projection, reflectance, illumination and recomposition");
    d->add_option("--checkpoint", dec.checkpoint)->required();
    d->add_option("--image", dec.image)->required();
    d->add_option("--output", dec.output_dir)->required();

    // evaluate
    EvaluateOptions ev;
    std::string ev_ref, ev_out;
    auto* v = app.add_subcommand("evaluate", "Score a directory of enhanced images");
    v->add_option("--enhanced", ev.enhanced_dir)->required();
    v->add_option("--reference", ev_ref, "Ground-truth directory with matching names");
    v->add_option("--output", ev_out, "Directory for metrics.csv and metrics.md");
    v->add_option("--extractor", ev.extractor, "filterbank, none, a TorchScript file or cache:<file>");
    v->add_option("--niqe-params", ev.niqe_params, "NIQE model JSON (default: bundled)");
    v->add_flag("!--no-niqe", ev.with_niqe, "Skip NIQE");

    // ablate
    AblateOptions ab;
    std::string ab_ckpt, ab_config, ab_mode = "inference";
    std::vector<std::string> ab_sets;
    auto* a = app.add_subcommand("ablate", "Four-variant ablation table (w/o OEC, w/o CG, w/o CE, Ours)");
    a->add_option("--mode", ab_mode, "inference (toggle a trained model) or retrain")
        ->check(CLI::IsMember({"inference", "retrain"}));
    a->add_option("--checkpoint", ab_ckpt, "Model for inference mode");
    a->add_option("--config", ab_config, "Run configuration for retrain mode");
    a->add_option("--set", ab_sets, "Override: section.key=value (retrain mode)");
    a->add_option("--input", ab.input_dir)->required();
    a->add_option("--reference", ab.reference_dir)->required();
    a->add_option("--output", ab.output_dir)->required();
    a->add_option("--extractor", ab.extractor);

    // bench
    BenchOptions be;
    std::string be_ckpt, be_out;
    auto* b = app.add_subcommand("bench", "Per-image inference latency");
    b->add_option("--checkpoint", be_ckpt, "Model (default: freshly initialised)");
    b->add_option("--size", be.size, "Square input side")->capture_default_str();
    b->add_option("--iterations", be.iterations)->capture_default_str();
    b->add_option("--warmup", be.warmup)->capture_default_str();
    b->add_option("--output", be_out, "Directory for bench.csv and bench.md");

    // niqe-fit
    NiqeFitOptions nf;
    auto* n = app.add_subcommand("niqe-fit", "Fit NIQE natural-scene parameters on a pristine corpus");
    n->add_option("--corpus", nf.corpus_dir)->required();
    n->add_option("--output", nf.output)->required();
    n->add_option("--threshold", nf.threshold, "Patch sharpness cut, fraction of the maximum")->capture_default_str();

    // synth-data
    SynthOptions sy;
    std::string sy_ref;
    auto* s = app.add_subcommand("synth-data", "Write synthetic textured scenes");
    s->add_option("--output", sy.output_dir)->required();
    s->add_option("--reference", sy_ref, "Also write the bright originals here");
    s->add_option("--count", sy.count)->capture_default_str();
    s->add_option("--size", sy.size)->capture_default_str();
    s->add_option("--seed", sy.seed)->capture_default_str();
    s->add_flag("!--bright", sy.low_light, "Keep scenes at full brightness");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitInput;
    }

    auto& out = std::cout;
    auto& err = std::cerr;
    try {
        if (*t) {
            if (!train_config.empty()) train.config = train_config;
            for (const auto& [flag, key] : {std::pair{&lr, "train.learning_rate"}, {&iters, "train.max_iterations"},
                                            {&batch, "train.batch_size"}, {&size, "train.image_size"},
                                            {&seed, "train.seed"}, {&precision, "train.precision"},
                                            {&data_dir, "data.train_dir"}, {&run_dir, "train.run_dir"}}) {
                if (!flag->empty()) train.overrides.emplace_back(key, *flag);
            }
            for (const auto& kv : sets) train.overrides.push_back(parse_override(kv));
            if (!resume.empty()) train.resume = resume;
            return cmd_train(train, out, err);
        }
        if (*e) return cmd_enhance(enh, out, err);
        if (*d) return cmd_decompose(dec, out, err);
        if (*v) {
            if (!ev_ref.empty()) ev.reference_dir = ev_ref;
            if (!ev_out.empty()) ev.output_dir = ev_out;
            return cmd_evaluate(ev, out, err);
        }
        if (*a) {
            ab.mode = ab_mode == "retrain" ? AblationMode::Retrain : AblationMode::Inference;
            if (!ab_ckpt.empty()) ab.checkpoint = ab_ckpt;
            if (!ab_config.empty()) ab.config = ab_config;
            for (const auto& kv : ab_sets) ab.overrides.push_back(parse_override(kv));
            return cmd_ablate(ab, out, err);
        }
        if (*b) {
            if (!be_ckpt.empty()) be.checkpoint = be_ckpt;
            if (!be_out.empty()) be.output_dir = be_out;
            return cmd_bench(be, out, err);
        }
        if (*n) return cmd_niqe_fit(nf, out, err);
        if (*s) {
            if (!sy_ref.empty()) sy.reference_dir = sy_ref;
            return cmd_synth_data(sy, out, err);
        }
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_code_for(ex.kind());
    }
    return kExitInput;
}
