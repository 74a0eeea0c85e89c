#include "llie/manifest.hpp"

#include <cmath>

#include "llie/error.hpp"

namespace llie {

using nlohmann::json;

namespace {

bool non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

void check_widths(const std::vector<int64_t>& widths, int64_t in, int64_t out, const char* name) {
    if (widths.size() < 2) fail(ErrorKind::InvalidInput, std::string(name) + " needs at least two widths");
    if (widths.front() != in || widths.back() != out) {
        fail(ErrorKind::InvalidInput, std::string(name) + " must map " + std::to_string(in) + " -> " +
                                          std::to_string(out) + " channels");
    }
    for (auto w : widths)
        if (w <= 0) fail(ErrorKind::InvalidInput, std::string(name) + " has a non-positive width");
}

}  // namespace

void LossWeights::validate() const {
    if (!non_negative(projection) || !non_negative(consistency) || !non_negative(retinex) ||
        !non_negative(perceptual)) {
        fail(ErrorKind::InvalidInput, "loss weights must be finite and >= 0");
    }
    if (projection + consistency + retinex + perceptual <= 0.0) {
        fail(ErrorKind::InvalidInput, "at least one loss weight must be positive");
    }
}

void RetinexCoefficients::validate() const {
    if (!non_negative(reconstruction) || !non_negative(pseudo_reflectance) || !non_negative(smoothness) ||
        !non_negative(gradient_reg)) {
        fail(ErrorKind::InvalidInput, "retinex coefficients must be finite and >= 0");
    }
}

void ModelConfig::validate() const {
    check_widths(n_net_widths, 3, 3, "n_net");
    check_widths(r_net_widths, 3, 3, "r_net");
    check_widths(l_net_widths, 3, 1, "l_net");
    if (kernel_size <= 0 || kernel_size % 2 == 0) fail(ErrorKind::InvalidInput, "kernel_size must be odd");
    if (cg.features <= 0 || cg.reduction <= 0 || cg.spatial_kernel % 2 == 0) {
        fail(ErrorKind::InvalidInput, "invalid channel-guidance settings");
    }
    if (ce.features <= 0 || ce.hidden <= 0 || ce.kernels.empty()) {
        fail(ErrorKind::InvalidInput, "invalid colour-enhancement settings");
    }
    for (auto k : ce.kernels)
        if (k <= 0 || k % 2 == 0) fail(ErrorKind::InvalidInput, "colour-enhancement kernels must be odd");
    if (oec.features <= 0 || oec.dilations.empty()) fail(ErrorKind::InvalidInput, "invalid exposure-correction settings");
    for (auto d : oec.dilations)
        if (d <= 0) fail(ErrorKind::InvalidInput, "dilations must be positive");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorKind::InvalidInput, "lambda must be > 0");
    if (!(illumination_epsilon > 0.0) || illumination_epsilon >= 1.0) {
        fail(ErrorKind::InvalidInput, "illumination_epsilon must lie in (0,1)");
    }
}

void to_json(json& j, const LossWeights& w) {
    j = json{{"w0_projection", w.projection},
             {"w1_consistency", w.consistency},
             {"w2_retinex", w.retinex},
             {"w3_perceptual", w.perceptual}};
}

void from_json(const json& j, LossWeights& w) {
    j.at("w0_projection").get_to(w.projection);
    j.at("w1_consistency").get_to(w.consistency);
    j.at("w2_retinex").get_to(w.retinex);
    j.at("w3_perceptual").get_to(w.perceptual);
}

void to_json(json& j, const RetinexCoefficients& c) {
    j = json{{"reconstruction", c.reconstruction},
             {"pseudo_reflectance", c.pseudo_reflectance},
             {"smoothness", c.smoothness},
             {"gradient_reg", c.gradient_reg}};
}

void from_json(const json& j, RetinexCoefficients& c) {
    j.at("reconstruction").get_to(c.reconstruction);
    j.at("pseudo_reflectance").get_to(c.pseudo_reflectance);
    j.at("smoothness").get_to(c.smoothness);
    j.at("gradient_reg").get_to(c.gradient_reg);
}

void to_json(json& j, const ModelConfig& m) {
    j = json{{"n_net_widths", m.n_net_widths},
             {"r_net_widths", m.r_net_widths},
             {"l_net_widths", m.l_net_widths},
             {"kernel_size", m.kernel_size},
             {"cg", {{"features", m.cg.features}, {"reduction", m.cg.reduction}, {"spatial_kernel", m.cg.spatial_kernel}}},
             {"ce", {{"features", m.ce.features}, {"kernels", m.ce.kernels}, {"hidden", m.ce.hidden}}},
             {"oec",
              {{"features", m.oec.features},
               {"dilations", m.oec.dilations},
               {"saturation_threshold", m.oec.saturation_threshold}}},
             {"lambda", m.lambda},
             {"illumination_epsilon", m.illumination_epsilon},
             {"lambda_in_retinex_loss", m.lambda_in_retinex_loss}};
}

void from_json(const json& j, ModelConfig& m) {
    j.at("n_net_widths").get_to(m.n_net_widths);
    j.at("r_net_widths").get_to(m.r_net_widths);
    j.at("l_net_widths").get_to(m.l_net_widths);
    j.at("kernel_size").get_to(m.kernel_size);
    const auto& cg = j.at("cg");
    cg.at("features").get_to(m.cg.features);
    cg.at("reduction").get_to(m.cg.reduction);
    cg.at("spatial_kernel").get_to(m.cg.spatial_kernel);
    const auto& ce = j.at("ce");
    ce.at("features").get_to(m.ce.features);
    ce.at("kernels").get_to(m.ce.kernels);
    ce.at("hidden").get_to(m.ce.hidden);
    const auto& oec = j.at("oec");
    oec.at("features").get_to(m.oec.features);
    oec.at("dilations").get_to(m.oec.dilations);
    oec.at("saturation_threshold").get_to(m.oec.saturation_threshold);
    j.at("lambda").get_to(m.lambda);
    j.at("illumination_epsilon").get_to(m.illumination_epsilon);
    j.at("lambda_in_retinex_loss").get_to(m.lambda_in_retinex_loss);
}

void to_json(json& j, const Manifest& m) {
    j = json{{"format", kManifestFormat},
             {"format_version", kManifestVersion},
             {"architecture", kArchitecture},
             {"model", m.model},
             {"loss_weights", m.weights},
             {"retinex_coefficients", m.retinex},
             {"iteration", m.iteration},
             {"extra", m.extra}};
}

void from_json(const json& j, Manifest& m) {
    j.at("model").get_to(m.model);
    j.at("loss_weights").get_to(m.weights);
    j.at("retinex_coefficients").get_to(m.retinex);
    j.at("iteration").get_to(m.iteration);
    m.extra = j.value("extra", json::object());
}

std::string dump_manifest(const Manifest& m) { return json(m).dump(2) + "\n"; }

Manifest parse_manifest(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::CheckpointError, std::string("manifest is not valid JSON: ") + e.what());
    }
    if (j.value("format", "") != kManifestFormat) fail(ErrorKind::CheckpointError, "not a checkpoint manifest");
    if (j.value("format_version", -1) != kManifestVersion) {
        fail(ErrorKind::CheckpointError, "unsupported manifest version");
    }
    if (j.value("architecture", "") != kArchitecture) {
        fail(ErrorKind::CheckpointError, "unsupported architecture '" + j.value("architecture", "") + "'");
    }
    Manifest m;
    try {
        m = j.get<Manifest>();
        m.model.validate();
        m.weights.validate();
        m.retinex.validate();
    } catch (const json::exception& e) {
        fail(ErrorKind::CheckpointError, std::string("malformed manifest: ") + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::CheckpointError, std::string("manifest rejected: ") + e.what());
    }
    return m;
}

}  // namespace llie
