#include "llie/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "llie/error.hpp"

namespace llie {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
    fail(ErrorKind::ConfigError, key + " = '" + value + "': expected " + expected);
}

double as_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) bad_value(key, v, "a number");
    return out;
}

int64_t as_int(const std::string& key, const std::string& v) {
    int64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) bad_value(key, v, "an integer");
    return out;
}

uint64_t as_uint(const std::string& key, const std::string& v) {
    uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) bad_value(key, v, "a non-negative integer");
    return out;
}

bool as_bool(const std::string& key, const std::string& v) {
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad_value(key, v, "true or false");
}

std::vector<int64_t> as_list(const std::string& key, const std::string& v) {
    std::vector<int64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(as_int(key, trim(item)));
    if (out.empty()) bad_value(key, v, "a comma-separated list of integers");
    return out;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::string fmt(const std::vector<int64_t>& v) {
    std::string out;
    for (size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
    return out;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(RunConfig&, const std::string& name, const std::string& value)> set;
    std::function<std::string(const RunConfig&)> get;  // empty for write-only keys
};

#define LLIE_DOUBLE(sec, name, member)                                                                   \
    Field {                                                                                              \
        sec, name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = as_double(k, v); }, \
            [](const RunConfig& c) { return fmt(c.member); }                                             \
    }
#define LLIE_INT(sec, name, member)                                                                      \
    Field {                                                                                              \
        sec, name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = as_int(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                                  \
    }
#define LLIE_BOOL(sec, name, member)                                                                     \
    Field {                                                                                              \
        sec, name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = as_bool(k, v); }, \
            [](const RunConfig& c) { return fmt(c.member); }                                             \
    }
#define LLIE_LIST(sec, name, member)                                                                     \
    Field {                                                                                              \
        sec, name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = as_list(k, v); }, \
            [](const RunConfig& c) { return fmt(c.member); }                                             \
    }
#define LLIE_PATH(sec, name, member)                                                                     \
    Field {                                                                                              \
        sec, name, [](RunConfig& c, const std::string&, const std::string& v) { c.member = v; },         \
            [](const RunConfig& c) { return c.member.string(); }                                         \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        LLIE_PATH("data", "train_dir", train_dir),
        LLIE_PATH("data", "reference_dir", reference_dir),
        LLIE_PATH("data", "eval_dir", eval_dir),
        Field{"data", "synth_seed",
              [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_seed = as_uint(k, v); },
              [](const RunConfig& c) { return std::to_string(c.synth_seed); }},
        Field{"data", "niqe_params", [](RunConfig& c, const std::string&, const std::string& v) { c.niqe_params = v; },
              [](const RunConfig& c) { return c.niqe_params; }},

        LLIE_DOUBLE("train", "learning_rate", train.learning_rate),
        LLIE_DOUBLE("train", "beta1", train.beta1),
        LLIE_DOUBLE("train", "beta2", train.beta2),
        LLIE_INT("train", "batch_size", train.batch_size),
        LLIE_INT("train", "max_iterations", train.max_iterations),
        LLIE_INT("train", "image_size", train.image_size),
        Field{"train", "seed",
              [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = as_uint(k, v); },
              [](const RunConfig& c) { return std::to_string(c.train.seed); }},
        Field{"train", "precision",
              [](RunConfig& c, const std::string& k, const std::string& v) {
                  if (v == "full") c.train.precision = Precision::Full;
                  else if (v == "reduced") c.train.precision = Precision::Reduced;
                  else bad_value(k, v, "full or reduced");
              },
              [](const RunConfig& c) { return to_string(c.train.precision); }},
        LLIE_INT("train", "checkpoint_every", train.checkpoint_every),
        Field{"train", "lr_schedule",
              [](RunConfig& c, const std::string& k, const std::string& v) {
                  if (v == "constant") c.train.lr_schedule = LrSchedule::Constant;
                  else if (v == "cosine") c.train.lr_schedule = LrSchedule::Cosine;
                  else bad_value(k, v, "constant or cosine");
              },
              [](const RunConfig& c) { return to_string(c.train.lr_schedule); }},
        LLIE_DOUBLE("train", "clip_norm", train.clip_norm),
        LLIE_BOOL("train", "augment", train.augment),
        Field{"train", "extractor",
              [](RunConfig& c, const std::string&, const std::string& v) { c.train.extractor = v; },
              [](const RunConfig& c) { return c.train.extractor; }},
        LLIE_PATH("train", "run_dir", run_dir),

        LLIE_DOUBLE("loss", "w_projection", train.weights.projection),
        LLIE_DOUBLE("loss", "w_consistency", train.weights.consistency),
        LLIE_DOUBLE("loss", "w_retinex", train.weights.retinex),
        LLIE_DOUBLE("loss", "w_perceptual", train.weights.perceptual),
        LLIE_DOUBLE("loss", "reconstruction", train.retinex.reconstruction),
        LLIE_DOUBLE("loss", "pseudo_reflectance", train.retinex.pseudo_reflectance),
        LLIE_DOUBLE("loss", "smoothness", train.retinex.smoothness),
        LLIE_DOUBLE("loss", "gradient_reg", train.retinex.gradient_reg),

        LLIE_LIST("model", "n_widths", train.model.n_net_widths),
        LLIE_LIST("model", "r_widths", train.model.r_net_widths),
        LLIE_LIST("model", "l_widths", train.model.l_net_widths),
        Field{"model", "width",
              [](RunConfig& c, const std::string& k, const std::string& v) {
                  const auto w = as_int(k, v);
                  for (auto* widths : {&c.train.model.n_net_widths, &c.train.model.r_net_widths,
                                       &c.train.model.l_net_widths}) {
                      for (size_t i = 1; i + 1 < widths->size(); ++i) (*widths)[i] = w;
                  }
              },
              {}},
        LLIE_INT("model", "kernel_size", train.model.kernel_size),
        LLIE_DOUBLE("model", "lambda", train.model.lambda),
        LLIE_DOUBLE("model", "illumination_epsilon", train.model.illumination_epsilon),
        LLIE_BOOL("model", "lambda_in_retinex_loss", train.model.lambda_in_retinex_loss),
        LLIE_INT("model", "cg_features", train.model.cg.features),
        LLIE_INT("model", "cg_reduction", train.model.cg.reduction),
        LLIE_INT("model", "cg_spatial_kernel", train.model.cg.spatial_kernel),
        LLIE_INT("model", "ce_features", train.model.ce.features),
        LLIE_LIST("model", "ce_kernels", train.model.ce.kernels),
        LLIE_INT("model", "ce_hidden", train.model.ce.hidden),
        LLIE_INT("model", "oec_features", train.model.oec.features),
        LLIE_LIST("model", "oec_dilations", train.model.oec.dilations),
        LLIE_DOUBLE("model", "saturation_threshold", train.model.oec.saturation_threshold),

        LLIE_BOOL("ablation", "use_cg", train.toggles.use_cg),
        LLIE_BOOL("ablation", "use_ce", train.toggles.use_ce),
        LLIE_BOOL("ablation", "use_oec", train.toggles.use_oec),
    };
    return table;
}

#undef LLIE_DOUBLE
#undef LLIE_INT
#undef LLIE_BOOL
#undef LLIE_LIST
#undef LLIE_PATH

// Line of `key` inside `[section]`, or 0 when not found.
int locate(const fs::path& path, const std::string& section, const std::string& key) {
    std::ifstream in(path);
    std::string line, current;
    for (int n = 1; std::getline(in, line); ++n) {
        const auto t = trim(line);
        if (t.size() > 1 && t.front() == '[' && t.back() == ']') {
            current = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (current == section && eq != std::string::npos && trim(t.substr(0, eq)) == key) return n;
    }
    return 0;
}

}  // namespace

void set_field(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
    const auto dot = dotted_key.find('.');
    if (dot == std::string::npos) fail(ErrorKind::ConfigError, dotted_key + ": expected section.key");
    const auto section = dotted_key.substr(0, dot);
    const auto key = dotted_key.substr(dot + 1);
    for (const auto& f : fields()) {
        if (section == f.section && key == f.key) {
            f.set(cfg, dotted_key, trim(value));
            return;
        }
    }
    fail(ErrorKind::ConfigError, dotted_key + ": unknown key");
}

RunConfig load_config(const fs::path& path, RunConfig base) {
    if (!fs::is_regular_file(path)) fail(ErrorKind::ConfigError, "config file not found: " + path.string());
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail(ErrorKind::ConfigError, path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            fail(ErrorKind::ConfigError,
                 path.string() + ":" + std::to_string(locate(path, "", section)) + ": " + section +
                     ": key outside of a section");
        }
        for (const auto& [key, value] : body) {
            try {
                set_field(base, section + "." + key, value.get_value<std::string>());
            } catch (const Error& e) {
                std::string msg = e.what();
                const std::string prefix = std::string(to_string(e.kind())) + ": ";
                if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
                fail(ErrorKind::ConfigError,
                     path.string() + ":" + std::to_string(locate(path, section, key)) + ": " + msg);
            }
        }
    }
    return base;
}

void apply_overrides(RunConfig& cfg, const Overrides& overrides) {
    for (const auto& [key, value] : overrides) set_field(cfg, key, value);
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::ConfigError, "'" + text + "': expected section.key=value");
    return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

std::string to_ini(const RunConfig& cfg) {
    std::ostringstream os;
    std::string section;
    for (const auto& f : fields()) {
        if (!f.get) continue;
        if (section != f.section) {
            if (!section.empty()) os << '\n';
            section = f.section;
            os << '[' << section << "]\n";
        }
        os << f.key << " = " << f.get(cfg) << '\n';
    }
    return os.str();
}

}  // namespace llie
