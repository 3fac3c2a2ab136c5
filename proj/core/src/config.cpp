#include "spectrapad/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "spectrapad/csv.hpp"
#include "spectrapad/error.hpp"
#include "spectrapad/rng.hpp"

namespace spectrapad {

namespace {

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  const auto last = s.find_last_not_of(" \t\r");
  s.erase(last == std::string::npos ? 0 : last + 1);
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) fail(ErrorKind::kConfig, key + ": cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  fail(ErrorKind::kConfig, key + ": expected a boolean, got '" + v + "'");
}

template <class T, std::size_t N>
std::array<T, N> parse_array(const std::string& key, const std::string& v) {
  const auto items = split_list(v);
  if (items.size() != N) fail(ErrorKind::kConfig, key + ": expected " + std::to_string(N) + " values");
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_number<T>(key, items[i]);
  return out;
}

template <class T, std::size_t N>
std::string join(const std::array<T, N>& a) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(a[i]);
    else
      out += std::to_string(a[i]);
  }
  return out;
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  std::function<void(GlobalConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const GlobalConfig&)> get;
  bool hashed = true;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  return p.is_absolute() ? p : base / p;
}

const std::map<std::string, Field>& schema() {
  using P = std::filesystem::path;
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["seed"] = {[](GlobalConfig& c, const std::string& v, const P&) { c.seed = parse_number<std::uint64_t>("seed", v); },
                 [](const GlobalConfig& c) { return std::to_string(c.seed); }};
    f["output_dir"] = {[](GlobalConfig& c, const std::string& v, const P& b) { c.output_dir = resolve(b, v); },
                       [](const GlobalConfig& c) { return c.output_dir.string(); }, false};
    f["dataset.manifest"] = {
        [](GlobalConfig& c, const std::string& v, const P& b) {
          if (v.empty()) {
            c.manifest.reset();
            return;
          }
          c.manifest = resolve(b, v);
          if (c.dataset_root.empty()) c.dataset_root = c.manifest->parent_path();
        },
        [](const GlobalConfig& c) { return c.manifest ? c.manifest->filename().string() : std::string(); }};
    f["dataset.root"] = {[](GlobalConfig& c, const std::string& v, const P& b) { c.dataset_root = resolve(b, v); },
                         [](const GlobalConfig& c) { return c.dataset_root.filename().string(); }, false};

    // synthetic generator
    f["synth.side"] = {[](GlobalConfig& c, const std::string& v, const P&) { c.synth.side = parse_number<int>("synth.side", v); },
                       [](const GlobalConfig& c) { return std::to_string(c.synth.side); }};
    f["synth.bona_fide_samples"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.synth.bona_fide_samples = parse_number<int>("synth.bona_fide_samples", v); },
        [](const GlobalConfig& c) { return std::to_string(c.synth.bona_fide_samples); }};
    f["synth.bona_fide_identities"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.synth.bona_fide_identities = parse_number<int>("synth.bona_fide_identities", v); },
        [](const GlobalConfig& c) { return std::to_string(c.synth.bona_fide_identities); }};
    f["synth.attack_samples"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.synth.attack_samples = parse_array<int, 8>("synth.attack_samples", v); },
        [](const GlobalConfig& c) { return join(c.synth.attack_samples); }};
    f["synth.attack_identities"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.synth.attack_identities = parse_array<int, 8>("synth.attack_identities", v); },
        [](const GlobalConfig& c) { return join(c.synth.attack_identities); }};
    f["synth.reflectance"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.synth.reflectance = parse_array<double, kNumBands>("synth.reflectance", v); },
        [](const GlobalConfig& c) { return join(c.synth.reflectance); }};
    f["synth.noise_std"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.synth.noise_std = parse_number<double>("synth.noise_std", v); },
        [](const GlobalConfig& c) { return fmt(c.synth.noise_std); }};
    f["synth.corrupt_fraction"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.synth.corrupt_fraction = parse_number<double>("synth.corrupt_fraction", v); },
        [](const GlobalConfig& c) { return fmt(c.synth.corrupt_fraction); }};
    f["synth.split_fractions"] = {
        [](GlobalConfig& c, const std::string& v, const P&) {
          const auto a = parse_array<double, 3>("synth.split_fractions", v);
          c.synth.fractions = {a[0], a[1], a[2]};
        },
        [](const GlobalConfig& c) {
          return join(std::array<double, 3>{c.synth.fractions.train, c.synth.fractions.dev, c.synth.fractions.test});
        }};

    // model
    auto model_int = [&](const std::string& key, int ViTConfig::*m) {
      f[key] = {[key, m](GlobalConfig& c, const std::string& v, const P&) { c.protocol.model.*m = parse_number<int>(key, v); },
                [m](const GlobalConfig& c) { return std::to_string(c.protocol.model.*m); }};
    };
    model_int("model.image_side", &ViTConfig::image_side);
    model_int("model.patch_size", &ViTConfig::patch_size);
    model_int("model.embed_dim", &ViTConfig::embed_dim);
    model_int("model.depth", &ViTConfig::depth);
    model_int("model.heads", &ViTConfig::heads);
    model_int("model.trainable_last_blocks", &ViTConfig::trainable_last_blocks);
    f["model.mlp_ratio"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.model.mlp_ratio = parse_number<double>("model.mlp_ratio", v); },
        [](const GlobalConfig& c) { return fmt(c.protocol.model.mlp_ratio); }};

    // training
    f["train.train_artefact"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.train_artefact = parse_number<int>("train.train_artefact", v); },
        [](const GlobalConfig& c) { return std::to_string(c.protocol.train_artefact); }};
    f["train.epochs"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.epochs = parse_number<int>("train.epochs", v); },
        [](const GlobalConfig& c) { return std::to_string(c.protocol.epochs); }};
    f["train.batch_size"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.batch_size = parse_number<int>("train.batch_size", v); },
        [](const GlobalConfig& c) { return std::to_string(c.protocol.batch_size); }};
    auto adam_real = [&](const std::string& key, double AdamConfig::*m) {
      f[key] = {[key, m](GlobalConfig& c, const std::string& v, const P&) { c.protocol.adam.*m = parse_number<double>(key, v); },
                [m](const GlobalConfig& c) { return fmt(c.protocol.adam.*m); }};
    };
    adam_real("train.lr", &AdamConfig::lr);
    adam_real("train.weight_decay", &AdamConfig::weight_decay);
    adam_real("train.beta1", &AdamConfig::beta1);
    adam_real("train.beta2", &AdamConfig::beta2);
    f["train.augment"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.augment = parse_bool("train.augment", v); },
        [](const GlobalConfig& c) { return fmt(c.protocol.augment); }};
    f["train.ablation"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.ablation = Ablation::parse(v); },
        [](const GlobalConfig& c) { return c.protocol.ablation.to_list(); }};
    f["train.class_weights"] = {
        [](GlobalConfig& c, const std::string& v, const P&) {
          if (v == "normalized")
            c.protocol.class_weight_form = ClassWeightForm::kNormalized;
          else if (v == "inverse_frequency")
            c.protocol.class_weight_form = ClassWeightForm::kInverseFrequency;
          else
            fail(ErrorKind::kConfig, "train.class_weights: expected normalized or inverse_frequency");
        },
        [](const GlobalConfig& c) {
          return std::string(c.protocol.class_weight_form == ClassWeightForm::kNormalized ? "normalized"
                                                                                            : "inverse_frequency");
        }};
    f["train.bands"] = {[](GlobalConfig& c, const std::string& v, const P&) { c.protocol.bands = parse_band_list(v); },
                        [](const GlobalConfig& c) { return c.protocol.bands.to_string(); }};

    // loss, dropout, quality control
    f["loss.lambda"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.loss.lambda = parse_number<double>("loss.lambda", v); },
        [](const GlobalConfig& c) { return fmt(c.protocol.loss.lambda); }};
    f["loss.epsilon"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.loss.epsilon = parse_number<double>("loss.epsilon", v); },
        [](const GlobalConfig& c) { return fmt(c.protocol.loss.epsilon); }};
    auto drop_real = [&](const std::string& key, double DropoutConstants::*m) {
      f[key] = {[key, m](GlobalConfig& c, const std::string& v, const P&) { c.protocol.dropout.*m = parse_number<double>(key, v); },
                [m](const GlobalConfig& c) { return fmt(c.protocol.dropout.*m); }};
    };
    drop_real("dropout.kappa", &DropoutConstants::kappa);
    drop_real("dropout.c", &DropoutConstants::C);
    drop_real("dropout.p_max", &DropoutConstants::p_max);
    f["qc.threshold"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.qc.threshold = parse_number<double>("qc.threshold", v); },
        [](const GlobalConfig& c) { return fmt(c.protocol.qc.threshold); }};
    f["qc.saturation_limit"] = {
        [](GlobalConfig& c, const std::string& v, const P&) {
          c.protocol.qc.saturation_limit = parse_number<double>("qc.saturation_limit", v);
        },
        [](const GlobalConfig& c) { return fmt(c.protocol.qc.saturation_limit); }};

    // evaluation and analysis (not part of the checkpoint hash)
    f["eval.threshold_mode"] = {
        [](GlobalConfig& c, const std::string& v, const P&) { c.protocol.threshold_mode = parse_threshold_mode(v); },
        [](const GlobalConfig& c) { return to_string(c.protocol.threshold_mode); }, false};
    f["eval.test_artefacts"] = {
        [](GlobalConfig& c, const std::string& v, const P&) {
          c.protocol.test_artefacts.clear();
          for (const auto& item : split_list(v))
            c.protocol.test_artefacts.push_back(parse_number<int>("eval.test_artefacts", item));
        },
        [](const GlobalConfig& c) {
          std::string out;
          for (int a : c.protocol.test_artefacts) out += (out.empty() ? "" : ",") + std::to_string(a);
          return out;
        },
        false};
    f["eval.bands"] = {[](GlobalConfig& c, const std::string& v, const P&) { c.protocol.eval_bands = parse_band_list(v); },
                       [](const GlobalConfig& c) { return c.protocol.eval_bands.to_string(); }, false};
    f["analysis.fb_aggregation"] = {
        [](GlobalConfig& c, const std::string& v, const P&) {
          if (v == "sum")
            c.fb_aggregation = FbAggregation::kSum;
          else if (v == "mean")
            c.fb_aggregation = FbAggregation::kMean;
          else
            fail(ErrorKind::kConfig, "analysis.fb_aggregation: expected sum or mean");
        },
        [](const GlobalConfig& c) { return std::string(c.fb_aggregation == FbAggregation::kSum ? "sum" : "mean"); },
        false};
    return f;
  }();
  return fields;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

void GlobalConfig::set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir) {
  const auto& s = schema();
  auto it = s.find(key);
  if (it == s.end()) fail(ErrorKind::kConfig, "unknown configuration key '" + key + "'");
  it->second.set(*this, value, base_dir);
}

GlobalConfig GlobalConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  GlobalConfig c;
  c.output_dir = resolve(base_dir, c.output_dir.string());
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  bool any_synth = false;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::kConfig, "config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    any_synth = any_synth || key.rfind("synth.", 0) == 0;
    try {
      c.set(key, trim(line.substr(eq + 1)), base_dir);
    } catch (const Error& e) {
      fail(e.kind(), "config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (c.manifest && any_synth)
    fail(ErrorKind::kConfig, "config sets both dataset.manifest and synth.* keys; choose one dataset source");
  c.validate();
  return c;
}

GlobalConfig GlobalConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::kConfig, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

void GlobalConfig::validate() const {
  if (manifest)
    require(std::filesystem::exists(*manifest), ErrorKind::kConfig,
            "dataset.manifest does not exist: " + manifest->string());
  require(synth.side >= 3, ErrorKind::kConfig, "synth.side must be at least 3");
  protocol.validate();
}

std::string GlobalConfig::snapshot() const {
  std::string out;
  for (const auto& [key, field] : schema()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

std::uint64_t GlobalConfig::hash() const {
  std::string text;
  for (const auto& [key, field] : schema()) {
    if (!field.hashed) continue;
    // Generator settings do not apply when images come from a manifest.
    if (manifest && key.rfind("synth.", 0) == 0) continue;
    text += key + "=" + field.get(*this) + "\n";
  }
  return fnv1a64(text);
}

}  // namespace spectrapad
