#include "ddgan/config.hpp"

#include "ddgan/errors.hpp"
#include "ddgan/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ddgan {

namespace {

using Section = std::map<std::string, std::string>;

// Every accepted key and its default, in echo order per section.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>& schema() {
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> s = {
      {"model",
       {{"kind", "ddgan-up"},
        {"base_resolution", "16"},
        {"levels", "3"},
        {"z_dim", "64"},
        {"residual_depth", "3"},
        {"upsample_mode", "nearest"},
        {"g_channels", "64"},
        {"d_channels", "16"},
        {"d_max_channels", "128"},
        {"level_channels", "32,16"}}},
      {"train",
       {{"steps", "0"},
        {"epochs", "200"},
        {"batch_size", "8"},
        {"loss", "least_squares"},
        {"lr_g", "0.0002"},
        {"lr_d", "0.0002"},
        {"beta1", "0.5"},
        {"beta2", "0.999"},
        {"seed", "0"},
        {"level_weights", ""},
        {"log_every", "50"},
        {"checkpoint_every", "0"},
        {"eval_samples", "64"}}},
      {"data",
       {{"mode", "procedural"},
        {"counts", "500,150,100"},
        {"path", ""},
        {"resolution", "64"},
        {"seed", "0"},
        {"class", ""}}},
      {"eval", {{"bins", "256"}, {"n_samples", "2000"}}},
      {"usecase",
       {{"arms", "B_full,B_imb,ddgan-up"},
        {"checkpoint_dir", ""},
        {"train_generators", "false"},
        {"gan_steps", "500"},
        {"reduce_fraction", "0.12"},
        {"reduce_to", "0"},
        {"train_fraction", "0.6"},
        {"minority", "melanoma"},
        {"seeds", "1,2,3,4,5"},
        {"epochs", "30"},
        {"batch_size", "16"},
        {"lr", "0.001"},
        {"classifier_widths", "8,16,32"}}},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("invalid value '" + text + "' for " + key, key);
  }
  return value;
}

template <typename T>
std::vector<T> parse_numbers(const std::string& text, const std::string& key) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<T>(item, key));
  return out;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key, key);
}

// `where` is either a full key (section.key), which replaces whatever the
// callee reported, or a bare section that qualifies the callee's key.
template <typename E>
auto rethrow_keyed(const std::string& where, E&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    if (where.find('.') != std::string::npos || e.key().empty()) throw ConfigError(e.what(), where);
    throw ConfigError(e.what(), where + "." + e.key());
  }
}

}  // namespace

ConfigFile::ConfigFile() {
  for (const auto& [section, keys] : schema()) {
    for (const auto& [key, value] : keys) values_[section][key] = value;
  }
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string(), "config");
  ConfigFile cfg;
  cfg.merge(in, path.string());
  return cfg;
}

void ConfigFile::merge(std::istream& is, const std::string& source) {
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header", line);
      section = trim(line.substr(1, line.size() - 2));
      if (!values_.count(section)) throw ConfigError(where + ": unknown section [" + section + "]", section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value", line);
    if (section.empty()) throw ConfigError(where + ": key outside of a section", trim(line.substr(0, eq)));
    set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void ConfigFile::set(const std::string& section, const std::string& key, const std::string& value) {
  const auto s = values_.find(section);
  if (s == values_.end()) throw ConfigError("unknown section [" + section + "]", section);
  const auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown key " + section + "." + key, section + "." + key);
  k->second = value;
}

const std::string& ConfigFile::get(const std::string& section, const std::string& key) const {
  return values_.at(section).at(key);
}

std::string ConfigFile::dump() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, keys] : schema()) {
    os << (first ? "" : "\n") << '[' << section << "]\n";
    first = false;
    for (const auto& [key, unused] : keys) os << key << " = " << get(section, key) << '\n';
  }
  return os.str();
}

RunConfig ConfigFile::resolve() const {
  RunConfig c;
  const auto str = [&](const char* s, const char* k) { return get(s, k); };
  const auto key = [](const char* s, const char* k) { return std::string(s) + "." + k; };
  const auto i32 = [&](const char* s, const char* k) { return parse_number<int>(get(s, k), key(s, k)); };
  const auto i64 = [&](const char* s, const char* k) { return parse_number<long>(get(s, k), key(s, k)); };
  const auto u64 = [&](const char* s, const char* k) { return parse_number<std::uint64_t>(get(s, k), key(s, k)); };
  const auto f64 = [&](const char* s, const char* k) { return parse_number<double>(get(s, k), key(s, k)); };

  c.model = str("model", "kind");
  const auto choice = rethrow_keyed("model.kind", [&] { return parse_model_name(c.model); });
  c.spec.base_resolution = i32("model", "base_resolution");
  c.spec.levels = i32("model", "levels");
  c.spec.z_dim = i32("model", "z_dim");
  c.spec.residual_depth = i32("model", "residual_depth");
  c.spec.upsample_mode =
      rethrow_keyed("model.upsample_mode", [&] { return parse_upsample_mode(str("model", "upsample_mode")); });
  if (c.spec.upsample_mode == UpsampleMode::deconv && !choice.upsample) {
    throw ConfigError("upsample_mode = deconv is selected by the ddgan-deconv model only", "model.upsample_mode");
  }
  if (choice.upsample) c.spec.upsample_mode = *choice.upsample;
  c.spec.g_channels = i32("model", "g_channels");
  c.spec.d_channels = i32("model", "d_channels");
  c.spec.d_max_channels = i32("model", "d_max_channels");
  c.spec.channels_per_level = parse_numbers<int>(str("model", "level_channels"), "model.level_channels");
  rethrow_keyed("model", [&] {
    c.spec.validate(choice.kind);
    return 0;
  });

  auto& t = c.train;
  t.steps = i64("train", "steps");
  t.epochs = i32("train", "epochs");
  t.batch_size = i32("train", "batch_size");
  c.loss = rethrow_keyed("train.loss", [&] { return parse_loss_kind(str("train", "loss")); });
  t.lr_g = f64("train", "lr_g");
  t.lr_d = f64("train", "lr_d");
  t.beta1 = f64("train", "beta1");
  t.beta2 = f64("train", "beta2");
  t.seed = u64("train", "seed");
  t.level_weights = parse_numbers<double>(str("train", "level_weights"), "train.level_weights");
  t.log_every = i64("train", "log_every");
  t.checkpoint_every = i64("train", "checkpoint_every");
  t.eval_samples = i64("train", "eval_samples");
  if (t.steps < 0) throw ConfigError("steps must be >= 0", "train.steps");
  if (t.epochs < 1) throw ConfigError("epochs must be >= 1", "train.epochs");
  if (t.batch_size < 1) throw ConfigError("batch_size must be >= 1", "train.batch_size");
  if (t.log_every < 1) throw ConfigError("log_every must be >= 1", "train.log_every");
  if (t.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0", "train.checkpoint_every");
  if (t.eval_samples < 1) throw ConfigError("eval_samples must be >= 1", "train.eval_samples");
  if (!(t.lr_g > 0 && t.lr_d > 0)) throw ConfigError("learning rates must be positive", "train.lr_g");
  if (!(t.beta1 >= 0 && t.beta1 < 1 && t.beta2 >= 0 && t.beta2 < 1)) {
    throw ConfigError("betas must lie in [0, 1)", "train.beta1");
  }
  const int levels = choice.kind == ModelKind::dcgan ? 1 : c.spec.levels;
  if (!t.level_weights.empty() && static_cast<int>(t.level_weights.size()) != levels) {
    throw ConfigError("level_weights needs one entry per level", "train.level_weights");
  }

  auto& d = c.data;
  d.mode = str("data", "mode");
  if (d.mode != "procedural" && d.mode != "dir") throw ConfigError("data.mode must be procedural or dir", "data.mode");
  const auto counts = parse_numbers<int>(str("data", "counts"), "data.counts");
  if (counts.size() != static_cast<std::size_t>(kNumClasses)) {
    throw ConfigError("data.counts needs benign,melanoma,keratosis", "data.counts");
  }
  std::copy(counts.begin(), counts.end(), d.counts.begin());
  if (std::any_of(counts.begin(), counts.end(), [](int n) { return n < 0; }) ||
      std::all_of(counts.begin(), counts.end(), [](int n) { return n == 0; })) {
    throw ConfigError("data.counts must be non-negative and not all zero", "data.counts");
  }
  d.path = str("data", "path");
  d.resolution = i32("data", "resolution");
  d.seed = u64("data", "seed");
  d.class_name = str("data", "class");
  if (!d.class_name.empty()) rethrow_keyed("data.class", [&] { return parse_label(d.class_name); });
  if (d.mode == "dir" && d.path.empty()) throw ConfigError("data.mode = dir needs data.path", "data.path");
  if (d.resolution < 8) throw ConfigError("data.resolution must be >= 8", "data.resolution");

  c.eval.bins = i32("eval", "bins");
  c.eval.n_samples = i64("eval", "n_samples");
  if (c.eval.bins < 2) throw ConfigError("eval.bins must be >= 2", "eval.bins");
  if (c.eval.n_samples < 1) throw ConfigError("eval.n_samples must be >= 1", "eval.n_samples");
  t.bins = c.eval.bins;

  auto& u = c.usecase;
  u.arms = split_list(str("usecase", "arms"));
  if (u.arms.empty()) throw ConfigError("usecase.arms is empty", "usecase.arms");
  for (const auto& arm : u.arms) {
    if (arm != kFullArm && arm != kImbalancedArm) rethrow_keyed("usecase.arms", [&] { return parse_model_name(arm); });
  }
  u.checkpoint_dir = str("usecase", "checkpoint_dir");
  u.train_generators = parse_bool(str("usecase", "train_generators"), "usecase.train_generators");
  u.reduce_fraction = f64("usecase", "reduce_fraction");
  u.reduce_to = i32("usecase", "reduce_to");
  u.train_fraction = f64("usecase", "train_fraction");
  u.minority = rethrow_keyed("usecase.minority", [&] { return parse_label(str("usecase", "minority")); });
  u.seeds = parse_numbers<std::uint64_t>(str("usecase", "seeds"), "usecase.seeds");
  if (u.seeds.empty()) throw ConfigError("usecase.seeds is empty", "usecase.seeds");
  u.classifier_train.epochs = i32("usecase", "epochs");
  u.classifier_train.batch_size = i32("usecase", "batch_size");
  u.classifier_train.learning_rate = f64("usecase", "lr");
  u.classifier.widths = parse_numbers<int>(str("usecase", "classifier_widths"), "usecase.classifier_widths");
  if (u.classifier.widths.empty()) throw ConfigError("classifier_widths is empty", "usecase.classifier_widths");
  if (!(u.reduce_fraction > 0 && u.reduce_fraction <= 1)) {
    throw ConfigError("reduce_fraction must lie in (0, 1]", "usecase.reduce_fraction");
  }
  if (!(u.train_fraction > 0 && u.train_fraction < 1)) {
    throw ConfigError("train_fraction must lie in (0, 1)", "usecase.train_fraction");
  }
  if (u.classifier_train.epochs < 1) throw ConfigError("usecase.epochs must be >= 1", "usecase.epochs");
  u.counts = d.counts;
  u.resolution = d.resolution;
  u.gan_spec = c.spec;
  u.gan_train = t;
  u.gan_train.steps = i64("usecase", "gan_steps");
  return c;
}

ExperimentDataset load_experiment_data(const DataConfig& data) {
  ExperimentDataset ds;
  if (data.mode == "dir") {
    if (std::filesystem::exists(data.path / "manifest.csv")) {
      ds = load_dataset(data.path);
    } else {
      const auto images = load_dir(data.path);
      ds.resolution = static_cast<int>(images.dim(2));
      for (Index i = 0; i < images.dim(0); ++i) ds.samples.push_back(Sample{image_at(images, i)});
    }
  } else {
    ds = build_dataset(Rng(data.seed), data.counts, data.resolution);
  }
  if (!data.class_name.empty()) ds = ds.only(parse_label(data.class_name));
  if (ds.empty()) throw ConfigError("the configured data selects no images", "data.class");
  return ds;
}

Tensorf load_training_images(const DataConfig& data) { return load_experiment_data(data).images(); }

}  // namespace ddgan
