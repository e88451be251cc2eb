#ifndef DDGAN_CONFIG_HPP_
#define DDGAN_CONFIG_HPP_

#include "ddgan/dataset.hpp"
#include "ddgan/trainer.hpp"
#include "ddgan/usecase.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace ddgan {

struct DataConfig {
  std::string mode = "procedural";  // procedural | dir
  ClassCounts counts = {500, 150, 100};
  std::filesystem::path path;
  int resolution = 64;
  std::uint64_t seed = 0;
  /// Restrict training images to one class; empty keeps all.
  std::string class_name;
};

struct EvalConfig {
  int bins = 256;
  long n_samples = 2000;
};

struct RunConfig {
  std::string model = "ddgan-up";
  PyramidSpec spec;
  LossKind loss = LossKind::least_squares;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  UseCaseConfig usecase;
};

/// `[section]` headers and `key = value` lines; `#` or `;` start comments.
/// Every key has a default and unknown sections or keys are rejected.
class ConfigFile {
 public:
  ConfigFile();
  static ConfigFile load(const std::filesystem::path& path);

  void merge(std::istream& is, const std::string& source);
  void set(const std::string& section, const std::string& key, const std::string& value);
  const std::string& get(const std::string& section, const std::string& key) const;

  /// Effective configuration, every key, in a form merge() accepts.
  std::string dump() const;
  /// Typed view; throws ConfigError naming the first invalid key.
  RunConfig resolve() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Training images per the [data] section, optionally restricted to one class.
Tensorf load_training_images(const DataConfig& data);
ExperimentDataset load_experiment_data(const DataConfig& data);

}  // namespace ddgan

#endif  // DDGAN_CONFIG_HPP_
