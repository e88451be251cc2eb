#include "ddgan/dataset.hpp"

#include "ddgan/errors.hpp"
#include "ddgan/image_io.hpp"
#include "ddgan/ops.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ddgan {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

// Sample indices grouped by class, in dataset order.
std::array<std::vector<std::size_t>, kNumClasses> by_class(const ExperimentDataset& ds) {
  std::array<std::vector<std::size_t>, kNumClasses> groups;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    groups[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
  }
  return groups;
}

Provenance parse_provenance(const std::string& s, const std::string& source) {
  if (s == "real") return Provenance::real;
  if (s == "synthetic") return Provenance::synthetic;
  throw IoError(source, "unknown provenance '" + s + "'");
}

Split parse_split(const std::string& s, const std::string& source) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  throw IoError(source, "unknown split '" + s + "'");
}

}  // namespace

std::string to_string(Provenance p) { return p == Provenance::real ? "real" : "synthetic"; }
std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

ClassCounts ExperimentDataset::counts() const {
  ClassCounts c{};
  for (const auto& s : samples) ++c[static_cast<std::size_t>(s.label)];
  return c;
}

int ExperimentDataset::synthetic_count() const {
  return static_cast<int>(
      std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.provenance == Provenance::synthetic; }));
}

Tensorf ExperimentDataset::images() const {
  std::vector<Tensorf> imgs;
  imgs.reserve(samples.size());
  for (const auto& s : samples) imgs.push_back(s.image);
  return stack_images(imgs);
}

std::vector<int> ExperimentDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(static_cast<int>(s.label));
  return out;
}

ExperimentDataset ExperimentDataset::only(Label label) const {
  ExperimentDataset out{resolution, {}};
  for (const auto& s : samples) {
    if (s.label == label) out.samples.push_back(s);
  }
  return out;
}

ExperimentDataset build_dataset(const Rng& rng, const ClassCounts& counts, int resolution, const LesionParams& params) {
  if (std::any_of(counts.begin(), counts.end(), [](int c) { return c < 0; })) {
    throw ConfigError("class counts must be non-negative", "counts");
  }
  if (std::all_of(counts.begin(), counts.end(), [](int c) { return c == 0; })) {
    throw ConfigError("class counts are all zero", "counts");
  }
  ExperimentDataset ds{resolution, {}};
  std::uint64_t index = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++index) {
      Rng sample_rng = rng.split(index);
      const auto label = static_cast<Label>(c);
      ds.samples.push_back(Sample{generate_lesion(sample_rng, label, resolution, params), label});
    }
  }
  return ds;
}

Tensord upsample_for_pyramid(const Tensord& x, UpsampleMode mode) {
  switch (mode) {
    case UpsampleMode::nearest: return upsample_nearest(x, 2);
    case UpsampleMode::bilinear: return upsample_bilinear(x);
    case UpsampleMode::deconv: break;
  }
  throw ConfigError("a learned upsampler cannot define real residuals", "upsample_mode");
}

Pyramid<double> real_pyramid(const Tensorf& batch, int levels, UpsampleMode mode) {
  if (batch.ndim() != 4) throw DimensionError("real_pyramid", -1, "expected an NxCxHxW batch");
  if (levels < 1) throw ConfigError("levels must be >= 1", "levels");
  const Index step = Index{1} << (levels - 1);
  for (int axis : {2, 3}) {
    if (batch.dim(axis) % step != 0) {
      throw DimensionError("real_pyramid", axis,
                           "extent " + std::to_string(batch.dim(axis)) + " not divisible by " + std::to_string(step));
    }
  }
  NoGradGuard guard;
  Pyramid<double> p;
  p.images.assign(static_cast<std::size_t>(levels), Tensord());
  p.residuals.assign(static_cast<std::size_t>(levels), Tensord());
  p.images.back() = cast<double>(batch);
  for (int k = levels - 1; k > 0; --k) {
    const auto& fine = p.images[static_cast<std::size_t>(k)];
    p.images[static_cast<std::size_t>(k - 1)] = downsample_avg(fine, 2);
    p.residuals[static_cast<std::size_t>(k)] = sub(fine, upsample_for_pyramid(p.images[static_cast<std::size_t>(k - 1)], mode));
  }
  return p;
}

Pyramid<float> real_pyramid_f(const Tensorf& batch, int levels, UpsampleMode mode) {
  const auto p = real_pyramid(batch, levels, mode);
  Pyramid<float> out;
  for (const auto& t : p.images) out.images.push_back(cast<float>(t));
  for (const auto& t : p.residuals) out.residuals.push_back(t.defined() ? cast<float>(t) : Tensorf());
  return out;
}

std::pair<ExperimentDataset, ExperimentDataset> split_dataset(const ExperimentDataset& ds, double train_fraction,
                                                              Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)", "train_fraction");
  }
  ExperimentDataset train{ds.resolution, {}}, val{ds.resolution, {}};
  auto groups = by_class(ds);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = groups[static_cast<std::size_t>(c)];
    if (idx.empty()) continue;
    const auto n = static_cast<long>(idx.size());
    const long n_train = std::lround(train_fraction * static_cast<double>(n));
    if (n_train < 1 || n_train >= n) {
      throw ConfigError("cannot stratify class " + to_string(static_cast<Label>(c)) + " with " + std::to_string(n) +
                            " samples at train_fraction " + std::to_string(train_fraction),
                        "train_fraction");
    }
    rng.shuffle(std::span<std::size_t>(idx));
    for (long i = 0; i < n; ++i) {
      Sample s = ds.samples[idx[static_cast<std::size_t>(i)]];
      s.split = i < n_train ? Split::train : Split::val;
      (i < n_train ? train : val).samples.push_back(std::move(s));
    }
  }
  return {std::move(train), std::move(val)};
}

ExperimentDataset reduce_class(const ExperimentDataset& ds, Label label, int target_count, Rng& rng) {
  const auto groups = by_class(ds);
  const auto& idx = groups[static_cast<std::size_t>(label)];
  if (target_count < 0 || static_cast<std::size_t>(target_count) > idx.size()) {
    throw ConfigError("cannot reduce " + to_string(label) + " from " + std::to_string(idx.size()) + " to " +
                          std::to_string(target_count),
                      "reduce_fraction");
  }
  auto order = permutation(rng, idx.size());
  std::vector<bool> keep(ds.samples.size(), true);
  for (std::size_t j = static_cast<std::size_t>(target_count); j < order.size(); ++j) keep[idx[order[j]]] = false;
  ExperimentDataset out{ds.resolution, {}};
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (keep[i]) out.samples.push_back(ds.samples[i]);
  }
  return out;
}

ExperimentDataset restore_with_synthetic(const ExperimentDataset& ds, Label label, const GanModel& generator,
                                         int target_count, Rng& rng) {
  if (generator.top_resolution() != ds.resolution) {
    throw DimensionError("restore_with_synthetic", 2,
                         "generator resolution " + std::to_string(generator.top_resolution()) +
                             " != dataset resolution " + std::to_string(ds.resolution));
  }
  const int current = ds.counts()[static_cast<std::size_t>(label)];
  if (target_count < current) throw ConfigError("restore target below the current class count", "restore");
  ExperimentDataset out = ds;
  int missing = target_count - current;
  constexpr int kChunk = 32;
  while (missing > 0) {
    const int n = std::min(missing, kChunk);
    const auto fakes = generator.sample(generator.generator().sample_noise(rng, n));
    for (int i = 0; i < n; ++i) {
      out.samples.push_back(Sample{image_at(fakes, i), label, Provenance::synthetic, Split::train});
    }
    missing -= n;
  }
  return out;
}

void save_dataset(const ExperimentDataset& ds, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  std::ofstream manifest(root / "manifest.csv");
  if (!manifest) throw IoError((root / "manifest.csv").string(), "cannot open for writing");
  manifest << "path,label,provenance,split\n";
  std::array<int, kNumClasses> next{};
  for (const auto& s : ds.samples) {
    const auto name = to_string(s.label);
    std::filesystem::create_directories(root / name);
    std::ostringstream file;
    file << name << '/' << std::setw(5) << std::setfill('0') << next[static_cast<std::size_t>(s.label)]++ << ".ppm";
    save_ppm(s.image, root / file.str());
    manifest << file.str() << ',' << name << ',' << to_string(s.provenance) << ',' << to_string(s.split) << '\n';
  }
  if (!manifest) throw IoError((root / "manifest.csv").string(), "write failed");
}

ExperimentDataset load_dataset(const std::filesystem::path& root) {
  const auto manifest_path = root / "manifest.csv";
  std::ifstream in(manifest_path);
  if (!in) throw IoError(manifest_path.string(), "cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != "path,label,provenance,split") {
    throw IoError(manifest_path.string(), "missing manifest header");
  }
  ExperimentDataset ds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != 4) throw IoError(manifest_path.string(), "malformed row '" + line + "'");
    Sample s;
    s.image = load_ppm(root / cols[0]);
    try {
      s.label = parse_label(cols[1]);
    } catch (const ConfigError& e) {
      throw IoError(manifest_path.string(), e.what());
    }
    s.provenance = parse_provenance(cols[2], manifest_path.string());
    s.split = parse_split(cols[3], manifest_path.string());
    if (s.image.dim(1) != s.image.dim(2)) throw IoError(cols[0], "image is not square");
    if (ds.samples.empty()) ds.resolution = static_cast<int>(s.image.dim(1));
    if (s.image.dim(1) != ds.resolution) throw IoError(cols[0], "mixed resolutions in dataset");
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw IoError(manifest_path.string(), "empty dataset");
  return ds;
}

std::uint64_t dataset_hash(const ExperimentDataset& ds) {
  std::uint64_t h = kFnvOffset;
  for (const auto& s : ds.samples) {
    const int tags[2] = {static_cast<int>(s.label), static_cast<int>(s.provenance)};
    fnv(h, tags, sizeof tags);
    for (Index i = 0; i < s.image.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(s.image[i]);
      fnv(h, &bits, sizeof bits);
    }
  }
  return h;
}

}  // namespace ddgan
