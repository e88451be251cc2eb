// ddgan: train, sample, evaluate and compare the pyramid GANs from one binary.
#include "ddgan/checkpoint.hpp"
#include "ddgan/config.hpp"
#include "ddgan/errors.hpp"
#include "ddgan/gradcheck.hpp"
#include "ddgan/image_io.hpp"
#include "ddgan/metrics.hpp"
#include "ddgan/models.hpp"
#include "ddgan/trainer.hpp"
#include "ddgan/usecase.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace ddgan;

namespace {

enum Exit { kOk = 0, kUsage = 2, kRuntime = 3, kIo = 4 };

std::string g_command_line;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
}

void echo_run(const fs::path& dir, const ConfigFile* config) {
  fs::create_directories(dir);
  write_text(dir / "run.txt", g_command_line + "\n");
  if (config) write_text(dir / "config.cfg", config->dump());
}

ConfigFile read_config(const std::optional<std::string>& path) {
  return path ? ConfigFile::load(*path) : ConfigFile();
}

int cmd_train(const std::string& model, const std::optional<std::string>& config_path, const fs::path& out,
              std::optional<std::uint64_t> seed) {
  auto file = read_config(config_path);
  file.set("model", "kind", model);
  if (seed) file.set("train", "seed", std::to_string(*seed));
  auto cfg = file.resolve();
  const auto choice = parse_model_name(cfg.model);
  if (cfg.spec.top_resolution() != cfg.data.resolution && cfg.data.mode == "procedural") {
    throw ConfigError("model top resolution " + std::to_string(cfg.spec.top_resolution()) +
                          " != data.resolution " + std::to_string(cfg.data.resolution),
                      "data.resolution");
  }
  const auto images = load_training_images(cfg.data);
  GanModel gan(choice.kind, cfg.spec, cfg.loss, cfg.train.seed);
  if (images.dim(2) != gan.top_resolution()) {
    throw ConfigError("training images are " + std::to_string(images.dim(2)) + "px, the model generates " +
                          std::to_string(gan.top_resolution()) + "px",
                      "data.resolution");
  }
  echo_run(out, &file);
  cfg.train.out_dir = out;
  std::cout << gan.name() << ": " << param_count(gan, ParamGroup::generator) << " generator / "
            << param_count(gan, ParamGroup::discriminators) << " discriminator parameters, " << images.dim(0)
            << " training images\n";
  const auto result = train_gan(gan, images, cfg.train, [](const MetricsRow& r) {
    std::printf("step %6ld level %d  d_loss %.4f  g_loss %.4f  js %.5f  emd %.5f\n", r.step, r.level, r.d_loss,
                r.g_loss, r.js, r.emd);
    std::fflush(stdout);
  });
  std::printf("top-level js %.5f -> %.5f after %ld steps\n", result.initial.js, result.final.js, result.steps);
  return kOk;
}

int cmd_sample(const fs::path& checkpoint, long count, const fs::path& out, std::uint64_t seed) {
  if (count < 1) throw ConfigError("--count must be >= 1", "count");
  const auto gan = load_model(checkpoint);
  echo_run(out, nullptr);
  Rng rng(seed);
  long written = 0;
  while (written < count) {
    const long n = std::min<long>(64, count - written);
    const auto batch = gan.sample(gan.generator().sample_noise(rng, n));
    for (long i = 0; i < n; ++i, ++written) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%05ld.ppm", written);
      save_ppm(image_at(batch, i), out / name);
    }
  }
  std::cout << "wrote " << written << " samples to " << out.string() << "\n";
  return kOk;
}

int cmd_eval(const fs::path& checkpoint, const std::optional<std::string>& real_dir, bool procedural,
             const std::optional<std::string>& config_path, long n, int bins, std::uint64_t seed, const fs::path& out) {
  if (real_dir.has_value() == procedural) throw ConfigError("pass exactly one of --real DIR or --procedural", "real");
  const auto gan = load_model(checkpoint);
  Tensorf real;
  if (real_dir) {
    real = load_dir(*real_dir);
  } else {
    auto file = read_config(config_path);
    file.set("data", "resolution", std::to_string(gan.top_resolution()));
    real = load_training_images(file.resolve().data);
  }
  const auto generated = sample_histogram(gan, n, bins, seed);
  if (real.dim(2) != gan.top_resolution()) {
    throw DimensionError("eval", 2, "real images are " + std::to_string(real.dim(2)) + "px, the model generates " +
                                        std::to_string(gan.top_resolution()) + "px");
  }
  const auto real_hist = histogram(real, bins);
  auto report = compare(generated, real_hist);
  report.n_samples = n;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out, report.to_json() + "\n");
  const auto stem = (out.parent_path() / out.stem()).string();
  std::ofstream gen_csv(stem + "_generated_hist.csv"), real_csv(stem + "_real_hist.csv");
  if (!gen_csv || !real_csv) throw IoError(stem, "cannot write histogram CSVs");
  write_histogram_csv(gen_csv, generated);
  write_histogram_csv(real_csv, real_hist);
  std::cout << report.to_json() << "\n";
  return kOk;
}

int cmd_gen_data(const std::optional<std::string>& config_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  auto file = read_config(config_path);
  if (seed) file.set("data", "seed", std::to_string(*seed));
  const auto cfg = file.resolve();
  if (cfg.data.mode != "procedural") throw ConfigError("gen-data needs data.mode = procedural", "data.mode");
  auto ds = build_dataset(Rng(cfg.data.seed), cfg.data.counts, cfg.data.resolution);
  if (!cfg.data.class_name.empty()) ds = ds.only(parse_label(cfg.data.class_name));
  echo_run(out, &file);
  save_dataset(ds, out);
  const auto c = ds.counts();
  std::cout << "wrote " << ds.size() << " images (benign " << c[0] << ", melanoma " << c[1] << ", keratosis " << c[2]
            << ") to " << out.string() << "\n";
  return kOk;
}

int cmd_gradcheck(int seeds) {
  const auto results = run_gradient_suite(seeds);
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%-4s %-40s max_rel_err %.3e  entries %ld\n", r.passed ? "ok" : "FAIL", r.name.c_str(),
                r.max_rel_error, static_cast<long>(r.entries_checked));
    failed += !r.passed;
  }
  std::printf("%zu cases, %d failed\n", results.size(), failed);
  return failed ? kRuntime : kOk;
}

int cmd_usecase(const std::optional<std::string>& config_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  auto file = read_config(config_path);
  if (seed) file.set("usecase", "seeds", std::to_string(*seed));
  const auto cfg = file.resolve();
  echo_run(out, &file);
  auto uc = cfg.usecase;
  if (uc.checkpoint_dir.empty() && uc.train_generators) uc.checkpoint_dir = out / "generators";
  const auto report = run_use_case(uc, [](const std::string& msg) {
    std::cout << msg << "\n" << std::flush;
  });
  write_text(out / "report.json", report.to_json() + "\n");
  std::ofstream csv(out / "report.csv");
  if (!csv) throw IoError((out / "report.csv").string(), "cannot open for writing");
  report.write_csv(csv);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Pyramid GAN training and evaluation (DCGAN, LAPGAN, DDGAN)"};
  app.require_subcommand(1);

  std::string model;
  std::optional<std::string> config_path, real_dir;
  std::string out, checkpoint;
  std::optional<std::uint64_t> seed;
  std::uint64_t fixed_seed = 0;
  long count = 1, n = 2000;
  int bins = 256, seeds = 5;
  bool procedural = false;

  auto* train = app.add_subcommand("train", "Train one model; writes checkpoints, metrics.csv and sample grids");
  train->add_option("--model", model, "dcgan | lapgan | ddgan-up | ddgan-deconv")
      ->required()
      ->check(CLI::IsMember({"dcgan", "lapgan", "ddgan-up", "ddgan-deconv"}));
  train->add_option("--config", config_path, "Config file");
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--seed", seed, "Overrides train.seed");

  auto* sample = app.add_subcommand("sample", "Write generator samples as PPM files");
  sample->add_option("--checkpoint", checkpoint)->required();
  sample->add_option("--count", count)->default_val(1);
  sample->add_option("--out", out)->required();
  sample->add_option("--seed", fixed_seed)->default_val(0);

  auto* eval = app.add_subcommand("eval", "Histogram EMD / JS of generator samples against real images");
  eval->add_option("--checkpoint", checkpoint)->required();
  auto* real_opt = eval->add_option("--real", real_dir, "Directory of real .ppm images");
  auto* proc_opt = eval->add_flag("--procedural", procedural, "Compare against the procedural dataset of [data]");
  real_opt->excludes(proc_opt);
  eval->add_option("--config", config_path);
  eval->add_option("--n", n, "Generated samples")->default_val(2000);
  eval->add_option("--bins", bins)->default_val(256);
  eval->add_option("--seed", fixed_seed)->default_val(0);
  eval->add_option("--out", out, "Report JSON path")->required();

  auto* gen = app.add_subcommand("gen-data", "Write the procedural lesion dataset");
  gen->add_option("--config", config_path);
  gen->add_option("--out", out)->required();
  gen->add_option("--seed", seed, "Overrides data.seed");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable operation");
  grad->add_option("--seeds", seeds, "Random instances per case")->default_val(5);

  auto* usecase = app.add_subcommand("usecase", "Class-imbalance experiment (full / imbalanced / restored arms)");
  usecase->add_option("--config", config_path);
  usecase->add_option("--out", out)->required();
  usecase->add_option("--seed", seed, "Run a single seed instead of usecase.seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(model, config_path, out, seed);
    if (*sample) return cmd_sample(checkpoint, count, out, fixed_seed);
    if (*eval) return cmd_eval(checkpoint, real_dir, procedural, config_path, n, bins, fixed_seed, out);
    if (*gen) return cmd_gen_data(config_path, out, seed);
    if (*grad) return cmd_gradcheck(seeds);
    if (*usecase) return cmd_usecase(config_path, out, seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error" << (e.key().empty() ? "" : " [" + e.key() + "]") << ": " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
