#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clidd/bench.hpp"
#include "clidd/errors.hpp"
#include "clidd/evaluation.hpp"
#include "clidd/image_io.hpp"
#include "clidd/matcher.hpp"
#include "clidd/parallel.hpp"
#include "clidd/pipeline.hpp"
#include "clidd/selfcheck.hpp"
#include "clidd/weights.hpp"

namespace fs = std::filesystem;
using namespace clidd;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInputError = 2,
  kFormatError = 3,
  kNumericFailure = 4,
  kSelfcheckFailure = 5,
  kOutputError = 6,
};

struct ModelSource {
  std::string config = "A48";
  std::string weights;
  std::optional<std::uint64_t> random_seed;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config, "Model preset")->capture_default_str();
    auto* w = cmd.add_option("--weights", weights, "CLDW weight file");
    auto* r = cmd.add_option("--random-seed", random_seed, "Use seeded random weights instead of a file");
    w->excludes(r);
  }

  Model load() const {
    const ModelConfig& cfg = preset(config);
    if (!weights.empty()) return Model::from_store(load_weights(weights), cfg);
    return Model::from_store(init_weights(cfg, random_seed.value_or(0)), cfg);
  }
};

std::ofstream open_output(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw OutputError("cannot open " + path + " for writing");
  return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw OutputError("failed to write " + path);
}

std::vector<NamedImage> images_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError(dir.string() + " is not a directory");
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw InputError("no .ppm or .pgm images in " + dir.string());
  std::vector<NamedImage> images;
  for (const auto& p : paths) images.push_back({p.filename().string(), read_pnm(p)});
  return images;
}

int report(const char* kind, const std::exception& e, int code) {
  std::cerr << "clidd: " << kind << ": " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse local features with cross-layer deformable description"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  // extract
  auto* extract = app.add_subcommand("extract", "Detect and describe keypoints in a PPM/PGM image");
  std::string ex_image, ex_out;
  ModelSource ex_model;
  ExtractOptions ex_opts;
  bool ex_naive = false;
  extract->add_option("image", ex_image, "Input image (P6 or P5, 8-bit)")->required();
  ex_model.add_to(*extract);
  extract->add_option("--top-k", ex_opts.top_k, "Keypoints to keep")->check(CLI::NonNegativeNumber)->capture_default_str();
  extract->add_option("--nms-radius", ex_opts.nms_radius, "Suppression radius, 0 disables")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  auto* fused_flag = extract->add_flag("--fused", "Blocked description path (default)");
  extract->add_flag("--naive", ex_naive, "Reference description path")->excludes(fused_flag);
  extract->add_option("--block", ex_opts.block, "Fused block size")->check(CLI::PositiveNumber)->capture_default_str();
  extract->add_option("-o,--out", ex_out, "Feature file")->required();

  // match
  auto* match = app.add_subcommand("match", "Match two feature files");
  std::string ma_a, ma_b, ma_out, ma_method = "dualsoftmax";
  DualSoftmaxOptions ma_opts;
  match->add_option("features_a", ma_a)->required();
  match->add_option("features_b", ma_b)->required();
  match->add_option("--method", ma_method)->check(CLI::IsMember({"dualsoftmax", "mnn"}))->capture_default_str();
  match->add_option("--threshold", ma_opts.threshold, "Dual-softmax confidence threshold")->capture_default_str();
  match->add_option("--temperature", ma_opts.temperature, "Similarity temperature")->capture_default_str();
  match->add_option("-o,--out", ma_out, "Match list (stdout if omitted)");

  // eval-synthetic
  auto* eval = app.add_subcommand("eval-synthetic", "Homography accuracy on synthetic warps");
  std::string ev_dir, ev_out;
  int ev_procedural = 0;
  ModelSource ev_model;
  SyntheticEvalOptions ev_opts;
  eval->add_option("images", ev_dir, "Directory of .ppm/.pgm images");
  eval->add_option("--procedural", ev_procedural, "Number of procedural images instead of a directory")
      ->check(CLI::PositiveNumber);
  ev_model.add_to(*eval);
  eval->add_option("--seed", ev_opts.seed, "Warp seed")->capture_default_str();
  eval->add_option("--max-jitter", ev_opts.synth.max_jitter, "Corner jitter as a fraction of the side")
      ->capture_default_str();
  eval->add_flag("--photometric", ev_opts.synth.photometric, "Add brightness/contrast jitter");
  eval->add_option("--top-k", ev_opts.extract.top_k)->capture_default_str();
  eval->add_option("--nms-radius", ev_opts.extract.nms_radius)->capture_default_str();
  eval->add_option("-o,--out", ev_out, "CSV output")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Description-stage throughput");
  BenchOptions be_opts;
  std::vector<std::string> be_paths = {"naive", "fused"};
  std::string be_out;
  bool be_omit_timing = false;
  bench->add_option("--configs", be_opts.configs)->capture_default_str();
  bench->add_option("--n-keypoints", be_opts.keypoints)->capture_default_str();
  bench->add_option("--paths", be_paths)->check(CLI::IsMember({"naive", "fused"}))->capture_default_str();
  bench->add_option("--block", be_opts.blocks)->capture_default_str();
  bench->add_option("--repeats", be_opts.repeats)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--seed", be_opts.seed)->capture_default_str();
  bench->add_flag("--omit-timing", be_omit_timing, "Write 'na' for timing columns");
  bench->add_option("-o,--out", be_out, "CSV output")->required();

  // selfcheck
  auto* selfcheck = app.add_subcommand("selfcheck", "Built-in consistency checks");

  // init-weights
  auto* init = app.add_subcommand("init-weights", "Write seeded random weights as a CLDW file");
  std::string in_config = "A48", in_out;
  std::uint64_t in_seed = 0;
  bool in_random_offsets = false;
  init->add_option("--config", in_config)->capture_default_str();
  init->add_option("--seed", in_seed)->capture_default_str();
  init->add_flag("--random-offsets", in_random_offsets, "Also randomise the offset predictor");
  init->add_option("-o,--out", in_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  parallel::set_workers(threads);
  try {
    if (*extract) {
      if (ex_naive) ex_opts.path = DescribePath::Naive;
      const Model model = ex_model.load();
      const FeatureMapf image = read_pnm(ex_image);
      save_features(extract_features(image, model, ex_opts), ex_out);
    } else if (*match) {
      const Features a = load_features(ma_a);
      const Features b = load_features(ma_b);
      if (a.descriptors.cols() != b.descriptors.cols() && a.keypoints.size() && b.keypoints.size())
        throw InputError("descriptor dimensions differ: " + std::to_string(a.descriptors.cols()) + " vs " +
                         std::to_string(b.descriptors.cols()));
      const MatchSet set = ma_method == "mnn" ? mnn_match(a.descriptors, b.descriptors)
                                              : dual_softmax_match(a.descriptors, b.descriptors, ma_opts);
      std::ofstream file;
      if (!ma_out.empty()) file = open_output(ma_out);
      std::ostream& out = ma_out.empty() ? std::cout : file;
      out << std::setprecision(6) << std::fixed;
      for (const auto& m : set.pairs) out << m.index_a << ' ' << m.index_b << ' ' << m.confidence << '\n';
      if (!ma_out.empty()) finish_output(file, ma_out);
    } else if (*eval) {
      if (ev_dir.empty() == (ev_procedural == 0))
        throw InputError("give either an image directory or --procedural N");
      const std::vector<NamedImage> images = ev_procedural > 0 ? procedural_images(ev_procedural, ev_opts.seed)
                                                               : images_in(ev_dir);
      const Model model = ev_model.load();
      ev_opts.ransac.seed = ev_opts.seed;
      const SyntheticEvalResult result = run_synthetic_eval(images, model, ev_opts);
      std::ofstream out = open_output(ev_out);
      write_eval_csv(out, result);
      finish_output(out, ev_out);
      const EvalReport& r = result.report;
      std::cout << "pairs " << r.pairs << "  failures " << r.failures << std::fixed << std::setprecision(1)
                << "  MHA@1 " << r.mha[0] << "%  MHA@3 " << r.mha[1] << "%  MHA@5 " << r.mha[2] << "%\n";
    } else if (*bench) {
      be_opts.paths.clear();
      for (const auto& p : be_paths) be_opts.paths.push_back(p == "naive" ? DescribePath::Naive : DescribePath::Fused);
      for (const auto& c : be_opts.configs) preset(c);
      const auto records = run_bench(be_opts);
      std::ofstream out = open_output(be_out);
      write_bench_csv(out, records, !be_omit_timing);
      finish_output(out, be_out);
    } else if (*selfcheck) {
      return print_selfcheck(std::cout, run_selfcheck()) ? kOk : kSelfcheckFailure;
    } else if (*init) {
      InitOptions options;
      if (in_random_offsets) options.offsets = OffsetInit::Random;
      const WeightStore store = init_weights(preset(in_config), in_seed, options);
      std::ofstream out = open_output(in_out, true);
      write_weights(out, store);
      finish_output(out, in_out);
    }
  } catch (const InputError& e) {
    return report("input error", e, kInputError);
  } catch (const ShapeError& e) {
    return report("input error", e, kInputError);
  } catch (const WeightFormatError& e) {
    if (e.kind() == WeightFormatError::Kind::Io) return report("input error", e, kInputError);
    return report("format error", e, kFormatError);
  } catch (const FormatError& e) {
    return report("format error", e, kFormatError);
  } catch (const ConfigError& e) {
    return report("format error", e, kFormatError);
  } catch (const NumericError& e) {
    return report("numeric failure", e, kNumericFailure);
  } catch (const OutputError& e) {
    return report("output error", e, kOutputError);
  } catch (const std::exception& e) {
    return report("error", e, kNumericFailure);
  }
  return kOk;
}
