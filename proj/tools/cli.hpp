#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "octden/octden.hpp"

namespace octden::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kRuntimeError = 3 };

inline const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"prepare", "synth", "train", "denoise", "eval"};
  return names;
}

/// `key = value` lines, `#` starts a comment. Returns "--key=value" tokens.
inline std::vector<std::string> config_tokens(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": invalid key");
    }
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

/// Inserts config-file tokens directly after the subcommand name so that
/// explicit flags, which come later, win under the take-last policy.
inline std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::optional<std::string> cfg;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
  }
  if (!cfg) return args;
  const auto& subs = subcommand_names();
  const auto it = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
    return std::find(subs.begin(), subs.end(), a) != subs.end();
  });
  if (it == args.end()) return args;
  const auto tokens = config_tokens(*cfg);
  args.insert(it + 1, tokens.begin(), tokens.end());
  return args;
}

inline std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": not a number list: " + s);
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + ": empty list");
  return out;
}

inline std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline std::string image_ext(const std::string& format) {
  if (format == "pgm") return ".pgm";
  if (format == "tns") return ".tns";
  throw UsageError("unknown image format '" + format + "' (pgm or tns)");
}

inline bool is_image_file(const fs::path& p) {
  const auto e = p.extension().string();
  return e == ".pgm" || e == ".tns";
}

inline std::vector<fs::path> image_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

struct NamedPair {
  std::string id;
  Image noisy;
  Image clean;
};

/// A pairs directory holds noisy/ and clean/ with matching file names.
inline std::vector<NamedPair> read_pairs(const fs::path& dir) {
  const auto noisy = image_files(dir / "noisy");
  if (noisy.empty()) throw InputError("no images in " + (dir / "noisy").string());
  std::vector<NamedPair> out;
  for (const auto& n : noisy) {
    const fs::path c = dir / "clean" / n.filename();
    if (!fs::exists(c)) throw InputError("missing clean counterpart " + c.string());
    NamedPair p{n.stem().string(), read_image(n), read_image(c)};
    require_same_dims(p.noisy, p.clean, "pair");
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_pair(const fs::path& dir, const std::string& name, const Image& noisy,
                       const Image& clean) {
  fs::create_directories(dir / "noisy");
  fs::create_directories(dir / "clean");
  write_image(noisy, dir / "noisy" / name);
  write_image(clean, dir / "clean" / name);
}

inline std::optional<CropWindow> parse_crop(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto v = parse_doubles(s, "--crop");
  if (v.size() != 4 || std::any_of(v.begin(), v.end(), [](double d) {
        return d < 0 || d != static_cast<double>(static_cast<std::size_t>(d));
      })) {
    throw UsageError("--crop expects y,x,height,width as non-negative integers");
  }
  return CropWindow{static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]),
                    static_cast<std::size_t>(v[2]), static_cast<std::size_t>(v[3])};
}

/// Per-image speckle seed derived from the run seed.
inline std::uint64_t item_seed(std::uint64_t seed, std::size_t i) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(i) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Options {
  std::size_t threads = 1;
  std::string config;

  // prepare
  std::string volumes_dir, out_dir;
  std::size_t target = 0;
  GroundTruthConfig gt;
  std::string crop;
  std::string format = "pgm";

  // synth
  std::string input_dir;
  std::size_t phantoms = 0;
  std::size_t height = 128, width = 128;
  std::uint64_t phantom_seed = 0;
  SpeckleConfig speckle{4.0, 0};

  // train
  std::string pairs_dir, checkpoint = "model.ckpt", loss_csv;
  bool checkpoint_given = false;
  TrainConfig train;
  std::string precision = "float";

  // denoise
  std::vector<std::string> inputs;

  // eval
  std::string methods = "noisy,median,nlm,network";
  std::string median_windows = "3,5,7";
  std::string nlm_h = "0.05,0.1,0.15,0.2";
  NlmParams nlm;
  double peak = 1.0;
  std::string roi;
  SsimConfig ssim;
};

inline void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--threads", o.threads, "Worker threads; 1 gives bit-reproducible results")
      ->check(CLI::PositiveNumber);
  sub->add_option("--config", o.config, "key = value file; explicit flags override it");
}

inline void add_ssim(CLI::App* sub, SsimConfig& s) {
  sub->add_option("--ssim-k1", s.k1, "SSIM K1");
  sub->add_option("--ssim-k2", s.k2, "SSIM K2");
  sub->add_option("--ssim-range", s.dynamic_range, "SSIM dynamic range R");
  sub->add_option("--ssim-window", s.window, "SSIM Gaussian window side");
  sub->add_option("--ssim-sigma", s.sigma, "SSIM Gaussian sigma");
}

inline void check_ssim(const SsimConfig& s) {
  if (!(s.c1() > 0.0 && s.c2() > 0.0)) throw UsageError("SSIM constants must be positive");
  if (s.window == 0 || s.window % 2 == 0) throw UsageError("--ssim-window must be odd");
  if (!(s.sigma > 0.0)) throw UsageError("--ssim-sigma must be > 0");
}

template <typename T>
Network<T> load_network(const std::string& path) {
  return network_cast<T>(load_checkpoint(path).network);
}

inline std::function<Image(const Image&)> network_method(const std::string& ckpt,
                                                         const std::string& precision) {
  if (precision == "double") {
    auto net = std::make_shared<Network<double>>(load_network<double>(ckpt));
    return [net](const Image& img) { return denoise(img, *net); };
  }
  auto net = std::make_shared<Network<float>>(load_network<float>(ckpt));
  return [net](const Image& img) { return denoise(img, *net); };
}

inline void check_precision(const std::string& p) {
  if (p != "float" && p != "double") throw UsageError("--precision must be float or double");
}

// ---------------------------------------------------------------------------

inline int run_prepare(const Options& o) {
  std::vector<fs::path> dirs;
  if (!fs::is_directory(o.volumes_dir)) throw IoError("not a directory: " + o.volumes_dir);
  for (const auto& e : fs::directory_iterator(o.volumes_dir))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  GroundTruthConfig cfg = o.gt;
  cfg.crop = parse_crop(o.crop);
  check_ssim(cfg.ssim);
  if (dirs.size() < cfg.volumes) {
    throw InputError("found " + std::to_string(dirs.size()) + " volume directories, need " +
                     std::to_string(cfg.volumes));
  }
  dirs.resize(cfg.volumes);
  std::vector<Volume> vols;
  for (const auto& d : dirs) vols.push_back(read_volume(d));
  const auto pairs = build_ground_truth(vols, o.target, cfg);
  const std::string ext = image_ext(o.format);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    write_pair(o.out_dir, slice_name(i, pairs.size(), ext), pairs[i].noisy, pairs[i].clean);
  std::cerr << "prepare: wrote " << pairs.size() << " pairs to " << o.out_dir << "\n";
  return kOk;
}

inline int run_synth(const Options& o) {
  if (!(o.speckle.looks > 0.0)) throw UsageError("--looks must be > 0");
  const std::string ext = image_ext(o.format);
  if (o.input_dir.empty() == (o.phantoms == 0)) {
    throw UsageError("synth needs exactly one of --input or --phantoms");
  }
  std::size_t count = 0;
  auto emit = [&](const std::string& name, const Image& clean) {
    const Image noisy = add_speckle(clean, {o.speckle.looks, item_seed(o.speckle.seed, count)});
    write_pair(o.out_dir, name, noisy, clean);
    ++count;
  };
  if (o.phantoms > 0) {
    if (o.height < 3 || o.width < 3) throw UsageError("--height and --width must be >= 3");
    for (std::size_t i = 0; i < o.phantoms; ++i)
      emit(slice_name(i, o.phantoms, ext), make_phantom(o.height, o.width, item_seed(o.phantom_seed, i)));
  } else {
    const auto files = image_files(o.input_dir);
    if (files.empty()) throw InputError("no images in " + o.input_dir);
    for (const auto& f : files) emit(f.stem().string() + ext, read_image(f));
  }
  std::cerr << "synth: wrote " << count << " pairs to " << o.out_dir << "\n";
  return kOk;
}

inline int run_train(const Options& o) {
  check_precision(o.precision);
  o.train.validate();
  std::vector<PatchPair> patches;
  for (const auto& p : read_pairs(o.pairs_dir)) {
    if (p.noisy.height() < o.train.patch_size || p.noisy.width() < o.train.patch_size) {
      throw InputError("pair " + p.id + " is smaller than the patch size");
    }
    auto ps = extract_patches(p.noisy, p.clean, o.train);
    patches.insert(patches.end(), ps.begin(), ps.end());
  }
  if (patches.empty()) throw InputError("no patches passed the variance floor");
  std::cerr << "train: " << patches.size() << " patches\n";
  auto progress = [](const EpochRecord& r, bool improved) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %llu train_loss %.6g val_loss %.6g%s\n",
                  static_cast<unsigned long long>(r.epoch), r.train_loss, r.val_loss,
                  improved ? " *" : "");
    std::cerr << buf;
  };
  const TrainResult res = o.precision == "double" ? train_loop<double>(patches, o.train, progress)
                                                  : train_loop<float>(patches, o.train, progress);
  fs::path csv = o.loss_csv;
  if (csv.empty()) csv = fs::path(o.checkpoint).replace_extension(".loss.csv");
  if (const auto parent = fs::path(o.checkpoint).parent_path(); !parent.empty())
    fs::create_directories(parent);
  save_checkpoint(res.checkpoint, o.checkpoint);
  write_loss_csv(res.history, csv);
  std::cerr << "train: best epoch " << res.best_epoch << (res.stopped_early ? " (early stop)" : "")
            << ", checkpoint " << o.checkpoint << "\n";
  return kOk;
}

inline int run_denoise(const Options& o) {
  check_precision(o.precision);
  const std::string ext = image_ext(o.format);
  std::vector<fs::path> files;
  for (const auto& in : o.inputs) {
    if (fs::is_directory(in)) {
      const auto f = image_files(in);
      files.insert(files.end(), f.begin(), f.end());
    } else {
      files.emplace_back(in);
    }
  }
  if (files.empty()) throw InputError("no input images");
  const auto method = network_method(o.checkpoint, o.precision);
  fs::create_directories(o.out_dir);
  for (const auto& f : files) write_image(method(read_image(f)), fs::path(o.out_dir) / (f.stem().string() + ext));
  std::cerr << "denoise: wrote " << files.size() << " images to " << o.out_dir << "\n";
  return kOk;
}

inline int run_eval(const Options& o) {
  check_precision(o.precision);
  check_ssim(o.ssim);
  const auto named = read_pairs(o.pairs_dir);
  std::vector<EvalPair> pairs;
  for (const auto& p : named) pairs.push_back({p.id, p.noisy, p.clean});

  RoiMask mask;
  ReportOptions opt{o.peak, o.ssim, nullptr};
  if (!(o.peak > 0.0)) throw UsageError("--peak must be > 0");
  if (!o.roi.empty()) {
    const Image m = read_image(o.roi);
    for (const auto& p : pairs) require_same_dims(m, p.noisy, "roi mask");
    mask.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) mask[i] = m[i] > 0.5 ? 1 : 0;
    opt.roi = &mask;
  }

  std::vector<Method> methods;
  std::string notes;
  for (const auto& name : split_names(o.methods)) {
    if (name == "noisy") {
      methods.push_back({"noisy", [](const Image& img) { return img; }});
    } else if (name == "median") {
      std::vector<std::size_t> grid;
      for (double w : parse_doubles(o.median_windows, "--median-windows")) {
        if (w < 1 || w != static_cast<double>(static_cast<std::size_t>(w)) ||
            static_cast<std::size_t>(w) % 2 == 0) {
          throw UsageError("--median-windows must be odd positive integers");
        }
        grid.push_back(static_cast<std::size_t>(w));
      }
      const std::size_t w = best_parameter<std::size_t>(
          pairs, grid, [](const Image& img, const std::size_t& win) { return median_filter(img, win); },
          o.peak, opt.roi);
      notes += "median window " + std::to_string(w) + "\n";
      methods.push_back({"median", [w](const Image& img) { return median_filter(img, w); }});
    } else if (name == "nlm") {
      std::vector<double> grid = parse_doubles(o.nlm_h, "--nlm-h");
      if (std::any_of(grid.begin(), grid.end(), [](double h) { return !(h > 0.0); })) {
        throw UsageError("--nlm-h values must be > 0");
      }
      NlmParams base = o.nlm;
      const double h = best_parameter<double>(
          pairs, grid,
          [base](const Image& img, const double& hv) {
            NlmParams p = base;
            p.h = hv;
            return nlm_filter(img, p);
          },
          o.peak, opt.roi);
      base.h = h;
      char buf[64];
      std::snprintf(buf, sizeof buf, "nlm h %g\n", h);
      notes += buf;
      methods.push_back({"nlm", [base](const Image& img) { return nlm_filter(img, base); }});
    } else if (name == "network") {
      if (!o.checkpoint_given) {
        std::cerr << "eval: no --checkpoint, skipping the network method\n";
        continue;
      }
      methods.push_back({"network", network_method(o.checkpoint, o.precision)});
    } else {
      throw UsageError("unknown method '" + name + "' (noisy, median, nlm, network)");
    }
  }
  if (methods.empty()) throw UsageError("no methods to evaluate");

  const MetricsReport rep = evaluate_report(pairs, methods, opt);
  fs::create_directories(o.out_dir);
  const std::string csv = report_csv(rep);
  const std::string table = report_table(rep) + notes;
  detail::write_file_atomic(fs::path(o.out_dir) / "report.csv", std::span<const char>(csv.data(), csv.size()));
  detail::write_file_atomic(fs::path(o.out_dir) / "report.txt", std::span<const char>(table.data(), table.size()));
  for (const auto& r : rep.rows)
    if (r.status == RowStatus::Failed) std::cerr << "eval: " << r.method << " failed on " << r.image_id << ": " << r.error << "\n";
  std::cerr << "eval: report written to " << o.out_dir << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

/// Parses argv, runs the chosen subcommand and maps failures to exit codes.
/// Diagnostics go to `err`.
inline int dispatch(std::vector<std::string> args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Speckle denoising for OCT B-scans with a residual convolutional network", "octden"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto* prepare = app.add_subcommand("prepare", "Registered-average ground truth from repeated volumes");
  prepare->add_option("volume-root", o.volumes_dir, "Directory with one subdirectory of numbered slices per volume")->required();
  prepare->add_option("out", o.out_dir, "Output pairs directory (noisy/ and clean/)")->required();
  prepare->add_option("--target", o.target, "Index of the target volume");
  prepare->add_option("--volumes", o.gt.volumes, "Volumes used (M)");
  prepare->add_option("--nearby", o.gt.nearby, "Nearby B-scans per other volume (N)");
  prepare->add_option("--selected", o.gt.selected, "Best-SSIM candidates averaged (L)");
  prepare->add_option("--crop", o.crop, "Crop window y,x,height,width applied before registration");
  prepare->add_option("--levels", o.gt.registration.levels, "Registration pyramid levels");
  prepare->add_option("--max-iterations", o.gt.registration.max_iterations, "Registration iterations per level");
  prepare->add_option("--tolerance", o.gt.registration.tolerance, "Registration step tolerance");
  prepare->add_option("--fd-step", o.gt.registration.fd_step, "Finite-difference step");
  prepare->add_option("--margin", o.gt.registration.margin_fraction, "Border fraction excluded from the registration cost");
  add_ssim(prepare, o.gt.ssim);
  prepare->add_option("--format", o.format, "Output image format: pgm or tns");
  add_common(prepare, o);

  auto* synth = app.add_subcommand("synth", "Speckled noisy/clean pairs from clean images or phantoms");
  synth->add_option("out", o.out_dir, "Output pairs directory")->required();
  synth->add_option("--input", o.input_dir, "Directory of clean .pgm/.tns images");
  synth->add_option("--phantoms", o.phantoms, "Generate this many layered phantoms instead of reading --input");
  synth->add_option("--height", o.height, "Phantom height");
  synth->add_option("--width", o.width, "Phantom width");
  synth->add_option("--phantom-seed", o.phantom_seed, "Phantom geometry seed");
  synth->add_option("--looks", o.speckle.looks, "Gamma speckle looks (multiplier variance 1/looks)");
  synth->add_option("--seed", o.speckle.seed, "Speckle seed");
  synth->add_option("--format", o.format, "Output image format: pgm or tns");
  add_common(synth, o);

  auto* train = app.add_subcommand("train", "Train the denoiser on a pairs directory");
  train->add_option("pairs", o.pairs_dir, "Pairs directory (noisy/ and clean/)")->required();
  train->add_option("--out", o.checkpoint, "Checkpoint path");
  train->add_option("--loss-csv", o.loss_csv, "Loss history CSV (default: checkpoint path with .loss.csv)");
  train->add_option("--patch-size", o.train.patch_size, "Training patch side");
  train->add_option("--patch-stride", o.train.patch_stride, "Patch grid stride");
  train->add_option("--variance-floor", o.train.variance_floor, "Minimum clean-patch variance");
  train->add_option("--epochs", o.train.epochs, "Maximum epochs");
  train->add_option("--batch-size", o.train.batch_size, "Mini-batch size");
  train->add_option("--lr", o.train.learning_rate, "Adam learning rate");
  train->add_option("--beta1", o.train.beta1, "Adam beta1");
  train->add_option("--beta2", o.train.beta2, "Adam beta2");
  train->add_option("--adam-eps", o.train.adam_eps, "Adam epsilon");
  train->add_option("--hflip", o.train.augment_hflip, "Random horizontal flips");
  train->add_option("--val-fraction", o.train.validation_fraction, "Validation hold-out fraction");
  train->add_option("--patience", o.train.early_stop_patience, "Early-stopping patience in epochs");
  train->add_option("--seed", o.train.rng_seed, "Initialization and shuffling seed");
  train->add_option("--width", o.train.width, "Hidden channel count");
  train->add_option("--precision", o.precision, "Arithmetic: float or double");
  add_common(train, o);

  auto* den = app.add_subcommand("denoise", "Denoise images with a trained checkpoint");
  den->add_option("inputs", o.inputs, "Image files or directories")->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  den->add_option("--checkpoint", o.checkpoint, "Checkpoint path");
  den->add_option("--out", o.out_dir, "Output directory")->required();
  den->add_option("--format", o.format, "Output image format: pgm or tns");
  den->add_option("--precision", o.precision, "Arithmetic: float or double");
  add_common(den, o);

  auto* ev = app.add_subcommand("eval", "PSNR/SSIM/time report for denoising methods");
  ev->add_option("pairs", o.pairs_dir, "Pairs directory (noisy/ and clean/)")->required();
  ev->add_option("--out", o.out_dir, "Report directory (report.csv, report.txt)")->required();
  auto* ck = ev->add_option("--checkpoint", o.checkpoint, "Checkpoint for the network method");
  ev->add_option("--methods", o.methods, "Comma-separated: noisy, median, nlm, network");
  ev->add_option("--median-windows", o.median_windows, "Median window grid; best PSNR is reported");
  ev->add_option("--nlm-h", o.nlm_h, "NLM strength grid; best PSNR is reported");
  ev->add_option("--nlm-patch", o.nlm.patch_radius, "NLM patch radius");
  ev->add_option("--nlm-search", o.nlm.search_radius, "NLM search radius");
  ev->add_option("--peak", o.peak, "PSNR peak intensity");
  ev->add_option("--roi", o.roi, "Mask image; pixels above 0.5 are inside the ROI");
  ev->add_option("--precision", o.precision, "Arithmetic: float or double");
  add_ssim(ev, o.ssim);
  add_common(ev, o);

  std::vector<std::string> merged;
  try {
    merged = merge_config(std::move(args));
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  std::vector<std::string> rev(merged.rbegin(), merged.rend());
  try {
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    set_num_threads(o.threads);
    o.checkpoint_given = ck->count() > 0;
    if (prepare->parsed()) return run_prepare(o);
    if (synth->parsed()) return run_synth(o);
    if (train->parsed()) return run_train(o);
    if (den->parsed()) return run_denoise(o);
    return run_eval(o);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const InputError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const DegenerateError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace octden::cli
