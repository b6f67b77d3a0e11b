#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "efrlfn/bench.hpp"
#include "efrlfn/dataset.hpp"
#include "efrlfn/losses.hpp"
#include "efrlfn/media_io.hpp"
#include "efrlfn/metrics.hpp"
#include "efrlfn/model.hpp"
#include "efrlfn/ranking.hpp"
#include "efrlfn/synthetic.hpp"
#include "efrlfn/trainer.hpp"

namespace fs = std::filesystem;

namespace efrlfn::cli {

namespace {

// One-line failure surfaced to the user.
struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw CliError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NamedImage<float>> load_dir(const fs::path& dir) {
  std::vector<NamedImage<float>> out;
  for (const auto& p : list_images(dir)) out.push_back({p.stem().string(), read_image<float>(p)});
  if (out.empty()) throw CliError("no .ppm images in " + dir.string());
  return out;
}

void require_exists(const fs::path& p) {
  if (!fs::exists(p)) throw CliError("missing input: " + p.string());
}

void check_scale(int scale) {
  if (scale != 2 && scale != 4) throw CliError("invalid scale " + std::to_string(scale) + ", expected 2 or 4");
}

// Per-channel mean of a (1,c,h,w) map, min-max normalized to [0,1].
Tensor<float> feature_preview(const Tensor<float>& features) {
  const Shape s = features.shape();
  std::vector<double> mean(s.plane(), 0.0);
  const auto d = features.data();
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < s.plane(); ++i) mean[i] += d[c * s.plane() + i];
  const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
  const double range = *hi - *lo;
  Tensor<float> out(Shape{1, 1, s.h, s.w});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < s.plane(); ++i) o[i] = range > 0 ? static_cast<float>((mean[i] - *lo) / range) : 0.0f;
  return out;
}

struct ModelFlags {
  int channels = 40;
  int blocks = 6;
  int scale = 2;
  std::string activation = "tanh";
  std::string attention = "eca";

  void add(CLI::App* app, bool with_scale = true) {
    app->add_option("--channels", channels, "feature channels C")->capture_default_str();
    app->add_option("--blocks", blocks, "number of residual blocks")->capture_default_str();
    if (with_scale) app->add_option("--scale", scale, "upscaling factor (2 or 4)")->capture_default_str();
    app->add_option("--activation", activation, "tanh | relu | shifted_sigmoid")->capture_default_str();
    app->add_option("--attention", attention, "eca | esa")->capture_default_str();
  }

  ModelConfig config(std::uint64_t seed) const {
    ModelConfig c;
    c.channels = channels;
    c.blocks = blocks;
    c.scale = scale;
    c.activation = parse_activation(activation);
    c.attention = parse_attention(attention);
    c.seed = seed;
    c.validate();
    return c;
  }
};

Model<float> load_model(const fs::path& weights) {
  require_exists(weights);
  try {
    return load_weights<float>(weights);
  } catch (const std::exception& e) {
    throw CliError("cannot load weights " + weights.string() + ": " + e.what());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Efficient residual local feature network: training, inference and evaluation tools",
               "efrlfn"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_config("--config", "", "flat key=value file; explicit flags win");

  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed")->capture_default_str();
  };

  // ---------------------------------------------------------------- train
  auto* train = app.add_subcommand("train", "train a model on LR/HR pairs");
  ModelFlags train_model;
  train_model.add(train);
  std::string hr_dir, lr_dir, out_dir, loss_name = "full", resume, vgg_path;
  int synthetic_count = 0, synthetic_size = 64, steps = 1000, batch = 16, patch = 64;
  int checkpoint_every = 0, eval_every = 0, log_every = 1;
  double learning_rate = 5e-4;
  bool cosine = false;
  train->add_option("--hr-dir", hr_dir, "directory of HR .ppm images");
  train->add_option("--lr-dir", lr_dir, "directory of matching LR images (default: bicubic degradation)");
  train->add_option("--synthetic", synthetic_count, "train on N procedural images instead of --hr-dir");
  train->add_option("--synthetic-size", synthetic_size, "procedural HR size")->capture_default_str();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--steps", steps)->capture_default_str();
  train->add_option("--lr", learning_rate, "learning rate")->capture_default_str();
  train->add_option("--batch", batch)->capture_default_str();
  train->add_option("--patch", patch, "HR patch size")->capture_default_str();
  train->add_option("--loss", loss_name, "full | no_charb | no_vgg | no_sobel | l1 | l2 | lpips_placeholder")
      ->capture_default_str();
  train->add_option("--vgg", vgg_path, "VGG-19 tensor bundle for the perceptual term");
  train->add_option("--checkpoint-every", checkpoint_every)->capture_default_str();
  train->add_option("--eval-every", eval_every)->capture_default_str();
  train->add_option("--log-every", log_every)->capture_default_str();
  train->add_option("--resume", resume, "checkpoint prefix to resume from");
  train->add_flag("--cosine", cosine, "cosine learning-rate decay");
  add_seed(train);

  // ---------------------------------------------------------------- infer
  auto* infer = app.add_subcommand("infer", "upscale images");
  std::string weights, input, out_path;
  int infer_scale = 0;
  infer->add_option("--weights", weights)->required();
  infer->add_option("--input", input, ".ppm file or directory")->required();
  infer->add_option("--out", out_path, "output file or directory")->required();
  infer->add_option("--scale", infer_scale, "expected scale; must match the weights");
  add_seed(infer);

  // ---------------------------------------------------------------- bench
  auto* bench = app.add_subcommand("bench", "measure inference throughput");
  ModelFlags bench_model_flags;
  bench_model_flags.add(bench);
  std::string bench_weights, bench_out, bench_id;
  int frames = 100, runs = 3, warmup = 10, height = 180, width = 320;
  bench->add_option("--weights", bench_weights, "weights file (default: seeded model from flags)");
  bench->add_option("--frames", frames)->capture_default_str();
  bench->add_option("--runs", runs)->capture_default_str();
  bench->add_option("--warmup", warmup)->capture_default_str();
  bench->add_option("--height", height, "LR frame height")->capture_default_str();
  bench->add_option("--width", width, "LR frame width")->capture_default_str();
  bench->add_option("--id", bench_id, "model id in the report");
  bench->add_option("--out", bench_out, "report prefix; writes <out>.csv and <out>.json");
  add_seed(bench);

  // -------------------------------------------------------------- metrics
  auto* metrics = app.add_subcommand("metrics", "PSNR/SSIM of SR images against HR references");
  std::string sr_dir, ref_dir, metrics_out;
  metrics->add_option("--sr", sr_dir, "directory of SR images")->required();
  metrics->add_option("--hr", ref_dir, "directory of HR images with the same names")->required();
  metrics->add_option("--out", metrics_out, "CSV output");
  add_seed(metrics);

  // ----------------------------------------------------------------- rank
  auto* rank = app.add_subcommand("rank", "Bradley-Terry scores from pairwise responses");
  std::string responses, rank_out;
  int n_boot = 1000;
  rank->add_option("--responses", responses, "CSV worker,pair_left,pair_right,choice,verified")->required();
  rank->add_option("--out", rank_out, "CSV item,score,ci_low,ci_high");
  rank->add_option("--boot", n_boot, "bootstrap replicates")->capture_default_str();
  add_seed(rank);

  // -------------------------------------------------------------- dataset
  auto* dataset = app.add_subcommand("dataset", "corpus curation");
  dataset->require_subcommand(1);
  auto* filter = dataset->add_subcommand("filter", "static-intro check on frames 1, 100 and 150");
  std::vector<std::string> filter_frames;
  double tau = kDefaultStaticTau;
  filter->add_option("--frames", filter_frames, "three .ppm frames: first, 100th, 150th")
      ->required()
      ->expected(3);
  filter->add_option("--tau", tau, "mean absolute luma threshold")->capture_default_str();
  add_seed(filter);
  auto* categorize_cmd = dataset->add_subcommand("categorize", "cluster and assign test/train/val");
  std::string features_csv, split_out;
  int clusters = kDefaultClusters;
  categorize_cmd->add_option("--features", features_csv, "CSV id,si,ti,bitrate,quality,e0..")->required();
  categorize_cmd->add_option("--clusters", clusters)->capture_default_str();
  categorize_cmd->add_option("--out", split_out, "CSV id,split");
  add_seed(categorize_cmd);
  auto* split_cmd = dataset->add_subcommand("split", "copy images into train/val/test folders");
  std::string split_csv, split_input, split_dest;
  split_cmd->add_option("--split", split_csv, "CSV id,split")->required();
  split_cmd->add_option("--input", split_input, "directory with <id>.ppm")->required();
  split_cmd->add_option("--out", split_dest)->required();
  add_seed(split_cmd);
  auto* degrade = dataset->add_subcommand("degrade", "bicubic downscale HR images");
  std::string degrade_input, degrade_out;
  int degrade_scale = 2;
  degrade->add_option("--input", degrade_input)->required();
  degrade->add_option("--out", degrade_out)->required();
  degrade->add_option("--scale", degrade_scale)->capture_default_str();
  add_seed(degrade);

  // -------------------------------------------------------- dump-features
  auto* dump = app.add_subcommand("dump-features", "per-block attention outputs as grayscale images");
  std::string dump_weights, dump_input, dump_out;
  std::vector<int> dump_blocks{1, 3, 6};
  dump->add_option("--weights", dump_weights)->required();
  dump->add_option("--input", dump_input)->required();
  dump->add_option("--out", dump_out, "output directory")->required();
  dump->add_option("--blocks", dump_blocks, "1-based block indices")->delimiter(',')->capture_default_str();
  add_seed(dump);

  // --------------------------------------------------------------- ablate
  auto* ablate = app.add_subcommand("ablate", "desk-scale ablation grids");
  std::string grid = "attention-activation", ablate_out;
  int ablate_steps = 200, ablate_channels = 16, ablate_blocks = 2, ablate_scale = 2, images = 8,
      image_size = 32, ablate_batch = 4, ablate_patch = 32, ablate_frames = 20;
  ablate->add_option("--grid", grid, "attention-activation | loss")->capture_default_str();
  ablate->add_option("--steps", ablate_steps)->capture_default_str();
  ablate->add_option("--channels", ablate_channels)->capture_default_str();
  ablate->add_option("--blocks", ablate_blocks)->capture_default_str();
  ablate->add_option("--scale", ablate_scale)->capture_default_str();
  ablate->add_option("--images", images, "procedural training images")->capture_default_str();
  ablate->add_option("--size", image_size, "procedural HR size")->capture_default_str();
  ablate->add_option("--batch", ablate_batch)->capture_default_str();
  ablate->add_option("--patch", ablate_patch)->capture_default_str();
  ablate->add_option("--frames", ablate_frames, "frames per timing run")->capture_default_str();
  ablate->add_option("--lr", learning_rate, "learning rate")->capture_default_str();
  ablate->add_option("--out", ablate_out, "CSV output");
  add_seed(ablate);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train) {
      check_scale(train_model.scale);
      TrainConfig cfg;
      cfg.scale = train_model.scale;
      cfg.patch_size = patch;
      cfg.batch_size = batch;
      cfg.steps = steps;
      cfg.learning_rate = learning_rate;
      cfg.seed = seed;
      cfg.variant = parse_loss_variant(loss_name);
      cfg.cosine_decay = cosine;
      cfg.eval_every = eval_every;
      cfg.log_every = log_every;
      cfg.checkpoint_every = checkpoint_every;
      cfg.checkpoint_dir = fs::path(out_dir) / "checkpoints";
      cfg.validate();

      std::vector<NamedImage<float>> hr;
      if (synthetic_count > 0) {
        hr = synthetic_corpus<float>(static_cast<std::size_t>(synthetic_count),
                                     static_cast<std::size_t>(synthetic_size),
                                     static_cast<std::size_t>(synthetic_size), seed);
      } else {
        if (hr_dir.empty()) throw CliError("train needs --hr-dir or --synthetic");
        hr = load_dir(hr_dir);
      }
      std::vector<ImagePair<float>> pairs;
      if (!lr_dir.empty()) {
        const auto lr = load_dir(lr_dir);
        pairs = make_pairs<float>(hr, cfg.scale, LrMode::real, lr);
      } else {
        pairs = make_pairs<float>(hr, cfg.scale, LrMode::synthetic);
      }
      std::shared_ptr<const FeatureExtractor<float>> extractor;
      if (!vgg_path.empty()) {
        require_exists(vgg_path);
        extractor = std::make_shared<Vgg19Extractor<float>>(Vgg19Extractor<float>::load(vgg_path));
      }
      Model<float> model = Model<float>::build(train_model.config(seed));
      fs::create_directories(out_dir);
      Trainer<float> trainer(model, std::move(pairs), cfg, extractor);
      if (!resume.empty()) trainer.load_checkpoint(resume);
      std::ofstream log(fs::path(out_dir) / "train.jsonl", resume.empty() ? std::ios::trunc : std::ios::app);
      if (!log) throw CliError("cannot write " + (fs::path(out_dir) / "train.jsonl").string());
      const auto records = trainer.run(&log);
      save_weights(model, fs::path(out_dir) / "model.efrw");
      trainer.save_checkpoint(fs::path(out_dir) / "last");
      if (!records.empty()) out << to_json_line(records.back()) << '\n';
      out << "wrote " << (fs::path(out_dir) / "model.efrw").string() << '\n';
      return 0;
    }

    if (*infer) {
      const Model<float> model = load_model(weights);
      if (infer_scale != 0) {
        check_scale(infer_scale);
        if (infer_scale != model.config().scale) {
          throw CliError("weights are for scale " + std::to_string(model.config().scale) +
                         ", requested " + std::to_string(infer_scale));
        }
      }
      require_exists(input);
      if (fs::is_directory(input)) {
        fs::create_directories(out_path);
        for (const auto& p : list_images(input)) {
          write_image(model.infer(read_image<float>(p)), fs::path(out_path) / p.filename());
        }
      } else {
        write_image(model.infer(read_image<float>(input)), out_path);
      }
      return 0;
    }

    if (*bench) {
      const Model<float> model = bench_weights.empty()
                                     ? Model<float>::build(bench_model_flags.config(seed))
                                     : load_model(bench_weights);
      if (height < 1 || width < 1) throw CliError("frame dims must be positive");
      const auto frame_set = bench_frames(std::min(frames, 16), static_cast<std::size_t>(height),
                                          static_cast<std::size_t>(width), seed);
      const std::string id = bench_id.empty() ? to_string(model.config().activation) + "_" +
                                                    to_string(model.config().attention)
                                              : bench_id;
      const BenchResult result = bench_model(model, frame_set, {frames, runs, warmup}, id);
      out << bench_to_json(result) << '\n';
      if (!bench_out.empty()) {
        const Report report = build_report(std::span<const BenchResult>(&result, 1), {});
        write_report(report, bench_out + ".csv", bench_out + ".json");
      }
      return 0;
    }

    if (*metrics) {
      std::vector<ImageScore> scores;
      for (const auto& p : list_images(sr_dir)) {
        const fs::path ref = fs::path(ref_dir) / p.filename();
        require_exists(ref);
        const auto a = read_image<double>(p);
        const auto b = read_image<double>(ref);
        scores.push_back({p.stem().string(), psnr(a, b), ssim(a, b)});
      }
      if (scores.empty()) throw CliError("no .ppm images in " + sr_dir);
      std::ostringstream table;
      table << "id,psnr,ssim\n" << std::setprecision(10);
      std::vector<double> ps, ss;
      for (const auto& s : scores) {
        table << s.id << ',' << s.psnr << ',' << s.ssim << '\n';
        ps.push_back(s.psnr);
        ss.push_back(s.ssim);
      }
      out << table.str();
      const auto pm = summarize_ci(ps);
      const auto sm = summarize_ci(ss);
      out << "mean psnr " << pm.mean << " +- " << pm.ci << ", ssim " << sm.mean << " +- " << sm.ci << '\n';
      if (!metrics_out.empty()) {
        std::ofstream f(metrics_out);
        if (!f) throw CliError("cannot write " + metrics_out);
        f << table.str();
      }
      return 0;
    }

    if (*rank) {
      require_exists(responses);
      const auto study = filter_responses(read_responses(fs::path(responses)));
      const RankingResult result = rank_items(study, n_boot, seed);
      if (result.warning) err << "warning: " << *result.warning << '\n';
      write_ranking(out, result);
      if (!rank_out.empty()) {
        std::ofstream f(rank_out);
        if (!f) throw CliError("cannot write " + rank_out);
        write_ranking(f, result);
      }
      return 0;
    }

    if (*filter) {
      for (const auto& f : filter_frames) require_exists(f);
      const auto a = read_image<double>(filter_frames[0]);
      const auto b = read_image<double>(filter_frames[1]);
      const auto c = read_image<double>(filter_frames[2]);
      const auto decision = scene_static_filter(a, b, c, tau);
      out << (decision == FilterDecision::discard ? "discard" : "keep") << '\n';
      return 0;
    }

    if (*categorize_cmd) {
      require_exists(features_csv);
      const auto records = read_feature_records(fs::path(features_csv));
      const SplitAssignment split = categorize(records, clusters, seed);
      if (split_out.empty()) {
        write_split(out, split);
      } else {
        std::ofstream f(split_out);
        if (!f) throw CliError("cannot write " + split_out);
        write_split(f, split);
      }
      out << "test " << split.count(Split::test) << ", train " << split.count(Split::train) << ", val "
          << split.count(Split::val) << '\n';
      return 0;
    }

    if (*split_cmd) {
      require_exists(split_csv);
      std::ifstream in(split_csv);
      std::string line;
      std::getline(in, line);
      if (line != "id,split") throw CliError(split_csv + ": expected header id,split");
      std::size_t line_no = 1;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw CliError(split_csv + " line " + std::to_string(line_no) + ": missing split");
        const std::string id = line.substr(0, comma);
        const std::string which = line.substr(comma + 1);
        if (which != "train" && which != "val" && which != "test") {
          throw CliError(split_csv + " line " + std::to_string(line_no) + ": unknown split " + which);
        }
        const fs::path src = fs::path(split_input) / (id + ".ppm");
        require_exists(src);
        fs::create_directories(fs::path(split_dest) / which);
        fs::copy_file(src, fs::path(split_dest) / which / src.filename(), fs::copy_options::overwrite_existing);
      }
      return 0;
    }

    if (*degrade) {
      check_scale(degrade_scale);
      const auto hr = load_dir(degrade_input);
      const auto pairs = make_pairs<float>(hr, degrade_scale, LrMode::synthetic);
      fs::create_directories(degrade_out);
      for (const auto& p : pairs) write_image(p.lr, fs::path(degrade_out) / (p.id + ".ppm"));
      return 0;
    }

    if (*dump) {
      const Model<float> model = load_model(dump_weights);
      require_exists(dump_input);
      const auto maps = model.dump_features(read_image<float>(dump_input),
                                            std::set<int>(dump_blocks.begin(), dump_blocks.end()));
      fs::create_directories(dump_out);
      for (const auto& [index, features] : maps) {
        write_image(feature_preview(features), fs::path(dump_out) / ("block_" + std::to_string(index) + ".ppm"));
      }
      return 0;
    }

    if (*ablate) {
      check_scale(ablate_scale);
      const auto hr = synthetic_corpus<float>(static_cast<std::size_t>(images),
                                              static_cast<std::size_t>(image_size),
                                              static_cast<std::size_t>(image_size), seed);
      const auto pairs = make_pairs<float>(hr, ablate_scale, LrMode::synthetic);
      TrainConfig cfg;
      cfg.scale = ablate_scale;
      cfg.patch_size = ablate_patch;
      cfg.batch_size = ablate_batch;
      cfg.steps = ablate_steps;
      cfg.learning_rate = learning_rate;
      cfg.seed = seed;
      cfg.log_every = std::max(1, ablate_steps);
      const auto timing_frames = bench_frames(4, static_cast<std::size_t>(image_size / ablate_scale),
                                              static_cast<std::size_t>(image_size / ablate_scale), seed);
      const BenchOptions timing{std::max(1, ablate_frames), 3, 2};

      std::ostringstream table;
      table << std::setprecision(6);
      auto run_one = [&](const ModelConfig& mc, const TrainConfig& tc) {
        Model<float> model = Model<float>::build(mc);
        const auto records = efrlfn::train<float>(model, pairs, tc);
        const EvalReport eval = evaluate(model, std::span<const ImagePair<float>>(pairs));
        const BenchResult timing_result = bench_model(model, timing_frames, timing);
        const double final_loss = records.empty() ? 0.0 : records.back().total;
        table << param_count(mc) << ',' << eval.psnr.mean << ',' << eval.ssim.mean << ','
              << timing_result.fps_mean << ',' << final_loss << '\n';
      };
      ModelConfig base;
      base.channels = ablate_channels;
      base.blocks = ablate_blocks;
      base.scale = ablate_scale;
      base.seed = seed;
      if (grid == "attention-activation") {
        table << "activation,attention,params,psnr,ssim,fps,final_loss\n";
        for (Activation act : {Activation::tanh, Activation::shifted_sigmoid, Activation::relu}) {
          for (Attention att : {Attention::eca, Attention::esa}) {
            ModelConfig mc = base;
            mc.activation = act;
            mc.attention = att;
            table << to_string(act) << ',' << to_string(att) << ',';
            run_one(mc, cfg);
          }
        }
      } else if (grid == "loss") {
        table << "loss,params,psnr,ssim,fps,final_loss\n";
        for (LossVariant v : all_loss_variants()) {
          TrainConfig tc = cfg;
          tc.variant = v;
          table << to_string(v) << ',';
          run_one(base, tc);
        }
      } else {
        throw CliError("unknown grid '" + grid + "', expected attention-activation or loss");
      }
      out << table.str();
      if (!ablate_out.empty()) {
        std::ofstream f(ablate_out);
        if (!f) throw CliError("cannot write " + ablate_out);
        f << table.str();
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace efrlfn::cli
