#include "efrlfn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <numbers>
#include <ostream>

#include "efrlfn/media_io.hpp"
#include "json.hpp"

namespace efrlfn {

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("TrainConfig." + field + ": " + why);
  };
  if (scale != 2 && scale != 4) fail("scale", "must be 2 or 4");
  if (patch_size < 1) fail("patch_size", "must be positive");
  if (patch_size % scale != 0) fail("patch_size", "must be divisible by scale");
  if (batch_size < 1) fail("batch_size", "must be positive");
  if (steps < 0) fail("steps", "must be >= 0");
  if (!(learning_rate > 0)) fail("learning_rate", "must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) fail("adam.beta1", "must be in [0,1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) fail("adam.beta2", "must be in [0,1)");
  if (!(adam.eps > 0)) fail("adam.eps", "must be positive");
  if (min_learning_rate < 0 || min_learning_rate > learning_rate) {
    fail("min_learning_rate", "must be in [0, learning_rate]");
  }
  if (log_every < 1) fail("log_every", "must be positive");
  if (eval_every < 0) fail("eval_every", "must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) fail("checkpoint_dir", "required with checkpoint_every");
  loss.validate();
}

namespace {

template <typename T>
Tensor<T> crop(const Tensor<T>& img, std::size_t y, std::size_t x, std::size_t size) {
  const Shape s = img.shape();
  Tensor<T> out(Shape{1, s.c, size, size});
  auto d = out.mutable_data();
  const auto src = img.data();
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t r = 0; r < size; ++r)
      std::memcpy(&d[(c * size + r) * size], &src[(c * s.h + y + r) * s.w + x], size * sizeof(T));
  return out;
}

template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& items) {
  const Shape s = items.front().shape();
  Tensor<T> out(Shape{items.size(), s.c, s.h, s.w});
  auto d = out.mutable_data();
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::copy(items[i].data().begin(), items[i].data().end(), d.begin() + static_cast<std::ptrdiff_t>(i * s.numel()));
  }
  return out;
}

}  // namespace

template <typename T>
std::pair<Tensor<T>, Tensor<T>> sample_patches(const Tensor<T>& lr, const Tensor<T>& hr, int scale,
                                               int patch, std::mt19937_64& rng) {
  const Shape ls = lr.shape();
  const Shape hs = hr.shape();
  if (scale < 1 || patch < 1 || patch % scale != 0) {
    throw std::invalid_argument("sample_patches: patch " + std::to_string(patch) +
                                " not divisible by scale " + std::to_string(scale));
  }
  const auto r = static_cast<std::size_t>(scale);
  const auto p = static_cast<std::size_t>(patch);
  if (hs.n != 1 || ls.n != 1 || ls.c != hs.c || ls.h * r != hs.h || ls.w * r != hs.w) {
    throw std::invalid_argument("sample_patches: LR " + ls.str() + " is not HR " + hs.str() +
                                " / " + std::to_string(scale));
  }
  if (hs.h < p || hs.w < p) {
    throw std::invalid_argument("sample_patches: HR " + hs.str() + " smaller than patch " +
                                std::to_string(patch));
  }
  std::uniform_int_distribution<std::size_t> ys(0, (hs.h - p) / r);
  std::uniform_int_distribution<std::size_t> xs(0, (hs.w - p) / r);
  const std::size_t y = ys(rng) * r;
  const std::size_t x = xs(rng) * r;
  return {crop(lr, y / r, x / r, p / r), crop(hr, y, x, p)};
}

template <typename T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState& state,
               double learning_rate, const AdamHyper& hyper) {
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam: state has " + std::to_string(state.m.size()) +
                                " entries for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params[i];
    if (state.m[i].size() != p.numel() || state.v[i].size() != p.numel()) {
      throw std::invalid_argument("adam: state shape mismatch for " + name);
    }
    for (T g : p.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw TrainingError("adam: non-finite gradient in " + name);
      }
    }
  }
  ++state.t;
  const double b1 = hyper.beta1;
  const double b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i].second;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] = static_cast<T>(static_cast<double>(w[j]) - learning_rate * m_hat / (std::sqrt(v_hat) + hyper.eps));
    }
  }
}

std::string to_json_line(const StepRecord& record) {
  nlohmann::ordered_json j{{"step", record.step},     {"total", record.total},
                           {"charb", record.charb},   {"vgg", record.vgg},
                           {"sobel", record.sobel},   {"lr", record.learning_rate},
                           {"elapsed_ms", record.elapsed_ms}};
  if (record.psnr) j["psnr"] = *record.psnr;
  return j.dump();
}

template <typename T>
Trainer<T>::Trainer(Model<T>& model, std::vector<ImagePair<T>> pairs, TrainConfig config,
                    std::shared_ptr<const FeatureExtractor<T>> extractor)
    : model_(model), pairs_(std::move(pairs)), config_(std::move(config)), extractor_(std::move(extractor)) {
  config_.validate();
  if (pairs_.empty()) throw std::invalid_argument("train: empty dataset");
  if (config_.scale != model_.config().scale) {
    throw std::invalid_argument("train: config scale " + std::to_string(config_.scale) +
                                " but model scale " + std::to_string(model_.config().scale));
  }
  if (!extractor_) extractor_ = std::make_shared<ConvStackExtractor<T>>(config_.seed);
  loss_ = loss_ablation_suite<T>(config_.variant, config_.loss, extractor_);
  model_.set_requires_grad(true);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> Trainer<T>::batch_for(int step_index) const {
  // Seeded per step so a resumed run draws the same batches.
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(step_index)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick(0, pairs_.size() - 1);
  std::vector<Tensor<T>> lrs, hrs;
  for (int b = 0; b < config_.batch_size; ++b) {
    const auto& pair = pairs_[pick(rng)];
    auto [lr, hr] = sample_patches(pair.lr, pair.hr, config_.scale, config_.patch_size, rng);
    lrs.push_back(std::move(lr));
    hrs.push_back(std::move(hr));
  }
  return {stack(lrs), stack(hrs)};
}

template <typename T>
double Trainer<T>::current_lr() const {
  if (!config_.cosine_decay || config_.steps == 0) return config_.learning_rate;
  const double progress = static_cast<double>(state_.t) / static_cast<double>(config_.steps);
  return config_.min_learning_rate + 0.5 * (config_.learning_rate - config_.min_learning_rate) *
                                         (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

template <typename T>
double Trainer<T>::peek_loss(int step_index) const {
  NoGradGuard guard;
  const auto [lr, hr] = batch_for(step_index);
  return static_cast<double>(loss_(model_.forward(lr), hr).total.item());
}

template <typename T>
StepRecord Trainer<T>::step() {
  const auto start = std::chrono::steady_clock::now();
  const int index = completed_steps();
  const auto [lr, hr] = batch_for(index);
  model_.zero_grad();
  const LossBreakdown<T> loss = loss_(model_.forward(lr), hr);
  const double total = static_cast<double>(loss.total.item());
  if (!std::isfinite(total)) {
    throw TrainingError("train: non-finite loss at step " + std::to_string(index + 1));
  }
  backward(loss.total);
  StepRecord rec;
  rec.learning_rate = current_lr();
  adam_step(model_.parameters(), state_, rec.learning_rate, config_.adam);
  model_.zero_grad();
  rec.step = completed_steps();
  rec.total = total;
  rec.charb = loss.charb;
  rec.vgg = loss.perceptual;
  rec.sobel = loss.sobel;
  elapsed_ms_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  rec.elapsed_ms = elapsed_ms_;
  return rec;
}

template <typename T>
std::vector<StepRecord> Trainer<T>::run(std::ostream* log) {
  std::vector<StepRecord> records;
  if (config_.checkpoint_every > 0) std::filesystem::create_directories(config_.checkpoint_dir);
  while (completed_steps() < config_.steps) {
    StepRecord rec = step();
    const bool last = rec.step == config_.steps;
    if (config_.eval_every > 0 && (rec.step % config_.eval_every == 0 || last)) {
      rec.psnr = evaluate(model_, std::span<const ImagePair<T>>(pairs_)).psnr.mean;
    }
    if (rec.step % config_.log_every == 0 || last) {
      records.push_back(rec);
      if (log) *log << to_json_line(rec) << '\n' << std::flush;
    }
    if (config_.checkpoint_every > 0 && (rec.step % config_.checkpoint_every == 0 || last)) {
      save_checkpoint(config_.checkpoint_dir / ("step_" + std::to_string(rec.step)));
    }
  }
  return records;
}

namespace {

constexpr char kStateMagic[4] = {'E', 'F', 'R', 'S'};
constexpr std::uint16_t kStateVersion = 1;

struct ByteWriter {
  std::vector<std::uint8_t> bytes;
  template <typename U>
  void le(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void f64(double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof bits);
    le(bits);
  }
  void raw(const std::string& s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
};

struct ByteReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
  void need(std::size_t n, const char* field) const {
    if (bytes.size() - pos < n) throw FormatError(std::string("state: truncated ") + field, pos);
  }
  template <typename U>
  U le(const char* field) {
    need(sizeof(U), field);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(U(bytes[pos + i]) << (8 * i));
    pos += sizeof(U);
    return value;
  }
  double f64(const char* field) {
    const auto bits = le<std::uint64_t>(field);
    double value;
    std::memcpy(&value, &bits, sizeof value);
    return value;
  }
  std::string str(std::size_t n, const char* field) {
    need(n, field);
    std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return s;
  }
};

}  // namespace

template <typename T>
void Trainer<T>::save_checkpoint(const std::filesystem::path& prefix) const {
  auto weights = prefix;
  weights += ".efrw";
  save_weights(model_, weights);

  ByteWriter w;
  w.raw(std::string(kStateMagic, 4));
  w.le(kStateVersion);
  const std::string config = config_to_json(model_.config());
  w.le(static_cast<std::uint32_t>(config.size()));
  w.raw(config);
  w.le(static_cast<std::uint64_t>(state_.t));
  w.f64(elapsed_ms_);
  const auto& params = model_.parameters();
  w.le(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params[i];
    w.le(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.le(static_cast<std::uint64_t>(p.numel()));
    for (T x : p.data()) w.f64(static_cast<double>(x));
    const bool has_moments = !state_.m.empty();
    for (std::size_t j = 0; j < p.numel(); ++j) w.f64(has_moments ? state_.m[i][j] : 0.0);
    for (std::size_t j = 0; j < p.numel(); ++j) w.f64(has_moments ? state_.v[i][j] : 0.0);
  }
  auto state = prefix;
  state += ".state";
  write_file(state, w.bytes);
}

template <typename T>
void Trainer<T>::load_checkpoint(const std::filesystem::path& prefix) {
  auto path = prefix;
  path += ".state";
  const auto bytes = read_file(path);
  ByteReader r{bytes};
  if (r.str(4, "magic") != std::string(kStateMagic, 4)) throw FormatError("state: bad magic", 0);
  const auto version_at = r.pos;
  if (r.le<std::uint16_t>("version") != kStateVersion) throw FormatError("state: unsupported version", version_at);
  const auto config_at = r.pos;
  const auto config_len = r.le<std::uint32_t>("config length");
  ModelConfig expected = model_.config();
  ModelConfig stored = config_from_json(r.str(config_len, "config"));
  stored.seed = expected.seed;
  if (!(stored == expected)) throw FormatError("state: model config differs from the trainer's model", config_at);
  AdamState state;
  state.t = static_cast<std::int64_t>(r.le<std::uint64_t>("step"));
  const double elapsed = r.f64("elapsed");
  auto& params = model_.parameters();
  const auto count_at = r.pos;
  if (r.le<std::uint32_t>("count") != params.size()) throw FormatError("state: parameter count mismatch", count_at);
  std::vector<std::vector<T>> values(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name_at = r.pos;
    const auto len = r.le<std::uint16_t>("name length");
    if (r.str(len, "name") != params[i].first) {
      throw FormatError("state: expected parameter " + params[i].first, name_at);
    }
    const auto numel_at = r.pos;
    const auto numel = r.le<std::uint64_t>("numel");
    if (numel != params[i].second.numel()) throw FormatError("state: size mismatch for " + params[i].first, numel_at);
    r.need(numel * 24, "values");
    values[i].resize(numel);
    for (auto& x : values[i]) x = static_cast<T>(r.f64("value"));
    state.m.emplace_back(numel);
    state.v.emplace_back(numel);
    for (auto& x : state.m.back()) x = r.f64("m");
    for (auto& x : state.v.back()) x = r.f64("v");
  }
  if (r.pos != bytes.size()) throw FormatError("state: trailing bytes", r.pos);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto d = params[i].second.mutable_data();
    std::copy(values[i].begin(), values[i].end(), d.begin());
  }
  state_ = std::move(state);
  elapsed_ms_ = elapsed;
}

template <typename T>
std::vector<StepRecord> train(Model<T>& model, std::vector<ImagePair<T>> pairs,
                              const TrainConfig& config, std::ostream* log,
                              std::shared_ptr<const FeatureExtractor<T>> extractor) {
  Trainer<T> trainer(model, std::move(pairs), config, std::move(extractor));
  return trainer.run(log);
}

namespace {

MeanStd summarize(const std::vector<double>& values) {
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    return {values.front(), 0.0};
  }
  return mean_std(values);
}

}  // namespace

template <typename T>
EvalReport evaluate(const Upscaler<T>& upscale, std::span<const ImagePair<T>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: no pairs");
  EvalReport report;
  std::vector<double> p, s;
  for (const auto& pair : pairs) {
    const Tensor<T> sr = upscale(pair.lr);
    ImageScore score{pair.id, psnr(sr, pair.hr), ssim(sr, pair.hr)};
    p.push_back(score.psnr);
    s.push_back(score.ssim);
    report.images.push_back(std::move(score));
  }
  report.psnr = summarize(p);
  report.ssim = summarize(s);
  return report;
}

template <typename T>
EvalReport evaluate(const Model<T>& model, std::span<const ImagePair<T>> pairs) {
  return evaluate<T>(Upscaler<T>([&model](const Tensor<T>& lr) { return model.infer(lr); }), pairs);
}

template <typename T>
Upscaler<T> bicubic_upscaler(int scale) {
  if (scale < 1) throw std::invalid_argument("bicubic_upscaler: scale must be >= 1");
  const auto r = static_cast<std::size_t>(scale);
  return [r](const Tensor<T>& lr) { return bicubic_resize(lr, lr.shape().h * r, lr.shape().w * r); };
}

#define EFRLFN_INSTANTIATE(T)                                                                     \
  template std::pair<Tensor<T>, Tensor<T>> sample_patches(const Tensor<T>&, const Tensor<T>&, int, \
                                                          int, std::mt19937_64&);                 \
  template void adam_step(std::vector<std::pair<std::string, Tensor<T>>>&, AdamState&, double,    \
                          const AdamHyper&);                                                      \
  template class Trainer<T>;                                                                      \
  template std::vector<StepRecord> train(Model<T>&, std::vector<ImagePair<T>>,                    \
                                         const TrainConfig&, std::ostream*,                       \
                                         std::shared_ptr<const FeatureExtractor<T>>);             \
  template EvalReport evaluate(const Upscaler<T>&, std::span<const ImagePair<T>>);                \
  template EvalReport evaluate(const Model<T>&, std::span<const ImagePair<T>>);                   \
  template Upscaler<T> bicubic_upscaler(int);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn
