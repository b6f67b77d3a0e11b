#include "efrlfn/media_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace efrlfn {

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::uint8_t quantize_unit(double value) {
  const double clamped = std::clamp(value, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
}

namespace {

bool is_space(std::uint8_t b) { return b == ' ' || b == '\t' || b == '\n' || b == '\r' || b == '\v' || b == '\f'; }

// Reads one unsigned decimal header field, skipping whitespace and comments.
std::size_t header_number(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                          const char* field) {
  while (pos < bytes.size()) {
    if (is_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  std::size_t value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > (1u << 24)) throw FormatError(std::string("ppm: ") + field + " too large", start);
    ++pos;
  }
  if (pos == start) throw FormatError(std::string("ppm: missing ") + field, start);
  return value;
}

}  // namespace

template <typename T>
Tensor<T> decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw FormatError("ppm: bad magic, expected P6", 0);
  }
  std::size_t pos = 2;
  const std::size_t width = header_number(bytes, pos, "width");
  const std::size_t height = header_number(bytes, pos, "height");
  const std::size_t maxval_at = pos;
  const std::size_t maxval = header_number(bytes, pos, "maxval");
  if (width < 1 || height < 1) throw FormatError("ppm: empty image", maxval_at);
  if (maxval != 255) {
    throw FormatError("ppm: maxval " + std::to_string(maxval) + " unsupported, need 255",
                      maxval_at);
  }
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw FormatError("ppm: missing whitespace before payload", pos);
  }
  ++pos;
  const std::size_t payload = 3 * width * height;
  if (bytes.size() - pos < payload) {
    throw FormatError("ppm: truncated payload, need " + std::to_string(payload) + " bytes",
                      bytes.size());
  }
  if (bytes.size() - pos > payload) {
    throw FormatError("ppm: trailing bytes after payload", pos + payload);
  }
  Tensor<T> image(Shape{1, 3, height, width});
  auto data = image.mutable_data();
  const std::size_t plane = width * height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      data[c * plane + i] = static_cast<T>(bytes[pos + 3 * i + c]) / T(255);
    }
  }
  return image;
}

template <typename T>
std::vector<std::uint8_t> encode_ppm(const Tensor<T>& image) {
  const Shape s = image.shape();
  if (s.n != 1 || (s.c != 3 && s.c != 1)) {
    throw std::invalid_argument("ppm: expects a (1,3,h,w) or (1,1,h,w) tensor, got " + s.str());
  }
  if (s.h < 1 || s.w < 1) throw std::invalid_argument("ppm: empty image");
  const std::string header =
      "P6\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + 3 * s.plane());
  const auto data = image.data();
  for (std::size_t i = 0; i < s.plane(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t src = s.c == 3 ? c : 0;
      out.push_back(quantize_unit(static_cast<double>(data[src * s.plane() + i])));
    }
  }
  return out;
}

template <typename T>
Tensor<T> read_image(const std::filesystem::path& path) {
  try {
    return decode_ppm<T>(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

template <typename T>
void write_image(const Tensor<T>& image, const std::filesystem::path& path) {
  write_file(path, encode_ppm(image));
}

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint64_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  void need(std::size_t count, const char* field) const {
    if (bytes_.size() - pos_ < count) {
      throw FormatError(std::string("weights: truncated ") + field, pos_);
    }
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  std::string str(std::size_t len, const char* field) {
    need(len, field);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_bundle(const TensorBundle& bundle) {
  Writer w;
  w.raw("EFRW");
  w.u16(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(bundle.config_json.size()));
  w.raw(bundle.config_json);
  for (const auto& rec : bundle.tensors) {
    if (rec.name.size() > 0xFFFF) throw std::invalid_argument("weights: name too long");
    std::size_t count = 1;
    for (auto d : rec.dims) count *= d;
    if (count != rec.values.size()) {
      throw std::invalid_argument("weights: " + rec.name + " dims do not match value count");
    }
    w.u16(static_cast<std::uint16_t>(rec.name.size()));
    w.raw(rec.name);
    w.u8(static_cast<std::uint8_t>(rec.dims.size()));
    for (auto d : rec.dims) w.u32(d);
    for (float v : rec.values) w.f32(v);
  }
  return w.take();
}

TensorBundle decode_bundle(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4 <= bytes.size() ? 4 : bytes.size(), "magic") != "EFRW") {
    throw FormatError("weights: bad magic, expected EFRW", 0);
  }
  const std::uint64_t version_at = r.pos();
  const std::uint16_t version = r.u16("version");
  if (version == 0 || version > kWeightFormatVersion) {
    throw FormatError("weights: unsupported version " + std::to_string(version), version_at);
  }
  TensorBundle bundle;
  const std::uint32_t json_len = r.u32("config length");
  bundle.config_json = r.str(json_len, "config");
  while (!r.done()) {
    TensorRecord rec;
    rec.offset = r.pos();
    const std::uint16_t name_len = r.u16("name length");
    rec.name = r.str(name_len, "name");
    const std::uint8_t rank = r.u8("rank");
    std::uint64_t count = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      rec.dims.push_back(r.u32("dims"));
      count *= rec.dims.back();
    }
    if (count > (bytes.size() - r.pos()) / 4) {
      throw FormatError("weights: " + rec.name + " declares more values than the file holds",
                        r.pos());
    }
    rec.values.resize(count);
    for (auto& v : rec.values) v = r.f32("values");
    bundle.tensors.push_back(std::move(rec));
  }
  return bundle;
}

TensorBundle read_bundle(const std::filesystem::path& path) {
  try {
    return decode_bundle(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_bundle(const TensorBundle& bundle, const std::filesystem::path& path) {
  write_file(path, encode_bundle(bundle));
}

std::string config_to_json(const ModelConfig& config) {
  const nlohmann::ordered_json j{
      {"channels", config.channels},
      {"blocks", config.blocks},
      {"scale", config.scale},
      {"activation", to_string(config.activation)},
      {"attention", to_string(config.attention)},
      {"in_channels", config.in_channels},
  };
  return j.dump();
}

ModelConfig config_from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weights: config is not valid JSON: ") + e.what(), 10);
  }
  ModelConfig config;
  try {
    config.channels = j.at("channels").get<int>();
    config.blocks = j.at("blocks").get<int>();
    config.scale = j.at("scale").get<int>();
    config.activation = parse_activation(j.at("activation").get<std::string>());
    config.attention = parse_attention(j.at("attention").get<std::string>());
    config.in_channels = j.value("in_channels", 3);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weights: config field missing or mistyped: ") + e.what(), 10);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("weights: ") + e.what(), 10);
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("weights: ") + e.what(), 10);
  }
  return config;
}

template <typename T>
TensorBundle model_to_bundle(const Model<T>& model) {
  TensorBundle bundle;
  bundle.config_json = config_to_json(model.config());
  const auto schema = parameter_schema(model.config());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& spec = schema[i];
    const auto& tensor = model.parameters()[i].second;
    TensorRecord rec;
    rec.name = spec.name;
    if (spec.rank == 1) {
      rec.dims = {static_cast<std::uint32_t>(spec.shape.n)};
    } else {
      rec.dims = {static_cast<std::uint32_t>(spec.shape.n), static_cast<std::uint32_t>(spec.shape.c),
                  static_cast<std::uint32_t>(spec.shape.h), static_cast<std::uint32_t>(spec.shape.w)};
    }
    rec.values.reserve(tensor.numel());
    for (T v : tensor.data()) rec.values.push_back(static_cast<float>(v));
    bundle.tensors.push_back(std::move(rec));
  }
  return bundle;
}

template <typename T>
Model<T> model_from_bundle(const TensorBundle& bundle) {
  const ModelConfig config = config_from_json(bundle.config_json);
  const auto schema = parameter_schema(config);
  if (bundle.tensors.size() != schema.size()) {
    const std::uint64_t at =
        bundle.tensors.size() > schema.size() ? bundle.tensors[schema.size()].offset : 0;
    throw FormatError("weights: " + std::to_string(bundle.tensors.size()) + " tensors, schema has " +
                          std::to_string(schema.size()),
                      at);
  }
  std::vector<Tensor<T>> tensors;
  tensors.reserve(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& spec = schema[i];
    const auto& rec = bundle.tensors[i];
    if (rec.name != spec.name) {
      throw FormatError("weights: tensor name '" + rec.name + "' where schema expects '" +
                            spec.name + "'",
                        rec.offset);
    }
    std::vector<std::uint32_t> want;
    if (spec.rank == 1) {
      want = {static_cast<std::uint32_t>(spec.shape.n)};
    } else {
      want = {static_cast<std::uint32_t>(spec.shape.n), static_cast<std::uint32_t>(spec.shape.c),
              static_cast<std::uint32_t>(spec.shape.h), static_cast<std::uint32_t>(spec.shape.w)};
    }
    if (rec.dims != want) {
      throw FormatError("weights: dims of " + rec.name + " do not match the schema", rec.offset);
    }
    tensors.emplace_back(spec.shape, std::vector<T>(rec.values.begin(), rec.values.end()));
  }
  return Model<T>::from_parameters(config, std::move(tensors));
}

template <typename T>
void save_weights(const Model<T>& model, const std::filesystem::path& path) {
  write_bundle(model_to_bundle(model), path);
}

template <typename T>
Model<T> load_weights(const std::filesystem::path& path) {
  try {
    return model_from_bundle<T>(read_bundle(path));
  } catch (const FormatError& e) {
    throw FormatError(std::string(e.what()).find(path.string()) == 0
                          ? std::string(e.what())
                          : path.string() + ": " + e.what(),
                      e.offset());
  }
}

#define EFRLFN_INSTANTIATE(T)                                                       \
  template Tensor<T> read_image<T>(const std::filesystem::path&);                   \
  template void write_image<T>(const Tensor<T>&, const std::filesystem::path&);     \
  template Tensor<T> decode_ppm<T>(const std::vector<std::uint8_t>&);               \
  template std::vector<std::uint8_t> encode_ppm<T>(const Tensor<T>&);               \
  template TensorBundle model_to_bundle<T>(const Model<T>&);                        \
  template Model<T> model_from_bundle<T>(const TensorBundle&);                      \
  template void save_weights<T>(const Model<T>&, const std::filesystem::path&);     \
  template Model<T> load_weights<T>(const std::filesystem::path&);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn
