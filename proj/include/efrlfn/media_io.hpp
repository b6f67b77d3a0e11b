#pragma once

// File formats.
//
// Images: binary PPM (P6, maxval 255). Bytes map to b/255 on read; values are
// written as round-half-up(x*255) after clamping to [0,1].
//
// Weight files, all integers little-endian:
//   "EFRW" | u16 version | u32 json_len | json config
//   then per tensor, in schema order:
//   u16 name_len | name | u8 rank | u32 dims[rank] | f32 values[prod(dims)]
// The file must be consumed exactly; trailing bytes are an error.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "efrlfn/model.hpp"
#include "efrlfn/tensor.hpp"

namespace efrlfn {

inline constexpr std::uint16_t kWeightFormatVersion = 1;

// Thrown for malformed or mismatched files; `offset` is the byte position of
// the first offending field.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

template <typename T>
Tensor<T> read_image(const std::filesystem::path& path);
template <typename T>
void write_image(const Tensor<T>& image, const std::filesystem::path& path);

template <typename T>
Tensor<T> decode_ppm(const std::vector<std::uint8_t>& bytes);
template <typename T>
std::vector<std::uint8_t> encode_ppm(const Tensor<T>& image);

std::uint8_t quantize_unit(double value);

struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
  std::uint64_t offset = 0;  // where the record starts; filled by decode
};

struct TensorBundle {
  std::string config_json;
  std::vector<TensorRecord> tensors;
};

std::vector<std::uint8_t> encode_bundle(const TensorBundle& bundle);
TensorBundle decode_bundle(const std::vector<std::uint8_t>& bytes);
TensorBundle read_bundle(const std::filesystem::path& path);
void write_bundle(const TensorBundle& bundle, const std::filesystem::path& path);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& json);

// Narrows to f32 with round-to-nearest-even.
template <typename T>
TensorBundle model_to_bundle(const Model<T>& model);
template <typename T>
Model<T> model_from_bundle(const TensorBundle& bundle);

template <typename T>
void save_weights(const Model<T>& model, const std::filesystem::path& path);
template <typename T>
Model<T> load_weights(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace efrlfn
