#ifndef SARL_DATA_HPP_
#define SARL_DATA_HPP_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarl/representation.hpp"
#include "sarl/tensor.hpp"

namespace sarl {

/// Malformed or truncated dataset, checkpoint or manifest file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SyntheticConfig {
  std::uint64_t seed = 0;
  Index n_train = 500;
  Index n_test = 200;
  Index classes = 6;
  Index height = 8;
  Index width = 8;
  Index channels = 3;
  double strength = 1.0;     // amplitude of the class blobs
  double noise = 0.5;        // std-dev of additive Gaussian noise
  double cardinality = 1.5;  // target mean labels per sample

  static constexpr Index kBlob = 4;  // blob side, clipped to the image size

  Index blob_height() const { return std::min(kBlob, height); }
  Index blob_width() const { return std::min(kBlob, width); }
  void validate() const;
};

enum class PayloadKind : std::uint32_t { image = 0, features = 1 };

struct Sample {
  Tensor<float> input;   // H x W x channels, or P x d_v
  Tensor<float> labels;  // C, entries 0 or 1

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  PayloadKind kind = PayloadKind::image;
  Shape sample_shape;
  Index classes = 0;
  std::vector<Sample> samples;

  Index size() const { return static_cast<Index>(samples.size()); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SyntheticSplits {
  Dataset train;
  Dataset test;
  std::vector<Tensor<float>> signatures;  // one blob_height x blob_width x channels pattern per class
};

/// Each class owns a fixed +-strength blob; a sample stamps the blobs of its
/// label set into distinct, randomly chosen blob-sized cells (overlaps add
/// once cells run out) and adds Gaussian noise.
SyntheticSplits generate(const SyntheticConfig& cfg);

/// Fixed-size little-endian header at the start of every dataset file.
struct DatasetHeader {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kBytes = 64;

  PayloadKind kind = PayloadKind::image;
  std::uint32_t count = 0;
  std::uint32_t classes = 0;
  Shape sample_shape;

  std::size_t payload_bytes() const;
  std::size_t label_bytes() const { return static_cast<std::size_t>(count) * classes; }
};

DatasetHeader parse_header(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize(const Dataset& data);
Dataset deserialize(const std::vector<std::uint8_t>& bytes);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);
DatasetHeader read_header(const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

struct SplitStats {
  std::string name;
  Index samples = 0;
  Index positives = 0;
};

struct DatasetStats {
  Index classes = 0;
  std::vector<SplitStats> splits;
  std::vector<Index> class_frequency;  // positives per class over all splits, if known

  Index total_samples() const;
  Index total_positives() const;
  double cardinality() const;
};

DatasetStats stats(const Dataset& data, const std::string& name = "data");

/// Flat key=value text; blank lines and lines starting with '#' are ignored.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);

/// Manifest keys: classes, splits (comma list), <split>.file, <split>.count, <split>.positives.
std::string manifest_text(const SyntheticConfig& cfg, const std::vector<std::pair<std::string, const Dataset*>>& splits);
DatasetStats manifest_stats(const KeyValues& manifest);

std::string format_stats(const DatasetStats& s);

}  // namespace sarl

#endif  // SARL_DATA_HPP_
