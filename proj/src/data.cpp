#include "sarl/data.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "sarl/random.hpp"

namespace sarl {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'R', 'L'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::uint32_t to_u32(Index v, const char* what) {
  if (v < 0 || v > static_cast<Index>(UINT32_MAX)) throw FormatError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n_train < 1 || n_test < 1) throw ConfigError("synthetic: n_train and n_test must be >= 1");
  if (classes < 1 || height < 1 || width < 1 || channels < 1) throw ConfigError("synthetic: C, H, W, channels must be >= 1");
  if (noise < 0) throw ConfigError("synthetic: noise must be >= 0");
  if (!(cardinality >= 1.0 && cardinality <= static_cast<double>(classes))) {
    throw ConfigError("synthetic: cardinality " + std::to_string(cardinality) + " is infeasible for " +
                      std::to_string(classes) + " classes (need 1 <= cardinality <= C)");
  }
}

SyntheticSplits generate(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Index bh = cfg.blob_height(), bw = cfg.blob_width();

  SyntheticSplits out;
  std::bernoulli_distribution coin(0.5);
  for (Index c = 0; c < cfg.classes; ++c) {
    Tensor<float> sig(Shape{bh, bw, cfg.channels});
    for (Index i = 0; i < sig.size(); ++i) sig[i] = static_cast<float>(coin(rng) ? cfg.strength : -cfg.strength);
    out.signatures.push_back(std::move(sig));
  }

  // Label count is 1 + Binomial(C - 1, q), which has mean exactly `cardinality`.
  const double q = cfg.classes > 1 ? (cfg.cardinality - 1.0) / static_cast<double>(cfg.classes - 1) : 0.0;
  std::binomial_distribution<int> extra(static_cast<int>(cfg.classes - 1), q);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Blobs sit on a grid of blob-sized cells; distinct cells while they last, then overlaps add.
  const Index cells_h = cfg.height / bh, cells_w = cfg.width / bw;
  std::vector<Index> cells(static_cast<std::size_t>(cells_h * cells_w));

  auto make = [&](Index n) {
    Dataset d{PayloadKind::image, Shape{cfg.height, cfg.width, cfg.channels}, cfg.classes, {}};
    std::vector<Index> classes(static_cast<std::size_t>(cfg.classes));
    for (Index s = 0; s < n; ++s) {
      std::iota(classes.begin(), classes.end(), Index{0});
      std::shuffle(classes.begin(), classes.end(), rng);
      std::iota(cells.begin(), cells.end(), Index{0});
      std::shuffle(cells.begin(), cells.end(), rng);
      const auto k = static_cast<std::size_t>(1 + extra(rng));
      Tensor<double> image(d.sample_shape);
      Tensor<float> labels(Shape{cfg.classes});
      for (std::size_t j = 0; j < k; ++j) {
        const Index c = classes[j];
        labels[c] = 1.0f;
        const Index cell = cells[j % cells.size()];
        const Index r0 = (cell / cells_w) * bh, c0 = (cell % cells_w) * bw;
        const Tensor<float>& sig = out.signatures[static_cast<std::size_t>(c)];
        for (Index y = 0; y < bh; ++y)
          for (Index x = 0; x < bw; ++x)
            for (Index ch = 0; ch < cfg.channels; ++ch)
              image[((r0 + y) * cfg.width + (c0 + x)) * cfg.channels + ch] += sig[(y * bw + x) * cfg.channels + ch];
      }
      if (cfg.noise > 0)
        for (Index i = 0; i < image.size(); ++i) image[i] += cfg.noise * gauss(rng);
      d.samples.push_back({image.cast<float>(), std::move(labels)});
    }
    return d;
  };
  out.train = make(cfg.n_train);
  out.test = make(cfg.n_test);
  return out;
}

std::size_t DatasetHeader::payload_bytes() const {
  return static_cast<std::size_t>(count) * static_cast<std::size_t>(shape_size(sample_shape)) * sizeof(float);
}

DatasetHeader parse_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < DatasetHeader::kBytes) {
    throw FormatError("dataset header truncated: expected " + std::to_string(DatasetHeader::kBytes) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("dataset: bad magic at byte offset 0");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != DatasetHeader::kVersion) {
    throw FormatError("dataset: unsupported version " + std::to_string(version) + " at byte offset 4");
  }
  DatasetHeader h;
  const std::uint32_t kind = get_u32(bytes, 8);
  if (kind > 1) throw FormatError("dataset: unknown payload kind " + std::to_string(kind) + " at byte offset 8");
  h.kind = static_cast<PayloadKind>(kind);
  h.count = get_u32(bytes, 12);
  h.classes = get_u32(bytes, 16);
  const std::uint32_t rank = get_u32(bytes, 20);
  if (rank < 1 || rank > 3) throw FormatError("dataset: sample rank " + std::to_string(rank) + " at byte offset 20");
  for (std::uint32_t i = 0; i < rank; ++i) h.sample_shape.push_back(get_u32(bytes, 24 + 4 * i));
  return h;
}

std::vector<std::uint8_t> serialize(const Dataset& data) {
  if (data.sample_shape.empty() || data.sample_shape.size() > 3) throw FormatError("dataset: sample rank must be 1..3");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, DatasetHeader::kVersion);
  put_u32(out, static_cast<std::uint32_t>(data.kind));
  put_u32(out, to_u32(data.size(), "sample count"));
  put_u32(out, to_u32(data.classes, "class count"));
  put_u32(out, static_cast<std::uint32_t>(data.sample_shape.size()));
  for (std::size_t i = 0; i < 3; ++i) put_u32(out, i < data.sample_shape.size() ? to_u32(data.sample_shape[i], "dim") : 0);
  out.resize(DatasetHeader::kBytes, 0);

  for (const auto& s : data.samples) {
    if (s.input.shape() != data.sample_shape) throw FormatError("dataset: sample shape differs from the declared shape");
    for (Index i = 0; i < s.input.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(s.input[i]));
  }
  for (const auto& s : data.samples) {
    if (s.labels.size() != data.classes) throw FormatError("dataset: label length differs from class count");
    for (Index c = 0; c < data.classes; ++c) out.push_back(s.labels[c] > 0.5f ? 1 : 0);
  }
  return out;
}

Dataset deserialize(const std::vector<std::uint8_t>& bytes) {
  const DatasetHeader h = parse_header(bytes);
  const std::size_t expected = DatasetHeader::kBytes + h.payload_bytes() + h.label_bytes();
  if (bytes.size() != expected) {
    throw FormatError("dataset: expected " + std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()) +
                      (bytes.size() < expected ? " (truncated)" : " (trailing data)"));
  }
  Dataset d{h.kind, h.sample_shape, static_cast<Index>(h.classes), {}};
  const Index per = shape_size(h.sample_shape);
  std::size_t offset = DatasetHeader::kBytes;
  for (std::uint32_t s = 0; s < h.count; ++s) {
    Tensor<float> input(h.sample_shape);
    for (Index i = 0; i < per; ++i, offset += 4) input[i] = std::bit_cast<float>(get_u32(bytes, offset));
    d.samples.push_back({std::move(input), Tensor<float>(Shape{d.classes})});
  }
  for (auto& s : d.samples) {
    for (Index c = 0; c < d.classes; ++c, ++offset) {
      const std::uint8_t b = bytes[offset];
      if (b > 1) throw FormatError("dataset: label byte " + std::to_string(b) + " at byte offset " + std::to_string(offset));
      s.labels[c] = static_cast<float>(b);
    }
  }
  return d;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

void save_dataset(const std::string& path, const Dataset& data) { write_file(path, serialize(data)); }

Dataset load_dataset(const std::string& path) { return deserialize(read_file(path)); }

DatasetHeader read_header(const std::string& path) { return parse_header(read_file(path)); }

Index DatasetStats::total_samples() const {
  Index n = 0;
  for (const auto& s : splits) n += s.samples;
  return n;
}

Index DatasetStats::total_positives() const {
  Index n = 0;
  for (const auto& s : splits) n += s.positives;
  return n;
}

double DatasetStats::cardinality() const {
  const Index n = total_samples();
  return n > 0 ? static_cast<double>(total_positives()) / static_cast<double>(n) : 0.0;
}

DatasetStats stats(const Dataset& data, const std::string& name) {
  if (data.samples.empty()) throw ConfigError("stats: empty dataset");
  DatasetStats st;
  st.classes = data.classes;
  st.class_frequency.assign(static_cast<std::size_t>(data.classes), 0);
  SplitStats split{name, data.size(), 0};
  for (const auto& s : data.samples)
    for (Index c = 0; c < data.classes; ++c)
      if (s.labels[c] > 0.5f) {
        ++split.positives;
        ++st.class_frequency[static_cast<std::size_t>(c)];
      }
  st.splits.push_back(split);
  return st;
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(number) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string manifest_text(const SyntheticConfig& cfg, const std::vector<std::pair<std::string, const Dataset*>>& splits) {
  std::ostringstream out;
  out << "format_version=" << DatasetHeader::kVersion << "\n";
  out << "classes=" << cfg.classes << "\n";
  out << "height=" << cfg.height << "\nwidth=" << cfg.width << "\nchannels=" << cfg.channels << "\n";
  out << "seed=" << cfg.seed << "\nnoise=" << cfg.noise << "\nstrength=" << cfg.strength << "\n";
  out << "cardinality_target=" << cfg.cardinality << "\n";
  out << "splits=";
  for (std::size_t i = 0; i < splits.size(); ++i) out << (i ? "," : "") << splits[i].first;
  out << "\n";
  for (const auto& [name, data] : splits) {
    out << name << ".file=" << name << ".bin\n";
    out << name << ".count=" << data->size() << "\n";
    out << name << ".positives=" << stats(*data, name).total_positives() << "\n";
  }
  return out.str();
}

DatasetStats manifest_stats(const KeyValues& m) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = m.find(key);
    if (it == m.end()) throw FormatError("manifest: missing key '" + key + "'");
    return it->second;
  };
  auto number = [&](const std::string& key) {
    const std::string& v = get(key);
    try {
      std::size_t used = 0;
      const long long n = std::stoll(v, &used);
      if (used != v.size() || n < 0) throw std::invalid_argument(v);
      return static_cast<Index>(n);
    } catch (const std::exception&) {
      throw FormatError("manifest: '" + key + "' is not a non-negative integer: " + v);
    }
  };
  DatasetStats st;
  st.classes = number("classes");
  std::istringstream names(get("splits"));
  std::string name;
  while (std::getline(names, name, ',')) {
    if (name.empty()) continue;
    st.splits.push_back({name, number(name + ".count"), number(name + ".positives")});
  }
  if (st.splits.empty()) throw FormatError("manifest: no splits listed");
  return st;
}

std::string format_stats(const DatasetStats& s) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "split" << std::right << std::setw(10) << "samples" << std::setw(12) << "positives"
      << "\n";
  for (const auto& sp : s.splits)
    out << std::left << std::setw(10) << sp.name << std::right << std::setw(10) << sp.samples << std::setw(12) << sp.positives
        << "\n";
  out << "classes=" << s.classes << "\n";
  out << "label_cardinality=" << std::fixed << std::setprecision(3) << s.cardinality() << "\n";
  if (!s.class_frequency.empty()) {
    out << "class_frequency=";
    for (std::size_t c = 0; c < s.class_frequency.size(); ++c) out << (c ? "," : "") << s.class_frequency[c];
    out << "\n";
  }
  return out.str();
}

}  // namespace sarl
