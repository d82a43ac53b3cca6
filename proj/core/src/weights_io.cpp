#include "sirenrope/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <json.hpp>

#include "sirenrope/errors.hpp"

namespace sirenrope {

static_assert(std::endian::native == std::endian::little,
              "weight I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'R', 'P', 'W'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError("weight file truncated while reading " + std::string(what) +
                        " at byte " + std::to_string(pos_));
    }
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* WeightFile::find(std::string_view name) const {
  for (const auto& r : records)
    if (r.name == name) return &r.tensor;
  return nullptr;
}

std::string encode_weights(const WeightFile& file) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kWeightFormatVersion);
  nlohmann::json meta = nlohmann::json::object();
  for (const auto& [k, v] : file.metadata) meta[k] = v;
  const std::string meta_text = meta.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(file.records.size()));
  for (const auto& r : file.records) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    const auto& shape = r.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto e : shape) put<std::uint64_t>(out, e);
    for (double v : r.tensor.data()) put<double>(out, v);
  }
  return out;
}

WeightFile decode_weights(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not a weight file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version));
  }
  WeightFile file;
  const auto meta_len = in.get<std::uint32_t>("metadata length");
  const auto meta_text = in.take(meta_len, "metadata");
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    for (const auto& [k, v] : meta.items()) file.metadata[k] = v.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weight file metadata is not a string map: ") + e.what());
  }
  const auto count = in.get<std::uint32_t>("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightRecord r;
    const auto name_len = in.get<std::uint32_t>("record name length");
    r.name = std::string(in.take(name_len, "record name"));
    const auto rank = in.get<std::uint32_t>("record rank");
    if (rank > 8) throw FormatError("record '" + r.name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
      e = static_cast<std::size_t>(in.get<std::uint64_t>("record extent"));
      if (e != 0 && numel > std::numeric_limits<std::size_t>::max() / 8 / e) {
        throw FormatError("record '" + r.name + "' is too large");
      }
      numel *= e;
    }
    const auto raw = in.take(numel * sizeof(double), "record data");
    std::vector<double> data(numel);
    if (numel) std::memcpy(data.data(), raw.data(), raw.size());
    r.tensor = Tensor::from_data(std::move(shape), std::move(data));
    file.records.push_back(std::move(r));
  }
  if (!in.done()) {
    throw FormatError("trailing bytes after last record at byte " + std::to_string(in.offset()));
  }
  return file;
}

void save_weights(const std::filesystem::path& path, const WeightFile& file) {
  const std::string bytes = encode_weights(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

WeightFile load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_weights(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace sirenrope
