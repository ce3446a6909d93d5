#include "antq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_map>

namespace antq {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void read(void* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError("checkpoint truncated while reading " + std::string(what) + " at byte " +
                       std::to_string(pos_));
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw UsageError("parameter name too long: " + e.name);
    }
    if (e.dims.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw UsageError("parameter rank too large: " + e.name);
    }
    std::size_t n = 1;
    for (auto d : e.dims) n *= d;
    if (n != e.values.size()) throw DimensionError("entry " + e.name + " dims/values mismatch");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) put<std::uint32_t>(out, d);
    for (float v : e.values) put<float>(out, v);
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  char magic[4];
  in.read(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw ParseError("not an ANTQ checkpoint");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.get<std::uint32_t>("count");
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    const auto name_len = in.get<std::uint16_t>("name length");
    e.name.resize(name_len);
    in.read(e.name.data(), name_len, "name");
    const auto rank = in.get<std::uint8_t>("rank");
    std::size_t n = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      e.dims.push_back(in.get<std::uint32_t>("dims"));
      n *= e.dims.back();
    }
    e.values.resize(n);
    in.read(e.values.data(), n * sizeof(float), "values");
    entries.push_back(std::move(e));
  }
  if (!in.at_end()) throw ParseError("trailing bytes after checkpoint payload");
  return entries;
}

std::vector<CheckpointEntry> to_entries(const ParameterList& params) {
  std::vector<CheckpointEntry> entries;
  entries.reserve(params.size());
  for (const auto& p : params) {
    CheckpointEntry e;
    e.name = p.name;
    for (auto d : p.tensor.shape()) e.dims.push_back(static_cast<std::uint32_t>(d));
    e.values.reserve(p.tensor.size());
    for (double v : p.tensor.data()) e.values.push_back(static_cast<float>(v));
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  const auto bytes = encode_checkpoint(to_entries(params));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw UsageError("failed writing checkpoint " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::size_t load_into(const std::vector<CheckpointEntry>& entries, const ParameterList& params) {
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ParseError("checkpoint lacks parameter " + p.name);
    const auto& e = *it->second;
    ad::Shape shape(e.dims.begin(), e.dims.end());
    if (shape != p.tensor.shape()) {
      throw ParseError("checkpoint shape " + ad::to_string(shape) + " for " + p.name +
                       " does not match model shape " + ad::to_string(p.tensor.shape()));
    }
    auto dst = p.tensor.impl().data.data();
    for (std::size_t i = 0; i < e.values.size(); ++i) dst[i] = static_cast<double>(e.values[i]);
  }
  return params.size();
}

void round_to_storage_precision(const ParameterList& params) {
  for (const auto& p : params) {
    for (auto& v : p.tensor.impl().data) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace antq
