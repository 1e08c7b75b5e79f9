#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "slmgac/diffcore/tensor.hpp"
#include "slmgac/errors.hpp"

namespace slmgac::diffcore {

// Binary layout (little-endian):
//   magic "SLMGPSET" | u32 version | u64 count |
//   count x ( u64 path_len | path bytes | u64 rank | rank x u64 dim | n x f64 bits )

namespace {

constexpr char kMagic[8] = {'S', 'L', 'M', 'G', 'P', 'S', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "param files assume little-endian hosts");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("param set: truncated data");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ParamSet ParamSet::capture(const ParamRefs& refs) {
  ParamSet set;
  for (const auto& [path, p] : refs) set.insert(path, *p);
  return set;
}

void ParamSet::restore(const ParamRefs& refs) const {
  for (const auto& [path, p] : refs) {
    const auto& src = at(path);
    if (src.value.shape() != p->value.shape()) {
      throw DimensionError("param set: shape " + src.value.shape_string() + " for " + path +
                           " does not match live parameter " + p->value.shape_string());
    }
    p->value = src.value;
  }
}

void ParamSet::insert(const std::string& path, Parameter p) {
  if (!entries_.emplace(path, std::move(p)).second) {
    throw ContractError("param set: duplicate path " + path);
  }
}

const Parameter& ParamSet::at(const std::string& path) const {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw DataError("param set: missing parameter " + path);
  return it->second;
}

Parameter& ParamSet::at(const std::string& path) {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw DataError("param set: missing parameter " + path);
  return it->second;
}

ParamRefs ParamSet::refs() {
  ParamRefs out;
  for (auto& [path, p] : entries_) out.emplace_back(path, &p);
  return out;
}

std::string ParamSet::to_bytes() const {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, entries_.size());
  for (const auto& [path, p] : entries_) {
    put<std::uint64_t>(out, path.size());
    out += path;
    put<std::uint64_t>(out, p.value.rank());
    for (auto d : p.value.shape()) put<std::uint64_t>(out, d);
    for (double v : p.value.values()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ParamSet ParamSet::from_bytes(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw DataError("param set: bad magic");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) {
    throw DataError("param set: unsupported version " + std::to_string(version));
  }
  ParamSet set;
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string path = in.get_string(in.get<std::uint64_t>());
    const auto rank = in.get<std::uint64_t>();
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = in.get<std::uint64_t>();
      n *= d;
    }
    std::vector<double> values(n);
    for (auto& v : values) v = std::bit_cast<double>(in.get<std::uint64_t>());
    set.insert(path, Parameter(Tensor(std::move(shape), std::move(values))));
  }
  if (!in.done()) throw DataError("param set: trailing bytes");
  return set;
}

void ParamSet::save(const std::string& file) const {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("param set: cannot open " + file + " for writing");
  const auto bytes = to_bytes();
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("param set: write failed for " + file);
}

ParamSet ParamSet::load(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("param set: cannot open " + file);
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_bytes(ss.str());
}

std::uint64_t ParamSet::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [path, p] : entries_) {
    mix(path.data(), path.size());
    for (auto d : p.value.shape()) mix(&d, sizeof(d));
    mix(p.value.values().data(), p.value.size() * sizeof(double));
  }
  return h;
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto it = other.entries_.begin();
  for (const auto& [path, p] : entries_) {
    if (path != it->first || p.value.shape() != it->second.value.shape()) return false;
    if (std::memcmp(p.value.values().data(), it->second.value.values().data(),
                    p.value.size() * sizeof(double)) != 0) {
      return false;
    }
    ++it;
  }
  return true;
}

}  // namespace slmgac::diffcore
