#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wbi/error.hpp"
#include "wbi/io.hpp"

static_assert(std::endian::native == std::endian::little, "artifact formats assume little-endian");

namespace wbi {

namespace {

constexpr char kCacheMagic[8] = {'W', 'B', 'I', 'C', 'A', 'C', 'H', 'E'};
constexpr std::uint32_t kCacheVersion = 1;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(std::size_t k) const {
    if (bytes_.size() - pos_ < k) throw FormatError("truncated sample cache");
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write to '" + path + "' failed");
}

void write_cache(const std::string& path, const SampleCache& cache) {
  const auto& ws = cache.set;
  if (ws.samples.rows() != static_cast<Eigen::Index>(ws.log_weights.size()))
    throw ShapeError("sample and weight counts differ");
  std::string out(kCacheMagic, sizeof kCacheMagic);
  put(out, kCacheVersion);
  put(out, cache.program_hash);
  put<std::uint64_t>(out, ws.dim());
  put<std::uint64_t>(out, ws.size());
  put(out, static_cast<std::uint32_t>(ws.tag));
  put(out, ws.seed);
  for (Eigen::Index j = 0; j < ws.samples.rows(); ++j)
    for (Eigen::Index i = 0; i < ws.samples.cols(); ++i) put(out, ws.samples(j, i));
  for (double lw : ws.log_weights) put(out, lw);
  put(out, ws.normaliser());
  put(out, ws.log_normaliser);
  write_file(path, out);
}

SampleCache read_cache(const std::string& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes);
  r.need(sizeof kCacheMagic);
  if (std::memcmp(bytes.data(), kCacheMagic, sizeof kCacheMagic) != 0)
    throw FormatError("'" + path + "' is not a sample cache");
  for (std::size_t k = 0; k < sizeof kCacheMagic; ++k) r.get<char>();
  if (r.get<std::uint32_t>() != kCacheVersion) throw FormatError("unsupported cache version");
  SampleCache c;
  c.program_hash = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  const auto m = r.get<std::uint64_t>();
  const auto tag = r.get<std::uint32_t>();
  if (tag > static_cast<std::uint32_t>(ProposalTag::exact)) throw FormatError("unknown proposal tag");
  c.set.tag = static_cast<ProposalTag>(tag);
  c.set.seed = r.get<std::uint64_t>();
  if (n != 0 && m > (bytes.size() / 8) / n) throw FormatError("truncated sample cache");
  r.need(8 * (m * n + m + 2));
  c.set.samples.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < c.set.samples.rows(); ++j)
    for (Eigen::Index i = 0; i < c.set.samples.cols(); ++i) c.set.samples(j, i) = r.get<double>();
  c.set.log_weights.resize(m);
  for (double& lw : c.set.log_weights) lw = r.get<double>();
  r.get<double>();
  c.set.log_normaliser = r.get<double>();
  if (!r.at_end()) throw FormatError("trailing bytes in sample cache");
  return c;
}

}  // namespace wbi
