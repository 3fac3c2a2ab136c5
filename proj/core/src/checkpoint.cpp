#include "spectrapad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>

#include "spectrapad/error.hpp"

namespace spectrapad {

namespace {

constexpr std::string_view kMagic = "SPDCKPT1";
constexpr std::string_view kTrailerMagic = "SPDTRAIL";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v;
  std::memcpy(&v, in.data() + at, 8);
  return v;
}

}  // namespace

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

bool is_known_tensor_name(const std::string& name) {
  static const std::regex re(
      R"(^(embed\.[a-z_.]+|trunk\.block\d+\..+|band\d{3}\.block\d+\..+|head\.band\d{3}\.[a-z_]+(\.[a-z]+)?|ensemble\.[a-z_]+(\.\d{3})?|data\.band_stats\.\d{3}\.(mean|std)|features\..+)$)");
  return std::regex_match(name, re);
}

void Checkpoint::put(const std::string& name, const Mat& m) {
  Tensor t;
  t.shape = {m.rows(), m.cols()};
  t.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
  tensors[name] = std::move(t);
}

void Checkpoint::put_scalar(const std::string& name, double v) {
  tensors[name] = Tensor{{}, {static_cast<float>(v)}};
}

Mat Checkpoint::get(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorKind::kCompatibility, "checkpoint is missing tensor '" + name + "'");
  const Tensor& t = it->second;
  const bool ok = (t.shape.size() == 2 && t.shape[0] == rows && t.shape[1] == cols) ||
                  (t.shape.size() == 1 && rows == 1 && t.shape[0] == cols);
  if (!ok) fail(ErrorKind::kCompatibility, "checkpoint tensor '" + name + "' has an unexpected shape");
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(t.data[static_cast<std::size_t>(i)]);
  return m;
}

double Checkpoint::get_scalar(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorKind::kCompatibility, "checkpoint is missing scalar '" + name + "'");
  if (it->second.numel() != 1) fail(ErrorKind::kCompatibility, "checkpoint entry '" + name + "' is not a scalar");
  return static_cast<double>(it->second.data[0]);
}

std::string Checkpoint::serialize() const {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["meta"] = meta;
  auto& table = header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    require(t.data.size() == t.numel(), ErrorKind::kDimension, "tensor '" + name + "' data does not match shape");
    const std::uint64_t bytes = t.data.size() * sizeof(float);
    table.push_back({{"name", name}, {"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  const std::string htext = header.dump();

  std::string out;
  out.reserve(kMagic.size() + 8 + htext.size() + offset + kTrailerMagic.size() + 16);
  out.append(kMagic);
  put_u64(out, htext.size());
  out.append(htext);
  for (const auto& [name, t] : tensors)
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  out.append(kTrailerMagic);
  put_u64(out, config_hash);
  put_u64(out, dataset_hash);
  return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  const std::size_t min_size = kMagic.size() + 8 + kTrailerMagic.size() + 16;
  if (bytes.size() < min_size || bytes.substr(0, kMagic.size()) != kMagic)
    fail(ErrorKind::kData, "not a spectrapad checkpoint");
  const std::uint64_t hlen = get_u64(bytes, kMagic.size());
  const std::size_t payload_begin = kMagic.size() + 8 + hlen;
  if (hlen > bytes.size() || payload_begin + kTrailerMagic.size() + 16 > bytes.size())
    fail(ErrorKind::kData, "checkpoint header length out of bounds");
  const std::size_t trailer_begin = bytes.size() - kTrailerMagic.size() - 16;
  if (bytes.substr(trailer_begin, kTrailerMagic.size()) != kTrailerMagic)
    fail(ErrorKind::kData, "checkpoint trailer missing");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kMagic.size() + 8, hlen));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format_version", 0) != kFormatVersion)
    fail(ErrorKind::kCompatibility, "unsupported checkpoint format version");

  Checkpoint ck;
  ck.meta = header.value("meta", std::map<std::string, std::string>{});
  const std::uint64_t payload_size = trailer_begin - payload_begin;
  std::uint64_t expected_offset = 0;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name");
    if (!is_known_tensor_name(name)) fail(ErrorKind::kData, "checkpoint: unknown tensor name '" + name + "'");
    if (entry.at("dtype") != "f32") fail(ErrorKind::kData, "checkpoint: unsupported dtype for '" + name + "'");
    Tensor t;
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    for (auto s : t.shape)
      if (s < 0) fail(ErrorKind::kData, "checkpoint: negative dimension in '" + name + "'");
    const std::uint64_t offset = entry.at("offset"), nbytes = entry.at("bytes");
    // Tensors are packed in table order, so contiguity implies no overlap.
    if (offset != expected_offset || nbytes != t.numel() * sizeof(float) || offset + nbytes > payload_size)
      fail(ErrorKind::kData, "checkpoint: bad offset table at '" + name + "'");
    t.data.resize(t.numel());
    std::memcpy(t.data.data(), bytes.data() + payload_begin + offset, nbytes);
    expected_offset = offset + nbytes;
    if (!ck.tensors.emplace(name, std::move(t)).second)
      fail(ErrorKind::kData, "checkpoint: duplicate tensor '" + name + "'");
  }
  if (expected_offset != payload_size) fail(ErrorKind::kData, "checkpoint: payload size mismatch");
  ck.config_hash = get_u64(bytes, trailer_begin + kTrailerMagic.size());
  ck.dataset_hash = get_u64(bytes, trailer_begin + kTrailerMagic.size() + 8);
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  const std::string bytes = serialize();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorKind::kIo, "short write to " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

}  // namespace spectrapad
