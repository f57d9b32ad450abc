#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

#include "trackbc/io.hpp"
#include "trackbc/net/lstm.hpp"

namespace trackbc::net {

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");

struct Normalization {
  std::array<double, 4> mean{0, 0, 0, 0};
  std::array<double, 4> scale{1, 1, 1, 1};

  bool operator==(const Normalization&) const = default;

  std::array<double, 4> apply(const Observation& o) const {
    auto v = o.as_array();
    for (std::size_t k = 0; k < 4; ++k) v[k] = (v[k] - mean[k]) / scale[k];
    return v;
  }
};

struct TrainMeta {
  std::uint64_t seed = 0;
  int steps = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  std::string demo_digest;
  int batch = 32;
  double lr = 0.001;
  bool transfer = false;

  bool operator==(const TrainMeta&) const = default;
};

struct NetworkCheckpoint {
  NetworkShape shape;
  NetworkParams params;
  Normalization norm;
  TrainMeta meta;

  bool operator==(const NetworkCheckpoint&) const = default;
};

inline constexpr char kCheckpointMagic[8] = {'T', 'R', 'A', 'C', 'K', 'B', 'C', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw ParseError("checkpoint: truncated file");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

inline void put_tensor(std::string& out, const std::string& name, const std::vector<std::uint64_t>& dims,
                       const double* data) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  std::uint64_t n = 1;
  for (auto d : dims) {
    put<std::uint64_t>(out, d);
    n *= d;
  }
  out.append(reinterpret_cast<const char*>(data), n * sizeof(double));
}

}  // namespace detail

inline std::string checkpoint_to_bytes(const NetworkCheckpoint& ck) {
  nlohmann::json head = {
      {"shape",
       {{"input_dim", ck.shape.input_dim},
        {"hidden", ck.shape.hidden},
        {"layers", ck.shape.layers},
        {"output_dim", ck.shape.output_dim},
        {"m", ck.shape.m}}},
      {"meta",
       {{"seed", ck.meta.seed},
        {"steps", ck.meta.steps},
        {"final_loss", ck.meta.final_loss},
        {"final_accuracy", ck.meta.final_accuracy},
        {"demo_digest", ck.meta.demo_digest},
        {"batch", ck.meta.batch},
        {"lr", ck.meta.lr},
        {"transfer", ck.meta.transfer}}},
  };
  const std::string h = head.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
  out += h;

  std::uint32_t count = 2;
  for_each_tensor(ck.params, [&](const std::string&, const double*, Eigen::Index, Eigen::Index) { ++count; });
  detail::put<std::uint32_t>(out, count);
  for_each_tensor(ck.params, [&](const std::string& name, const double* d, Eigen::Index r, Eigen::Index c) {
    std::vector<std::uint64_t> dims{static_cast<std::uint64_t>(r)};
    if (!name.ends_with("bias")) dims.push_back(static_cast<std::uint64_t>(c));
    detail::put_tensor(out, name, dims, d);
  });
  detail::put_tensor(out, "norm.mean", {4}, ck.norm.mean.data());
  detail::put_tensor(out, "norm.scale", {4}, ck.norm.scale.data());
  return out;
}

inline NetworkCheckpoint checkpoint_from_bytes(std::string_view bytes) {
  detail::Reader rd(bytes);
  if (rd.bytes(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw ParseError("checkpoint: bad magic");
  }
  const auto version = rd.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  const auto hlen = rd.get<std::uint32_t>();
  NetworkCheckpoint ck;
  try {
    const auto head = nlohmann::json::parse(rd.bytes(hlen));
    const auto& s = head.at("shape");
    ck.shape = {s.at("input_dim").get<int>(), s.at("hidden").get<int>(), s.at("layers").get<int>(),
                s.at("output_dim").get<int>(), s.at("m").get<int>()};
    const auto& m = head.at("meta");
    ck.meta.seed = m.at("seed").get<std::uint64_t>();
    ck.meta.steps = m.at("steps").get<int>();
    ck.meta.final_loss = m.at("final_loss").get<double>();
    ck.meta.final_accuracy = m.at("final_accuracy").get<double>();
    ck.meta.demo_digest = m.at("demo_digest").get<std::string>();
    ck.meta.batch = m.at("batch").get<int>();
    ck.meta.lr = m.at("lr").get<double>();
    ck.meta.transfer = m.at("transfer").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  check_shape(ck.shape);
  ck.params = zero_params(ck.shape);

  std::map<std::string, std::pair<std::vector<std::uint64_t>, std::string_view>> found;
  const auto count = rd.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(rd.bytes(rd.get<std::uint32_t>()));
    const auto nd = rd.get<std::uint32_t>();
    std::vector<std::uint64_t> dims;
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < nd; ++k) {
      dims.push_back(rd.get<std::uint64_t>());
      n *= dims.back();
    }
    if (n > bytes.size()) throw ParseError("checkpoint: tensor " + name + " too large");
    found[name] = {dims, rd.bytes(n * sizeof(double))};
  }
  if (!rd.done()) throw ParseError("checkpoint: trailing bytes");

  auto fill = [&](const std::string& name, double* d, std::uint64_t r, std::uint64_t c, bool vec) {
    auto it = found.find(name);
    if (it == found.end()) throw ParseError("checkpoint: missing tensor " + name);
    const std::vector<std::uint64_t> want = vec ? std::vector<std::uint64_t>{r} : std::vector<std::uint64_t>{r, c};
    if (it->second.first != want) throw ShapeError("checkpoint: tensor " + name + " has wrong dimensions");
    std::memcpy(d, it->second.second.data(), it->second.second.size());
    found.erase(it);
  };
  for_each_tensor(ck.params, [&](const std::string& name, double* d, Eigen::Index r, Eigen::Index c) {
    fill(name, d, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c), name.ends_with("bias"));
  });
  fill("norm.mean", ck.norm.mean.data(), 4, 1, true);
  fill("norm.scale", ck.norm.scale.data(), 4, 1, true);
  if (!found.empty()) throw ParseError("checkpoint: unknown tensor " + found.begin()->first);
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const NetworkCheckpoint& ck) {
  atomic_write(path, checkpoint_to_bytes(ck));
}

inline NetworkCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(read_file(path));
}

}  // namespace trackbc::net
