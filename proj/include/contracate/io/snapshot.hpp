#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/io/csv.hpp"
#include "contracate/model/any_model.hpp"
#include "contracate/model/cate_model.hpp"
#include "contracate/model/linear_model.hpp"

namespace contracate::io {

static_assert(std::endian::native == std::endian::little, "snapshot encoding assumes a little-endian host");

// Layout (all integers little-endian):
//   magic[8] "CCATSNAP" | u32 version | u32 kind (1 network, 2 linear)
//   u32 n_shape | u64 shape[n_shape]
//   u32 n_params | { u32 name_len | name | u64 rows | u64 cols | f64 data[rows*cols] } ...
//   u64 FNV-1a of every preceding byte
inline constexpr char kSnapshotMagic[8] = {'C', 'C', 'A', 'T', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

enum Kind : std::uint32_t { kNetwork = 1, kLinear = 2 };

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf_.append(b, sizeof(T));
  }
  void bytes(std::string_view s) { buf_.append(s); }
  void tensor(const std::string& name, const nn::Tensor2& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    put<std::uint64_t>(static_cast<std::uint64_t>(t.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(t.cols()));
    bytes(std::string_view(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(double)));
  }
  std::string finish() {
    put<std::uint64_t>(fnv1a(buf_));
    return std::move(buf_);
  }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw IntegrityError("snapshot is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline void write_params(Writer& w, std::vector<nn::Parameter> params) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) w.tensor(p.name, p.value);
}

inline void read_params(Reader& r, std::vector<nn::Parameter> params) {
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) throw IntegrityError("snapshot parameter count does not match its architecture");
  for (auto& p : params) {
    const auto len = r.get<std::uint32_t>();
    const std::string name(r.bytes(len));
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (name != p.name || rows != static_cast<std::uint64_t>(p.value.rows()) ||
        cols != static_cast<std::uint64_t>(p.value.cols())) {
      throw IntegrityError("snapshot parameter '" + name + "' does not match the architecture");
    }
    const auto raw = r.bytes(static_cast<std::size_t>(rows * cols) * sizeof(double));
    std::memcpy(p.value.data(), raw.data(), raw.size());
  }
}

}  // namespace detail

inline std::string encode_model(const model::AnyModel& any) {
  detail::Writer w;
  w.bytes(std::string_view(kSnapshotMagic, sizeof kSnapshotMagic));
  w.put<std::uint32_t>(kSnapshotVersion);
  model::AnyModel copy = any;
  if (auto* net = std::get_if<model::CateModel>(&copy.get())) {
    w.put<std::uint32_t>(detail::kNetwork);
    std::vector<std::uint64_t> shape = {net->dim_x(), net->dim_t(), net->t_branch().layer(0).out_dim(),
                                        net->repr_dim(), net->x_branch().out_dim()};
    for (std::size_t i = 0; i + 1 < net->head().size(); ++i) shape.push_back(net->head().layer(i).out_dim());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (auto s : shape) w.put<std::uint64_t>(s);
    detail::write_params(w, net->parameters());
  } else {
    auto& lin = std::get<model::LinearCateModel>(copy.get());
    w.put<std::uint32_t>(detail::kLinear);
    w.put<std::uint32_t>(2);
    w.put<std::uint64_t>(lin.dim_x());
    w.put<std::uint64_t>(lin.dim_t());
    detail::write_params(w, lin.parameters());
  }
  return w.finish();
}

/// Never returns a partially filled model: any inconsistency throws.
inline model::AnyModel decode_model(std::string_view data) {
  if (data.size() < sizeof kSnapshotMagic + 4 + 8) throw IntegrityError("snapshot is truncated");
  if (std::memcmp(data.data(), kSnapshotMagic, sizeof kSnapshotMagic) != 0) {
    throw IntegrityError("not a model snapshot (bad magic)");
  }
  detail::Reader r(data);
  r.bytes(sizeof kSnapshotMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kSnapshotVersion) {
    throw VersionError("snapshot format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kSnapshotVersion) + ")");
  }
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + data.size() - 8, 8);
  if (fnv1a(data.substr(0, data.size() - 8)) != stored) throw IntegrityError("snapshot checksum mismatch");

  detail::Reader body(data.substr(0, data.size() - 8));
  body.bytes(sizeof kSnapshotMagic + 4);
  const auto kind = body.get<std::uint32_t>();
  const auto n_shape = body.get<std::uint32_t>();
  std::vector<std::uint64_t> shape(n_shape);
  for (auto& s : shape) s = body.get<std::uint64_t>();

  model::AnyModel out;
  if (kind == detail::kNetwork) {
    if (shape.size() < 5) throw IntegrityError("snapshot network shape is incomplete");
    model::CateArchitecture arch;
    arch.dim_x = shape[0];
    arch.dim_t = shape[1];
    arch.t_hidden = shape[2];
    arch.repr_dim = shape[3];
    arch.x_hidden = shape[4];
    arch.head_hidden.assign(shape.begin() + 5, shape.end());
    nn::Rng unused(0);
    auto net = model::CateModel::create(arch, unused);
    detail::read_params(body, net.parameters());
    out = model::AnyModel(std::move(net));
  } else if (kind == detail::kLinear) {
    if (shape.size() != 2) throw IntegrityError("snapshot linear shape is malformed");
    model::LinearCateModel lin(shape[0], shape[1]);
    detail::read_params(body, lin.parameters());
    out = model::AnyModel(std::move(lin));
  } else {
    throw IntegrityError("unknown model kind " + std::to_string(kind) + " in snapshot");
  }
  if (body.remaining() != 0) throw IntegrityError("snapshot has trailing bytes");
  return out;
}

inline void save_model(const model::AnyModel& m, const std::string& path) {
  const std::string bytes = encode_model(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline model::AnyModel load_model(const std::string& path) { return decode_model(read_file(path)); }

}  // namespace contracate::io
