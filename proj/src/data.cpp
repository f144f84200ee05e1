#include "airfl/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <vector>

namespace airfl {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ConfigError("cannot open file: " + path);
  std::fseek(f, 0, SEEK_END);
  const long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<unsigned char> bytes(size > 0 ? static_cast<std::size_t>(size)
                                            : 0);
  if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f) !=
                            bytes.size()) {
    std::fclose(f);
    throw DataFormatError("short read from " + path, bytes.size());
  }
  std::fclose(f);
  return bytes;
}

std::vector<unsigned char> inflate_gzip(
    const std::vector<unsigned char>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw DataFormatError("zlib initialization failed", 0);
  std::vector<unsigned char> out;
  out.reserve(in.size() * 4);
  unsigned char buf[1 << 16];
  zs.next_in = const_cast<unsigned char*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const std::size_t consumed = in.size() - zs.avail_in;
      const std::string detail = zs.msg ? zs.msg : "corrupt stream";
      inflateEnd(&zs);
      throw DataFormatError("gzip inflation failed: " + detail, consumed);
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

std::vector<unsigned char> load_bytes(const std::string& path) {
  std::vector<unsigned char> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
    return inflate_gzip(bytes);
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes,
                        std::size_t offset, const std::string& what) {
  if (offset + 4 > bytes.size())
    throw DataFormatError("truncated IDX file while reading " + what,
                          offset);
  return (std::uint32_t(bytes[offset]) << 24) |
         (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) |
         std::uint32_t(bytes[offset + 3]);
}

std::size_t draw_index(Rng& rng, std::size_t n) {
  // rejection keeps the draw exactly uniform
  const std::uint64_t limit =
      std::uint64_t(-1) - (std::uint64_t(-1) % n + 1) % n;
  std::uint64_t u = rng.next_u64();
  while (u > limit) u = rng.next_u64();
  return static_cast<std::size_t>(u % n);
}

}  // namespace

RawDataset load_idx(const std::string& images_path,
                    const std::string& labels_path) {
  const auto img = load_bytes(images_path);
  const auto lab = load_bytes(labels_path);

  if (read_be32(img, 0, "image magic") != 0x00000803u)
    throw DataFormatError("bad IDX image magic in " + images_path, 0);
  if (read_be32(lab, 0, "label magic") != 0x00000801u)
    throw DataFormatError("bad IDX label magic in " + labels_path, 0);

  const std::size_t count = read_be32(img, 4, "image count");
  const std::size_t rows = read_be32(img, 8, "image rows");
  const std::size_t cols = read_be32(img, 12, "image cols");
  const std::size_t label_count = read_be32(lab, 4, "label count");
  if (count != label_count)
    throw DataFormatError("image count " + std::to_string(count) +
                              " does not match label count " +
                              std::to_string(label_count),
                          4);

  const std::size_t pixels = rows * cols;
  if (16 + count * pixels > img.size())
    throw DataFormatError("truncated IDX image data in " + images_path,
                          img.size());
  if (8 + count > lab.size())
    throw DataFormatError("truncated IDX label data in " + labels_path,
                          lab.size());

  RawDataset out;
  out.features.resize(static_cast<Eigen::Index>(count),
                      static_cast<Eigen::Index>(pixels));
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < pixels; ++p)
      out.features(static_cast<Eigen::Index>(i),
                   static_cast<Eigen::Index>(p)) =
          img[16 + i * pixels + p] / 255.0;
    out.labels[i] = lab[8 + i];
  }
  return out;
}

RawDataset binary_task_filter(const RawDataset& raw, int class_a,
                              int class_b) {
  if (class_a == class_b)
    throw ConfigError("binary task needs two distinct classes");
  std::vector<std::size_t> keep;
  std::size_t seen_a = 0, seen_b = 0;
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    if (raw.labels[i] == class_a) {
      ++seen_a;
      keep.push_back(i);
    } else if (raw.labels[i] == class_b) {
      ++seen_b;
      keep.push_back(i);
    }
  }
  if (seen_a == 0)
    throw ConfigError("class " + std::to_string(class_a) +
                      " absent from the dataset");
  if (seen_b == 0)
    throw ConfigError("class " + std::to_string(class_b) +
                      " absent from the dataset");

  RawDataset out;
  out.features.resize(static_cast<Eigen::Index>(keep.size()),
                      raw.features.cols());
  out.labels.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) =
        raw.features.row(static_cast<Eigen::Index>(keep[i]));
    out.labels[i] = raw.labels[keep[i]] == class_b ? 1 : 0;
  }
  return out;
}

FeatureScaler fit_feature_scaler(const RMat& features) {
  if (features.rows() == 0) throw ConfigError("cannot fit scaler on no data");
  FeatureScaler s;
  s.mean = features.colwise().mean();
  const RMat centered = features.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (s.scale(j) < 1e-12) s.scale(j) = 1.0;
  return s;
}

RMat apply_feature_scaler(const FeatureScaler& scaler, const RMat& features) {
  if (features.cols() != scaler.mean.size())
    throw ConfigError("scaler dimension does not match the features");
  return (features.rowwise() - scaler.mean.transpose()).array().rowwise() /
         scaler.scale.transpose().array();
}

Eigen::Index VerticalDataset::dim() const {
  Eigen::Index d = 0;
  for (const RMat& b : blocks) d += b.cols();
  return d;
}

RMat VerticalDataset::concatenated() const {
  RMat full(static_cast<Eigen::Index>(samples()), dim());
  for (std::size_t k = 0; k < blocks.size(); ++k)
    for (std::size_t c = 0; c < columns[k].size(); ++c)
      full.col(columns[k][c]) = blocks[k].col(static_cast<Eigen::Index>(c));
  return full;
}

void VerticalDataset::validate() const {
  if (blocks.empty()) throw ConfigError("vertical dataset has no devices");
  if (columns.size() != blocks.size())
    throw ConfigError("vertical dataset column map is inconsistent");
  const Eigen::Index rows = blocks[0].rows();
  if (labels.size() != rows)
    throw ConfigError("vertical dataset labels do not match the samples");
  std::vector<char> hit(static_cast<std::size_t>(dim()), 0);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k].rows() != rows)
      throw ConfigError("vertical dataset blocks disagree on sample count");
    if (static_cast<Eigen::Index>(columns[k].size()) != blocks[k].cols())
      throw ConfigError("vertical dataset column map is inconsistent");
    for (Eigen::Index c : columns[k]) {
      if (c < 0 || c >= dim() || hit[static_cast<std::size_t>(c)])
        throw ConfigError("vertical dataset blocks overlap");
      hit[static_cast<std::size_t>(c)] = 1;
    }
  }
  // full cover follows: dim() indices, each hit at most once, none missing
  for (char h : hit)
    if (!h) throw ConfigError("vertical dataset blocks miss a feature");
}

VerticalDataset vertical_partition(const RawDataset& data,
                                   std::size_t devices,
                                   PartitionPolicy policy) {
  const Eigen::Index d = data.features.cols();
  if (devices == 0) throw ConfigError("need at least one device");
  if (static_cast<Eigen::Index>(devices) > d)
    throw ConfigError("more devices (" + std::to_string(devices) +
                      ") than features (" + std::to_string(d) + ")");
  for (int y : data.labels)
    if (y != 0 && y != 1)
      throw ConfigError("labels must be 0/1 before partitioning");

  VerticalDataset out;
  out.columns.resize(devices);
  if (policy == PartitionPolicy::Contiguous) {
    const Eigen::Index base = d / static_cast<Eigen::Index>(devices);
    const Eigen::Index extra = d % static_cast<Eigen::Index>(devices);
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < devices; ++k) {
      const Eigen::Index width =
          base + (static_cast<Eigen::Index>(k) < extra ? 1 : 0);
      for (Eigen::Index c = 0; c < width; ++c)
        out.columns[k].push_back(at + c);
      at += width;
    }
  } else {
    for (Eigen::Index c = 0; c < d; ++c)
      out.columns[static_cast<std::size_t>(c) % devices].push_back(c);
  }

  out.blocks.resize(devices);
  for (std::size_t k = 0; k < devices; ++k) {
    out.blocks[k].resize(data.features.rows(),
                         static_cast<Eigen::Index>(out.columns[k].size()));
    for (std::size_t c = 0; c < out.columns[k].size(); ++c)
      out.blocks[k].col(static_cast<Eigen::Index>(c)) =
          data.features.col(out.columns[k][c]);
  }
  out.labels.resize(data.features.rows());
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    out.labels(static_cast<Eigen::Index>(i)) = data.labels[i];
  out.validate();
  return out;
}

RawDataset make_synthetic(std::size_t samples, Eigen::Index dim,
                          double separation, Rng& rng) {
  if (samples == 0 || dim < 1)
    throw ConfigError("synthetic data needs samples >= 1 and dim >= 1");
  RVec direction(dim);
  for (Eigen::Index j = 0; j < dim; ++j) direction(j) = rng.gaussian();
  const double norm = direction.norm();
  if (norm > 0.0)
    direction /= norm;
  else
    direction(0) = 1.0;

  RawDataset out;
  out.features.resize(static_cast<Eigen::Index>(samples), dim);
  out.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const int y = static_cast<int>(i % 2);
    const double sign = y == 1 ? 0.5 : -0.5;
    for (Eigen::Index j = 0; j < dim; ++j)
      out.features(static_cast<Eigen::Index>(i), j) =
          sign * separation * direction(j) + rng.gaussian();
    out.labels[i] = y;
  }
  return out;
}

RawDataset subsample(const RawDataset& data, std::size_t count, Rng& rng) {
  const std::size_t n = data.samples();
  if (count >= n) return data;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i)
    std::swap(idx[i], idx[i + draw_index(rng, n - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());

  RawDataset out;
  out.features.resize(static_cast<Eigen::Index>(count), data.features.cols());
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) =
        data.features.row(static_cast<Eigen::Index>(idx[i]));
    out.labels[i] = data.labels[idx[i]];
  }
  return out;
}

}  // namespace airfl
