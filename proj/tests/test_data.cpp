#include <doctest.h>
#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "airfl/data.hpp"
#include "airfl/vfl.hpp"

using namespace airfl;
namespace fs = std::filesystem;

namespace {

// Scratch directory for fixture files, wiped per test run.
fs::path fixture_dir() {
  const fs::path dir = fs::temp_directory_path() / "airfl_data_fixtures";
  fs::create_directories(dir);
  return dir;
}

void push_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> idx_image_bytes(std::uint32_t count,
                                           std::uint32_t rows,
                                           std::uint32_t cols) {
  std::vector<unsigned char> out;
  push_be32(out, 0x00000803u);
  push_be32(out, count);
  push_be32(out, rows);
  push_be32(out, cols);
  for (std::uint32_t i = 0; i < count * rows * cols; ++i)
    out.push_back(static_cast<unsigned char>((7u * i + 3u) % 256u));
  return out;
}

std::vector<unsigned char> idx_label_bytes(
    const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> out;
  push_be32(out, 0x00000801u);
  push_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::string write_plain(const std::string& name,
                        const std::vector<unsigned char>& bytes) {
  const fs::path path = fixture_dir() / name;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  REQUIRE(f.good());
  return path.string();
}

std::string write_gzipped(const std::string& name,
                          const std::vector<unsigned char>& bytes) {
  const fs::path path = fixture_dir() / name;
  gzFile f = gzopen(path.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  const int written =
      gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  REQUIRE(written == static_cast<int>(bytes.size()));
  REQUIRE(gzclose(f) == Z_OK);
  return path.string();
}

RawDataset tiny_raw(const std::vector<int>& labels, Eigen::Index dim) {
  RawDataset raw;
  raw.features.resize(static_cast<Eigen::Index>(labels.size()), dim);
  for (Eigen::Index i = 0; i < raw.features.rows(); ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      raw.features(i, j) = static_cast<double>(i * dim + j);
  raw.labels = labels;
  return raw;
}

}  // namespace

TEST_CASE("IDX loader recovers a hand-written fixture exactly") {
  const auto images = idx_image_bytes(4, 2, 3);
  const auto labels = idx_label_bytes({7, 1, 0, 1});
  const std::string ipath = write_plain("fixture-images.idx", images);
  const std::string lpath = write_plain("fixture-labels.idx", labels);

  const RawDataset raw = load_idx(ipath, lpath);
  REQUIRE(raw.samples() == 4);
  REQUIRE(raw.features.cols() == 6);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) {
      const unsigned byte = (7u * static_cast<unsigned>(i * 6 + j) + 3u) % 256u;
      CHECK(raw.features(i, j) == byte / 255.0);
    }
  CHECK(raw.labels == std::vector<int>{7, 1, 0, 1});
}

TEST_CASE("IDX loader inflates gzip-compressed files transparently") {
  const auto images = idx_image_bytes(4, 2, 3);
  const auto labels = idx_label_bytes({7, 1, 0, 1});
  const RawDataset plain =
      load_idx(write_plain("plain-images.idx", images),
               write_plain("plain-labels.idx", labels));
  const RawDataset zipped =
      load_idx(write_gzipped("zip-images.idx.gz", images),
               write_gzipped("zip-labels.idx.gz", labels));
  CHECK(zipped.features == plain.features);
  CHECK(zipped.labels == plain.labels);
}

TEST_CASE("IDX loader rejects malformed files") {
  const auto images = idx_image_bytes(4, 2, 3);
  const auto labels = idx_label_bytes({7, 1, 0, 1});
  const std::string good_images = write_plain("good-images.idx", images);
  const std::string good_labels = write_plain("good-labels.idx", labels);

  SUBCASE("empty file") {
    const std::string empty = write_plain("empty.idx", {});
    CHECK_THROWS_AS(load_idx(empty, good_labels), DataFormatError);
  }
  SUBCASE("bad magic carries the byte offset") {
    auto bad = images;
    bad[0] = 0xff;
    const std::string path = write_plain("bad-magic.idx", bad);
    try {
      load_idx(path, good_labels);
      FAIL("expected a format error");
    } catch (const DataFormatError& ex) {
      CHECK(ex.offset == 0);
    }
  }
  SUBCASE("mismatched counts name both numbers") {
    const auto short_labels = idx_label_bytes({7, 1, 0});
    const std::string path = write_plain("short-labels.idx", short_labels);
    try {
      load_idx(good_images, path);
      FAIL("expected a format error");
    } catch (const DataFormatError& ex) {
      const std::string what = ex.what();
      CHECK(what.find('4') != std::string::npos);
      CHECK(what.find('3') != std::string::npos);
    }
  }
  SUBCASE("truncated pixel payload") {
    auto cut = images;
    cut.resize(cut.size() - 5);
    const std::string path = write_plain("cut-images.idx", cut);
    CHECK_THROWS_AS(load_idx(path, good_labels), DataFormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx((fixture_dir() / "nope.idx").string(), good_labels),
                    ConfigError);
  }
}

TEST_CASE("binary task filter keeps the two classes in order") {
  const RawDataset raw = tiny_raw({0, 1, 2, 1, 0, 3}, 2);
  const RawDataset task = binary_task_filter(raw, 0, 1);

  // retained count equals the sum of the per-class counts in the raw set
  REQUIRE(task.samples() == 4);
  CHECK(task.labels == std::vector<int>{0, 1, 1, 0});
  CHECK(task.features.row(0) == raw.features.row(0));
  CHECK(task.features.row(1) == raw.features.row(1));
  CHECK(task.features.row(2) == raw.features.row(3));
  CHECK(task.features.row(3) == raw.features.row(4));

  SUBCASE("swapped classes invert the labels") {
    const RawDataset flipped = binary_task_filter(raw, 1, 0);
    CHECK(flipped.labels == std::vector<int>{1, 0, 0, 1});
  }
  SUBCASE("identical classes are rejected") {
    CHECK_THROWS_AS(binary_task_filter(raw, 2, 2), ConfigError);
  }
  SUBCASE("absent class is named") {
    try {
      binary_task_filter(raw, 0, 9);
      FAIL("expected a config error");
    } catch (const ConfigError& ex) {
      CHECK(std::string(ex.what()).find('9') != std::string::npos);
    }
  }
}

TEST_CASE("contiguous partition splits 784 features into four equal blocks") {
  const RawDataset raw = tiny_raw({0, 1}, 784);
  const VerticalDataset part =
      vertical_partition(raw, 4, PartitionPolicy::Contiguous);
  REQUIRE(part.devices() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(part.blocks[k].cols() == 196);
    for (Eigen::Index c = 0; c < 196; ++c)
      CHECK(part.columns[k][static_cast<std::size_t>(c)] ==
            static_cast<Eigen::Index>(k) * 196 + c);
  }
  CHECK(part.concatenated() == raw.features);
}

TEST_CASE("partition block sizes differ by at most one and cover every column") {
  const RawDataset raw = tiny_raw({0, 1, 0}, 5);

  SUBCASE("contiguous") {
    const VerticalDataset part =
        vertical_partition(raw, 3, PartitionPolicy::Contiguous);
    REQUIRE(part.devices() == 3);
    CHECK(part.blocks[0].cols() == 2);
    CHECK(part.blocks[1].cols() == 2);
    CHECK(part.blocks[2].cols() == 1);
    CHECK(part.concatenated() == raw.features);
  }
  SUBCASE("strided") {
    const VerticalDataset part =
        vertical_partition(raw, 3, PartitionPolicy::Strided);
    REQUIRE(part.devices() == 3);
    CHECK(part.blocks[0].cols() == 2);
    CHECK(part.blocks[1].cols() == 2);
    CHECK(part.blocks[2].cols() == 1);
    CHECK(part.columns[0] == std::vector<Eigen::Index>{0, 3});
    CHECK(part.columns[1] == std::vector<Eigen::Index>{1, 4});
    CHECK(part.columns[2] == std::vector<Eigen::Index>{2});
    CHECK(part.concatenated() == raw.features);
  }
}

TEST_CASE("single-device partition is the identity") {
  const RawDataset raw = tiny_raw({1, 0, 1, 1}, 7);
  for (const auto policy :
       {PartitionPolicy::Contiguous, PartitionPolicy::Strided}) {
    const VerticalDataset part = vertical_partition(raw, 1, policy);
    REQUIRE(part.devices() == 1);
    CHECK(part.blocks[0] == raw.features);
    CHECK(part.concatenated() == raw.features);
  }
}

TEST_CASE("partition rejects more devices than features") {
  const RawDataset raw = tiny_raw({0, 1}, 3);
  CHECK_THROWS_AS(vertical_partition(raw, 4, PartitionPolicy::Contiguous),
                  ConfigError);
  CHECK_THROWS_AS(vertical_partition(raw, 0, PartitionPolicy::Contiguous),
                  ConfigError);
}

TEST_CASE("partition round-trip identity on random shapes") {
  Rng rng(derive_seed(404, {1}));
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.next_u64() % 12);
    const std::size_t devices =
        1 + static_cast<std::size_t>(rng.next_u64() %
                                     static_cast<std::uint64_t>(dim));
    RawDataset raw = tiny_raw({0, 1, 1}, dim);
    for (Eigen::Index i = 0; i < raw.features.size(); ++i)
      raw.features.data()[i] = rng.gaussian();
    const auto policy = (trial % 2 == 0) ? PartitionPolicy::Contiguous
                                         : PartitionPolicy::Strided;
    const VerticalDataset part = vertical_partition(raw, devices, policy);
    part.validate();
    CHECK(part.concatenated() == raw.features);

    // labels live beside the blocks, never inside them: the block widths
    // together account for every feature column and nothing else
    Eigen::Index width = 0;
    for (const RMat& block : part.blocks) width += block.cols();
    CHECK(width == dim);
    CHECK(part.labels.size() == 3);
  }
}

TEST_CASE("feature scaler centers and whitens, constant columns map to zero") {
  RMat x(4, 3);
  x << 1.0, 5.0, -2.0,
       3.0, 5.0, -1.0,
       5.0, 5.0,  0.0,
       7.0, 5.0,  1.0;
  const FeatureScaler scaler = fit_feature_scaler(x);
  const RMat z = apply_feature_scaler(scaler, x);
  for (Eigen::Index j : {0, 2}) {
    CHECK(z.col(j).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(z.col(j).squaredNorm() / 4.0 == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(z.col(1).cwiseAbs().maxCoeff() == 0.0);

  RMat wrong(2, 2);
  CHECK_THROWS_AS(apply_feature_scaler(scaler, wrong), ConfigError);
}

TEST_CASE("synthetic generator produces a valid single-sample dataset") {
  Rng rng(derive_seed(505, {1}));
  const RawDataset raw = make_synthetic(1, 3, 2.0, rng);
  CHECK(raw.samples() == 1);
  CHECK(raw.features.cols() == 3);
  CHECK(raw.labels.size() == 1);
  CHECK(raw.labels[0] == 0);
  CHECK_THROWS_AS(make_synthetic(0, 3, 2.0, rng), ConfigError);
  CHECK_THROWS_AS(make_synthetic(4, 0, 2.0, rng), ConfigError);
}

TEST_CASE("widely separated synthetic clusters train to near-perfect accuracy") {
  Rng rng(derive_seed(506, {1}));
  const RawDataset raw = make_synthetic(200, 2, 10.0, rng);
  const VerticalDataset task =
      vertical_partition(raw, 1, PartitionPolicy::Contiguous);
  const ConvergenceParams params = estimate_convergence_params(task, 1e-3);
  const CentralizedRun run =
      centralized_descent(task, 1e-3, 1.0 / params.beta, 4000, 1e-10);
  VerticalModel model;
  model.w.push_back(run.w);
  CHECK(classification_accuracy(model, task) >= 0.99);
}

TEST_CASE("zero separation yields chance-level held-out accuracy") {
  double mean_acc = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(507, {static_cast<std::uint64_t>(seed)}));
    const RawDataset train_raw = make_synthetic(400, 4, 0.0, rng);
    const RawDataset test_raw = make_synthetic(400, 4, 0.0, rng);
    const VerticalDataset train_task =
        vertical_partition(train_raw, 2, PartitionPolicy::Contiguous);
    const VerticalDataset test_task =
        vertical_partition(test_raw, 2, PartitionPolicy::Contiguous);
    const ConvergenceParams params = estimate_convergence_params(train_task, 1e-3);
    const CentralizedRun run =
        centralized_descent(train_task, 1e-3, 1.0 / params.beta, 500, 1e-10);
    VerticalModel model;
    model.w.push_back(run.w.head(2));
    model.w.push_back(run.w.tail(2));
    mean_acc += classification_accuracy(model, test_task);
  }
  mean_acc /= 10.0;
  CHECK(mean_acc == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("subsample keeps original order and is deterministic per seed") {
  const RawDataset raw = tiny_raw({0, 1, 0, 1, 0, 1, 0, 1}, 2);

  Rng rng_a(derive_seed(508, {1}));
  const RawDataset sub_a = subsample(raw, 3, rng_a);
  Rng rng_b(derive_seed(508, {1}));
  const RawDataset sub_b = subsample(raw, 3, rng_b);
  REQUIRE(sub_a.samples() == 3);
  CHECK(sub_a.features == sub_b.features);
  CHECK(sub_a.labels == sub_b.labels);

  // rows appear in their original relative order; feature values identify
  // the source row uniquely by construction
  Eigen::Index last = -1;
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Eigen::Index original =
        static_cast<Eigen::Index>(sub_a.features(i, 0) / 2.0);
    CHECK(sub_a.features.row(i) == raw.features.row(original));
    CHECK(sub_a.labels[static_cast<std::size_t>(i)] ==
          raw.labels[static_cast<std::size_t>(original)]);
    CHECK(original > last);
    last = original;
  }

  Rng rng_c(derive_seed(508, {2}));
  const RawDataset all = subsample(raw, 20, rng_c);
  CHECK(all.features == raw.features);
  CHECK(all.labels == raw.labels);
}
