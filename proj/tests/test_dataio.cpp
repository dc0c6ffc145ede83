#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "cibhash/dataio.hpp"
#include "test_util.hpp"

using namespace cibhash;

namespace {

void expect_error(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected error: " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

FeatureDataset small_dataset() {
  FeatureDataset ds;
  ds.features.resize(3, 2);
  ds.features << 1.5f, -2.0f, 0.0f, 3.25f, 1e-8f, 7.0f;
  ds.labels = {{0}, {1, 4}, {}};
  return ds;
}

}  // namespace

TEST(Features, RoundTrip) {
  testutil::TempDir dir;
  const FeatureDataset ds = small_dataset();
  save_features(ds, dir / "f.cibf");
  const FeatureDataset back = load_features(dir / "f.cibf");
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.labels, LabelSet(3));
}

TEST(Features, HeaderLayout) {
  testutil::TempDir dir;
  save_features(small_dataset(), dir / "f.cibf");
  const auto b = testutil::read_bytes(dir / "f.cibf");
  ASSERT_EQ(b.size(), 20u + 6u * 4u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "CIBF");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[8], 3);
  EXPECT_EQ(b[16], 2);
}

TEST(Features, CorruptFiles) {
  testutil::TempDir dir;
  save_features(small_dataset(), dir / "f.cibf");
  const auto good = testutil::read_bytes(dir / "f.cibf");
  const auto bad = dir / "bad.cibf";
  auto with = [&](std::vector<char> bytes) {
    testutil::write_bytes(bad, bytes);
    return [&] { load_features(bad); };
  };
  auto b = good;
  b[1] = 'Z';
  expect_error(ErrorCode::bad_magic, with(b));
  b = good;
  b[4] = 2;
  expect_error(ErrorCode::bad_version, with(b));
  expect_error(ErrorCode::truncated, with({good.begin(), good.end() - 1}));
  expect_error(ErrorCode::truncated, with({good.begin(), good.begin() + 10}));
  b = good;
  b.push_back(1);
  expect_error(ErrorCode::malformed, with(b));
  b = good;
  for (int i = 8; i < 16; ++i) b[i] = static_cast<char>(0xff);
  expect_error(ErrorCode::dimension_overflow, with(b));
  b = good;
  const float inf = std::numeric_limits<float>::infinity();
  std::memcpy(b.data() + 20, &inf, 4);
  expect_error(ErrorCode::non_finite, with(b));
  expect_error(ErrorCode::io, [&] { load_features(dir / "absent.cibf"); });
}

TEST(Labels, RoundTripAndValidation) {
  testutil::TempDir dir;
  const LabelSet labels = small_dataset().labels;
  save_labels(labels, dir / "l.cibl");
  EXPECT_EQ(load_labels(dir / "l.cibl"), labels);

  save_features(small_dataset(), dir / "f.cibf");
  const FeatureDataset ds = load_dataset(dir / "f.cibf", dir / "l.cibl");
  EXPECT_EQ(ds.labels, labels);

  save_labels({{0}, {1}}, dir / "short.cibl");
  expect_error(ErrorCode::malformed, [&] { load_dataset(dir / "f.cibf", dir / "short.cibl"); });

  auto bytes = testutil::read_bytes(dir / "l.cibl");
  // 16-byte header, row 0 is u16 count + one id; row 1 holds {1, 4}.
  // Swapping the low bytes of its ids makes the list unsorted.
  const std::size_t row1 = 16 + 2 + 4;
  std::swap(bytes[row1 + 2], bytes[row1 + 6]);
  testutil::write_bytes(dir / "bad.cibl", bytes);
  expect_error(ErrorCode::malformed, [&] { load_labels(dir / "bad.cibl"); });
}

TEST(Codes, RoundTripAndCorruption) {
  testutil::TempDir dir;
  PackedCodes c(3, 70);
  c.set_bit(0, 1, true);
  c.set_bit(2, 69, true);
  save_codes(c, dir / "c.cibc");
  EXPECT_EQ(load_codes(dir / "c.cibc"), c);
  auto bytes = testutil::read_bytes(dir / "c.cibc");
  ASSERT_EQ(bytes.size(), 20u + 3u * 2u * 8u);
  // set a padding bit in the last word of row 0
  bytes[20 + 8 + 7] = static_cast<char>(0x80);
  testutil::write_bytes(dir / "pad.cibc", bytes);
  expect_error(ErrorCode::malformed, [&] { load_codes(dir / "pad.cibc"); });
}

TEST(Csv, WithLabelColumn) {
  testutil::TempDir dir;
  std::ofstream(dir / "a.csv") << "x,y,label\n1,2,0\n3.5,-4,2\n";
  const FeatureDataset ds = load_csv(dir / "a.csv");
  ASSERT_EQ(ds.size(), 2u);
  ASSERT_EQ(ds.dim(), 2u);
  EXPECT_EQ(ds.features(1, 0), 3.5f);
  EXPECT_EQ(ds.labels[1], std::vector<std::uint32_t>{2});
}

TEST(Csv, WithoutHeaderAndErrors) {
  testutil::TempDir dir;
  std::ofstream(dir / "a.csv") << "1,2,3\n4,5,6\n";
  const FeatureDataset ds = load_csv(dir / "a.csv");
  EXPECT_EQ(ds.dim(), 3u);
  EXPECT_TRUE(ds.labels[0].empty());
  std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
  expect_error(ErrorCode::malformed, [&] { load_csv(dir / "ragged.csv"); });
  std::ofstream(dir / "text.csv") << "1,2\n3,abc\n";
  expect_error(ErrorCode::malformed, [&] { load_csv(dir / "text.csv"); });
  std::ofstream(dir / "badlabel.csv") << "a,label\n1,-1\n";
  expect_error(ErrorCode::malformed, [&] { load_csv(dir / "badlabel.csv"); });
}

TEST(Synthetic, ShapeLabelsAndDeterminism) {
  SyntheticSpec spec;
  spec.clusters = 4;
  spec.dim = 16;
  spec.per_cluster = 50;
  spec.seed = 9;
  const FeatureDataset a = generate_synthetic(spec);
  EXPECT_EQ(a.size(), 200u);
  EXPECT_EQ(a.dim(), 16u);
  EXPECT_EQ(a.labels[0], std::vector<std::uint32_t>{0});
  EXPECT_EQ(a.labels[199], std::vector<std::uint32_t>{3});
  EXPECT_NO_THROW(validate(a));
  EXPECT_EQ(generate_synthetic(spec).features, a.features);
  spec.seed = 10;
  EXPECT_NE(generate_synthetic(spec).features, a.features);
}

TEST(Synthetic, ClusterGeometry) {
  SyntheticSpec spec;
  spec.clusters = 5;
  spec.dim = 32;
  spec.per_cluster = 2000;
  spec.separation = 6.0;
  const FeatureDataset ds = generate_synthetic(spec);
  std::vector<Eigen::RowVectorXd> means;
  for (std::size_t k = 0; k < spec.clusters; ++k) {
    const auto block = ds.features.middleRows(k * spec.per_cluster, spec.per_cluster).cast<double>();
    const Eigen::RowVectorXd mean = block.colwise().mean();
    means.push_back(mean);
    // within-cluster std is 1 per dimension
    const double var = (block.rowwise() - mean).array().square().mean();
    EXPECT_NEAR(var, 1.0, 0.02);
    EXPECT_NEAR(mean.norm(), spec.separation, 0.2);
  }
  for (std::size_t i = 0; i < means.size(); ++i)
    for (std::size_t j = i + 1; j < means.size(); ++j)
      EXPECT_NEAR((means[i] - means[j]).norm(), spec.separation * std::sqrt(2.0), 0.2);
}

TEST(SplitEvery, EveryFifthIsQuery) {
  SyntheticSpec spec;
  spec.clusters = 3;
  spec.dim = 4;
  spec.per_cluster = 10;
  const FeatureDataset ds = generate_synthetic(spec);
  const QuerySplit s = split_every(ds, 5);
  EXPECT_EQ(s.queries.size(), 6u);
  EXPECT_EQ(s.database.size(), 24u);
  EXPECT_EQ(s.queries.features.row(1), ds.features.row(5));
  EXPECT_EQ(s.database.features.row(0), ds.features.row(1));
  EXPECT_EQ(s.database.features.row(4), ds.features.row(6));
  EXPECT_THROW(split_every(ds, 1), Error);
}

TEST(Validate, RejectsBadDatasets) {
  FeatureDataset ds = small_dataset();
  EXPECT_NO_THROW(validate(ds));
  ds.labels[1] = {4, 1};
  EXPECT_THROW(validate(ds), Error);
  ds = small_dataset();
  ds.labels.pop_back();
  EXPECT_THROW(validate(ds), Error);
  ds = small_dataset();
  ds.features(0, 0) = std::nanf("");
  EXPECT_THROW(validate(ds), Error);
}
