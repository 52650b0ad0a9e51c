#include <filesystem>

#include "doctest.h"
#include "lsc/data/dataset.hpp"

using namespace lsc;
using namespace lsc::data;

namespace {

// Byte-level encoding written out by hand, independent of the encoder.
std::vector<std::uint8_t> hand_images() {
  return {0x00, 0x00, 0x08, 0x03, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 255, 128, 0};
}
std::vector<std::uint8_t> hand_labels() { return {0x00, 0x00, 0x08, 0x01, 0, 0, 0, 1, 7}; }

}  // namespace

TEST_CASE("parse_idx decodes hand-encoded files") {
  const auto d = parse_idx(hand_images(), hand_labels());
  CHECK(d.images.shape() == Shape{1, 1, 2, 2});
  CHECK(d.images[0] == 0.0f);
  CHECK(d.images[1] == 1.0f);
  CHECK(d.images[2] == 128.0f / 255.0f);
  CHECK(d.images[3] == 0.0f);
  CHECK(d.labels == std::vector<int>{7});
  CHECK(d.num_classes == 8);
}

TEST_CASE("parse_idx errors carry byte offsets") {
  auto labels3 = std::vector<std::uint8_t>{0, 0, 8, 1, 0, 0, 0, 3, 1, 2, 3};
  auto images2 = std::vector<std::uint8_t>{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 5, 6};
  CHECK_THROWS_AS(parse_idx(images2, labels3), IdxError);
  try {
    parse_idx(images2, labels3);
  } catch (const IdxError& e) {
    CHECK(std::string(e.what()).find("count mismatch") != std::string::npos);
    CHECK(e.offset() == 4);
  }

  auto bad_magic = hand_images();
  bad_magic[3] = 0x04;
  try {
    parse_idx(bad_magic, hand_labels());
    FAIL("expected bad magic");
  } catch (const IdxError& e) {
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
    CHECK(e.offset() == 0);
  }

  auto truncated = hand_images();
  truncated.pop_back();
  try {
    parse_idx(truncated, hand_labels());
    FAIL("expected truncation");
  } catch (const IdxError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    CHECK(e.offset() == truncated.size());
  }

  auto short_header = std::vector<std::uint8_t>{0, 0, 8, 3, 0, 0};
  CHECK_THROWS_AS(parse_idx(short_header, hand_labels()), IdxError);
}

TEST_CASE("IDX round trip is bit exact, including gzip files") {
  const auto d = make_synthetic({.num_classes = 3, .per_class = 5, .image_side = 6, .seed = 9});
  const auto ib = encode_idx_images(d.images);
  const auto lb = encode_idx_labels(d.labels);
  const auto once = parse_idx(ib, lb);
  const auto twice = parse_idx(encode_idx_images(once.images), encode_idx_labels(once.labels));
  CHECK(once.images == twice.images);
  CHECK(once.labels == twice.labels);
  CHECK(encode_idx_images(twice.images) == ib);

  const auto dir = std::filesystem::temp_directory_path() / "lsc_data_test";
  std::filesystem::create_directories(dir);
  write_bytes(dir / "img.gz", ib, true);
  write_bytes(dir / "lab", lb, false);
  CHECK(read_bytes(dir / "img.gz") == ib);
  const auto loaded = load_idx(dir / "img.gz", dir / "lab");
  CHECK(loaded.images == once.images);
  CHECK(loaded.labels == once.labels);
  std::filesystem::remove_all(dir);
}

TEST_CASE("make_synthetic contracts") {
  const auto d = make_synthetic({.num_classes = 4, .per_class = 10, .image_side = 8, .seed = 1});
  CHECK(d.size() == 40);
  CHECK(d.images.shape() == Shape{40, 1, 8, 8});
  std::vector<int> counts(4, 0);
  for (auto l : d.labels) ++counts[static_cast<std::size_t>(l)];
  CHECK(counts == std::vector<int>{10, 10, 10, 10});
  CHECK_NOTHROW(d.validate());

  const auto again = make_synthetic({.num_classes = 4, .per_class = 10, .image_side = 8, .seed = 1});
  CHECK(d.images == again.images);
  CHECK(d.labels == again.labels);
  const auto other = make_synthetic({.num_classes = 4, .per_class = 10, .image_side = 8, .seed = 2});
  CHECK_FALSE(d.images == other.images);

  const auto clean = make_synthetic({.num_classes = 4, .per_class = 3, .image_side = 8, .seed = 1, .noise = 0.0});
  const std::size_t px = clean.image_size();
  for (std::size_t i = 0; i < clean.size(); ++i)
    for (std::size_t j = 0; j < clean.size(); ++j) {
      bool same = true;
      for (std::size_t p = 0; p < px; ++p) same &= clean.images[i * px + p] == clean.images[j * px + p];
      CHECK(same == (clean.labels[i] == clean.labels[j]));
    }

  CHECK_THROWS(make_synthetic({.num_classes = 1}));
  CHECK_THROWS(make_synthetic({.num_classes = 4, .per_class = 2, .image_side = 3}));
}

TEST_CASE("inject_label_noise counts and semantics") {
  const auto d = make_synthetic({.num_classes = 4, .per_class = 25, .image_side = 4, .seed = 3});
  auto changed = [&](const Dataset& n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < d.size(); ++i) c += n.labels[i] != d.labels[i];
    return c;
  };
  const auto p0 = inject_label_noise(d, {0.0, 5});
  CHECK(p0.labels == d.labels);
  const auto p1 = inject_label_noise(d, {1.0, 5});
  CHECK(changed(p1) == d.size());
  CHECK(p1.images == d.images);
  const auto half = inject_label_noise(d, {0.5, 5});
  CHECK(changed(half) == 50);
  CHECK(half.images == d.images);
  for (double p : {0.1, 0.25, 0.33, 0.9}) {
    CHECK(changed(inject_label_noise(d, {p, 11})) == static_cast<std::size_t>(std::llround(p * 100)));
  }
  CHECK(inject_label_noise(d, {0.3, 7}).labels == inject_label_noise(d, {0.3, 7}).labels);
  CHECK_THROWS(inject_label_noise(d, {1.5, 0}));
}

TEST_CASE("split is a deterministic 5:1 partition") {
  const auto d = make_synthetic({.num_classes = 4, .per_class = 30, .image_side = 4, .seed = 3});
  const auto s = split(d, 17);
  CHECK(s.test.size() == 20);
  CHECK(s.train.size() == 100);
  const auto s2 = split(d, 17);
  CHECK(s.train.images == s2.train.images);
  CHECK(fingerprint(s.test) == fingerprint(s2.test));
  CHECK(fingerprint(s.test) != fingerprint(s.train));
}

TEST_CASE("resize preserves constant images and range") {
  Dataset d;
  d.name = "flat";
  d.num_classes = 1;
  d.images = Tensor({1, 1, 28, 28}, 0.4f);
  d.labels = {0};
  const auto r = resize(d, 16);
  CHECK(r.images.shape() == Shape{1, 1, 16, 16});
  for (auto v : r.images.values()) CHECK(v == doctest::Approx(0.4f));
}
