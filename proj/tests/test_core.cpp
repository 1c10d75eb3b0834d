#include <doctest.h>

#include <functional>

#include "pnw/core.hpp"

using namespace pnw;

namespace {

PnwArchitecture make_arch(int n_labels, std::vector<std::vector<int>> classes,
                          int groups, int features, int hidden, Index dims) {
  PnwArchitecture arch;
  arch.n_labels = n_labels;
  arch.partition.classes = std::move(classes);
  arch.n_groups = groups;
  arch.hidden_nodes = hidden;
  for (int k = 0; k < features; ++k) {
    FeatureSpec spec;
    spec.output_dims = dims;
    arch.feature_specs.push_back(spec);
  }
  return arch;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ParseError;
}

}  // namespace

TEST_CASE("two-class 11-label split validates with output widths 6 and 7") {
  auto arch = make_arch(11, {{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10, 11}}, 4, 4, 256, 900);
  CHECK_NOTHROW(validate_architecture(arch));
  CHECK(arch.output_width(0) == 6);
  CHECK(arch.output_width(1) == 7);
  CHECK(arch.label_space().expat_id() == 12);
  CHECK(arch.label_space().has_expat);
  CHECK(arch.total_anns() == 2 * 4 * 4);

  auto map0 = arch.label_map(0);
  CHECK(map0 == std::vector<int>{1, 2, 3, 4, 5, 12});
  auto map1 = arch.label_map(1);
  CHECK(map1.back() == 12);
}

TEST_CASE("single-class architecture has no expat node") {
  auto arch = make_arch(10, {{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}}, 1, 1, 40, 784);
  CHECK_NOTHROW(validate_architecture(arch));
  CHECK(arch.output_width(0) == 10);
  CHECK_FALSE(arch.label_space().has_expat);
  CHECK(arch.label_map(0) == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
}

TEST_CASE("validate_architecture rejects bad partitions") {
  CHECK(code_of([] {
          validate_architecture(make_arch(4, {{1, 2}, {2, 3, 4}}, 1, 1, 8, 16));
        }) == ErrorCode::PartitionOverlap);
  CHECK(code_of([] {
          validate_architecture(make_arch(4, {{1, 2}, {4}}, 1, 1, 8, 16));
        }) == ErrorCode::PartitionIncomplete);
  CHECK(code_of([] {
          validate_architecture(make_arch(2, {{1}, {2}, {}}, 1, 1, 8, 16));
        }) == ErrorCode::TooManyClasses);
  CHECK(code_of([] {
          validate_architecture(make_arch(3, {{1}, {2}, {3}, {1}}, 1, 1, 8, 16));
        }) == ErrorCode::TooManyClasses);
  CHECK(code_of([] {
          validate_architecture(make_arch(4, {{1, 2, 3, 4}}, 0, 1, 8, 16));
        }) == ErrorCode::ZeroDimension);
  CHECK(code_of([] {
          validate_architecture(make_arch(4, {{1, 2, 3, 4}}, 1, 1, 0, 16));
        }) == ErrorCode::ZeroDimension);
  CHECK(code_of([] {
          validate_architecture(make_arch(4, {{1, 2, 3, 4}}, 1, 1, 8, 0));
        }) == ErrorCode::ZeroDimension);
  CHECK(code_of([] {
          validate_architecture(make_arch(4, {{1, 2, 3, 5}}, 1, 1, 8, 16));
        }) == ErrorCode::LabelRangeError);
}

TEST_CASE("class_of_label follows the partition") {
  auto arch = make_arch(5, {{2, 4}, {1, 3, 5}}, 1, 1, 8, 16);
  validate_architecture(arch);
  CHECK(class_of_label(arch, 2) == 0);
  CHECK(class_of_label(arch, 4) == 0);
  CHECK(class_of_label(arch, 1) == 1);
  CHECK(class_of_label(arch, 5) == 1);
}

TEST_CASE("param_count matches the published single-hidden-layer counts") {
  CHECK(param_count(784, 20, 10) == 15910);
  CHECK(param_count(784, 40, 10) == 31810);
  CHECK(param_count(784, 60, 10) == 47710);
  CHECK(param_count(784, 80, 10) == 63610);
  CHECK(param_count(784, 100, 10) == 79510);
  CHECK(param_count(1, 1, 1) == 4);
  CHECK_THROWS_AS(param_count(0, 1, 1), Error);
}

TEST_CASE("seeded rng reproduces its stream exactly") {
  SeededRng a(12345);
  SeededRng b(12345);
  for (int i = 0; i < 1'000'000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("seeded rng stream is the standard mt19937_64 sequence") {
  // Pinned first outputs of the standard-mandated engine; a platform that
  // disagrees here breaks every reproducibility promise in the project.
  SeededRng rng(42);
  CHECK(rng.next_u64() == 13930160852258120406ULL);
  CHECK(rng.next_u64() == 11788048577503494824ULL);
}

TEST_CASE("uniform_index stays in range and covers the range") {
  SeededRng rng(7);
  std::vector<int> seen(5, 0);
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.uniform_index(5);
    REQUIRE(v < 5);
    ++seen[v];
  }
  for (int count : seen) CHECK(count > 100);
}

TEST_CASE("derived seeds differ per stream and index") {
  const auto a = derive_seed(1, seed_stream::kAnnInit, 0);
  const auto b = derive_seed(1, seed_stream::kAnnInit, 1);
  const auto c = derive_seed(1, seed_stream::kSgdShuffle, 0);
  CHECK(a != b);
  CHECK(a != c);
  CHECK(derive_seed(1, seed_stream::kAnnInit, 0) == a);
}

TEST_CASE("dataset construction enforces its invariants") {
  const ImageShape shape{ImageKind::Gray2D, 2, 2, 1};
  std::vector<std::uint8_t> px(8, 0);
  px[0] = 1;  // make the two images distinct
  CHECK_NOTHROW(Dataset(shape, px, {1, 2}));

  CHECK_THROWS_AS(Dataset(shape, px, {1}), Error);            // count mismatch
  CHECK_THROWS_AS(Dataset(shape, px, {0, 1}), Error);         // 0-based label
  CHECK_THROWS_AS(Dataset(shape, px, {1, 2}, {3, 3}), Error); // dup ids

  Dataset ds(shape, px, {1, 2}, {10, 20});
  CHECK(ds.id(0) == 10);
  CHECK(ds.id(1) == 20);
  Dataset filtered = ds.without_ids({10});
  CHECK(filtered.size() == 1);
  CHECK(filtered.id(0) == 20);
}
