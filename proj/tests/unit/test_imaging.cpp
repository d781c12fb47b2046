#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "../oracles/otsu_oracle.hpp"
#include "../support.hpp"
#include "histotile/error.hpp"
#include "histotile/imaging.hpp"

using namespace histotile;

TEST_CASE("tile offsets for the 700x460 geometry") {
  CHECK(tile_offsets(700) == std::vector<int>{0, 138, 275, 413, 550});
  CHECK(tile_offsets(460) == std::vector<int>{0, 155, 310});
  CHECK(tile_offsets(150) == std::vector<int>{0});
  const auto xs = tile_offsets(700);
  std::vector<int> overlaps;
  for (std::size_t i = 1; i < xs.size(); ++i) overlaps.push_back(xs[i - 1] + kPatchSide - xs[i]);
  CHECK(overlaps == std::vector<int>{12, 13, 12, 13});
}

TEST_CASE("tile offsets cover the full extent") {
  for (int extent = 150; extent <= 1200; extent += 7) {
    const auto off = tile_offsets(extent);
    REQUIRE(!off.empty());
    CHECK(off.front() == 0);
    CHECK(std::is_sorted(off.begin(), off.end()));
    if (off.size() > 1) CHECK(off.back() + kPatchSide == extent);
    const int expected = std::max(1, (2 * extent + kPatchSide) / (2 * kPatchSide));
    CHECK(static_cast<int>(off.size()) == expected);
  }
  CHECK_THROWS_AS(tile_offsets(149), Error);
}

TEST_CASE("tessellate crops exactly and in row-major order") {
  const Raster img = testsupport::random_raster(700, 460, 3, 5);
  const PatchSource src{"P1", "img", 200, BinaryLabel::malign};
  const auto patches = tessellate(img, src);
  REQUIRE(patches.size() == 15);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    CHECK(p.origin.row == static_cast<int>(i / 5));
    CHECK(p.origin.col == static_cast<int>(i % 5));
    CHECK(p.pixels == img.crop(p.origin.x, p.origin.y, 150, 150));
    CHECK(p.origin.x + 150 <= 700);
    CHECK(p.origin.y + 150 <= 460);
    CHECK(p.provenance() == Provenance{"P1", "img", p.origin.col, p.origin.row});
  }
  CHECK(tessellate(testsupport::random_raster(150, 150, 3, 1), src).size() == 1);
  CHECK_THROWS_AS(tessellate(testsupport::random_raster(100, 300, 3, 1), src), Error);
}

TEST_CASE("grayscale weights") {
  Raster rgb(3, 1, 3, {255, 255, 255, 0, 0, 0, 255, 0, 0});
  const Raster g = to_grayscale(rgb);
  CHECK(g.channels() == 1);
  CHECK(g.at(0, 0) == 255);
  CHECK(g.at(1, 0) == 0);
  CHECK(g.at(2, 0) == 76);
}

TEST_CASE("otsu degenerate and two-level cases") {
  Raster constant(4, 4, 1, std::vector<std::uint8_t>(16, 100));
  CHECK(otsu_threshold(constant) == 0);
  std::vector<std::uint8_t> half(16, 0);
  std::fill(half.begin() + 8, half.end(), 255);
  CHECK(otsu_threshold(Raster(4, 4, 1, half)) == 0);
  std::vector<std::uint8_t> mixed(12, 10);
  mixed.insert(mixed.end(), 4, 200);
  const Raster m(4, 4, 1, mixed);
  CHECK(otsu_threshold(m) == oracle::otsu(mixed));
  const BinaryMask above = binarize(m, static_cast<std::uint8_t>(otsu_threshold(m) + 1), 255);
  CHECK(above.count() == 4);
}

TEST_CASE("otsu matches the exhaustive oracle on random rasters") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const int levels = s % 3 == 0 ? 4 : 256;
    const Raster r = testsupport::random_raster(6 + static_cast<int>(s % 5), 5, 1, 1000 + s, levels);
    CHECK(otsu_threshold(r) == oracle::otsu(testsupport::bytes_of(r)));
  }
}

TEST_CASE("binarize is inclusive and monotone") {
  std::vector<std::uint8_t> ramp(256);
  for (int i = 0; i < 256; ++i) ramp[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  const Raster r(16, 16, 1, ramp);
  CHECK(binarize(r, 0, 255).count() == 256);
  CHECK(binarize(r, 100, 150).count() == 51);
  Raster no255(2, 1, 1, {3, 9});
  CHECK(binarize(no255, 255, 255).count() == 0);

  const Raster rnd = testsupport::random_raster(12, 12, 1, 77);
  for (int lo = 0; lo < 256; lo += 37) {
    for (int hi = lo; hi < 256; hi += 41) {
      const BinaryMask narrow = binarize(rnd, static_cast<std::uint8_t>(lo), static_cast<std::uint8_t>(hi));
      const BinaryMask wide = binarize(rnd, static_cast<std::uint8_t>(lo / 2), static_cast<std::uint8_t>(std::min(255, hi + 20)));
      for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 12; ++x) {
          if (narrow.test(x, y)) CHECK(wide.test(x, y));
        }
      }
    }
  }
}

TEST_CASE("complement and counts") {
  BinaryMask m(3, 2);
  m.set(0, 0);
  m.set(2, 1);
  CHECK(m.count() == 2);
  CHECK(m.complement().count() == 4);
  CHECK(m.complement().complement() == m);
}
