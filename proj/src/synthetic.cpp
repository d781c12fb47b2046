#include <algorithm>
#include <cmath>
#include <cstdio>
#include <system_error>

#include "histotile/dataset.hpp"
#include "histotile/error.hpp"
#include "histotile/image_io.hpp"
#include "histotile/raster.hpp"
#include "histotile/seed.hpp"

namespace histotile {
namespace {

namespace fs = std::filesystem;

struct Rgb {
  double r, g, b;
};

std::uint8_t clamp8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void put(Raster& img, int x, int y, Rgb c, double noise, Rng& rng) {
  const double n = noise > 0 ? noise * rng.normal() : 0.0;
  img.at(x, y, 0) = clamp8(c.r + n);
  img.at(x, y, 1) = clamp8(c.g + n);
  img.at(x, y, 2) = clamp8(c.b + n);
}

void fill(Raster& img, Rgb c, double noise, Rng& rng) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) put(img, x, y, c, noise, rng);
}

void disk(Raster& img, double cx, double cy, double r, Rgb c, double noise, Rng& rng) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(cx + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(cy + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) put(img, x, y, c, noise, rng);
    }
  }
}

// Scatters disks until the expected covered fraction of the area reaches `density`.
void blobs(Raster& img, double density, double r_lo, double r_hi, Rgb c, double noise, Rng& rng,
           int x_lo = 0, int x_hi = -1) {
  if (x_hi < 0) x_hi = img.width();
  const double area = static_cast<double>(x_hi - x_lo) * img.height();
  const double mean_r = 0.5 * (r_lo + r_hi);
  const auto count = static_cast<long>(std::lround(density * area / (3.14159265358979 * mean_r * mean_r)));
  for (long i = 0; i < count; ++i) {
    disk(img, rng.uniform(x_lo, x_hi), rng.uniform(0, img.height()), rng.uniform(r_lo, r_hi), c,
         noise, rng);
  }
}

void stripes(Raster& img, double period, double width, Rgb c, double noise, Rng& rng) {
  const double phase = rng.uniform(0, period);
  const double wobble = rng.uniform(2, 6);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double t = std::fmod(y + phase + wobble * std::sin(x / 9.0), period);
      if (t < width) put(img, x, y, c, noise, rng);
    }
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create directory " + dir.string());
}

constexpr Rgb kEosin{232, 170, 200};
constexpr Rgb kHematoxylin{95, 55, 140};
constexpr Rgb kGlass{244, 242, 245};

Raster breakhis_image(int width, int height, double density, Rng& rng) {
  Raster img(width, height, 3);
  fill(img, kEosin, 9.0, rng);
  int tissue_lo = 0, tissue_hi = width;
  // Half of the images carry an empty glass margin on one side.
  if (rng.uniform() < 0.5) {
    const int margin = static_cast<int>(rng.uniform(0.1, 0.25) * width);
    const bool left = rng.uniform() < 0.5;
    const int x0 = left ? 0 : width - margin;
    for (int y = 0; y < height; ++y)
      for (int x = x0; x < x0 + margin; ++x) put(img, x, y, kGlass, 3.0, rng);
    (left ? tissue_lo : tissue_hi) = left ? margin : width - margin;
  }
  blobs(img, density, 3.0, 6.0, kHematoxylin, 12.0, rng, tissue_lo, tissue_hi);
  return img;
}

Raster crc_tile(Structure s, int side, Rng& rng) {
  Raster img(side, side, 3);
  switch (s) {
    case Structure::tumor:
      fill(img, {200, 140, 190}, 10, rng);
      blobs(img, 0.55, 4, 8, kHematoxylin, 12, rng);
      break;
    case Structure::stroma:
      fill(img, kEosin, 6, rng);
      stripes(img, 9, 3, {200, 110, 160}, 8, rng);
      break;
    case Structure::complex:
      fill(img, kEosin, 8, rng);
      stripes(img, 14, 4, {200, 110, 160}, 8, rng);
      blobs(img, 0.12, 3, 5, kHematoxylin, 12, rng);
      break;
    case Structure::lympho:
      fill(img, {215, 170, 210}, 8, rng);
      blobs(img, 0.60, 1.5, 2.5, {60, 30, 110}, 10, rng);
      break;
    case Structure::debris:
      fill(img, {225, 175, 195}, 25, rng);
      blobs(img, 0.25, 0.5, 1.5, {150, 90, 150}, 30, rng);
      break;
    case Structure::mucosa:
      fill(img, {215, 185, 215}, 6, rng);
      blobs(img, 0.30, 7, 11, {170, 120, 190}, 6, rng);
      blobs(img, 0.05, 2, 3, kHematoxylin, 10, rng);
      break;
    case Structure::adipose: {
      fill(img, {246, 240, 244}, 2, rng);
      const int cell = 24 + static_cast<int>(rng.below(10));
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          if (x % cell < 2 || y % cell < 2) put(img, x, y, {215, 150, 185}, 6, rng);
      break;
    }
    case Structure::empty:
      fill(img, kGlass, 2.5, rng);
      break;
  }
  return img;
}

}  // namespace

CorpusManifest generate_synthetic_corpus(const fs::path& root, const SyntheticSpec& spec,
                                         std::uint64_t seed) {
  if (spec.patients_per_class < 1 || spec.images_per_patient < 1 || spec.width < 1 ||
      spec.height < 1 || spec.magnifications.empty()) {
    throw Error("synthetic corpus needs positive sizes and at least one magnification");
  }
  CorpusManifest manifest{CorpusKind::synthetic, {}, {}};
  for (BinaryLabel cls : {BinaryLabel::benign, BinaryLabel::malign}) {
    for (int p = 0; p < spec.patients_per_class; ++p) {
      const TumorSubtype subtype =
          kAllSubtypes[static_cast<std::size_t>((cls == BinaryLabel::benign ? 0 : 4) + p % 4)];
      char pid[32];
      std::snprintf(pid, sizeof pid, "%s%02d", cls == BinaryLabel::benign ? "B" : "M", p + 1);
      for (int mag : spec.magnifications) {
        const fs::path dir = root / std::string(to_string(cls)) / std::string(to_string(subtype)) /
                             pid / (std::to_string(mag) + "X");
        ensure_dir(dir);
        manifest.magnifications.insert(mag);
        for (int i = 0; i < spec.images_per_patient; ++i) {
          char iid[64];
          std::snprintf(iid, sizeof iid, "%s-%d-%03d", pid, mag, i + 1);
          Rng rng(derive_seed(seed, "synthetic-image", fnv1a64(iid)));
          const double density =
              cls == BinaryLabel::benign ? spec.benign_density : spec.malign_density;
          const fs::path file = dir / (std::string(iid) + ".png");
          write_png(file, breakhis_image(spec.width, spec.height, density, rng));
          manifest.entries.push_back({file, pid, iid, mag, subtype});
        }
      }
    }
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ImageEntry& a, const ImageEntry& b) { return a.path < b.path; });
  return manifest;
}

CorpusManifest generate_synthetic_crc(const fs::path& root, const SyntheticCrcSpec& spec,
                                      std::uint64_t seed) {
  if (spec.images_per_structure < 1 || spec.side < 1) throw Error("synthetic CRC needs positive sizes");
  CorpusManifest manifest{CorpusKind::crc_like, {}, {}};
  for (std::size_t s = 0; s < kAllStructures.size(); ++s) {
    const Structure structure = kAllStructures[s];
    char dname[32];
    std::snprintf(dname, sizeof dname, "%02zu_%s", s + 1, std::string(to_string(structure)).c_str());
    const fs::path dir = root / dname;
    ensure_dir(dir);
    for (int i = 0; i < spec.images_per_structure; ++i) {
      char iid[64];
      std::snprintf(iid, sizeof iid, "%s_%04d", std::string(short_code(structure)).c_str(), i + 1);
      Rng rng(derive_seed(seed, "synthetic-crc", fnv1a64(iid)));
      const Raster tile = crc_tile(structure, spec.side, rng);
      const fs::path file = dir / (std::string(iid) + (spec.tiff ? ".tif" : ".png"));
      if (spec.tiff) {
        write_tiff(file, tile);
      } else {
        write_png(file, tile);
      }
      manifest.entries.push_back({file, std::string(to_string(structure)), iid, 0, structure});
    }
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ImageEntry& a, const ImageEntry& b) { return a.path < b.path; });
  return manifest;
}

}  // namespace histotile
