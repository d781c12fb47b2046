#include "histotile/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "histotile/error.hpp"
#include "histotile/imaging.hpp"

namespace histotile {

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::pftas: return "pftas";
    case FeatureKind::deep: return "deep";
    case FeatureKind::deep_pca: return "deep-pca";
  }
  return "?";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view text) {
  if (text == "pftas") return FeatureKind::pftas;
  if (text == "deep") return FeatureKind::deep;
  if (text == "deep-pca") return FeatureKind::deep_pca;
  return std::nullopt;
}

FeatureMatrix::FeatureMatrix(FeatureKind kind, std::size_t cols) : kind_(kind), values_(0, cols) {}

void FeatureMatrix::add_row(const Provenance& key, std::span<const double> values) {
  if (values.size() != values_.cols) {
    throw Error("feature row for " + key.image_id + " has " + std::to_string(values.size()) +
                " values, expected " + std::to_string(values_.cols));
  }
  if (!index_.emplace(key, keys_.size()).second) {
    throw Error("duplicate provenance key " + key.patient_id + "/" + key.image_id + "/" +
                std::to_string(key.col) + "," + std::to_string(key.row));
  }
  keys_.push_back(key);
  values_.data.insert(values_.data.end(), values.begin(), values.end());
  ++values_.rows;
}

std::optional<std::size_t> FeatureMatrix::find(const Provenance& key) const {
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  return std::nullopt;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
  FeatureMatrix out(kind_, cols());
  out.values_.data.reserve(rows.size() * cols());
  for (std::size_t r : rows) out.add_row(keys_.at(r), row(r));
  return out;
}

TasHistogram tas_histogram(const BinaryMask& mask) {
  TasHistogram hist{};
  const int w = mask.width();
  const int h = mask.height();
  std::size_t total = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.test(x, y)) continue;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          if ((dx == 0 && dy == 0) || xx < 0 || xx >= w) continue;
          n += mask.test(xx, yy) ? 1 : 0;
        }
      }
      hist[static_cast<std::size_t>(n)] += 1.0;
      ++total;
    }
  }
  if (total > 0) {
    for (double& v : hist) v /= static_cast<double>(total);
  }
  return hist;
}

namespace {

using i128 = __int128;

// Largest integer m with m <= mu + sign * sigma + 1/2, where mu = s / n and
// sigma^2 = (n q - s^2) / n^2. Exact, so half-way ties always round up.
bool at_most(long long m, i128 s, i128 q, i128 n, int sign) {
  const i128 a = 2 * n * m - 2 * s - n;
  const i128 d = 4 * (n * q - s * s);
  return sign > 0 ? (a <= 0 || a * a <= d) : (a <= 0 && a * a >= d);
}

std::uint8_t bound_level(std::uint64_t s, std::uint64_t q, std::uint64_t n, int sign) {
  if (n == 0) return 0;
  const double mu = static_cast<double>(s) / static_cast<double>(n);
  const double var = std::max(0.0, static_cast<double>(q) / static_cast<double>(n) - mu * mu);
  auto m = static_cast<long long>(std::floor(mu + sign * std::sqrt(var) + 0.5));
  while (at_most(m + 1, s, q, n, sign)) ++m;
  while (!at_most(m, s, q, n, sign)) --m;
  return static_cast<std::uint8_t>(std::clamp<long long>(m, 0, 255));
}

}  // namespace

std::vector<double> pftas(const Raster& rgb) {
  if (rgb.channels() != 3) throw Error("pftas expects an RGB raster");
  std::vector<double> out;
  out.reserve(kPftasLength);
  for (int c = 0; c < 3; ++c) {
    const Raster ch = rgb.channel(c);
    const std::uint8_t t = otsu_threshold(ch);

    std::uint64_t n = 0, sum = 0, sum_sq = 0;
    for (std::uint8_t v : ch.data()) {
      if (v > t) {
        ++n;
        sum += v;
        sum_sq += std::uint64_t{v} * v;
      }
    }
    // Population mean and deviation of the pixels above the threshold; both 0 when there are none.
    const std::uint8_t lo = bound_level(sum, sum_sq, n, -1);
    const std::uint8_t hi = bound_level(sum, sum_sq, n, +1);

    for (auto [a, b] : {std::pair{lo, hi}, std::pair{lo, std::uint8_t{255}},
                        std::pair{hi, std::uint8_t{255}}}) {
      const BinaryMask mask = binarize(ch, a, b);
      for (const BinaryMask& m : {mask, mask.complement()}) {
        const TasHistogram hist = tas_histogram(m);
        out.insert(out.end(), hist.begin(), hist.end());
      }
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& value) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

FeatureMatrix read_feature_csv(const std::filesystem::path& path, FeatureKind kind,
                               std::optional<std::size_t> required_width) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open feature file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty feature file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 5 || header[0] != "patient_id" || header[1] != "image_id" ||
      header[2] != "col" || header[3] != "row" || header[4] != "f0") {
    throw InputError(path.string() + ": header must start with patient_id,image_id,col,row,f0");
  }
  const std::size_t width = header.size() - 4;
  if (required_width && width != *required_width) {
    throw InputError(path.string() + ": header declares " + std::to_string(width) +
                     " features, expected " + std::to_string(*required_width));
  }

  FeatureMatrix out(kind, width);
  std::vector<double> values(width);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    const std::string where = path.string() + " row " + std::to_string(line_no);
    if (fields.size() != width + 4) {
      throw InputError(where + ": " + std::to_string(fields.size() - std::min<std::size_t>(4, fields.size())) +
                       " feature values, expected " + std::to_string(width));
    }
    Provenance key{std::string(fields[0]), std::string(fields[1]), 0, 0};
    if (key.patient_id.empty() || key.image_id.empty() || !parse_number(fields[2], key.col) ||
        !parse_number(fields[3], key.row)) {
      throw InputError(where + ": malformed provenance columns");
    }
    for (std::size_t j = 0; j < width; ++j) {
      if (!parse_number(fields[j + 4], values[j]) || !std::isfinite(values[j])) {
        throw InputError(where + ": unparseable value in column f" + std::to_string(j));
      }
    }
    if (out.find(key)) throw InputError(where + ": duplicate provenance key");
    out.add_row(key, values);
  }
  return out;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& features) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write feature file " + path.string());
  out << "patient_id,image_id,col,row";
  for (std::size_t j = 0; j < features.cols(); ++j) out << ",f" << j;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const Provenance& k = features.key(i);
    out << k.patient_id << ',' << k.image_id << ',' << k.col << ',' << k.row;
    for (double v : features.row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

FeatureMatrix import_deep_features(const std::filesystem::path& path) {
  return read_feature_csv(path, FeatureKind::deep, kDeepLength);
}

}  // namespace histotile
