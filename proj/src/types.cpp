#include "histotile/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <string>

namespace histotile {
namespace {

// Lowercase, drop a leading "NN_" ordinal and every non-alphanumeric character.
std::string normalize(std::string_view text) {
  std::size_t start = 0;
  while (start < text.size() && std::isdigit(static_cast<unsigned char>(text[start]))) ++start;
  if (start > 0 && start < text.size() && (text[start] == '_' || text[start] == '-')) {
    text.remove_prefix(start + 1);
  }
  std::string out;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::benign ? "benign" : "malign";
}

std::string_view to_string(TumorSubtype subtype) {
  switch (subtype) {
    case TumorSubtype::adenosis: return "adenosis";
    case TumorSubtype::fibroadenoma: return "fibroadenoma";
    case TumorSubtype::tubular_adenoma: return "tubular_adenoma";
    case TumorSubtype::phyllodes_tumor: return "phyllodes_tumor";
    case TumorSubtype::ductal_carcinoma: return "ductal_carcinoma";
    case TumorSubtype::lobular_carcinoma: return "lobular_carcinoma";
    case TumorSubtype::mucinous_carcinoma: return "mucinous_carcinoma";
    case TumorSubtype::papillary_carcinoma: return "papillary_carcinoma";
  }
  return "?";
}

std::string_view to_string(Structure structure) {
  switch (structure) {
    case Structure::tumor: return "tumor";
    case Structure::stroma: return "stroma";
    case Structure::complex: return "complex";
    case Structure::lympho: return "lympho";
    case Structure::debris: return "debris";
    case Structure::mucosa: return "mucosa";
    case Structure::adipose: return "adipose";
    case Structure::empty: return "empty";
  }
  return "?";
}

std::string_view short_code(Structure structure) {
  static constexpr std::string_view codes[] = {"T", "ST", "C", "L", "D", "M", "A", "E"};
  return codes[static_cast<int>(structure)];
}

std::optional<BinaryLabel> parse_binary_label(std::string_view text) {
  const std::string n = normalize(text);
  if (n == "benign" || n == "b") return BinaryLabel::benign;
  if (n == "malign" || n == "malignant" || n == "m") return BinaryLabel::malign;
  return std::nullopt;
}

std::optional<TumorSubtype> parse_subtype(std::string_view text) {
  const std::string n = normalize(text);
  for (TumorSubtype s : kAllSubtypes) {
    if (normalize(to_string(s)) == n) return s;
  }
  if (n == "phyllodes") return TumorSubtype::phyllodes_tumor;
  if (n == "tubularadenoma" || n == "ta") return TumorSubtype::tubular_adenoma;
  return std::nullopt;
}

std::optional<Structure> parse_structure(std::string_view text) {
  const std::string n = normalize(text);
  for (Structure s : kAllStructures) {
    if (n == to_string(s)) return s;
  }
  if (n == "lymphoid" || n == "lymphocytes" || n == "immune") return Structure::lympho;
  if (n == "background" || n == "emptybackground") return Structure::empty;
  if (n == "complexstroma") return Structure::complex;
  if (n == "adipose" || n == "fat") return Structure::adipose;
  return std::nullopt;
}

std::optional<int> parse_magnification(std::string_view text) {
  if (!text.empty() && (text.back() == 'X' || text.back() == 'x')) text.remove_suffix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  if (std::find(kMagnifications.begin(), kMagnifications.end(), value) == kMagnifications.end()) {
    return std::nullopt;
  }
  return value;
}

BinaryLabel binary_label_of(TumorSubtype subtype) {
  return static_cast<int>(subtype) < 4 ? BinaryLabel::benign : BinaryLabel::malign;
}

}  // namespace histotile
