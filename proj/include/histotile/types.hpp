#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace histotile {

enum class BinaryLabel { benign, malign };

enum class TumorSubtype {
  adenosis,
  fibroadenoma,
  tubular_adenoma,
  phyllodes_tumor,
  ductal_carcinoma,
  lobular_carcinoma,
  mucinous_carcinoma,
  papillary_carcinoma,
};

/// The eight CRC tissue structures, in the order filters add them to the relevant set.
enum class Structure { tumor, stroma, complex, lympho, debris, mucosa, adipose, empty };

inline constexpr std::array<TumorSubtype, 8> kAllSubtypes = {
    TumorSubtype::adenosis,          TumorSubtype::fibroadenoma,
    TumorSubtype::tubular_adenoma,   TumorSubtype::phyllodes_tumor,
    TumorSubtype::ductal_carcinoma,  TumorSubtype::lobular_carcinoma,
    TumorSubtype::mucinous_carcinoma, TumorSubtype::papillary_carcinoma};

inline constexpr std::array<Structure, 8> kAllStructures = {
    Structure::tumor,  Structure::stroma,  Structure::complex, Structure::lympho,
    Structure::debris, Structure::mucosa,  Structure::adipose, Structure::empty};

inline constexpr std::array<int, 4> kMagnifications = {40, 100, 200, 400};

std::string_view to_string(BinaryLabel label);
std::string_view to_string(TumorSubtype subtype);
std::string_view to_string(Structure structure);
/// Two-letter code used in the filter table (T, ST, C, L, D, M, A, E).
std::string_view short_code(Structure structure);

std::optional<BinaryLabel> parse_binary_label(std::string_view text);
/// Accepts the canonical names plus common spellings ("tubular-adenoma", "TubularAdenoma").
std::optional<TumorSubtype> parse_subtype(std::string_view text);
/// Accepts canonical names and Kather-style directory names such as "01_TUMOR" or "07_ADIPOSE".
std::optional<Structure> parse_structure(std::string_view text);
/// Accepts "40", "40X", "40x".
std::optional<int> parse_magnification(std::string_view text);

/// Four benign and four malign subtypes.
BinaryLabel binary_label_of(TumorSubtype subtype);

inline int sign_of(BinaryLabel label) { return label == BinaryLabel::malign ? +1 : -1; }

/// Identifies one patch (or one whole tile, col=row=0) in feature files.
struct Provenance {
  std::string patient_id;
  std::string image_id;
  int col = 0;
  int row = 0;

  auto operator<=>(const Provenance&) const = default;
};

}  // namespace histotile
