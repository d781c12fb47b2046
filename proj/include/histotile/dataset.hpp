#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "histotile/types.hpp"

namespace histotile {

enum class CorpusKind { breakhis_like, crc_like, synthetic };

std::string_view to_string(CorpusKind kind);
std::optional<CorpusKind> parse_corpus_kind(std::string_view text);

struct ImageEntry {
  std::filesystem::path path;
  std::string patient_id;
  std::string image_id;
  int magnification = 0;  // 0 for crc-like entries
  std::variant<TumorSubtype, Structure> label;

  /// Defined for breakhis-like and synthetic entries only.
  std::optional<BinaryLabel> binary_label() const;
  std::optional<Structure> structure() const;

  bool operator==(const ImageEntry&) const = default;
};

struct CorpusManifest {
  CorpusKind kind = CorpusKind::breakhis_like;
  std::vector<ImageEntry> entries;  // sorted by path
  std::set<int> magnifications;

  std::set<std::string> patients() const;
  /// patient -> binary label; throws if a patient carries both labels.
  std::map<std::string, BinaryLabel> patient_labels() const;
  CorpusManifest with_magnification(int magnification) const;

  bool operator==(const CorpusManifest&) const = default;
};

/// Layouts:
///   breakhis-like / synthetic: root/<benign|malign>/<subtype>/<patient>/<mag>/<images>
///   crc-like:                  root/<structure>/<images>
/// Throws InputError for an unreadable root, unknown or ambiguous label
/// directories, or when no decodable image is found.
CorpusManifest scan_corpus(const std::filesystem::path& root, CorpusKind kind);

enum class Side { train, test };

struct FoldAssignment {
  int fold_index = 1;  // 1..5
  std::set<std::string> train_patients;
  std::set<std::string> test_patients;

  Side side_of(const std::string& patient) const;
  bool operator==(const FoldAssignment&) const = default;
};

inline constexpr int kFoldCount = 5;
inline constexpr double kTestPatientFraction = 0.3;

/// Five patient-wise folds. With a predefined file the folds are reproduced
/// exactly; otherwise each fold is an independent seeded split with about 30 %
/// of the patients on the test side, stratified by binary label.
std::vector<FoldAssignment> make_folds(const CorpusManifest& manifest,
                                       const std::optional<std::filesystem::path>& predefined,
                                       std::uint64_t seed);

/// Fold file: UTF-8 lines `fold,patient_id,train|test`.
std::vector<FoldAssignment> read_fold_file(const std::filesystem::path& path);
void write_fold_file(const std::filesystem::path& path, const std::vector<FoldAssignment>& folds);

struct SyntheticSpec {
  int patients_per_class = 4;
  int images_per_patient = 3;
  int width = 700;
  int height = 460;
  std::vector<int> magnifications = {40, 100, 200, 400};
  /// Fraction of the tissue area covered by nuclei-like blobs.
  double benign_density = 0.10;
  double malign_density = 0.40;
};

/// Writes a breakhis-layout corpus of PNG images whose classes differ only in
/// blob density. Byte-identical output for a given seed.
CorpusManifest generate_synthetic_corpus(const std::filesystem::path& root,
                                         const SyntheticSpec& spec, std::uint64_t seed);

struct SyntheticCrcSpec {
  int images_per_structure = 40;
  int side = 150;
  bool tiff = false;
};

/// Writes a crc-layout corpus with one visually distinct texture per structure.
CorpusManifest generate_synthetic_crc(const std::filesystem::path& root,
                                      const SyntheticCrcSpec& spec, std::uint64_t seed);

}  // namespace histotile
