#include "histotile/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include "histotile/error.hpp"
#include "histotile/image_io.hpp"
#include "histotile/seed.hpp"

namespace histotile {
namespace {

namespace fs = std::filesystem;

bool hidden(const fs::path& p) { return p.filename().string().starts_with("."); }

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw InputError("cannot read directory " + dir.string() + ": " + ec.message());
  for (const auto& e : it) {
    if (hidden(e.path())) continue;
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Maps label directories, rejecting names that do not parse or that collide.
template <class Label, class Parse>
std::vector<std::pair<fs::path, Label>> label_dirs(const fs::path& dir, Parse parse,
                                                   std::string_view what) {
  std::vector<std::pair<fs::path, Label>> out;
  std::map<Label, fs::path> seen;
  for (const fs::path& child : sorted_children(dir, true)) {
    const auto label = parse(child.filename().string());
    if (!label) {
      throw InputError("unrecognized " + std::string(what) + " directory " + child.string());
    }
    if (auto [it, inserted] = seen.emplace(*label, child); !inserted) {
      throw InputError("ambiguous " + std::string(what) + " directories " +
                       it->second.string() + " and " + child.string());
    }
    out.emplace_back(child, *label);
  }
  return out;
}

struct Candidate {
  fs::path path;
  std::string patient_id;
  int magnification = 0;
  std::variant<TumorSubtype, Structure> label;
};

}  // namespace

std::string_view to_string(CorpusKind kind) {
  switch (kind) {
    case CorpusKind::breakhis_like: return "breakhis";
    case CorpusKind::crc_like: return "crc";
    case CorpusKind::synthetic: return "synthetic";
  }
  return "?";
}

std::optional<CorpusKind> parse_corpus_kind(std::string_view text) {
  if (text == "breakhis" || text == "breakhis-like") return CorpusKind::breakhis_like;
  if (text == "crc" || text == "crc-like") return CorpusKind::crc_like;
  if (text == "synthetic") return CorpusKind::synthetic;
  return std::nullopt;
}

std::optional<BinaryLabel> ImageEntry::binary_label() const {
  if (const auto* s = std::get_if<TumorSubtype>(&label)) return binary_label_of(*s);
  return std::nullopt;
}

std::optional<Structure> ImageEntry::structure() const {
  if (const auto* s = std::get_if<Structure>(&label)) return *s;
  return std::nullopt;
}

std::set<std::string> CorpusManifest::patients() const {
  std::set<std::string> out;
  for (const auto& e : entries) out.insert(e.patient_id);
  return out;
}

std::map<std::string, BinaryLabel> CorpusManifest::patient_labels() const {
  std::map<std::string, BinaryLabel> out;
  for (const auto& e : entries) {
    const auto label = e.binary_label();
    if (!label) throw Error("corpus entries carry no binary label");
    if (auto [it, inserted] = out.emplace(e.patient_id, *label); !inserted && it->second != *label) {
      throw InputError("patient " + e.patient_id + " has both benign and malign images");
    }
  }
  return out;
}

CorpusManifest CorpusManifest::with_magnification(int magnification) const {
  CorpusManifest out{kind, {}, {magnification}};
  for (const auto& e : entries) {
    if (e.magnification == magnification) out.entries.push_back(e);
  }
  return out;
}

CorpusManifest scan_corpus(const fs::path& root, CorpusKind kind) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw InputError("corpus root is not a directory: " + root.string());

  std::vector<Candidate> candidates;
  if (kind == CorpusKind::crc_like) {
    for (const auto& [dir, structure] : label_dirs<Structure>(root, parse_structure, "structure")) {
      for (const fs::path& file : sorted_children(dir, false)) {
        candidates.push_back({file, std::string(to_string(structure)), 0, structure});
      }
    }
  } else {
    for (const auto& [bdir, binary] : label_dirs<BinaryLabel>(root, parse_binary_label, "class")) {
      for (const auto& [sdir, subtype] : label_dirs<TumorSubtype>(bdir, parse_subtype, "subtype")) {
        if (binary_label_of(subtype) != binary) {
          throw InputError("subtype " + std::string(to_string(subtype)) + " filed under " +
                           std::string(to_string(binary)) + ": " + sdir.string());
        }
        for (const fs::path& pdir : sorted_children(sdir, true)) {
          for (const auto& [mdir, mag] :
               label_dirs<int>(pdir, parse_magnification, "magnification")) {
            for (const fs::path& file : sorted_children(mdir, false)) {
              candidates.push_back({file, pdir.filename().string(), mag, subtype});
            }
          }
        }
      }
    }
  }

  std::vector<std::optional<ImageInfo>> probes(candidates.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(candidates.size()); ++i) {
    probes[static_cast<std::size_t>(i)] = probe_image(candidates[static_cast<std::size_t>(i)].path);
  }

  CorpusManifest manifest{kind, {}, {}};
  std::set<std::pair<std::string, std::string>> ids;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!probes[i]) continue;
    const Candidate& c = candidates[i];
    ImageEntry entry{c.path, c.patient_id, c.path.stem().string(), c.magnification, c.label};
    if (!ids.emplace(entry.patient_id, entry.image_id).second) {
      throw InputError("duplicate image id " + entry.image_id + " for patient " + entry.patient_id);
    }
    if (kind != CorpusKind::crc_like) manifest.magnifications.insert(entry.magnification);
    manifest.entries.push_back(std::move(entry));
  }
  if (manifest.entries.empty()) throw InputError("no decodable images under " + root.string());
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ImageEntry& a, const ImageEntry& b) { return a.path < b.path; });
  if (kind != CorpusKind::crc_like) manifest.patient_labels();  // validates label purity
  return manifest;
}

Side FoldAssignment::side_of(const std::string& patient) const {
  if (train_patients.contains(patient)) return Side::train;
  if (test_patients.contains(patient)) return Side::test;
  throw Error("patient " + patient + " is not part of fold " + std::to_string(fold_index));
}

std::vector<FoldAssignment> read_fold_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open fold file " + path.string());
  std::vector<FoldAssignment> folds(kFoldCount);
  for (int f = 0; f < kFoldCount; ++f) folds[static_cast<std::size_t>(f)].fold_index = f + 1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.starts_with('#') || line.starts_with("fold,")) continue;
    std::stringstream ss(line);
    std::string fold_s, patient, side;
    if (!std::getline(ss, fold_s, ',') || !std::getline(ss, patient, ',') ||
        !std::getline(ss, side) || patient.empty()) {
      throw InputError("fold file line " + std::to_string(line_no) + ": expected fold,patient_id,side");
    }
    int fold = 0;
    try {
      fold = std::stoi(fold_s);
    } catch (const std::exception&) {
      fold = 0;
    }
    if (fold < 1 || fold > kFoldCount) {
      throw InputError("fold file line " + std::to_string(line_no) + ": fold must be 1..5");
    }
    auto& fa = folds[static_cast<std::size_t>(fold - 1)];
    if (fa.train_patients.contains(patient) || fa.test_patients.contains(patient)) {
      throw InputError("fold file line " + std::to_string(line_no) + ": patient " + patient +
                       " listed twice in fold " + fold_s);
    }
    if (side == "train") {
      fa.train_patients.insert(patient);
    } else if (side == "test") {
      fa.test_patients.insert(patient);
    } else {
      throw InputError("fold file line " + std::to_string(line_no) + ": side must be train or test");
    }
  }
  return folds;
}

void write_fold_file(const fs::path& path, const std::vector<FoldAssignment>& folds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write fold file " + path.string());
  for (const auto& f : folds) {
    for (const auto& p : f.train_patients) out << f.fold_index << ',' << p << ",train\n";
    for (const auto& p : f.test_patients) out << f.fold_index << ',' << p << ",test\n";
  }
}

std::vector<FoldAssignment> make_folds(const CorpusManifest& manifest,
                                       const std::optional<fs::path>& predefined,
                                       std::uint64_t seed) {
  if (manifest.kind == CorpusKind::crc_like) throw Error("folds are defined for breakhis-like corpora");
  const auto labels = manifest.patient_labels();

  if (predefined) {
    auto folds = read_fold_file(*predefined);
    for (const auto& f : folds) {
      for (const auto* side : {&f.train_patients, &f.test_patients}) {
        for (const auto& p : *side) {
          if (!labels.contains(p)) {
            throw InputError("fold file references unknown patient " + p);
          }
        }
      }
      for (const auto& [p, label] : labels) {
        if (!f.train_patients.contains(p) && !f.test_patients.contains(p)) {
          throw InputError("fold " + std::to_string(f.fold_index) + " does not place patient " + p);
        }
      }
    }
    return folds;
  }

  std::vector<std::string> benign, malign;
  for (const auto& [p, label] : labels) (label == BinaryLabel::benign ? benign : malign).push_back(p);
  if (benign.size() < 2 || malign.size() < 2) {
    throw InputError("patient-wise folds need at least 2 patients per class");
  }

  const std::size_t n = benign.size() + malign.size();
  const std::size_t n_test = (3 * n + 5) / 10;  // round_half_up(0.3 n)
  // Largest-remainder allocation of the test quota; ties go to the larger class, then benign.
  const std::size_t qb_num = n_test * benign.size();
  const std::size_t qm_num = n_test * malign.size();
  std::size_t qb = qb_num / n;
  std::size_t qm = qm_num / n;
  if (qb + qm < n_test) {
    const std::size_t rb = qb_num % n, rm = qm_num % n;
    const bool to_benign = rb != rm ? rb > rm : benign.size() >= malign.size();
    (to_benign ? qb : qm) += 1;
  }
  qb = std::clamp<std::size_t>(qb, 1, benign.size() - 1);
  qm = std::clamp<std::size_t>(qm, 1, malign.size() - 1);

  std::vector<FoldAssignment> folds;
  for (int f = 1; f <= kFoldCount; ++f) {
    Rng rng(derive_seed(seed, "folds", static_cast<std::uint64_t>(f)));
    FoldAssignment fa;
    fa.fold_index = f;
    for (auto [group, quota] : {std::pair{benign, qb}, std::pair{malign, qm}}) {
      rng.shuffle(group);
      for (std::size_t i = 0; i < group.size(); ++i) {
        (i < quota ? fa.test_patients : fa.train_patients).insert(group[i]);
      }
    }
    folds.push_back(std::move(fa));
  }
  return folds;
}

}  // namespace histotile
