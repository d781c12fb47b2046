#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <map>

#include "../support.hpp"
#include "histotile/dataset.hpp"
#include "histotile/error.hpp"
#include "histotile/image_io.hpp"

using namespace histotile;
namespace fs = std::filesystem;

namespace {

void put_image(const fs::path& path, std::uint64_t seed, int w = 20, int h = 16) {
  fs::create_directories(path.parent_path());
  write_png(path, testsupport::random_raster(w, h, 3, seed));
}

// root/<benign|malign>/<subtype>/<patient>/<mag>/<image>
void make_breakhis(const fs::path& root, int per_class, int images, std::vector<int> mags) {
  std::uint64_t seed = 0;
  for (int p = 0; p < 2 * per_class; ++p) {
    const bool malign = p >= per_class;
    const std::string cls = malign ? "malign" : "benign";
    const std::string subtype = malign ? "ductal_carcinoma" : "adenosis";
    const std::string pid = std::string(malign ? "M" : "B") + std::to_string(p);
    for (int m : mags) {
      for (int i = 0; i < images; ++i) {
        put_image(root / cls / subtype / pid / (std::to_string(m) + "X") /
                      (pid + "-" + std::to_string(m) + "-" + std::to_string(i) + ".png"),
                  ++seed);
      }
    }
  }
}

CorpusManifest patients_manifest(int benign, int malign) {
  CorpusManifest m;
  m.kind = CorpusKind::synthetic;
  m.magnifications = {200};
  auto add = [&](const std::string& pid, TumorSubtype s) {
    ImageEntry e;
    e.path = pid + ".png";
    e.patient_id = pid;
    e.image_id = pid + "-1";
    e.magnification = 200;
    e.label = s;
    m.entries.push_back(e);
  };
  for (int i = 0; i < benign; ++i) add("B" + std::to_string(i), TumorSubtype::fibroadenoma);
  for (int i = 0; i < malign; ++i) add("M" + std::to_string(i), TumorSubtype::lobular_carcinoma);
  return m;
}

}  // namespace

TEST_CASE("crc-like root with 8 structures x 3 files") {
  testsupport::TempDir dir("crc");
  std::uint64_t seed = 0;
  for (Structure s : kAllStructures) {
    for (int i = 0; i < 3; ++i) put_image(dir / std::string(to_string(s)) / ("t" + std::to_string(i) + ".png"), ++seed);
  }
  const CorpusManifest m = scan_corpus(dir.path(), CorpusKind::crc_like);
  CHECK(m.entries.size() == 24);
  std::set<Structure> labels;
  for (const auto& e : m.entries) labels.insert(*e.structure());
  CHECK(labels.size() == 8);
  CHECK(std::is_sorted(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) { return a.path < b.path; }));
  CHECK(scan_corpus(dir.path(), CorpusKind::crc_like) == m);
}

TEST_CASE("breakhis-like root 2 patients x 2 magnifications x 2 images") {
  testsupport::TempDir dir("bh");
  make_breakhis(dir.path(), 1, 2, {40, 400});
  const CorpusManifest m = scan_corpus(dir.path(), CorpusKind::breakhis_like);
  CHECK(m.entries.size() == 8);
  CHECK(m.magnifications == std::set<int>{40, 400});
  for (const auto& e : m.entries) {
    CHECK(!e.patient_id.empty());
    CHECK((e.magnification == 40 || e.magnification == 400));
    CHECK(e.binary_label().has_value());
  }
  CHECK(m.patients().size() == 2);
  CHECK(m.with_magnification(40).entries.size() == 4);
}

TEST_CASE("scan errors") {
  testsupport::TempDir dir("scanerr");
  CHECK_THROWS_AS(scan_corpus(dir / "missing", CorpusKind::crc_like), InputError);
  CHECK_THROWS_AS(scan_corpus(dir.path(), CorpusKind::crc_like), InputError);
  put_image(dir / "not_a_structure" / "a.png", 1);
  CHECK_THROWS_AS(scan_corpus(dir.path(), CorpusKind::crc_like), InputError);

  testsupport::TempDir bh("scanerr2");
  put_image(bh / "benign" / "ductal_carcinoma" / "P1" / "40X" / "a.png", 2);
  CHECK_THROWS_AS(scan_corpus(bh.path(), CorpusKind::breakhis_like), InputError);
}

TEST_CASE("undecodable files are not entries") {
  testsupport::TempDir dir("undecodable");
  put_image(dir / "tumor" / "a.png", 1);
  {
    std::ofstream out(dir / "tumor" / "b.png");
    out << "garbage";
  }
  CHECK(scan_corpus(dir.path(), CorpusKind::crc_like).entries.size() == 1);
}

TEST_CASE("folds for 10 patients, seed 7") {
  const auto m = patients_manifest(5, 5);
  const auto folds = make_folds(m, std::nullopt, 7);
  REQUIRE(folds.size() == 5);
  const auto labels = m.patient_labels();
  for (const auto& f : folds) {
    CHECK(f.train_patients.size() == 7);
    CHECK(f.test_patients.size() == 3);
    std::set<std::string> all = f.train_patients;
    all.insert(f.test_patients.begin(), f.test_patients.end());
    CHECK(all == m.patients());
    int benign_train = 0;
    for (const auto& p : f.train_patients) benign_train += labels.at(p) == BinaryLabel::benign ? 1 : 0;
    CHECK(std::abs(benign_train - 0.5 * 7) <= 1.0);
    for (const auto& p : f.test_patients) CHECK(f.side_of(p) == Side::test);
  }
  CHECK(make_folds(m, std::nullopt, 7) == folds);
  CHECK(make_folds(m, std::nullopt, 8) != folds);
}

TEST_CASE("folds keep every image of a patient on one side") {
  testsupport::TempDir dir("purity");
  make_breakhis(dir.path(), 3, 2, {100, 200});
  const CorpusManifest m = scan_corpus(dir.path(), CorpusKind::breakhis_like);
  for (const auto& f : make_folds(m, std::nullopt, 1)) {
    std::map<std::string, std::set<Side>> sides;
    for (const auto& e : m.entries) sides[e.patient_id].insert(f.side_of(e.patient_id));
    for (const auto& [p, s] : sides) CHECK(s.size() == 1);
  }
}

TEST_CASE("82 patients: every fold partitions the patients") {
  const auto m = patients_manifest(24, 58);
  for (const auto& f : make_folds(m, std::nullopt, 3)) {
    std::set<std::string> all = f.train_patients;
    for (const auto& p : f.test_patients) CHECK(all.insert(p).second);
    CHECK(all.size() == 82);
    CHECK(f.test_patients.size() == 25);
  }
}

TEST_CASE("fold file round-trip and errors") {
  testsupport::TempDir dir("foldfile");
  const auto m = patients_manifest(3, 4);
  const auto folds = make_folds(m, std::nullopt, 11);
  write_fold_file(dir / "folds.csv", folds);
  CHECK(read_fold_file(dir / "folds.csv") == folds);
  CHECK(make_folds(m, dir / "folds.csv", 999) == folds);

  {
    std::ofstream out(dir / "bad.csv");
    out << "1,B0,train\n1,NOPE,test\n";
  }
  CHECK_THROWS_AS(make_folds(m, dir / "bad.csv", 0), InputError);
  {
    std::ofstream out(dir / "syntax.csv");
    out << "1,B0,sideways\n";
  }
  CHECK_THROWS_AS(read_fold_file(dir / "syntax.csv"), InputError);
  CHECK_THROWS_AS(make_folds(patients_manifest(1, 5), std::nullopt, 0), InputError);
}

TEST_CASE("synthetic corpus: counts, round-trip, determinism") {
  testsupport::TempDir a("synth-a"), b("synth-b");
  SyntheticSpec spec;
  spec.magnifications = {200};
  const CorpusManifest m = generate_synthetic_corpus(a.path(), spec, 5);
  CHECK(m.entries.size() == 24);
  CHECK(m.patients().size() == 8);
  CHECK(scan_corpus(a.path(), CorpusKind::synthetic) == m);
  for (const auto& e : m.entries) {
    const auto info = probe_image(e.path);
    REQUIRE(info);
    CHECK(info->width == 700);
    CHECK(info->height == 460);
  }

  const CorpusManifest m2 = generate_synthetic_corpus(b.path(), spec, 5);
  REQUIRE(m2.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    std::ifstream fa(m.entries[i].path, std::ios::binary), fb(m2.entries[i].path, std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(fa)), {}), cb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(ca == cb);
    CHECK(fs::relative(m.entries[i].path, a.path()) == fs::relative(m2.entries[i].path, b.path()));
  }
}

TEST_CASE("synthetic crc corpus in png and tiff") {
  testsupport::TempDir png("crc-png"), tif("crc-tif");
  SyntheticCrcSpec spec;
  spec.images_per_structure = 2;
  spec.side = 40;
  const auto m = generate_synthetic_crc(png.path(), spec, 1);
  CHECK(m.entries.size() == 16);
  CHECK(scan_corpus(png.path(), CorpusKind::crc_like) == m);
  spec.tiff = true;
  const auto t = generate_synthetic_crc(tif.path(), spec, 1);
  CHECK(probe_image(t.entries.front().path)->codec == ImageCodec::tiff);
  CHECK(scan_corpus(tif.path(), CorpusKind::crc_like).entries.size() == 16);
}
