#include "histotile/filterbank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "histotile/error.hpp"
#include "histotile/kernels.hpp"
#include "histotile/seed.hpp"

namespace histotile {
namespace {

constexpr int kFull = 625;

int sum_counts(const std::map<Structure, int>& m) {
  int s = 0;
  for (const auto& [k, v] : m) s += v;
  return s;
}

nlohmann::json counts_json(const std::map<Structure, int>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[std::string(to_string(k))] = v;
  return j;
}

std::map<Structure, int> counts_from_json(const nlohmann::json& j) {
  std::map<Structure, int> out;
  for (const auto& [k, v] : j.items()) {
    const auto s = parse_structure(k);
    if (!s) throw Error("unknown structure " + k + " in filter spec");
    out[*s] = v.get<int>();
  }
  return out;
}

std::size_t round_half_up(double v) { return static_cast<std::size_t>(std::floor(v + 0.5)); }

}  // namespace

int FilterSpec::relevant_total() const { return sum_counts(relevant); }
int FilterSpec::irrelevant_total() const { return sum_counts(irrelevant); }

FilterSpec FilterSpec::scaled(double factor) const {
  if (!(factor > 0)) throw Error("filter scale factor must be positive");
  FilterSpec out = *this;
  for (auto* side : {&out.relevant, &out.irrelevant}) {
    for (auto& [k, v] : *side) v = std::max(1, static_cast<int>(std::floor(v * factor + 0.5)));
  }
  return out;
}

nlohmann::json FilterSpec::to_json() const {
  return {{"index", index}, {"relevant", counts_json(relevant)}, {"irrelevant", counts_json(irrelevant)}};
}

FilterSpec FilterSpec::from_json(const nlohmann::json& j) {
  return {j.at("index").get<int>(), counts_from_json(j.at("relevant")), counts_from_json(j.at("irrelevant"))};
}

FilterSpec build_filter_spec(int index) {
  if (index < 1 || index > kFilterCount) {
    throw InputError("filter index must be in 1.." + std::to_string(kFilterCount));
  }
  // Per-structure count of the undersampled side; filters 5..7 mirror 3..1.
  static constexpr int kMinority[kFilterCount + 1] = {0, 89, 208, 375, kFull, 375, 208, 89};
  const int n_relevant = index;
  FilterSpec spec{index, {}, {}};
  for (int s = 0; s < 8; ++s) {
    const Structure structure = kAllStructures[static_cast<std::size_t>(s)];
    if (s < n_relevant) {
      spec.relevant[structure] = index <= 4 ? kFull : kMinority[index];
    } else {
      spec.irrelevant[structure] = index >= 4 ? kFull : kMinority[index];
    }
  }
  return spec;
}

// ---- relevance model ----------------------------------------------------------------

bool RelevanceModel::is_relevant(std::span<const double> features) const {
  if (pca) return classifier.predict(pca->transform(features)) > 0;
  return classifier.predict(features) > 0;
}

nlohmann::json RelevanceModel::to_json() const {
  nlohmann::json j = {{"format", "histotile-relevance/1"},
                      {"filter", filter.to_json()},
                      {"feature_kind", std::string(to_string(feature_kind))},
                      {"best_params", {{"c", best_params.c}, {"gamma", best_params.gamma}}},
                      {"validation_accuracy", validation_accuracy},
                      {"train_count", train_count},
                      {"validation_count", validation_count},
                      {"classifier", classifier.to_json()}};
  j["pca"] = pca ? pca->to_json() : nlohmann::json();
  return j;
}

RelevanceModel RelevanceModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "histotile-relevance/1") throw Error("unsupported relevance model format");
  RelevanceModel m;
  m.filter = FilterSpec::from_json(j.at("filter"));
  const auto kind = parse_feature_kind(j.at("feature_kind").get<std::string>());
  if (!kind) throw Error("unknown feature kind in relevance model");
  m.feature_kind = *kind;
  m.best_params = {j.at("best_params").at("c").get<double>(), j.at("best_params").at("gamma").get<double>()};
  m.validation_accuracy = j.at("validation_accuracy").get<double>();
  m.train_count = j.at("train_count").get<std::size_t>();
  m.validation_count = j.at("validation_count").get<std::size_t>();
  m.classifier = TrainedClassifier::from_json(j.at("classifier"));
  if (!j.at("pca").is_null()) m.pca = PcaModel::from_json(j.at("pca"));
  return m;
}

void RelevanceModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write relevance model " + path.string());
  out << to_json().dump(1) << '\n';
}

RelevanceModel RelevanceModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open relevance model " + path.string());
  return from_json(nlohmann::json::parse(in));
}

RelevanceModel RelevanceModel::constant(bool relevant, FeatureKind kind, std::size_t width,
                                        int filter_index) {
  RelevanceModel m;
  m.filter.index = filter_index;
  m.feature_kind = kind;
  m.classifier.standardizer.mean.assign(width, 0.0);
  m.classifier.standardizer.stddev.assign(width, 1.0);
  m.classifier.support_vectors = Matrix(0, width);
  m.classifier.bias = relevant ? 1.0 : -1.0;
  m.classifier.params = {1.0, 1.0};
  m.classifier.calibration = {-1.0, 0.0};
  m.validation_accuracy = 1.0;
  return m;
}

RelevanceModel train_relevance_model(const CorpusManifest& crc, const FilterSpec& spec, FeatureKind kind,
                                     const TileFeatureProvider& features, const RelevanceOptions& opts) {
  if (crc.kind != CorpusKind::crc_like) throw Error("relevance filters are trained on a crc-like corpus");
  if (kind == FeatureKind::deep_pca) throw Error("pass deep features and set pca_k instead of deep-pca");

  std::map<Structure, std::vector<const ImageEntry*>> by_structure;
  for (const ImageEntry& e : crc.entries) by_structure[*e.structure()].push_back(&e);

  std::vector<ImageEntry> selected;
  std::vector<int> labels;
  for (bool relevant : {true, false}) {
    for (const auto& [structure, count] : relevant ? spec.relevant : spec.irrelevant) {
      auto pool = by_structure[structure];
      if (pool.size() < static_cast<std::size_t>(count)) {
        throw InputError("insufficient images for structure " + std::string(to_string(structure)) +
                         ": need " + std::to_string(count) + ", have " + std::to_string(pool.size()));
      }
      Rng rng(derive_seed(opts.seed, "filter-subsample", static_cast<std::uint64_t>(structure)));
      rng.shuffle(pool);
      pool.resize(static_cast<std::size_t>(count));
      std::sort(pool.begin(), pool.end(), [](const ImageEntry* a, const ImageEntry* b) { return a->path < b->path; });
      for (const ImageEntry* e : pool) {
        selected.push_back(*e);
        labels.push_back(relevant ? +1 : -1);
      }
    }
  }

  const FeatureMatrix raw = features(selected);
  Matrix x(selected.size(), raw.cols());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto row = raw.find(tile_key(selected[i]));
    if (!row) throw InputError("no features for crc tile " + selected[i].image_id);
    std::copy(raw.row(*row).begin(), raw.row(*row).end(), x.row(i).begin());
  }

  // Stratified holdout.
  std::vector<std::size_t> train_rows, val_rows;
  Rng split_rng(derive_seed(opts.seed, "filter-split"));
  for (int cls : {+1, -1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    split_rng.shuffle(idx);
    const std::size_t n_val = round_half_up(opts.validation_fraction * static_cast<double>(idx.size()));
    val_rows.insert(val_rows.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_rows.insert(train_rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());

  RelevanceModel model;
  model.filter = spec;
  model.feature_kind = kind;
  model.train_count = train_rows.size();
  model.validation_count = val_rows.size();

  Matrix xtr(train_rows.size(), x.cols);
  std::vector<int> ytr;
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    std::copy(x.row(train_rows[i]).begin(), x.row(train_rows[i]).end(), xtr.row(i).begin());
    ytr.push_back(labels[train_rows[i]]);
  }
  if (opts.pca_k) {
    model.pca = fit_pca(xtr.view(), *opts.pca_k);
    Matrix reduced(xtr.rows, *opts.pca_k);
    for (std::size_t i = 0; i < xtr.rows; ++i) {
      const auto z = model.pca->transform(xtr.row(i));
      std::copy(z.begin(), z.end(), reduced.row(i).begin());
    }
    xtr = std::move(reduced);
  }

  const GridSearchReport search =
      grid_search(xtr.view(), ytr, opts.grid, {5, derive_seed(opts.seed, "filter-grid"), opts.tol});
  model.best_params = search.best;
  TrainOptions topts;
  topts.tol = opts.tol;
  topts.seed = derive_seed(opts.seed, "filter-train");
  model.classifier = train(xtr.view(), ytr, search.best, topts);

  std::size_t correct = 0;
  for (std::size_t i : val_rows) {
    correct += (model.is_relevant(x.row(i)) ? +1 : -1) == labels[i] ? 1 : 0;
  }
  model.validation_accuracy =
      val_rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(val_rows.size());
  return model;
}

// ---- filtering --------------------------------------------------------------------------

nlohmann::json RetentionStats::to_json() const {
  return {{"magnification", magnification},
          {"filter", filter_index},
          {"pct_patches", pct_patches},
          {"pct_images", pct_images},
          {"pct_patients", pct_patients},
          {"pct_patients_weighted", pct_patients_weighted},
          {"excluded_images", excluded_images},
          {"excluded_patients", excluded_patients},
          {"flagged", flagged}};
}

FilterOutcome apply_filter(const RelevanceModel& model, const PatchSet& patches) {
  const FeatureKind patch_kind = patches.features.kind();
  if (patch_kind != model.feature_kind) {
    throw Error("filter expects " + std::string(to_string(model.feature_kind)) + " features, patches carry " +
                std::string(to_string(patch_kind)));
  }
  const std::size_t n = patches.size();
  std::vector<char> keep(n, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    keep[static_cast<std::size_t>(i)] = model.is_relevant(patches.features.row(static_cast<std::size_t>(i))) ? 1 : 0;
  }

  FilterOutcome out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.retained.push_back(i);
  }

  struct Tally {
    std::size_t patches = 0, kept = 0;
    std::map<std::pair<std::string, std::string>, bool> images;  // (patient, image) -> any retained
  };
  std::map<int, Tally> by_mag;
  for (std::size_t i = 0; i < n; ++i) {
    Tally& t = by_mag[patches.magnification[i]];
    ++t.patches;
    t.kept += keep[i] ? 1 : 0;
    const Provenance& k = patches.features.key(i);
    bool& any = t.images[{k.patient_id, k.image_id}];
    any = any || keep[i];
  }
  for (const auto& [mag, t] : by_mag) {
    RetentionStats s;
    s.magnification = mag;
    s.filter_index = model.filter.index;
    s.pct_patches = 100.0 * static_cast<double>(t.kept) / static_cast<double>(t.patches);
    std::map<std::string, std::pair<std::size_t, std::size_t>> patients;  // total, retained
    std::size_t images_kept = 0;
    for (const auto& [key, any] : t.images) {
      auto& p = patients[key.first];
      ++p.first;
      if (any) {
        ++p.second;
        ++images_kept;
      } else {
        s.excluded_images.push_back(key.second);
      }
    }
    s.pct_images = 100.0 * static_cast<double>(images_kept) / static_cast<double>(t.images.size());
    std::size_t patients_kept = 0;
    double weighted = 0.0;
    for (const auto& [pid, counts] : patients) {
      if (counts.second > 0) {
        ++patients_kept;
      } else {
        s.excluded_patients.push_back(pid);
      }
      weighted += static_cast<double>(counts.second) / static_cast<double>(counts.first);
    }
    s.pct_patients = 100.0 * static_cast<double>(patients_kept) / static_cast<double>(patients.size());
    s.pct_patients_weighted = 100.0 * weighted / static_cast<double>(patients.size());
    s.flagged = !s.excluded_patients.empty();
    out.stats.push_back(std::move(s));
  }
  return out;
}

std::vector<PatchRecord> apply_filter(const RelevanceModel& model, std::span<const PatchRecord> patches,
                                      std::vector<RetentionStats>* stats) {
  if (model.feature_kind != FeatureKind::pftas) {
    throw Error("filtering raw patches requires a pftas relevance model");
  }
  std::vector<Raster> pixels;
  pixels.reserve(patches.size());
  for (const auto& p : patches) pixels.push_back(p.pixels);
  const Matrix rows = kernels::pftas_rows_parallel(pixels);

  PatchSet set{FeatureMatrix(FeatureKind::pftas, kPftasLength), {}, {}};
  for (std::size_t i = 0; i < patches.size(); ++i) {
    set.features.add_row(patches[i].provenance(), rows.row(i));
    set.magnification.push_back(patches[i].source.magnification);
    set.label.push_back(patches[i].source.label);
  }
  FilterOutcome outcome = apply_filter(model, set);
  if (stats) *stats = std::move(outcome.stats);
  std::vector<PatchRecord> retained;
  for (std::size_t i : outcome.retained) retained.push_back(patches[i]);
  return retained;
}

SurvivalCheck assert_patient_survival(const RetentionStats& stats, const std::set<std::string>* test_patients) {
  SurvivalCheck check;
  for (const auto& p : stats.excluded_patients) {
    if (!test_patients || test_patients->contains(p)) check.lost_patients.push_back(p);
  }
  check.pass = check.lost_patients.empty();
  return check;
}

void write_retention_csv(const std::filesystem::path& path, std::span<const RetentionStats> stats) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write retention report " + path.string());
  out << "magnification,filter,pct_patches,pct_images,pct_patients,flagged\n";
  char buf[160];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.1f,%.1f,%.1f,%d\n", s.magnification, s.filter_index, s.pct_patches,
                  s.pct_images, s.pct_patients, s.flagged ? 1 : 0);
    out << buf;
  }
}

}  // namespace histotile
