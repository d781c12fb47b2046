#include "histotile/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "histotile/error.hpp"
#include "histotile/seed.hpp"

namespace histotile {

std::string_view to_string(AggregationRule rule) { return rule == AggregationRule::sum ? "sum" : "vote"; }

PatchPrediction PatchPrediction::from_probability(Provenance provenance, double probability) {
  return {std::move(provenance), probability, probability >= 0.5 ? BinaryLabel::malign : BinaryLabel::benign};
}

ImageDecision aggregate_image(std::span<const PatchPrediction> preds, AggregationRule rule, BinaryLabel truth) {
  if (preds.empty()) throw Error("cannot aggregate an image without patches");
  ImageDecision d;
  d.image_id = preds.front().provenance.image_id;
  d.patient_id = preds.front().provenance.patient_id;
  d.rule = rule;
  d.truth = truth;
  d.n_patches_used = preds.size();

  double total = 0.0;
  std::size_t malign_votes = 0;
  for (const auto& p : preds) {
    total += p.probability_malign;
    malign_votes += p.hard_label == BinaryLabel::malign ? 1 : 0;
  }
  const bool sum_malign = total / static_cast<double>(preds.size()) >= 0.5;
  bool malign = sum_malign;
  if (rule == AggregationRule::vote) {
    const std::size_t benign_votes = preds.size() - malign_votes;
    if (malign_votes != benign_votes) malign = malign_votes > benign_votes;
  }
  d.predicted = malign ? BinaryLabel::malign : BinaryLabel::benign;
  return d;
}

double patient_score(std::span<const ImageDecision> decisions) {
  if (decisions.empty()) throw Error("patient score of a patient without images");
  const auto correct = std::count_if(decisions.begin(), decisions.end(), [](const auto& d) { return d.correct(); });
  return static_cast<double>(correct) / static_cast<double>(decisions.size());
}

double overall_accuracy(std::span<const double> scores) {
  if (scores.empty()) throw Error("accuracy over zero patients");
  return 100.0 * std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / (n - 1.0));
  return out;
}

// ---- report ------------------------------------------------------------------------------

std::vector<RunReport::Row> RunReport::summary() const {
  if (flagged) return {};
  auto collect = [&](double FoldResult::*field) {
    std::vector<double> v;
    for (const auto& f : folds) v.push_back(f.*field);
    return mean_std(v);
  };
  return {{"patch", "retained", collect(&FoldResult::patch)},
          {"patch", "all", collect(&FoldResult::patch_unfiltered)},
          {"image", "sum", collect(&FoldResult::image_sum)},
          {"image", "vote", collect(&FoldResult::image_vote)},
          {"patient", "sum", collect(&FoldResult::patient_sum)},
          {"patient", "vote", collect(&FoldResult::patient_vote)}};
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) {
    folds_json.push_back({{"fold", f.fold_index},
                          {"flagged", f.flagged},
                          {"lost_patients", f.lost_patients},
                          {"best_params", {{"c", f.best_params.c}, {"gamma", f.best_params.gamma}}},
                          {"train_patches", f.train_patches},
                          {"test_patches", f.test_patches},
                          {"test_patches_all", f.test_patches_all},
                          {"patch", f.patch},
                          {"patch_unfiltered", f.patch_unfiltered},
                          {"image_sum", f.image_sum},
                          {"image_vote", f.image_vote},
                          {"patient_sum", f.patient_sum},
                          {"patient_vote", f.patient_vote}});
  }
  nlohmann::json summary_json = nlohmann::json::array();
  for (const auto& r : summary()) {
    summary_json.push_back({{"level", r.level}, {"rule", r.rule}, {"mean", r.value.mean}, {"std", r.value.stddev}});
  }
  nlohmann::json j = {{"format", "histotile-run/1"},
                      {"magnification", magnification},
                      {"filter", filter_index},
                      {"feature_kind", std::string(to_string(feature_kind))},
                      {"flagged", flagged},
                      {"folds", folds_json},
                      {"summary", summary_json}};
  j["pca_k"] = pca_k ? nlohmann::json(*pca_k) : nlohmann::json();
  j["retention"] = retention ? retention->to_json() : nlohmann::json();
  return j;
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "histotile-run/1") throw InputError("not a run report");
  RunReport r;
  r.magnification = j.at("magnification").get<int>();
  r.filter_index = j.at("filter").get<int>();
  const auto kind = parse_feature_kind(j.at("feature_kind").get<std::string>());
  if (!kind) throw InputError("unknown feature kind in run report");
  r.feature_kind = *kind;
  r.flagged = j.at("flagged").get<bool>();
  if (!j.at("pca_k").is_null()) r.pca_k = j.at("pca_k").get<std::size_t>();
  for (const auto& fj : j.at("folds")) {
    FoldResult f;
    f.fold_index = fj.at("fold").get<int>();
    f.flagged = fj.at("flagged").get<bool>();
    f.lost_patients = fj.at("lost_patients").get<std::vector<std::string>>();
    f.best_params = {fj.at("best_params").at("c").get<double>(), fj.at("best_params").at("gamma").get<double>()};
    f.train_patches = fj.at("train_patches").get<std::size_t>();
    f.test_patches = fj.at("test_patches").get<std::size_t>();
    f.test_patches_all = fj.at("test_patches_all").get<std::size_t>();
    f.patch = fj.at("patch").get<double>();
    f.patch_unfiltered = fj.at("patch_unfiltered").get<double>();
    f.image_sum = fj.at("image_sum").get<double>();
    f.image_vote = fj.at("image_vote").get<double>();
    f.patient_sum = fj.at("patient_sum").get<double>();
    f.patient_vote = fj.at("patient_vote").get<double>();
    r.folds.push_back(std::move(f));
  }
  if (const auto& rj = j.at("retention"); !rj.is_null()) {
    RetentionStats s;
    s.magnification = rj.at("magnification").get<int>();
    s.filter_index = rj.at("filter").get<int>();
    s.pct_patches = rj.at("pct_patches").get<double>();
    s.pct_images = rj.at("pct_images").get<double>();
    s.pct_patients = rj.at("pct_patients").get<double>();
    s.pct_patients_weighted = rj.at("pct_patients_weighted").get<double>();
    s.excluded_images = rj.at("excluded_images").get<std::vector<std::string>>();
    s.excluded_patients = rj.at("excluded_patients").get<std::vector<std::string>>();
    s.flagged = rj.at("flagged").get<bool>();
    r.retention = std::move(s);
  }
  return r;
}

std::string RunReport::to_csv() const {
  std::string out = "magnification,level,rule,mean,std\n";
  char buf[128];
  for (const auto& r : summary()) {
    std::snprintf(buf, sizeof buf, "%d,%s,%s,%.4f,%.4f\n", magnification, r.level.c_str(), r.rule.c_str(),
                  r.value.mean, r.value.stddev);
    out += buf;
  }
  return out;
}

// ---- experiment -------------------------------------------------------------------------

nlohmann::json FoldModel::to_json() const {
  nlohmann::json j = {{"classifier", classifier.to_json()}, {"search", search.to_json()}};
  j["pca"] = pca ? pca->to_json() : nlohmann::json();
  return j;
}

FoldModel train_fold_model(const PatchSet& patches, std::span<const std::size_t> train_rows,
                           std::optional<std::size_t> pca_k, std::span<const KernelParams> grid, std::uint64_t seed,
                           double tol) {
  const std::size_t width = patches.features.cols();
  Matrix x(train_rows.size(), width);
  std::vector<int> y;
  y.reserve(train_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    const auto src = patches.features.row(train_rows[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
    y.push_back(sign_of(patches.label[train_rows[i]]));
  }
  if (std::find(y.begin(), y.end(), +1) == y.end() || std::find(y.begin(), y.end(), -1) == y.end()) {
    throw Error("training patches of a fold cover a single class");
  }

  FoldModel model;
  if (pca_k) {
    model.pca = fit_pca(x.view(), *pca_k);
    Matrix reduced(x.rows, *pca_k);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto z = model.pca->transform(x.row(i));
      std::copy(z.begin(), z.end(), reduced.row(i).begin());
    }
    x = std::move(reduced);
  }
  model.search = grid_search(x.view(), y, grid, {5, derive_seed(seed, "fold-grid"), tol});
  TrainOptions topts;
  topts.tol = tol;
  topts.seed = derive_seed(seed, "fold-train");
  model.classifier = train(x.view(), y, model.search.best, topts);
  return model;
}

namespace {

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

struct ImageLevel {
  double image_accuracy = 0.0;
  double patient_accuracy = 0.0;
};

ImageLevel score_images(const std::map<std::pair<std::string, std::string>, std::vector<PatchPrediction>>& by_image,
                        const std::map<std::string, BinaryLabel>& truth, AggregationRule rule) {
  std::map<std::string, std::vector<ImageDecision>> by_patient;
  std::size_t correct = 0, total = 0;
  for (const auto& [key, preds] : by_image) {
    ImageDecision d = aggregate_image(preds, rule, truth.at(key.first));
    correct += d.correct() ? 1 : 0;
    ++total;
    by_patient[key.first].push_back(std::move(d));
  }
  std::vector<double> scores;
  for (const auto& [pid, ds] : by_patient) scores.push_back(patient_score(ds));
  ImageLevel out;
  out.image_accuracy = percent(correct, total);
  out.patient_accuracy = scores.empty() ? 0.0 : overall_accuracy(scores);
  return out;
}

}  // namespace

RunReport run_experiment(const CorpusManifest& manifest, const PatchSet& patches,
                         std::span<const FoldAssignment> folds, const ExperimentConfig& cfg) {
  RunReport report;
  report.magnification = cfg.magnification;
  report.filter_index = cfg.filter ? cfg.filter_index : 0;
  report.feature_kind = cfg.pca_k ? FeatureKind::deep_pca : patches.features.kind();
  report.pca_k = cfg.pca_k;

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches.magnification[i] == cfg.magnification) rows.push_back(i);
  }
  if (rows.empty()) {
    throw InputError("no patches at magnification " + std::to_string(cfg.magnification));
  }

  const auto truth = manifest.patient_labels();

  // The filter is fixed (trained elsewhere), so relevance is computed once for the magnification.
  std::vector<char> relevant(patches.size(), 1);
  if (cfg.filter) {
    PatchSet subset{patches.features.select(rows), {}, {}};
    for (std::size_t i : rows) {
      subset.magnification.push_back(patches.magnification[i]);
      subset.label.push_back(patches.label[i]);
    }
    FilterOutcome outcome = apply_filter(*cfg.filter, subset);
    std::fill(relevant.begin(), relevant.end(), 0);
    for (std::size_t r : outcome.retained) relevant[rows[r]] = 1;
    if (!outcome.stats.empty()) report.retention = outcome.stats.front();
  }

  struct FoldRows {
    std::vector<std::size_t> train, test_all;
  };
  std::vector<FoldRows> split(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const FoldAssignment& fold = folds[f];
    FoldResult result;
    result.fold_index = fold.fold_index;
    std::set<std::string> at_mag, survivors;
    for (std::size_t i : rows) {
      const std::string& pid = patches.features.key(i).patient_id;
      if (fold.side_of(pid) == Side::train) {
        if (relevant[i]) split[f].train.push_back(i);
        continue;
      }
      split[f].test_all.push_back(i);
      at_mag.insert(pid);
      if (relevant[i]) {
        ++result.test_patches;
        survivors.insert(pid);
      }
    }
    for (const auto& pid : at_mag) {
      if (!survivors.contains(pid)) result.lost_patients.push_back(pid);
    }
    result.flagged = !result.lost_patients.empty();
    result.train_patches = split[f].train.size();
    result.test_patches_all = split[f].test_all.size();
    report.flagged = report.flagged || result.flagged;
    report.folds.push_back(std::move(result));
  }
  // A test patient without surviving patches invalidates the whole run: no accuracies.
  if (report.flagged) return report;

  for (std::size_t f = 0; f < folds.size(); ++f) {
    FoldResult& result = report.folds[f];
    const std::vector<std::size_t>& test_all = split[f].test_all;
    const std::uint64_t fold_seed = derive_seed(cfg.seed, "fold", static_cast<std::uint64_t>(result.fold_index));
    const FoldModel model = train_fold_model(patches, split[f].train, cfg.pca_k, cfg.grid, fold_seed, cfg.tol);
    result.best_params = model.search.best;

    std::vector<double> prob(test_all.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(test_all.size()); ++t) {
      const auto row = patches.features.row(test_all[static_cast<std::size_t>(t)]);
      prob[static_cast<std::size_t>(t)] = model.pca ? model.classifier.probability(model.pca->transform(row))
                                                    : model.classifier.probability(row);
    }

    std::size_t correct_all = 0, correct_kept = 0;
    std::map<std::pair<std::string, std::string>, std::vector<PatchPrediction>> by_image;
    for (std::size_t t = 0; t < test_all.size(); ++t) {
      const std::size_t i = test_all[t];
      PatchPrediction p = PatchPrediction::from_probability(patches.features.key(i), prob[t]);
      const bool ok = p.hard_label == patches.label[i];
      correct_all += ok ? 1 : 0;
      if (relevant[i]) {
        correct_kept += ok ? 1 : 0;
        by_image[{p.provenance.patient_id, p.provenance.image_id}].push_back(std::move(p));
      }
    }
    result.patch = percent(correct_kept, result.test_patches);
    result.patch_unfiltered = percent(correct_all, test_all.size());

    const ImageLevel sum = score_images(by_image, truth, AggregationRule::sum);
    const ImageLevel vote = score_images(by_image, truth, AggregationRule::vote);
    result.image_sum = sum.image_accuracy;
    result.image_vote = vote.image_accuracy;
    result.patient_sum = sum.patient_accuracy;
    result.patient_vote = vote.patient_accuracy;
  }
  return report;
}

}  // namespace histotile
