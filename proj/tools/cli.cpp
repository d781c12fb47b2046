#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "histotile/dataset.hpp"
#include "histotile/error.hpp"
#include "histotile/eval.hpp"
#include "histotile/features.hpp"
#include "histotile/filterbank.hpp"
#include "histotile/patches.hpp"

namespace histotile::cli {
namespace {

namespace fs = std::filesystem;

// "0.5", "8" or "2^-5".
double parse_grid_value(const std::string& text) {
  std::string_view s = text;
  double base = 1.0;
  if (s.starts_with("2^")) {
    s.remove_prefix(2);
    base = 2.0;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError("bad grid value '" + text + "'");
  const double out = base == 2.0 ? std::ldexp(1.0, static_cast<int>(v)) : v;
  if (base == 2.0 && v != std::floor(v)) throw InputError("grid exponent must be an integer: '" + text + "'");
  if (!(out > 0)) throw InputError("grid values must be positive: '" + text + "'");
  return out;
}

struct GridFlags {
  std::vector<std::string> c;
  std::vector<std::string> gamma;

  void attach(CLI::App* cmd) {
    cmd->add_option("--grid-c", c, "SVM C values (e.g. 2^-5,1,2^3)")->delimiter(',');
    cmd->add_option("--grid-gamma", gamma, "RBF gamma values")->delimiter(',');
  }

  std::vector<KernelParams> grid() const {
    if (c.empty() && gamma.empty()) return default_grid();
    std::set<double> dc, dg;
    for (const auto& p : default_grid()) {
      dc.insert(p.c);
      dg.insert(p.gamma);
    }
    std::vector<double> cs(dc.begin(), dc.end()), gs(dg.begin(), dg.end());
    if (!c.empty()) {
      cs.clear();
      for (const auto& v : c) cs.push_back(parse_grid_value(v));
    }
    if (!gamma.empty()) {
      gs.clear();
      for (const auto& v : gamma) gs.push_back(parse_grid_value(v));
    }
    return make_grid(cs, gs);
  }
};

FeatureKind feature_flag(const std::string& text) {
  if (text == "pftas") return FeatureKind::pftas;
  if (text == "deep") return FeatureKind::deep;
  throw InputError("--features must be pftas or deep");
}

CorpusKind corpus_flag(const std::string& text) {
  const auto kind = parse_corpus_kind(text);
  if (!kind) throw InputError("unknown corpus kind '" + text + "'");
  return *kind;
}

FeatureCache cache_for(const std::string& flag) {
  return flag.empty() ? FeatureCache::from_env() : FeatureCache(flag);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fixed(double v, int digits = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void print_manifest(const CorpusManifest& m, std::ostream& out) {
  out << "kind " << to_string(m.kind) << "\n";
  out << "images " << m.entries.size() << "\n";
  if (m.kind == CorpusKind::crc_like) {
    std::map<Structure, std::size_t> counts;
    for (const auto& e : m.entries) ++counts[*e.structure()];
    out << "structure count\n";
    for (Structure s : kAllStructures) out << to_string(s) << ' ' << counts[s] << "\n";
    return;
  }
  const auto labels = m.patient_labels();
  out << "patients " << labels.size() << "\n";
  std::map<BinaryLabel, std::size_t> patients_per_class, images_per_class;
  for (const auto& [pid, label] : labels) ++patients_per_class[label];
  std::map<int, std::size_t> per_mag;
  std::map<TumorSubtype, std::size_t> per_subtype;
  for (const auto& e : m.entries) {
    ++images_per_class[*e.binary_label()];
    ++per_mag[e.magnification];
    ++per_subtype[std::get<TumorSubtype>(e.label)];
  }
  out << "class patients images\n";
  for (BinaryLabel b : {BinaryLabel::benign, BinaryLabel::malign}) {
    out << to_string(b) << ' ' << patients_per_class[b] << ' ' << images_per_class[b] << "\n";
  }
  out << "magnification images\n";
  for (const auto& [mag, n] : per_mag) out << mag << "X " << n << "\n";
  out << "subtype images\n";
  for (const auto& [s, n] : per_subtype) out << to_string(s) << ' ' << n << "\n";
}

// ---- commands ------------------------------------------------------------------------------

struct ScanArgs {
  std::string root;
  std::string kind = "breakhis";
};

int cmd_scan(const ScanArgs& a, std::ostream& out) {
  print_manifest(scan_corpus(a.root, corpus_flag(a.kind)), out);
  return kExitOk;
}

struct SynthArgs {
  std::string out_dir;
  std::string kind = "breakhis";
  SyntheticSpec spec;
  SyntheticCrcSpec crc;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  ensure_dir(a.out_dir);
  const CorpusKind kind = corpus_flag(a.kind);
  const CorpusManifest m = kind == CorpusKind::crc_like ? generate_synthetic_crc(a.out_dir, a.crc, a.seed)
                                                        : generate_synthetic_corpus(a.out_dir, a.spec, a.seed);
  out << "wrote " << a.out_dir << "\n";
  print_manifest(m, out);
  return kExitOk;
}

// Deep-feature rows for crc tiles, keyed by tile_key().
TileFeatureProvider deep_tile_provider(const std::string& csv) {
  auto all = std::make_shared<FeatureMatrix>(import_deep_features(csv));
  return [all](std::span<const ImageEntry> entries) {
    std::vector<std::size_t> rows;
    for (const auto& e : entries) {
      const auto r = all->find(tile_key(e));
      if (!r) throw InputError("deep-feature file has no row for crc tile " + e.path.string());
      rows.push_back(*r);
    }
    return all->select(rows);
  };
}

struct FilterArgs {
  std::string crc;
  int filter = 7;
  std::string features = "pftas";
  std::string deep_csv;
  std::optional<std::size_t> pca;
  double scale = 1.0;
  std::string out;
  std::string cache;
  std::uint64_t seed = 0;
  double tol = 1e-3;
  GridFlags grid;
};

RelevanceModel train_filter(const FilterArgs& a) {
  const FeatureKind kind = feature_flag(a.features);
  if (a.pca && kind != FeatureKind::deep) throw InputError("--pca requires --features deep");
  if (kind == FeatureKind::deep && a.deep_csv.empty()) throw InputError("--features deep requires --deep-csv");
  const CorpusManifest crc = scan_corpus(a.crc, CorpusKind::crc_like);
  TileFeatureProvider provider;
  if (kind == FeatureKind::deep) {
    provider = deep_tile_provider(a.deep_csv);
  } else {
    FeatureCache cache = cache_for(a.cache);
    provider = [cache](std::span<const ImageEntry> entries) { return extract_tile_pftas(entries, cache); };
  }
  RelevanceOptions opts;
  opts.seed = a.seed;
  opts.grid = a.grid.grid();
  opts.pca_k = a.pca;
  opts.tol = a.tol;
  return train_relevance_model(crc, build_filter_spec(a.filter).scaled(a.scale), kind, provider, opts);
}

int cmd_train_filter(const FilterArgs& a, std::ostream& out) {
  const RelevanceModel model = train_filter(a);
  const fs::path path = a.out.empty() ? fs::path("filter_" + std::to_string(a.filter) + ".json") : fs::path(a.out);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  model.save(path);
  out << "filter " << a.filter << " validation_accuracy " << fixed(100.0 * model.validation_accuracy, 2)
      << " train " << model.train_count << " validation " << model.validation_count << " model " << path.string()
      << "\n";
  return kExitOk;
}

struct ExtractArgs {
  std::string corpus;
  std::string kind = "breakhis";
  std::string out;
  std::string cache;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  const CorpusKind kind = corpus_flag(a.kind);
  const CorpusManifest m = scan_corpus(a.corpus, kind);
  const FeatureCache cache = cache_for(a.cache);
  const FeatureMatrix f =
      kind == CorpusKind::crc_like ? extract_tile_pftas(m.entries, cache) : extract_patch_pftas(m, cache).features;
  write_feature_csv(a.out, f);
  out << "rows " << f.rows() << " cols " << f.cols() << " written " << a.out << "\n";
  return kExitOk;
}

struct ImportArgs {
  std::string csv;
  std::string out;
};

int cmd_import(const ImportArgs& a, std::ostream& out) {
  const FeatureMatrix f = import_deep_features(a.csv);
  std::set<std::string> patients, images;
  for (const auto& k : f.keys()) {
    patients.insert(k.patient_id);
    images.insert(k.patient_id + "/" + k.image_id);
  }
  out << "rows " << f.rows() << " cols " << f.cols() << " patients " << patients.size() << " images "
      << images.size() << "\n";
  if (!a.out.empty()) {
    write_feature_csv(a.out, f);
    out << "written " << a.out << "\n";
  }
  return kExitOk;
}

struct RunArgs {
  std::string corpus;
  std::string kind = "breakhis";
  std::vector<int> filters = {0};
  std::vector<int> mags;
  std::string features = "pftas";
  std::string deep_csv;
  std::optional<std::size_t> pca;
  std::string folds;
  std::string filter_dir;
  std::string crc;
  std::string crc_deep_csv;
  double filter_scale = 1.0;
  std::string out_dir = "runs";
  std::string cache;
  std::uint64_t seed = 0;
  double tol = 1e-3;
  unsigned jobs = 1;
  GridFlags grid;
};

std::string run_stem(int filter, int mag) { return "run_f" + std::to_string(filter) + "_m" + std::to_string(mag); }

int cmd_run(const RunArgs& a, std::ostream& out) {
  const FeatureKind kind = feature_flag(a.features);
  if (a.pca && kind != FeatureKind::deep) throw InputError("--pca requires --features deep");
  if (kind == FeatureKind::deep && a.deep_csv.empty()) throw InputError("--features deep requires --deep-csv");
  for (int f : a.filters) {
    if (f < 0 || f > kFilterCount) throw InputError("filter indices must be in 0..7");
  }
  const CorpusKind corpus_kind = corpus_flag(a.kind);
  if (corpus_kind == CorpusKind::crc_like) throw InputError("run needs a breakhis-like or synthetic corpus");

  const CorpusManifest manifest = scan_corpus(a.corpus, corpus_kind);
  std::vector<int> mags = a.mags;
  if (mags.empty()) mags.assign(manifest.magnifications.begin(), manifest.magnifications.end());
  for (int m : mags) {
    if (!manifest.magnifications.contains(m)) {
      throw InputError("corpus has no images at magnification " + std::to_string(m));
    }
  }
  const std::vector<FoldAssignment> folds =
      make_folds(manifest, a.folds.empty() ? std::nullopt : std::optional<fs::path>(a.folds), a.seed);

  ensure_dir(a.out_dir);
  write_fold_file(fs::path(a.out_dir) / "folds.csv", folds);

  const PatchSet patches = kind == FeatureKind::deep
                               ? attach_patch_features(manifest, import_deep_features(a.deep_csv))
                               : extract_patch_pftas(manifest, cache_for(a.cache));

  // Relevance models: load filter_<i>.json from --filter-dir, else train on --crc and save next to the runs.
  std::map<int, RelevanceModel> models;
  for (int f : std::set<int>(a.filters.begin(), a.filters.end())) {
    if (f == 0) continue;
    const std::string name = "filter_" + std::to_string(f) + ".json";
    if (!a.filter_dir.empty() && fs::exists(fs::path(a.filter_dir) / name)) {
      models[f] = RelevanceModel::load(fs::path(a.filter_dir) / name);
    } else if (!a.crc.empty()) {
      FilterArgs fa;
      fa.crc = a.crc;
      fa.filter = f;
      fa.features = a.features;
      fa.deep_csv = a.crc_deep_csv;
      fa.pca = a.pca;
      fa.scale = a.filter_scale;
      fa.cache = a.cache;
      fa.seed = a.seed;
      fa.tol = a.tol;
      fa.grid = a.grid;
      models[f] = train_filter(fa);
      models[f].save(fs::path(a.out_dir) / name);
    } else {
      throw InputError("filter " + std::to_string(f) + " needs --filter-dir with " + name + " or --crc");
    }
    if (models[f].feature_kind != kind) {
      throw InputError("filter " + std::to_string(f) + " was trained on " +
                       std::string(to_string(models[f].feature_kind)) + " features");
    }
  }

  struct Job {
    int filter;
    int mag;
  };
  std::vector<Job> jobs;
  for (int f : a.filters) {
    for (int m : mags) jobs.push_back({f, m});
  }
  std::vector<std::optional<RunReport>> reports(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex out_mutex;
  const auto grid = a.grid.grid();

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        ExperimentConfig cfg;
        cfg.magnification = jobs[j].mag;
        cfg.filter_index = jobs[j].filter;
        cfg.filter = jobs[j].filter == 0 ? nullptr : &models.at(jobs[j].filter);
        cfg.pca_k = a.pca;
        cfg.grid = grid;
        cfg.seed = a.seed;
        cfg.tol = a.tol;
        RunReport r = run_experiment(manifest, patches, folds, cfg);
        const fs::path stem = fs::path(a.out_dir) / run_stem(jobs[j].filter, jobs[j].mag);
        write_text(stem.string() + ".json", r.to_json().dump(1) + "\n");
        write_text(stem.string() + ".csv", r.to_csv());
        {
          std::lock_guard lock(out_mutex);
          out << run_stem(jobs[j].filter, jobs[j].mag);
          if (r.flagged) {
            out << " flagged";
          } else {
            for (const auto& row : r.summary()) {
              if (row.level == "patient" && row.rule == "sum") {
                out << " patient_sum " << fixed(row.value.mean) << " +- " << fixed(row.value.stddev);
              }
            }
          }
          out << "\n";
        }
        reports[j] = std::move(r);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<RetentionStats> retention;
  for (const auto& r : reports) {
    if (r->retention) retention.push_back(*r->retention);
  }
  if (!retention.empty()) write_retention_csv(fs::path(a.out_dir) / "retention.csv", retention);
  return kExitOk;
}

struct ReportArgs {
  std::string runs;
  std::string out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(a.runs, ec)) {
    const std::string name = e.path().filename().string();
    if (name.starts_with("run_f") && e.path().extension() == ".json") files.push_back(e.path());
  }
  if (ec) throw InputError("cannot read run directory " + a.runs);
  if (files.empty()) throw InputError("no run reports in " + a.runs);
  std::sort(files.begin(), files.end());

  std::vector<RunReport> reports;
  for (const auto& f : files) {
    std::ifstream in(f);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("malformed run report " + f.string() + ": " + e.what());
    }
    reports.push_back(RunReport::from_json(j));
  }
  std::sort(reports.begin(), reports.end(), [](const RunReport& x, const RunReport& y) {
    return std::tie(x.filter_index, x.magnification) < std::tie(y.filter_index, y.magnification);
  });

  std::string summary = "filter,magnification,features,level,rule,mean,std,flagged\n";
  using Key = std::tuple<int, std::string, std::string>;  // magnification, level, rule
  std::map<Key, double> baseline;
  for (const auto& r : reports) {
    if (r.flagged) {
      summary += std::to_string(r.filter_index) + "," + std::to_string(r.magnification) + "," +
                 std::string(to_string(r.feature_kind)) + ",,,,,1\n";
      continue;
    }
    for (const auto& row : r.summary()) {
      summary += std::to_string(r.filter_index) + "," + std::to_string(r.magnification) + "," +
                 std::string(to_string(r.feature_kind)) + "," + row.level + "," + row.rule + "," +
                 fixed(row.value.mean, 4) + "," + fixed(row.value.stddev, 4) + ",0\n";
      if (r.filter_index == 0) baseline[{r.magnification, row.level, row.rule}] = row.value.mean;
    }
  }

  // One line per filtered run and level/rule against the unfiltered run of the same magnification.
  std::string winloss = "filter,magnification,level,rule,baseline,filtered,delta,outcome\n";
  for (const auto& r : reports) {
    if (r.filter_index == 0) continue;
    if (r.flagged) {
      winloss += std::to_string(r.filter_index) + "," + std::to_string(r.magnification) + ",,,,,,flagged\n";
      continue;
    }
    for (const auto& row : r.summary()) {
      if (row.level == "patch" && row.rule == "all") continue;
      const auto it = baseline.find({r.magnification, row.level, row.rule});
      if (it == baseline.end()) continue;
      const double delta = row.value.mean - it->second;
      const char* outcome = delta > 0 ? "win" : delta < 0 ? "loss" : "tie";
      winloss += std::to_string(r.filter_index) + "," + std::to_string(r.magnification) + "," + row.level + "," +
                 row.rule + "," + fixed(it->second, 4) + "," + fixed(row.value.mean, 4) + "," + fixed(delta, 4) +
                 "," + outcome + "\n";
    }
  }

  const fs::path dir = a.out.empty() ? fs::path(a.runs) : fs::path(a.out);
  ensure_dir(dir);
  write_text(dir / "summary.csv", summary);
  write_text(dir / "winloss.csv", winloss);
  out << "runs " << reports.size() << " summary " << (dir / "summary.csv").string() << " winloss "
      << (dir / "winloss.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"histotile: patch relevance filtering and patient-level evaluation for histology images"};
  app.set_config("--config", "", "key = value config file; command line flags override it");
  app.require_subcommand(1);

  ScanArgs scan;
  auto* c_scan = app.add_subcommand("scan", "Scan a corpus and print counts");
  c_scan->add_option("root", scan.root, "Corpus root")->required();
  c_scan->add_option("--kind", scan.kind, "breakhis, crc or synthetic")->capture_default_str();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic corpus");
  c_synth->add_option("--out", synth.out_dir, "Output root")->required();
  c_synth->add_option("--kind", synth.kind, "breakhis or crc")->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--patients-per-class", synth.spec.patients_per_class)->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--images-per-patient", synth.spec.images_per_patient)->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--width", synth.spec.width)->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--height", synth.spec.height)->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--mags", synth.spec.magnifications)->delimiter(',')->check(CLI::IsMember({40, 100, 200, 400}));
  c_synth->add_option("--benign-density", synth.spec.benign_density)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_synth->add_option("--malign-density", synth.spec.malign_density)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_synth->add_option("--images-per-structure", synth.crc.images_per_structure)->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--side", synth.crc.side, "CRC tile side")->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_flag("--tiff", synth.crc.tiff, "Write CRC tiles as uncompressed TIFF");

  FilterArgs filt;
  auto* c_filter = app.add_subcommand("train-filter", "Train a relevance filter on a crc-like corpus");
  c_filter->add_option("--crc", filt.crc, "CRC-like corpus root")->required();
  c_filter->add_option("--filter", filt.filter, "Filter index")->check(CLI::Range(1, kFilterCount))->capture_default_str();
  c_filter->add_option("--features", filt.features, "pftas or deep")->check(CLI::IsMember({"pftas", "deep"}))->capture_default_str();
  c_filter->add_option("--deep-csv", filt.deep_csv, "Deep features of the crc tiles");
  c_filter->add_option("--pca", filt.pca, "PCA components (deep only)")->check(CLI::PositiveNumber);
  c_filter->add_option("--filter-scale", filt.scale, "Multiply the per-structure counts")->check(CLI::PositiveNumber)->capture_default_str();
  c_filter->add_option("--out", filt.out, "Model file (default filter_<i>.json)");
  c_filter->add_option("--cache", filt.cache, "Feature cache directory (default $HISTOTILE_CACHE)");
  c_filter->add_option("--seed", filt.seed)->capture_default_str();
  c_filter->add_option("--tol", filt.tol, "SMO tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  filt.grid.attach(c_filter);

  ExtractArgs ext;
  auto* c_extract = app.add_subcommand("extract-features", "Write PFTAS features of every patch (or crc tile) to CSV");
  c_extract->add_option("--corpus", ext.corpus, "Corpus root")->required();
  c_extract->add_option("--kind", ext.kind, "breakhis, crc or synthetic")->capture_default_str();
  c_extract->add_option("--out", ext.out, "Output CSV")->required();
  c_extract->add_option("--cache", ext.cache, "Feature cache directory (default $HISTOTILE_CACHE)");

  ImportArgs imp;
  auto* c_import = app.add_subcommand("import-deep", "Validate a deep-feature CSV");
  c_import->add_option("csv", imp.csv, "Deep-feature CSV")->required();
  c_import->add_option("--out", imp.out, "Write a canonical copy");

  RunArgs run_args;
  auto* c_run = app.add_subcommand("run", "Run the patient-wise 5-fold protocol");
  c_run->add_option("--corpus", run_args.corpus, "Breakhis-like corpus root")->required();
  c_run->add_option("--kind", run_args.kind, "breakhis or synthetic")->capture_default_str();
  c_run->add_option("--filters", run_args.filters, "Filter indices, 0 = no filter")->delimiter(',')->check(CLI::Range(0, kFilterCount));
  c_run->add_option("--mags", run_args.mags, "Magnifications (default: all in the corpus)")->delimiter(',')->check(CLI::IsMember({40, 100, 200, 400}));
  c_run->add_option("--features", run_args.features, "pftas or deep")->check(CLI::IsMember({"pftas", "deep"}))->capture_default_str();
  c_run->add_option("--deep-csv", run_args.deep_csv, "Deep features of the corpus patches");
  c_run->add_option("--pca", run_args.pca, "PCA components (deep only)")->check(CLI::PositiveNumber);
  c_run->add_option("--folds", run_args.folds, "Predefined fold file");
  c_run->add_option("--filter-dir", run_args.filter_dir, "Directory with filter_<i>.json models");
  c_run->add_option("--crc", run_args.crc, "CRC-like corpus for filters missing from --filter-dir");
  c_run->add_option("--crc-deep-csv", run_args.crc_deep_csv, "Deep features of the crc tiles");
  c_run->add_option("--filter-scale", run_args.filter_scale)->check(CLI::PositiveNumber)->capture_default_str();
  c_run->add_option("--out", run_args.out_dir, "Output directory")->capture_default_str();
  c_run->add_option("--cache", run_args.cache, "Feature cache directory (default $HISTOTILE_CACHE)");
  c_run->add_option("--seed", run_args.seed)->capture_default_str();
  c_run->add_option("--tol", run_args.tol, "SMO tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  c_run->add_option("--jobs", run_args.jobs, "Concurrent runs")->check(CLI::PositiveNumber)->capture_default_str();
  run_args.grid.attach(c_run);

  ReportArgs rep;
  auto* c_report = app.add_subcommand("report", "Summarize run reports into summary.csv and winloss.csv");
  c_report->add_option("--runs", rep.runs, "Directory with run_f*_m*.json")->required();
  c_report->add_option("--out", rep.out, "Output directory (default: --runs)");

  std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  if (!args.empty()) app.name(fs::path(args.front()).filename().string());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_scan->parsed()) return cmd_scan(scan, out);
    if (c_synth->parsed()) return cmd_synth(synth, out);
    if (c_filter->parsed()) return cmd_train_filter(filt, out);
    if (c_extract->parsed()) return cmd_extract(ext, out);
    if (c_import->parsed()) return cmd_import(imp, out);
    if (c_run->parsed()) return cmd_run(run_args, out);
    if (c_report->parsed()) return cmd_report(rep, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace histotile::cli
