#include "histotile/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>

#include "histotile/error.hpp"
#include "histotile/kernels.hpp"
#include "histotile/seed.hpp"

namespace histotile {
namespace {

constexpr double kTau = 1e-12;

void validate_training_set(MatrixView x, std::span<const int> y) {
  if (x.rows != y.size()) throw Error("label count does not match the number of rows");
  if (x.rows == 0 || x.cols == 0) throw Error("empty training set");
  bool pos = false, neg = false;
  for (int label : y) {
    if (label == +1) {
      pos = true;
    } else if (label == -1) {
      neg = true;
    } else {
      throw Error("labels must be +1 or -1");
    }
  }
  if (!pos || !neg) throw Error("training set contains a single class");
  for (double v : x.data) {
    if (!std::isfinite(v)) throw Error("training features contain non-finite values");
  }
}

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw Error("matrix payload has the wrong size");
  return m;
}

Matrix select_rows(MatrixView x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

// ---- standardizer / calibration -------------------------------------------

Standardizer Standardizer::fit(MatrixView x) {
  if (x.rows == 0) throw Error("cannot fit a standardizer on zero rows");
  Standardizer s;
  s.mean.assign(x.cols, 0.0);
  s.stddev.assign(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += x(r, j);
  for (double& m : s.mean) m /= static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t j = 0; j < x.cols; ++j) s.stddev[j] += (x(r, j) - s.mean[j]) * (x(r, j) - s.mean[j]);
  for (double& sd : s.stddev) {
    sd = std::sqrt(sd / static_cast<double>(x.rows));
    if (!(sd > 1e-12)) sd = 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) {
    throw Error("input has width " + std::to_string(x.size()) + ", model expects " +
                std::to_string(mean.size()));
  }
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / stddev[j];
  return z;
}

Matrix Standardizer::apply(MatrixView x) const {
  Matrix out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto z = apply(x.row(r));
    std::copy(z.begin(), z.end(), out.row(r).begin());
  }
  return out;
}

double PlattCalibration::probability(double decision) const {
  const double t = a * decision + b;
  // Evaluated on the side that cannot overflow.
  return t >= 0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
}

PlattCalibration PlattCalibration::fit(std::span<const double> decisions, std::span<const int> labels) {
  if (decisions.size() != labels.size() || decisions.empty()) {
    throw Error("calibration needs one label per decision value");
  }
  double prior1 = 0, prior0 = 0;
  for (int y : labels) (y > 0 ? prior1 : prior0) += 1;
  const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo_target = 1.0 / (prior0 + 2.0);
  std::vector<double> t(labels.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = labels[i] > 0 ? hi_target : lo_target;

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double fab = decisions[i] * a + b;
      f += fab >= 0 ? t[i] * fab + std::log1p(std::exp(-fab))
                    : (t[i] - 1.0) * fab + std::log1p(std::exp(fab));
    }
    return f;
  };

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double fab = decisions[i] * a + b;
      double p, q;
      if (fab >= 0) {
        p = std::exp(-fab) / (1.0 + std::exp(-fab));
        q = 1.0 / (1.0 + std::exp(-fab));
      } else {
        p = 1.0 / (1.0 + std::exp(fab));
        q = std::exp(fab) / (1.0 + std::exp(fab));
      }
      const double d2 = p * q;
      h11 += decisions[i] * decisions[i] * d2;
      h22 += d2;
      h21 += decisions[i] * d2;
      const double d1 = t[i] - p;
      g1 += decisions[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {a, b};
}

// ---- trained model ---------------------------------------------------------

double TrainedClassifier::decision(std::span<const double> x) const {
  const std::vector<double> z = standardizer.apply(x);
  double f = bias;
  for (std::size_t i = 0; i < dual_coefs.size(); ++i) {
    const auto sv = support_vectors.row(i);
    double d = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) d += (z[j] - sv[j]) * (z[j] - sv[j]);
    f += dual_coefs[i] * std::exp(-params.gamma * d);
  }
  return f;
}

double TrainedClassifier::probability(std::span<const double> x) const {
  return calibration.probability(decision(x));
}

nlohmann::json TrainedClassifier::to_json() const {
  return {{"format", "histotile-svm/1"},
          {"kernel", "rbf"},
          {"c", params.c},
          {"gamma", params.gamma},
          {"standardizer", {{"mean", standardizer.mean}, {"stddev", standardizer.stddev}}},
          {"support_vectors", matrix_json(support_vectors)},
          {"dual_coefs", dual_coefs},
          {"bias", bias},
          {"calibration", {{"a", calibration.a}, {"b", calibration.b}}}};
}

TrainedClassifier TrainedClassifier::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "histotile-svm/1") throw Error("unsupported classifier format");
  TrainedClassifier m;
  m.params = {j.at("c").get<double>(), j.at("gamma").get<double>()};
  m.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
  m.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
  m.support_vectors = matrix_from_json(j.at("support_vectors"));
  m.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.calibration = {j.at("calibration").at("a").get<double>(), j.at("calibration").at("b").get<double>()};
  if (m.dual_coefs.size() != m.support_vectors.rows ||
      (m.support_vectors.rows > 0 && m.support_vectors.cols != m.standardizer.mean.size())) {
    throw Error("inconsistent classifier payload");
  }
  return m;
}

void TrainedClassifier::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model " + path.string());
  out << to_json().dump(1) << '\n';
}

TrainedClassifier TrainedClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model " + path.string());
  return from_json(nlohmann::json::parse(in));
}

// ---- kernels -----------------------------------------------------------------

DenseKernel DenseKernel::rbf(MatrixView x, double gamma) {
  Matrix k = kernels::pairwise_sq_dists_parallel(x, x);
  kernels::rbf_from_sq_dists_parallel(k.data, gamma, k.data);
  return DenseKernel(std::move(k));
}

CachedRbfKernel::CachedRbfKernel(MatrixView x, double gamma, std::size_t cache_bytes)
    : x_(x), gamma_(gamma), slot_of_(x.rows, 0) {
  const std::size_t row_bytes = std::max<std::size_t>(1, x.rows * sizeof(double));
  capacity_ = std::clamp<std::size_t>(cache_bytes / row_bytes, 2, std::max<std::size_t>(2, x.rows));
}

std::span<const double> CachedRbfKernel::row(std::size_t i) {
  ++clock_;
  if (slot_of_[i] != 0) {
    const std::size_t slot = slot_of_[i] - 1;
    last_used_[slot] = clock_;
    return rows_[slot];
  }
  std::size_t slot;
  if (rows_.size() < capacity_) {
    slot = rows_.size();
    rows_.emplace_back(x_.rows);
    row_of_slot_.push_back(i);
    last_used_.push_back(clock_);
  } else {
    slot = static_cast<std::size_t>(std::min_element(last_used_.begin(), last_used_.end()) -
                                    last_used_.begin());
    slot_of_[row_of_slot_[slot]] = 0;
    row_of_slot_[slot] = i;
    last_used_[slot] = clock_;
  }
  slot_of_[i] = slot + 1;
  kernels::rbf_row_parallel(x_, i, gamma_, rows_[slot]);
  return rows_[slot];
}

// ---- SMO -----------------------------------------------------------------------

SmoSolution solve_smo(KernelSource& kernel, std::span<const int> y, double c, const SmoOptions& opts) {
  const std::size_t n = kernel.size();
  if (y.size() != n) throw Error("label count does not match the kernel size");
  if (!(c > 0) || !std::isfinite(c)) throw Error("C must be positive and finite");

  SmoSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 0.5 a'Qa - e'a
  std::vector<double> row_i(n);
  auto& alpha = sol.alpha;
  const std::size_t max_iter =
      opts.max_iterations ? opts.max_iterations : std::max<std::size_t>(10'000'000, 100 * n);

  auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < c : alpha[t] > 0; };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0 : alpha[t] < c; };

  while (sol.iterations < max_iter) {
    // i: maximal violator from the up set. j: second-order choice from the low set.
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
    }
    if (i == n) {
      sol.converged = true;
      break;
    }
    const auto ki = kernel.row(i);
    std::copy(ki.begin(), ki.end(), row_i.begin());
    const double kii = kernel.diagonal(i);

    double g_min = std::numeric_limits<double>::infinity();
    double best_gain = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * grad[t];
      g_min = std::min(g_min, v);
      const double b = g_max - v;
      if (b <= 0) continue;
      double a = kii + kernel.diagonal(t) - 2.0 * row_i[t];
      if (a <= 0) a = kTau;
      const double gain = -(b * b) / a;
      if (gain < best_gain) {
        best_gain = gain;
        j = t;
      }
    }
    if (j == n || g_max - g_min <= opts.tol) {
      sol.converged = true;
      break;
    }
    ++sol.iterations;

    const auto kj = kernel.row(j);
    const double kjj = kernel.diagonal(j), kij = row_i[j];
    const double old_ai = alpha[i], old_aj = alpha[j];

    double quad = kii + kjj - 2.0 * kij;
    if (quad <= 0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[i] * row_i[t] * dai + y[j] * kj[t] * daj);
    }
  }

  // Bias from the free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  sol.bias = -rho;
  return sol;
}

namespace {

double kkt_residual(double yf, double alpha, double c) {
  if (alpha <= 0) return std::max(0.0, 1.0 - yf);
  if (alpha >= c) return std::max(0.0, yf - 1.0);
  return std::abs(yf - 1.0);
}

}  // namespace

double max_kkt_violation(KernelSource& kernel, std::span<const int> y, const SmoSolution& sol, double c) {
  double worst = 0.0;
  for (std::size_t t = 0; t < kernel.size(); ++t) {
    const auto kt = kernel.row(t);
    double f = sol.bias;
    for (std::size_t j = 0; j < kernel.size(); ++j) f += y[j] * sol.alpha[j] * kt[j];
    worst = std::max(worst, kkt_residual(y[t] * f, sol.alpha[t], c));
  }
  return worst;
}

std::vector<double> kkt_residuals(const TrainedClassifier& model, MatrixView x, std::span<const int> y,
                                  std::span<const double> alpha) {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    out[i] = kkt_residual(y[i] * model.decision(x.row(i)), alpha[i], model.params.c);
  }
  return out;
}

// ---- training --------------------------------------------------------------------

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
  if (folds < 1) throw Error("fold count must be positive");
  std::vector<int> fold_of(y.size(), 0);
  Rng rng(seed);
  std::size_t offset = 0;
  for (int cls : {-1, +1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == cls) idx.push_back(i);
    }
    rng.shuffle(idx);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      fold_of[idx[k]] = static_cast<int>((offset + k) % static_cast<std::size_t>(folds));
    }
    offset += idx.size();
  }
  return fold_of;
}

namespace {

SmoSolution solve_rbf(MatrixView z, std::span<const int> y, const KernelParams& params,
                      const TrainOptions& opts) {
  if (z.rows <= opts.dense_kernel_limit) {
    DenseKernel kernel = DenseKernel::rbf(z, params.gamma);
    return solve_smo(kernel, y, params.c, {opts.tol, 0});
  }
  CachedRbfKernel kernel(z, params.gamma, opts.cache_bytes);
  return solve_smo(kernel, y, params.c, {opts.tol, 0});
}

}  // namespace

TrainResult train_detailed(MatrixView x, std::span<const int> y, const KernelParams& params,
                           const TrainOptions& opts) {
  validate_training_set(x, y);
  if (!(params.c > 0) || !(params.gamma > 0) || !std::isfinite(params.c) || !std::isfinite(params.gamma)) {
    throw Error("kernel parameters must be positive and finite");
  }

  TrainResult result;
  TrainedClassifier& model = result.model;
  model.params = params;
  model.standardizer = Standardizer::fit(x);
  const Matrix z = model.standardizer.apply(x);

  SmoSolution sol = solve_rbf(z.view(), y, params, opts);
  std::size_t n_sv = 0;
  for (double a : sol.alpha) n_sv += a > 0 ? 1 : 0;
  model.support_vectors = Matrix(n_sv, x.cols);
  model.dual_coefs.reserve(n_sv);
  for (std::size_t i = 0, k = 0; i < x.rows; ++i) {
    if (sol.alpha[i] <= 0) continue;
    const auto src = z.row(i);
    std::copy(src.begin(), src.end(), model.support_vectors.row(k++).begin());
    model.dual_coefs.push_back(y[i] * sol.alpha[i]);
  }
  model.bias = sol.bias;
  result.alpha = std::move(sol.alpha);
  result.iterations = sol.iterations;
  result.converged = sol.converged;

  if (opts.calibrate) {
    const int k = std::max(2, opts.calibration_folds);
    const auto fold_of = stratified_folds(y, k, derive_seed(opts.seed, "calibration"));
    std::vector<double> decisions(x.rows, 0.0);
    TrainOptions sub = opts;
    sub.calibrate = false;
    for (int f = 0; f < k; ++f) {
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < x.rows; ++i) (fold_of[i] == f ? te : tr).push_back(i);
      if (te.empty()) continue;
      std::vector<int> ytr;
      bool pos = false, neg = false;
      for (std::size_t i : tr) {
        ytr.push_back(y[i]);
        (y[i] > 0 ? pos : neg) = true;
      }
      if (pos && neg) {
        const Matrix xtr = select_rows(x, tr);
        const TrainedClassifier m = train(xtr.view(), ytr, params, sub);
        for (std::size_t i : te) decisions[i] = m.decision(x.row(i));
      } else {
        for (std::size_t i : te) decisions[i] = pos ? 1.0 : (neg ? -1.0 : 0.0);
      }
    }
    model.calibration = PlattCalibration::fit(decisions, y);
  }
  return result;
}

TrainedClassifier train(MatrixView x, std::span<const int> y, const KernelParams& params,
                        const TrainOptions& opts) {
  return train_detailed(x, y, params, opts).model;
}

// ---- grid search --------------------------------------------------------------------

std::vector<KernelParams> make_grid(std::span<const double> cs, std::span<const double> gammas) {
  std::vector<KernelParams> grid;
  for (double c : cs)
    for (double g : gammas) grid.push_back({c, g});
  return grid;
}

std::vector<KernelParams> default_grid() {
  std::vector<double> cs, gammas;
  for (int e = -5; e <= 15; e += 2) cs.push_back(std::ldexp(1.0, e));
  for (int e = -15; e <= 3; e += 2) gammas.push_back(std::ldexp(1.0, e));
  return make_grid(cs, gammas);
}

nlohmann::json GridSearchReport::to_json() const {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : grid) {
    points.push_back({{"c", p.params.c}, {"gamma", p.params.gamma}, {"mean_accuracy", p.mean_accuracy}});
  }
  return {{"cv_folds", cv_folds},
          {"best", {{"c", best.c}, {"gamma", best.gamma}}},
          {"best_accuracy", best_accuracy},
          {"grid", points}};
}

GridSearchReport grid_search(MatrixView x, std::span<const int> y, std::span<const KernelParams> grid,
                             const GridSearchOptions& opts) {
  validate_training_set(x, y);
  if (grid.empty()) throw Error("grid search needs at least one grid point");
  for (const auto& p : grid) {
    if (!(p.c > 0) || !(p.gamma > 0)) throw Error("grid points must be positive");
  }
  std::size_t n_pos = 0;
  for (int v : y) n_pos += v > 0 ? 1 : 0;
  const std::size_t per_class = std::min(n_pos, y.size() - n_pos);
  if (per_class < static_cast<std::size_t>(opts.folds)) {
    throw Error("grid search needs at least " + std::to_string(opts.folds) + " instances per class");
  }

  const auto fold_of = stratified_folds(y, opts.folds, derive_seed(opts.seed, "grid-cv"));
  std::vector<double> acc_sum(grid.size(), 0.0);

  // Grid points grouped by gamma so one kernel matrix serves every C.
  std::map<double, std::vector<std::size_t>> by_gamma;
  for (std::size_t g = 0; g < grid.size(); ++g) by_gamma[grid[g].gamma].push_back(g);

  for (int f = 0; f < opts.folds; ++f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < x.rows; ++i) (fold_of[i] == f ? te : tr).push_back(i);
    std::vector<int> ytr, yte;
    for (std::size_t i : tr) ytr.push_back(y[i]);
    for (std::size_t i : te) yte.push_back(y[i]);

    const Matrix xtr = select_rows(x, tr);
    const Standardizer std_fold = Standardizer::fit(xtr.view());
    const Matrix ztr = std_fold.apply(xtr.view());
    const Matrix zte = std_fold.apply(select_rows(x, te).view());
    const bool dense = ztr.rows <= opts.dense_kernel_limit;
    const Matrix d_train = dense ? kernels::pairwise_sq_dists_parallel(ztr.view(), ztr.view()) : Matrix();
    const Matrix d_test = kernels::pairwise_sq_dists_parallel(zte.view(), ztr.view());

    for (const auto& [gamma, members] : by_gamma) {
      Matrix k_test(d_test.rows, d_test.cols);
      kernels::rbf_from_sq_dists_parallel(d_test.data, gamma, k_test.data);
      std::optional<DenseKernel> k_train;
      if (dense) {
        Matrix k(d_train.rows, d_train.cols);
        kernels::rbf_from_sq_dists_parallel(d_train.data, gamma, k.data);
        k_train.emplace(std::move(k));
      }
      std::vector<double> fold_acc(members.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(members.size()); ++m) {
        const KernelParams& p = grid[members[static_cast<std::size_t>(m)]];
        SmoSolution sol;
        if (dense) {
          // DenseKernel::row only reads, so the matrix is shared across threads.
          sol = solve_smo(*k_train, ytr, p.c, {opts.tol, 0});
        } else {
          CachedRbfKernel cached(ztr.view(), gamma, std::size_t{256} << 20);
          sol = solve_smo(cached, ytr, p.c, {opts.tol, 0});
        }
        std::size_t correct = 0;
        for (std::size_t t = 0; t < te.size(); ++t) {
          double dec = sol.bias;
          const auto kt = k_test.row(t);
          for (std::size_t j = 0; j < tr.size(); ++j) {
            if (sol.alpha[j] > 0) dec += ytr[j] * sol.alpha[j] * kt[j];
          }
          correct += ((dec >= 0 ? 1 : -1) == yte[t]) ? 1 : 0;
        }
        fold_acc[static_cast<std::size_t>(m)] = static_cast<double>(correct) / static_cast<double>(te.size());
      }
      for (std::size_t m = 0; m < members.size(); ++m) acc_sum[members[m]] += fold_acc[m];
    }
  }

  GridSearchReport report;
  report.cv_folds = opts.folds;
  bool have_best = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double acc = acc_sum[g] / opts.folds;
    report.grid.push_back({grid[g], acc});
    const bool better =
        !have_best || acc > report.best_accuracy ||
        (acc == report.best_accuracy &&
         (grid[g].c < report.best.c || (grid[g].c == report.best.c && grid[g].gamma < report.best.gamma)));
    if (better) {
      report.best = grid[g];
      report.best_accuracy = acc;
      have_best = true;
    }
  }
  return report;
}

}  // namespace histotile
