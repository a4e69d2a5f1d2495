#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace curio {

// Rectangular, row-major matrix of named feature columns.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::size_t rows = 0;
  std::vector<double> data;

  std::size_t cols() const { return names.size(); }

  double& at(std::size_t r, std::size_t c) { return data[r * names.size() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * names.size() + c]; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
    return out;
  }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t c = 0; c < names.size(); ++c)
      if (names[c] == name) return c;
    throw std::invalid_argument("no such column: " + name);
  }

  FeatureMatrix select(const std::vector<std::string>& keep) const {
    FeatureMatrix out;
    out.names = keep;
    out.rows = rows;
    out.data.resize(rows * keep.size());
    std::vector<std::size_t> idx;
    idx.reserve(keep.size());
    for (const auto& n : keep) idx.push_back(column_index(n));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < keep.size(); ++c)
        out.at(r, c) = at(r, idx[c]);
    return out;
  }
};

namespace statdetail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

// Regularized incomplete beta I_x(a, b).
inline double incbeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

inline double student_t_two_sided_p(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  return incbeta(dof / 2.0, 0.5, dof / (dof + t * t));
}

}  // namespace statdetail

struct ZScoreResult {
  FeatureMatrix matrix;
  std::vector<double> mean;
  std::vector<double> stddev;  // population std
  std::vector<bool> zero_variance;
};

// Column-wise (x - mean)/std with population std. Zero-variance columns map
// to all-zeros and are flagged.
inline ZScoreResult zscore(const FeatureMatrix& m) {
  if (m.rows < 2) throw std::invalid_argument("zscore needs >= 2 rows");
  ZScoreResult out;
  out.matrix = m;
  const std::size_t k = m.cols();
  out.mean.assign(k, 0.0);
  out.stddev.assign(k, 0.0);
  out.zero_variance.assign(k, false);
  for (std::size_t c = 0; c < k; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) sum += m.at(r, c);
    const double mean = sum / double(m.rows);
    double ss = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double d = m.at(r, c) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / double(m.rows));
    out.mean[c] = mean;
    out.stddev[c] = sd;
    if (sd <= 0.0) {
      out.zero_variance[c] = true;
      for (std::size_t r = 0; r < m.rows; ++r) out.matrix.at(r, c) = 0.0;
    } else {
      for (std::size_t r = 0; r < m.rows; ++r)
        out.matrix.at(r, c) = (m.at(r, c) - mean) / sd;
    }
  }
  return out;
}

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<double> values;  // k x k
  std::vector<bool> zero_variance;

  double at(std::size_t i, std::size_t j) const {
    return values[i * names.size() + j];
  }
};

// Pearson correlation of all column pairs. Entries against a zero-variance
// column are defined as 0 and the column is flagged.
inline CorrelationMatrix pearson_matrix(const FeatureMatrix& m) {
  if (m.rows < 2) throw std::invalid_argument("pearson_matrix needs >= 2 rows");
  const std::size_t k = m.cols();
  CorrelationMatrix out;
  out.names = m.names;
  out.values.assign(k * k, 0.0);
  out.zero_variance.assign(k, false);

  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) sum += m.at(r, c);
    mean[c] = sum / double(m.rows);
    double ss = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double d = m.at(r, c) - mean[c];
      ss += d * d;
    }
    sd[c] = std::sqrt(ss);
    if (sd[c] <= 0.0) out.zero_variance[c] = true;
  }
  for (std::size_t i = 0; i < k; ++i) {
    out.values[i * k + i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      double rho = 0.0;
      if (!out.zero_variance[i] && !out.zero_variance[j]) {
        double cov = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r)
          cov += (m.at(r, i) - mean[i]) * (m.at(r, j) - mean[j]);
        rho = cov / (sd[i] * sd[j]);
        rho = std::clamp(rho, -1.0, 1.0);
      }
      out.values[i * k + j] = rho;
      out.values[j * k + i] = rho;
    }
  }
  return out;
}

// Greedy redundancy pruning: walking pairs in priority order, the
// lower-priority member of any pair with |rho| >= threshold is dropped.
inline std::vector<std::string> prune_correlated(
    const CorrelationMatrix& corr, double threshold,
    const std::vector<std::string>& keep_priority) {
  const std::size_t k = corr.names.size();
  if (keep_priority.size() != k)
    throw std::invalid_argument("keep_priority must cover all features");
  std::vector<std::size_t> order;
  order.reserve(k);
  for (const auto& name : keep_priority) {
    auto it = std::find(corr.names.begin(), corr.names.end(), name);
    if (it == corr.names.end())
      throw std::invalid_argument("keep_priority names unknown feature: " + name);
    order.push_back(std::size_t(it - corr.names.begin()));
  }
  std::vector<bool> dropped(k, false);
  for (std::size_t a = 0; a < k; ++a) {
    if (dropped[order[a]]) continue;
    for (std::size_t b = a + 1; b < k; ++b) {
      if (dropped[order[b]]) continue;
      if (std::abs(corr.at(order[a], order[b])) >= threshold)
        dropped[order[b]] = true;
    }
  }
  std::vector<std::string> retained;
  for (std::size_t c = 0; c < k; ++c)
    if (!dropped[c]) retained.push_back(corr.names[c]);
  return retained;
}

enum class MannWhitneyMode { automatic, exact, normal };
enum class Alternative { two_sided, greater };

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of the first sample (ties count 1/2)
  double p = 1.0;
  bool exact = false;
};

namespace statdetail {

inline double u_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a)
    for (double y : b) {
      if (x > y) u += 1.0;
      else if (x == y) u += 0.5;
    }
  return u;
}

}  // namespace statdetail

// Rank-sum test. Exact p by full enumeration of label assignments when
// |a|+|b| <= 12 (or mode == exact); otherwise normal approximation with tie
// and continuity corrections.
inline MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                        const std::vector<double>& b,
                                        MannWhitneyMode mode = MannWhitneyMode::automatic,
                                        Alternative alt = Alternative::two_sided) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("mann_whitney_u: empty sample");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  MannWhitneyResult res;
  res.u = statdetail::u_statistic(a, b);
  const double center = double(na) * double(nb) / 2.0;

  const bool use_exact =
      mode == MannWhitneyMode::exact || (mode == MannWhitneyMode::automatic && n <= 12);
  if (use_exact) {
    if (n > 24) throw std::invalid_argument("exact enumeration infeasible for n > 24");
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    // Enumerate all C(n, na) assignments of pooled values to the first sample.
    std::vector<std::size_t> comb(na);
    std::iota(comb.begin(), comb.end(), 0);
    std::uint64_t total = 0, extreme = 0;
    const double obs_dev = std::abs(res.u - center);
    for (;;) {
      std::vector<bool> in_a(n, false);
      for (auto i : comb) in_a[i] = true;
      std::vector<double> xa, xb;
      xa.reserve(na);
      xb.reserve(nb);
      for (std::size_t i = 0; i < n; ++i)
        (in_a[i] ? xa : xb).push_back(pooled[i]);
      const double u = statdetail::u_statistic(xa, xb);
      ++total;
      if (alt == Alternative::two_sided) {
        if (std::abs(u - center) >= obs_dev - 1e-9) ++extreme;
      } else {
        if (u >= res.u - 1e-9) ++extreme;
      }
      // next combination (lexicographic)
      std::size_t i = na;
      while (i > 0 && comb[i - 1] == n - na + i - 1) --i;
      if (i == 0) break;
      ++comb[i - 1];
      for (std::size_t j = i; j < na; ++j) comb[j] = comb[j - 1] + 1;
    }
    res.p = double(extreme) / double(total);
    res.exact = true;
    return res;
  }

  // Normal approximation with tie correction.
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && pooled[j] == pooled[i]) ++j;
    const double t = double(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double var = double(na) * double(nb) / 12.0 *
                     ((double(n) + 1.0) - tie_term / (double(n) * (double(n) - 1.0)));
  if (var <= 0.0) {
    res.p = 1.0;
    return res;
  }
  const double sigma = std::sqrt(var);
  if (alt == Alternative::two_sided) {
    const double num = std::max(std::abs(res.u - center) - 0.5, 0.0);
    res.p = std::min(1.0, 2.0 * (1.0 - statdetail::normal_cdf(num / sigma)));
  } else {
    const double z = (res.u - center - 0.5) / sigma;
    res.p = 1.0 - statdetail::normal_cdf(z);
  }
  return res;
}

struct OlsFit {
  std::vector<std::string> names;  // "intercept" first, then predictors
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  std::vector<double> t_values;
  std::vector<double> p_values;
  double r2 = 0.0;
  double adjusted_r2 = 0.0;
  std::size_t n = 0;
  std::vector<double> residuals;
};

namespace statdetail {

// Gauss-Jordan inversion with partial pivoting; false when singular.
inline bool invert_in_place(std::vector<double>& m, std::size_t k) {
  std::vector<double> inv(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) inv[i * k + i] = 1.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < k * k; ++i) scale = std::max(scale, std::abs(m[i]));
  if (scale == 0.0) return false;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(m[r * k + col]) > std::abs(m[pivot * k + col])) pivot = r;
    if (std::abs(m[pivot * k + col]) < 1e-12 * scale) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < k; ++c) {
        std::swap(m[pivot * k + c], m[col * k + c]);
        std::swap(inv[pivot * k + c], inv[col * k + c]);
      }
    }
    const double d = m[col * k + col];
    for (std::size_t c = 0; c < k; ++c) {
      m[col * k + c] /= d;
      inv[col * k + c] /= d;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = m[r * k + col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < k; ++c) {
        m[r * k + c] -= f * m[col * k + c];
        inv[r * k + c] -= f * inv[col * k + c];
      }
    }
  }
  m = std::move(inv);
  return true;
}

}  // namespace statdetail

// Least squares with intercept; standard errors from the unbiased residual
// variance, p-values from the t distribution with n - k - 1 dof.
inline OlsFit ols_fit(const FeatureMatrix& x, const std::vector<double>& y) {
  const std::size_t n = x.rows, k = x.cols();
  if (y.size() != n) throw std::invalid_argument("ols_fit: row mismatch");
  if (n <= k + 1) throw std::invalid_argument("ols_fit: needs rows > columns + 1");
  const std::size_t p = k + 1;

  // Normal equations over the design [1 | X].
  std::vector<double> xtx(p * p, 0.0), xty(p, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> row(p);
    row[0] = 1.0;
    for (std::size_t c = 0; c < k; ++c) row[c + 1] = x.at(r, c);
    for (std::size_t i = 0; i < p; ++i) {
      xty[i] += row[i] * y[r];
      for (std::size_t j = i; j < p; ++j) xtx[i * p + j] += row[i] * row[j];
    }
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < i; ++j) xtx[i * p + j] = xtx[j * p + i];

  std::vector<double> inv = xtx;
  if (!statdetail::invert_in_place(inv, p)) throw std::runtime_error("singular-design");

  OlsFit fit;
  fit.n = n;
  fit.names.push_back("intercept");
  for (const auto& nm : x.names) fit.names.push_back(nm);
  fit.coefficients.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      fit.coefficients[i] += inv[i * p + j] * xty[j];

  fit.residuals.assign(n, 0.0);
  double rss = 0.0, ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= double(n);
  double tss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double pred = fit.coefficients[0];
    for (std::size_t c = 0; c < k; ++c) pred += fit.coefficients[c + 1] * x.at(r, c);
    fit.residuals[r] = y[r] - pred;
    rss += fit.residuals[r] * fit.residuals[r];
    tss += (y[r] - ybar) * (y[r] - ybar);
  }
  const double dof = double(n) - double(p);
  const double s2 = rss / dof;
  fit.std_errors.assign(p, 0.0);
  fit.t_values.assign(p, 0.0);
  fit.p_values.assign(p, 1.0);
  for (std::size_t i = 0; i < p; ++i) {
    const double v = s2 * inv[i * p + i];
    fit.std_errors[i] = v > 0.0 ? std::sqrt(v) : 0.0;
    if (fit.std_errors[i] > 0.0) {
      fit.t_values[i] = fit.coefficients[i] / fit.std_errors[i];
      fit.p_values[i] = statdetail::student_t_two_sided_p(fit.t_values[i], dof);
    } else {
      fit.t_values[i] = fit.coefficients[i] == 0.0
                            ? 0.0
                            : std::numeric_limits<double>::infinity();
      fit.p_values[i] = fit.coefficients[i] == 0.0 ? 1.0 : 0.0;
    }
  }
  fit.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  fit.adjusted_r2 = 1.0 - (1.0 - fit.r2) * (double(n) - 1.0) / dof;
  return fit;
}

struct VifEntry {
  std::string name;
  double vif = 1.0;
};

struct VifResult {
  std::vector<VifEntry> retained;
  std::vector<VifEntry> removed;  // with VIF at removal time

  std::vector<std::string> retained_names() const {
    std::vector<std::string> out;
    out.reserve(retained.size());
    for (const auto& e : retained) out.push_back(e.name);
    return out;
  }
};

namespace statdetail {

// R^2 of regressing `target` on `predictors` (+ intercept); singular designs
// count as perfectly explained.
inline double aux_r2(const FeatureMatrix& x, const std::vector<std::size_t>& predictors,
                     std::size_t target) {
  const std::size_t n = x.rows, k = predictors.size(), p = k + 1;
  std::vector<double> xtx(p * p, 0.0), xty(p, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> row(p);
    row[0] = 1.0;
    for (std::size_t c = 0; c < k; ++c) row[c + 1] = x.at(r, predictors[c]);
    const double yv = x.at(r, target);
    for (std::size_t i = 0; i < p; ++i) {
      xty[i] += row[i] * yv;
      for (std::size_t j = i; j < p; ++j) xtx[i * p + j] += row[i] * row[j];
    }
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < i; ++j) xtx[i * p + j] = xtx[j * p + i];
  std::vector<double> inv = xtx;
  if (!invert_in_place(inv, p)) return 1.0;
  std::vector<double> beta(p, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) beta[i] += inv[i * p + j] * xty[j];
  double rss = 0.0, ybar = 0.0, tss = 0.0;
  for (std::size_t r = 0; r < n; ++r) ybar += x.at(r, target);
  ybar /= double(n);
  for (std::size_t r = 0; r < n; ++r) {
    double pred = beta[0];
    for (std::size_t c = 0; c < k; ++c) pred += beta[c + 1] * x.at(r, predictors[c]);
    const double res = x.at(r, target) - pred;
    rss += res * res;
    const double d = x.at(r, target) - ybar;
    tss += d * d;
  }
  if (tss <= 0.0) return 1.0;
  return std::max(0.0, 1.0 - rss / tss);
}

}  // namespace statdetail

// Iteratively removes the feature with the largest variance inflation factor
// while any VIF exceeds the threshold. Among equal VIFs the later column
// goes, so output is deterministic in input column order.
inline VifResult vif_prune(const FeatureMatrix& x, double threshold = 10.0) {
  if (x.cols() < 2) throw std::invalid_argument("vif_prune needs >= 2 features");
  VifResult out;
  std::vector<std::size_t> active(x.cols());
  std::iota(active.begin(), active.end(), 0);
  std::vector<double> last_vif(x.cols(), 1.0);
  while (active.size() >= 2) {
    std::size_t worst = 0;
    double worst_vif = -1.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      std::vector<std::size_t> others;
      others.reserve(active.size() - 1);
      for (std::size_t j = 0; j < active.size(); ++j)
        if (j != i) others.push_back(active[j]);
      const double r2 = statdetail::aux_r2(x, others, active[i]);
      const double denom = 1.0 - r2;
      const double vif =
          denom < 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / denom;
      last_vif[active[i]] = vif;
      if (vif >= worst_vif) {  // >= : later column wins ties
        worst_vif = vif;
        worst = i;
      }
    }
    if (worst_vif <= threshold) break;
    out.removed.push_back({x.names[active[worst]], worst_vif});
    active.erase(active.begin() + worst);
  }
  for (auto c : active) out.retained.push_back({x.names[c], last_vif[c]});
  return out;
}

// Elbow of a non-increasing inertia curve: the interior point with maximum
// vertical distance below the chord joining the endpoints; ties -> smaller k.
inline int elbow(const std::vector<std::pair<int, double>>& curve) {
  if (curve.size() < 3) throw std::invalid_argument("elbow needs >= 3 points");
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].first <= curve[i - 1].first)
      throw std::invalid_argument("elbow curve must be sorted by k");
    if (curve[i].second > curve[i - 1].second)
      throw std::runtime_error("non-monotone-inertia");
  }
  const double k0 = curve.front().first, y0 = curve.front().second;
  const double k1 = curve.back().first, y1 = curve.back().second;
  int best_k = curve[1].first;
  double best_dist = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double frac = (double(curve[i].first) - k0) / (k1 - k0);
    const double chord = y0 + (y1 - y0) * frac;
    const double dist = chord - curve[i].second;
    if (dist > best_dist) {
      best_dist = dist;
      best_k = curve[i].first;
    }
  }
  return best_k;
}

}  // namespace curio
