// Copyright 2026 The dpfs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpfs/accountant.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <sstream>

#include "dpfs/error.hpp"

namespace dpfs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double StandardNormalCdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
double StandardNormalSf(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }

// Privacy loss of the subsampled Gaussian at noise scale m, remove
// direction: L(x) = log((1-gamma) + gamma * e^((2x-1)/(2 m^2))), monotone
// increasing in x. The add direction is -L(x) evaluated under N(0, m^2).
double SubsampledLoss(double x, double m, double gamma) {
  const double g = (2.0 * x - 1.0) / (2.0 * m * m);
  return std::log1p(gamma * std::expm1(g));
}

// Inverse of SubsampledLoss: the x with loss l, defined for
// l > log(1 - gamma).
double SubsampledLossInverse(double l, double m, double gamma) {
  const double ratio = (std::expm1(l) + gamma) / gamma;
  return m * m * std::log(ratio) + 0.5;
}

double MixtureCdf(double x, double m, double gamma) {
  return (1.0 - gamma) * StandardNormalCdf(x / m) +
         gamma * StandardNormalCdf((x - 1.0) / m);
}

// Largest x with f(x) >= target, given f monotone decreasing; bisection on
// [lo, hi] with f(lo) >= target >= f(hi).
template <typename F>
double BisectDecreasing(F f, double lo, double hi, double target) {
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (std::abs(lo) + 1.0); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) >= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

int64_t CeilDiv(int64_t a, int64_t b) {
  // b > 0.
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

std::mutex& FftwPlanMutex() {
  static std::mutex mutex;
  return mutex;
}

// Linear convolution of two non-negative mass vectors via real FFT.
// Tiny negative entries from round-off are clamped to zero.
std::vector<double> FftConvolve(const std::vector<double>& a,
                                const std::vector<double>& b) {
  const size_t out_size = a.size() + b.size() - 1;
  size_t n = 1;
  while (n < out_size) n <<= 1;

  double* ta = fftw_alloc_real(n);
  double* tb = fftw_alloc_real(n);
  fftw_complex* fa = fftw_alloc_complex(n / 2 + 1);
  fftw_complex* fb = fftw_alloc_complex(n / 2 + 1);

  std::memset(ta, 0, n * sizeof(double));
  std::memset(tb, 0, n * sizeof(double));
  std::memcpy(ta, a.data(), a.size() * sizeof(double));
  std::memcpy(tb, b.data(), b.size() * sizeof(double));

  fftw_plan plan_a, plan_b, plan_inv;
  {
    std::lock_guard<std::mutex> lock(FftwPlanMutex());
    plan_a = fftw_plan_dft_r2c_1d(static_cast<int>(n), ta, fa, FFTW_ESTIMATE);
    plan_b = fftw_plan_dft_r2c_1d(static_cast<int>(n), tb, fb, FFTW_ESTIMATE);
  }
  fftw_execute(plan_a);
  fftw_execute(plan_b);
  for (size_t i = 0; i < n / 2 + 1; ++i) {
    const double re = fa[i][0] * fb[i][0] - fa[i][1] * fb[i][1];
    const double im = fa[i][0] * fb[i][1] + fa[i][1] * fb[i][0];
    fa[i][0] = re;
    fa[i][1] = im;
  }
  {
    std::lock_guard<std::mutex> lock(FftwPlanMutex());
    plan_inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), fa, ta, FFTW_ESTIMATE);
  }
  fftw_execute(plan_inv);

  std::vector<double> result(out_size);
  const double scale = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < out_size; ++i) {
    result[i] = std::max(0.0, ta[i] * scale);
  }
  {
    std::lock_guard<std::mutex> lock(FftwPlanMutex());
    fftw_destroy_plan(plan_a);
    fftw_destroy_plan(plan_b);
    fftw_destroy_plan(plan_inv);
  }
  fftw_free(ta);
  fftw_free(tb);
  fftw_free(fa);
  fftw_free(fb);
  return result;
}

using Branch = PrivacyLossDistribution::Branch;

// Drops exact-zero masses at both ends.
void StripZeroEdges(Branch& branch) {
  size_t first = 0;
  while (first < branch.masses.size() && branch.masses[first] == 0.0) ++first;
  size_t last = branch.masses.size();
  while (last > first && branch.masses[last - 1] == 0.0) --last;
  if (first == last) {
    branch.masses.clear();
    return;
  }
  branch.masses.erase(branch.masses.begin() + last, branch.masses.end());
  branch.masses.erase(branch.masses.begin(), branch.masses.begin() + first);
  branch.min_index += static_cast<int64_t>(first);
}

// Restricts the branch to grid indices [lo, hi]. Mass above hi is
// pessimistically moved to the infinity mass; mass below lo is lumped at lo
// (rounding those losses up).
void TruncateToWindow(Branch& branch, int64_t lo, int64_t hi) {
  if (branch.masses.empty()) return;
  const int64_t cur_lo = branch.min_index;
  const int64_t cur_hi = branch.max_index();
  if (cur_lo >= lo && cur_hi <= hi) return;

  long double below = 0.0L, above = 0.0L;
  std::vector<double> kept;
  const int64_t new_lo = std::max(lo, std::min(cur_lo, hi));
  const int64_t new_hi = std::min(hi, cur_hi);
  if (new_hi >= new_lo) kept.resize(static_cast<size_t>(new_hi - new_lo + 1), 0.0);
  for (int64_t i = cur_lo; i <= cur_hi; ++i) {
    const double mass = branch.masses[static_cast<size_t>(i - cur_lo)];
    if (mass == 0.0) continue;
    if (i < new_lo) {
      below += mass;
    } else if (i > new_hi) {
      above += mass;
    } else {
      kept[static_cast<size_t>(i - new_lo)] += mass;
    }
  }
  if (kept.empty()) {
    kept.resize(1, 0.0);
  }
  kept[0] += static_cast<double>(below);
  branch.masses = std::move(kept);
  branch.min_index = new_lo;
  branch.infinity_mass += static_cast<double>(above);
  StripZeroEdges(branch);
}

// log of the moment generating function sum_i m_i * e^(s * l_i), computed
// with a log-sum-exp over the non-zero masses.
double LogMgf(const Branch& branch, double grid_width, double s) {
  double max_term = -kInf;
  for (size_t k = 0; k < branch.masses.size(); ++k) {
    if (branch.masses[k] <= 0.0) continue;
    const double loss =
        (branch.min_index + static_cast<int64_t>(k)) * grid_width;
    max_term = std::max(max_term, std::log(branch.masses[k]) + s * loss);
  }
  if (max_term == -kInf) return -kInf;
  long double acc = 0.0L;
  for (size_t k = 0; k < branch.masses.size(); ++k) {
    if (branch.masses[k] <= 0.0) continue;
    const double loss =
        (branch.min_index + static_cast<int64_t>(k)) * grid_width;
    acc += std::exp(std::log(branch.masses[k]) + s * loss - max_term);
  }
  return max_term + std::log(static_cast<double>(acc));
}

struct Window {
  int64_t lo;
  int64_t hi;
};

// Chernoff bound on the support needed for a steps-fold self-composition:
// outside the window, every intermediate k-fold tail holds at most `budget`
// mass. Small compositions keep the exact full support.
Window ComposeWindow(const Branch& branch, double grid_width, int steps,
                     double budget) {
  const int64_t full_lo = std::min<int64_t>(branch.min_index,
                                            branch.min_index * steps);
  const int64_t full_hi = std::max<int64_t>(branch.max_index(),
                                            branch.max_index() * steps);
  constexpr int64_t kExactSpan = int64_t{1} << 18;
  if (full_hi - full_lo + 1 <= kExactSpan) return {full_lo, full_hi};

  const double log_inv_budget = std::log(1.0 / budget);
  static constexpr double kOrders[] = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  int64_t hi = full_hi;
  int64_t lo = full_lo;
  for (double s : kOrders) {
    const double lm_pos = LogMgf(branch, grid_width, s);
    if (std::isfinite(lm_pos)) {
      const double exponent =
          std::max({steps * lm_pos, lm_pos, 0.0}) + log_inv_budget;
      const double bound = exponent / (s * grid_width);
      if (bound < 9e18) {
        hi = std::min<int64_t>(hi, static_cast<int64_t>(std::ceil(bound)));
      }
    }
    const double lm_neg = LogMgf(branch, grid_width, -s);
    if (std::isfinite(lm_neg)) {
      const double exponent =
          std::max({steps * lm_neg, lm_neg, 0.0}) + log_inv_budget;
      const double bound = -exponent / (s * grid_width);
      if (bound > -9e18) {
        lo = std::max<int64_t>(lo, static_cast<int64_t>(std::floor(bound)));
      }
    }
  }
  if (lo > hi) lo = hi;
  return {lo, hi};
}

Branch ConvolveBranches(const Branch& a, const Branch& b) {
  Branch out;
  out.direction = a.direction;
  out.infinity_mass = 0.0;  // tracked by the caller
  if (a.masses.empty() || b.masses.empty()) {
    out.min_index = 0;
    return out;
  }
  out.min_index = a.min_index + b.min_index;
  out.masses = FftConvolve(a.masses, b.masses);
  return out;
}

// Re-discretizes onto a grid coarser by `factor`, rounding losses up.
Branch RegridBranch(const Branch& branch, int64_t factor) {
  Branch out;
  out.direction = branch.direction;
  out.infinity_mass = branch.infinity_mass;
  if (branch.masses.empty()) {
    out.min_index = 0;
    return out;
  }
  const int64_t new_lo = CeilDiv(branch.min_index, factor);
  const int64_t new_hi = CeilDiv(branch.max_index(), factor);
  out.min_index = new_lo;
  out.masses.assign(static_cast<size_t>(new_hi - new_lo + 1), 0.0);
  for (size_t k = 0; k < branch.masses.size(); ++k) {
    const int64_t i = branch.min_index + static_cast<int64_t>(k);
    out.masses[static_cast<size_t>(CeilDiv(i, factor) - new_lo)] +=
        branch.masses[k];
  }
  return out;
}

// steps-fold self-convolution by square-and-multiply inside the window.
// Returns the finite part; truncated mass is accumulated into *trimmed.
Branch SelfConvolve(const Branch& input, int steps, const Window& window,
                    long double* trimmed) {
  auto trim = [&](Branch& b) {
    const double before = b.infinity_mass;
    TruncateToWindow(b, window.lo, window.hi);
    *trimmed += b.infinity_mass - before;
    b.infinity_mass = 0.0;
  };

  Branch base = input;
  base.infinity_mass = 0.0;
  Branch result;
  bool have_result = false;
  int t = steps;
  while (t > 0) {
    if (t & 1) {
      result = have_result ? ConvolveBranches(result, base) : base;
      have_result = true;
      trim(result);
    }
    t >>= 1;
    if (t > 0) {
      base = ConvolveBranches(base, base);
      trim(base);
    }
  }
  return result;
}

}  // namespace

void PrivacyBudget::Validate() const {
  if (!(epsilon >= 0.0)) {
    throw ConfigError("privacy budget requires epsilon >= 0");
  }
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw ConfigError("privacy budget requires delta in [0, 1]");
  }
}

std::string ToString(PldDirection direction) {
  switch (direction) {
    case PldDirection::kAdd:
      return "add";
    case PldDirection::kRemove:
      return "remove";
    case PldDirection::kWorstOfBoth:
      return "worst-of-both";
  }
  return "unknown";
}

std::string ToString(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kGaussian:
      return "gaussian";
    case MechanismKind::kRnmExponential:
      return "rnm-exponential";
  }
  return "unknown";
}

void AccountantParams::Validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("accountant requires 0 < gamma <= 1");
  }
  if (steps < 1) throw ConfigError("accountant requires steps >= 1");
  if (kind == MechanismKind::kGaussian && !(sigma > 0.0)) {
    throw ConfigError("gaussian accounting requires sigma > 0");
  }
  if (kind == MechanismKind::kRnmExponential && !(sigma > 0.0)) {
    throw ConfigError("rnm accounting requires per-step epsilon sigma > 0");
  }
}

double PrivacyLossDistribution::Branch::TotalMass() const {
  long double acc = infinity_mass;
  for (double m : masses) acc += m;
  return static_cast<double>(acc);
}

PrivacyLossDistribution::PrivacyLossDistribution(double grid_width,
                                                 std::vector<Branch> branches)
    : grid_width_(grid_width), branches_(std::move(branches)) {}

PrivacyLossDistribution PrivacyLossDistribution::Identity(double grid_width) {
  Branch branch;
  branch.direction = PldDirection::kWorstOfBoth;
  branch.min_index = 0;
  branch.masses = {1.0};
  return PrivacyLossDistribution(grid_width, {branch});
}

PrivacyLossDistribution PrivacyLossDistribution::SubsampledGaussian(
    double noise_multiplier, double gamma, double grid_width,
    const PldOptions& options) {
  if (!(noise_multiplier > 0.0)) {
    throw ConfigError("noise multiplier must be positive");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("gamma must be in [0, 1]");
  }
  if (!(grid_width > 0.0) || grid_width > 1e-2) {
    throw ConfigError("grid width must be positive and at most 1e-2");
  }
  if (gamma == 0.0) {
    // Nothing is sampled; the mechanism ignores the data.
    Branch branch;
    branch.direction = PldDirection::kWorstOfBoth;
    branch.min_index = 0;
    branch.masses = {1.0};
    return PrivacyLossDistribution(grid_width, {branch});
  }

  const double m = noise_multiplier;
  const double h = grid_width;
  const double budget = options.truncation_mass_budget;
  const double x_span = 60.0 * m;

  std::vector<Branch> branches;

  const int64_t ceiling_index =
      static_cast<int64_t>(std::ceil(options.loss_ceiling / h));

  {
    // Remove direction: P = (1-gamma) N(0, m^2) + gamma N(1, m^2),
    // Q = N(0, m^2); the loss is increasing in x and bounded below by
    // log(1-gamma).
    Branch branch;
    branch.direction = PldDirection::kRemove;
    const double x_hi = BisectDecreasing(
        [&](double x) { return 1.0 - MixtureCdf(x, m, gamma); }, -x_span,
        1.0 + x_span, budget);
    const int64_t i_max = std::min(
        ceiling_index,
        static_cast<int64_t>(std::ceil(SubsampledLoss(x_hi, m, gamma) / h)));
    int64_t i_min;
    if (gamma < 1.0) {
      i_min = static_cast<int64_t>(std::ceil(std::log1p(-gamma) / h));
    } else {
      const double x_lo = BisectDecreasing(
          [&](double x) { return 1.0 - MixtureCdf(x, m, gamma); }, -x_span,
          1.0 + x_span, 1.0 - budget);
      i_min = static_cast<int64_t>(std::ceil(SubsampledLoss(x_lo, m, gamma) / h));
    }
    i_min = std::max(i_min, -ceiling_index);
    i_min = std::min(i_min, i_max);
    if (i_max - i_min + 1 > options.max_grid_points) {
      throw ConfigError("PLD grid too fine for the given parameters");
    }
    const double loss_floor = gamma < 1.0 ? std::log1p(-gamma) : -kInf;
    auto loss_cdf = [&](double l) {
      if (l <= loss_floor) return 0.0;
      return MixtureCdf(SubsampledLossInverse(l, m, gamma), m, gamma);
    };
    branch.min_index = i_min;
    branch.masses.resize(static_cast<size_t>(i_max - i_min + 1));
    double prev = 0.0;  // all mass below l_{i_min} is lumped into the first cell
    for (int64_t i = i_min; i <= i_max; ++i) {
      const double cur = loss_cdf(i * h);
      branch.masses[static_cast<size_t>(i - i_min)] = std::max(0.0, cur - prev);
      prev = cur;
    }
    branch.infinity_mass = std::max(0.0, 1.0 - prev);
    StripZeroEdges(branch);
    branches.push_back(std::move(branch));
  }

  {
    // Add direction: P = N(0, m^2), Q = the mixture; the loss is decreasing
    // in x and bounded above by -log(1-gamma).
    Branch branch;
    branch.direction = PldDirection::kAdd;
    auto loss_add = [&](double x) { return -SubsampledLoss(x, m, gamma); };
    int64_t i_max;
    if (gamma < 1.0) {
      i_max = static_cast<int64_t>(std::ceil(-std::log1p(-gamma) / h));
    } else {
      const double x_lo = BisectDecreasing(
          [&](double x) { return 1.0 - StandardNormalCdf(x / m); }, -x_span,
          1.0 + x_span, 1.0 - budget);
      i_max = static_cast<int64_t>(std::ceil(loss_add(x_lo) / h));
    }
    i_max = std::min(i_max, ceiling_index);
    const double x_hi = BisectDecreasing(
        [&](double x) { return 1.0 - StandardNormalCdf(x / m); }, -x_span,
        1.0 + x_span, budget);
    int64_t i_min = static_cast<int64_t>(std::ceil(loss_add(x_hi) / h));
    i_min = std::min(std::max(i_min, -ceiling_index), i_max);
    if (i_max - i_min + 1 > options.max_grid_points) {
      throw ConfigError("PLD grid too fine for the given parameters");
    }
    const double loss_ceiling = gamma < 1.0 ? -std::log1p(-gamma) : kInf;
    auto loss_cdf = [&](double l) {
      // P(L <= l) = P(X >= x(l)) under X ~ N(0, m^2).
      if (l >= loss_ceiling) return 1.0;
      const double ratio = (std::expm1(-l) + gamma) / gamma;
      const double x = m * m * std::log(ratio) + 0.5;
      return StandardNormalSf(x / m);
    };
    branch.min_index = i_min;
    branch.masses.resize(static_cast<size_t>(i_max - i_min + 1));
    double prev = 0.0;
    for (int64_t i = i_min; i <= i_max; ++i) {
      const double cur = loss_cdf(i * h);
      branch.masses[static_cast<size_t>(i - i_min)] = std::max(0.0, cur - prev);
      prev = cur;
    }
    branch.infinity_mass = std::max(0.0, 1.0 - prev);
    StripZeroEdges(branch);
    branches.push_back(std::move(branch));
  }

  return PrivacyLossDistribution(grid_width, std::move(branches));
}

PrivacyLossDistribution PrivacyLossDistribution::PureDp(
    double epsilon, double grid_width, const PldOptions& options) {
  (void)options;
  if (!(epsilon >= 0.0)) throw ConfigError("pure-DP epsilon must be >= 0");
  if (!(grid_width > 0.0) || grid_width > 1e-2) {
    throw ConfigError("grid width must be positive and at most 1e-2");
  }
  Branch branch;
  branch.direction = PldDirection::kWorstOfBoth;
  if (epsilon == 0.0) {
    branch.min_index = 0;
    branch.masses = {1.0};
    return PrivacyLossDistribution(grid_width, {branch});
  }
  const int64_t hi = static_cast<int64_t>(std::ceil(epsilon / grid_width));
  const int64_t lo = -static_cast<int64_t>(std::floor(epsilon / grid_width));
  const double p_hi = 1.0 / (1.0 + std::exp(-epsilon));
  branch.min_index = lo;
  branch.masses.assign(static_cast<size_t>(hi - lo + 1), 0.0);
  branch.masses.front() = 1.0 - p_hi;
  branch.masses.back() += p_hi;
  return PrivacyLossDistribution(grid_width, {branch});
}

PrivacyLossDistribution PrivacyLossDistribution::SelfCompose(
    int steps, const PldOptions& options) const {
  if (steps < 1) throw ConfigError("composition steps must be >= 1");
  if (steps == 1) return *this;

  std::vector<Branch> work = branches_;
  double h = grid_width_;

  // Regrid (pessimistically) until every composed window fits the cap.
  for (;;) {
    int64_t worst_span = 0;
    for (const Branch& branch : work) {
      const Window w =
          ComposeWindow(branch, h, steps, options.truncation_mass_budget);
      worst_span = std::max(worst_span, w.hi - w.lo + 1);
    }
    if (worst_span <= options.max_grid_points) break;
    for (Branch& branch : work) branch = RegridBranch(branch, 2);
    h *= 2.0;
  }

  std::vector<Branch> composed;
  composed.reserve(work.size());
  for (const Branch& branch : work) {
    const Window window =
        ComposeWindow(branch, h, steps, options.truncation_mass_budget);
    long double trimmed = 0.0L;
    Branch result = SelfConvolve(branch, steps, window, &trimmed);
    result.direction = branch.direction;
    result.infinity_mass =
        1.0 - std::pow(1.0 - branch.infinity_mass, steps) +
        static_cast<double>(trimmed);
    composed.push_back(std::move(result));
  }
  return PrivacyLossDistribution(h, std::move(composed));
}

PrivacyLossDistribution PrivacyLossDistribution::ComposeWith(
    const PrivacyLossDistribution& other, const PldOptions& options) const {
  if (std::abs(grid_width_ - other.grid_width_) >
      1e-12 * std::max(grid_width_, other.grid_width_)) {
    throw ConfigError("cannot compose PLDs with different grid widths");
  }
  auto find = [](const std::vector<Branch>& branches, PldDirection direction)
      -> const Branch* {
    for (const Branch& b : branches) {
      if (b.direction == direction || b.direction == PldDirection::kWorstOfBoth)
        return &b;
    }
    return nullptr;
  };
  std::vector<Branch> composed;
  for (const Branch& branch : branches_) {
    const Branch* peer = find(other.branches_, branch.direction);
    if (peer == nullptr) {
      throw ConfigError("composed PLDs must cover the same directions");
    }
    Branch result = ConvolveBranches(branch, *peer);
    if (static_cast<int64_t>(result.masses.size()) > options.max_grid_points) {
      throw ConfigError("composed PLD exceeds the grid cap");
    }
    result.direction = branch.direction;
    result.infinity_mass =
        1.0 - (1.0 - branch.infinity_mass) * (1.0 - peer->infinity_mass);
    StripZeroEdges(result);
    composed.push_back(std::move(result));
  }
  return PrivacyLossDistribution(grid_width_, std::move(composed));
}

double PrivacyLossDistribution::DeltaForEpsilon(double epsilon) const {
  double worst = 0.0;
  for (const Branch& branch : branches_) {
    worst = std::max(worst, DeltaForEpsilon(epsilon, branch.direction));
  }
  return worst;
}

double PrivacyLossDistribution::DeltaForEpsilon(double epsilon,
                                                PldDirection direction) const {
  const Branch* found = nullptr;
  for (const Branch& branch : branches_) {
    if (branch.direction == direction) found = &branch;
  }
  if (found == nullptr) throw ConfigError("PLD branch for direction missing");

  long double acc = found->infinity_mass;
  if (!found->masses.empty()) {
    const double h = grid_width_;
    const int64_t start = static_cast<int64_t>(std::floor(epsilon / h)) + 1;
    for (int64_t i = found->max_index(); i >= std::max(start, found->min_index);
         --i) {
      const double mass = found->masses[static_cast<size_t>(i - found->min_index)];
      if (mass == 0.0) continue;
      acc += (1.0 - std::exp(epsilon - i * h)) * mass;
    }
  }
  return std::min(1.0, std::max(0.0, static_cast<double>(acc)));
}

double PrivacyLossDistribution::EpsilonForDelta(double delta) const {
  if (DeltaForEpsilon(0.0) <= delta) return 0.0;
  double hi_loss = 0.0;
  for (const Branch& branch : branches_) {
    if (!branch.masses.empty()) {
      hi_loss = std::max(hi_loss, branch.max_index() * grid_width_);
    }
  }
  double lo = 0.0, hi = hi_loss + grid_width_;
  if (DeltaForEpsilon(hi) > delta) return kInf;
  for (int it = 0; it < 200 && hi - lo > 1e-9 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (DeltaForEpsilon(mid) > delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double GaussianCurveDelta(double epsilon, double noise_multiplier) {
  if (!(noise_multiplier > 0.0)) {
    throw ConfigError("noise multiplier must be positive");
  }
  const double m = noise_multiplier;
  const double a = StandardNormalCdf(0.5 / m - epsilon * m);
  const double b = StandardNormalCdf(-0.5 / m - epsilon * m);
  const double delta = a - std::exp(epsilon) * b;
  return std::min(1.0, std::max(0.0, delta));
}

double AmplifyPureEpsilon(double epsilon, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("gamma must be in [0, 1]");
  }
  return std::log1p(gamma * std::expm1(epsilon));
}

double AmplifyDelta(double delta, double gamma) { return gamma * delta; }

double PureLinearEpsilon(double sigma, double gamma, int steps) {
  if (!(sigma > 0.0)) throw ConfigError("per-step epsilon must be positive");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  return steps * AmplifyPureEpsilon(sigma, gamma);
}

double ComposedDelta(const AccountantParams& params, double epsilon,
                     double grid_width, const PldOptions& options) {
  params.Validate();
  PrivacyLossDistribution pld =
      params.kind == MechanismKind::kGaussian
          ? PrivacyLossDistribution::SubsampledGaussian(
                params.sigma, params.gamma, grid_width, options)
          : PrivacyLossDistribution::PureDp(
                AmplifyPureEpsilon(params.sigma, params.gamma), grid_width,
                options);
  return pld.SelfCompose(params.steps, options).DeltaForEpsilon(epsilon);
}

double CalibrateSigma(const PrivacyBudget& target, double gamma, int steps,
                      MechanismKind kind, const CalibrationOptions& options) {
  target.Validate();
  if (!(target.epsilon > 0.0)) {
    throw ConfigError("calibration requires a positive target epsilon");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("calibration requires 0 < gamma <= 1");
  }
  if (steps < 1) throw ConfigError("calibration requires steps >= 1");

  if (kind == MechanismKind::kRnmExponential) {
    if (target.delta == 0.0) {
      // Invert steps * log(1 + gamma (e^sigma - 1)) = epsilon.
      return std::log1p(std::expm1(target.epsilon / steps) / gamma);
    }
    // With delta > 0 the two-point PLD composition is tighter; delta is
    // increasing in sigma, so keep the lower bracket end (the safe side).
    auto delta_at = [&](double sigma, double grid) {
      return ComposedDelta({sigma, gamma, steps, kind}, target.epsilon, grid,
                           options.pld);
    };
    double lo = 1e-6, hi = options.sigma_high;
    if (delta_at(lo, options.grid_width) > target.delta) {
      std::ostringstream msg;
      msg << "rnm calibration infeasible: delta(" << lo
          << ") = " << delta_at(lo, options.grid_width) << " > " << target.delta;
      throw CalibrationError(msg.str());
    }
    if (delta_at(hi, options.grid_width) <= target.delta) return hi;
    while (hi - lo > options.relative_tolerance * lo) {
      const double mid = 0.5 * (lo + hi);
      if (delta_at(mid, options.grid_width) <= target.delta) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

  if (!(target.delta > 0.0 && target.delta < 1.0)) {
    throw ConfigError("gaussian calibration requires delta in (0, 1)");
  }
  auto delta_at = [&](double sigma, double grid) {
    return ComposedDelta({sigma, gamma, steps, kind}, target.epsilon, grid,
                         options.pld);
  };

  double lo = options.sigma_low, hi = options.sigma_high;
  const double delta_hi = delta_at(hi, options.search_grid_width);
  if (delta_hi > target.delta) {
    std::ostringstream msg;
    msg << "calibration failed: bracket [" << lo << ", " << hi
        << "] cannot reach delta <= " << target.delta << " at epsilon = "
        << target.epsilon << " (delta(" << hi << ") = " << delta_hi << ")";
    throw CalibrationError(msg.str());
  }

  // Bracket on the coarse grid (pessimistic, so the returned upper end is
  // already on the safe side), then confirm against the reporting grid. The
  // lower end is never evaluated eagerly: when even sigma_low meets the
  // budget the bisection simply converges there.
  while (hi - lo > options.relative_tolerance * lo) {
    const double mid = 0.5 * (lo + hi);
    if (delta_at(mid, options.search_grid_width) > target.delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  while (delta_at(hi, options.grid_width) > target.delta) {
    hi *= 1.0 + options.relative_tolerance;
    if (hi > options.sigma_high) {
      throw CalibrationError("calibration verification exceeded the bracket");
    }
  }
  return hi;
}

void WriteCurveCsv(std::ostream& out, const AccountantParams& params,
                   double epsilon_min, double epsilon_max, int points,
                   double grid_width) {
  params.Validate();
  if (points < 2) throw ConfigError("curve export needs at least 2 points");
  PrivacyLossDistribution pld =
      params.kind == MechanismKind::kGaussian
          ? PrivacyLossDistribution::SubsampledGaussian(params.sigma,
                                                        params.gamma, grid_width)
          : PrivacyLossDistribution::PureDp(
                AmplifyPureEpsilon(params.sigma, params.gamma), grid_width);
  PrivacyLossDistribution composed = pld.SelfCompose(params.steps);

  const std::string direction =
      composed.branches().size() > 1
          ? ToString(PldDirection::kWorstOfBoth)
          : ToString(composed.branches().front().direction);
  out << "epsilon,delta,direction,grid_width,steps,gamma,sigma\n";
  for (int i = 0; i < points; ++i) {
    const double eps = epsilon_min + (epsilon_max - epsilon_min) * i /
                                         static_cast<double>(points - 1);
    out << eps << ',' << composed.DeltaForEpsilon(eps) << ',' << direction
        << ',' << grid_width << ',' << params.steps << ',' << params.gamma
        << ',' << params.sigma << "\n";
  }
}

}  // namespace dpfs
