#include "fsa/arrivals.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>
#include <vector>

namespace fsa {
namespace {

constexpr double kPmfTailEps = 1e-15;
constexpr double kFrameTailTarget = 1e-12;

double poisson_log_pmf(double lambda, Index n) {
  return static_cast<double>(n) * std::log(lambda) - lambda -
         std::lgamma(static_cast<double>(n) + 1);
}

Vector truncated_poisson_pmf(double lambda) {
  if (lambda == 0.0) return Vector::Ones(1);
  const Index hard_cap =
      static_cast<Index>(lambda + 20.0 * std::sqrt(lambda) + 60.0);
  std::vector<double> pmf;
  double cum = 0.0;
  for (Index n = 0; n <= hard_cap; ++n) {
    pmf.push_back(std::exp(poisson_log_pmf(lambda, n)));
    cum += pmf.back();
    if (1.0 - cum < kPmfTailEps && n > static_cast<Index>(lambda)) break;
  }
  return Eigen::Map<Vector>(pmf.data(), static_cast<Index>(pmf.size()));
}

Vector convolve(const Vector& a, const Vector& b, Index max_len) {
  const Index len = std::min(a.size() + b.size() - 1, max_len);
  Vector out = Vector::Zero(len);
  for (Index i = 0; i < a.size() && i < len; ++i) {
    if (a(i) == 0.0) continue;
    const Index jmax = std::min(b.size(), len - i);
    for (Index j = 0; j < jmax; ++j) out(i + j) += a(i) * b(j);
  }
  return out;
}

/// L-fold convolution by binary exponentiation, truncated at max_len
/// entries. Entries below the cut are exact; only mass above it is lost.
Vector convolve_power(const Vector& base, Index L, Index max_len) {
  Vector result = Vector::Ones(1);
  Vector sq = base;
  Index e = L;
  while (e > 0) {
    if (e & 1) result = convolve(result, sq, max_len);
    e >>= 1;
    if (e > 0) sq = convolve(sq, sq, max_len);
  }
  return result;
}

}  // namespace

ArrivalModel::ArrivalModel(ArrivalFamily family, double mean, Vector pmf,
                           bool unbounded, std::string label)
    : family_(family),
      mean_(mean),
      pmf_(std::move(pmf)),
      unbounded_(unbounded),
      label_(std::move(label)) {
  cdf_.resize(pmf_.size());
  double cum = 0.0;
  for (Index k = 0; k < pmf_.size(); ++k) {
    cum += pmf_(k);
    cdf_(k) = cum;
  }
}

ArrivalModel ArrivalModel::poisson(double mean_per_slot) {
  if (!(mean_per_slot >= 0.0) || !std::isfinite(mean_per_slot))
    throw std::invalid_argument("Poisson mean must be finite and >= 0");
  std::ostringstream label;
  label << "poisson(" << mean_per_slot << ")";
  return {ArrivalFamily::Poisson, mean_per_slot,
          truncated_poisson_pmf(mean_per_slot), mean_per_slot > 0.0,
          label.str()};
}

ArrivalModel ArrivalModel::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("Bernoulli p must be in [0, 1]");
  Vector pmf = p < 1.0 ? Vector{{1.0 - p, p}} : Vector{{0.0, 1.0}};
  if (p == 0.0) pmf = Vector::Ones(1);
  std::ostringstream label;
  label << "bernoulli(" << p << ")";
  return {ArrivalFamily::Bernoulli, p, std::move(pmf), false, label.str()};
}

ArrivalModel ArrivalModel::geometric(double mean_per_slot) {
  if (!(mean_per_slot >= 0.0) || !std::isfinite(mean_per_slot))
    throw std::invalid_argument("geometric mean must be finite and >= 0");
  std::ostringstream label;
  label << "geometric(" << mean_per_slot << ")";
  if (mean_per_slot == 0.0)
    return {ArrivalFamily::Geometric, 0.0, Vector::Ones(1), false,
            label.str()};
  const double q = mean_per_slot / (1.0 + mean_per_slot);
  const auto k_max =
      static_cast<Index>(std::ceil(std::log(kPmfTailEps) / std::log(q))) + 1;
  Vector pmf(k_max + 1);
  double t = 1.0 - q;
  for (Index k = 0; k <= k_max; ++k) {
    pmf(k) = t;
    t *= q;
  }
  return {ArrivalFamily::Geometric, mean_per_slot, std::move(pmf), true,
          label.str()};
}

ArrivalModel ArrivalModel::custom(Vector pmf) {
  if (pmf.size() == 0) throw std::invalid_argument("custom pmf is empty");
  if ((pmf.array() < 0.0).any())
    throw std::invalid_argument("custom pmf has negative entries");
  const double sum = pmf.sum();
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("custom pmf does not sum to 1 (beyond 1e-9)");
  pmf /= sum;  // accepted input error is folded away
  double mean = 0.0;
  for (Index k = 0; k < pmf.size(); ++k) mean += static_cast<double>(k) * pmf(k);
  return {ArrivalFamily::Custom, mean, std::move(pmf), false, "custom"};
}

ArrivalModel ArrivalModel::none() {
  return {ArrivalFamily::Custom, 0.0, Vector::Ones(1), false, "none"};
}

ArrivalModel ArrivalModel::from_csv(std::istream& in) {
  std::vector<std::pair<Index, double>> entries;
  std::string line;
  Index max_k = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    Index k;
    double p;
    if (!(row >> k >> p)) {
      if (entries.empty()) continue;  // tolerate a header line
      throw std::invalid_argument("malformed pmf CSV line: " + line);
    }
    if (k < 0) throw std::invalid_argument("pmf CSV has negative k");
    entries.emplace_back(k, p);
    max_k = std::max(max_k, k);
  }
  if (entries.empty()) throw std::invalid_argument("pmf CSV is empty");
  Vector pmf = Vector::Zero(max_k + 1);
  for (auto [k, p] : entries) {
    if (pmf(k) != 0.0)
      throw std::invalid_argument("pmf CSV repeats k=" + std::to_string(k));
    pmf(k) = p;
  }
  return custom(std::move(pmf));
}

bool ArrivalModel::irreducibility_ok() const {
  return unbounded_ && pmf_.size() > 0 && pmf_(0) > 0.0 &&
         (pmf_.array() > 0.0).all();
}

std::string ArrivalModel::label() const { return label_; }

Index ArrivalModel::sample_frame(Index L, Xoshiro256& rng) const {
  Index total = 0;
  const double* cdf = cdf_.data();
  const Index n = cdf_.size();
  for (Index l = 0; l < L; ++l) {
    const double u = rng.next_double();
    const double* it = std::upper_bound(cdf, cdf + n, u);
    total += std::min<Index>(it - cdf, n - 1);
  }
  return total;
}

double FrameArrivalPmf::truncated_mean() const {
  double m = 0.0;
  for (Index n = 1; n < pmf.size(); ++n) m += static_cast<double>(n) * pmf(n);
  return m;
}

FrameArrivalPmf frame_arrival_pmf(const ArrivalModel& model, Index L,
                                  Index n_max) {
  if (L < 1) throw std::invalid_argument("frame length L must be >= 1");
  const double lambda = static_cast<double>(L) * model.mean();
  const bool auto_trim = n_max < 0;
  Index work_max = n_max;
  if (auto_trim)
    work_max = static_cast<Index>(std::ceil(10.0 * lambda + 50.0));

  Vector pmf;
  if (model.family() == ArrivalFamily::Poisson && model.mean() > 0.0) {
    pmf.resize(work_max + 1);
    for (Index n = 0; n <= work_max; ++n)
      pmf(n) = std::exp(poisson_log_pmf(lambda, n));
  } else {
    pmf = convolve_power(model.per_slot_pmf(), L, work_max + 1);
    if (pmf.size() < work_max + 1) {
      Vector padded = Vector::Zero(work_max + 1);
      padded.head(pmf.size()) = pmf;
      pmf = std::move(padded);
    }
  }

  if (auto_trim) {
    // smallest n with tail below the target, within the cap
    double tail = 1.0 - pmf.sum();
    Index cut = work_max;
    while (cut > 0 && tail + pmf(cut) < kFrameTailTarget) {
      tail += pmf(cut);
      --cut;
    }
    pmf.conservativeResize(cut + 1);
  }

  const double tail_mass = std::max(0.0, 1.0 - pmf.sum());
  return {L, std::move(pmf), tail_mass, lambda};
}

double poisson_tail_bound(double mu, double x) {
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (!(x >= 0.0) || x >= mu)
    throw std::invalid_argument("bound requires 0 <= x < mu");
  if (x == 0.0) return std::exp(-mu);
  return std::exp(-mu + x * (1.0 + std::log(mu) - std::log(x)));
}

}  // namespace fsa
