#include "fsa/occupancy.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace fsa {
namespace {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

BigInt big_pow(Index base, Index exp) {
  BigInt b = base;
  return boost::multiprecision::pow(b, static_cast<unsigned>(exp));
}

BigInt big_binom(Index n, Index k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (Index i = 0; i < k; ++i) {
    r *= n - i;
    r /= i + 1;
  }
  return r;
}

BigInt big_factorial(Index n) {
  BigInt r = 1;
  for (Index i = 2; i <= n; ++i) r *= i;
  return r;
}

/// Number of ways to place u labeled balls into V labeled bins so that no
/// bin holds exactly one ball, by inclusion-exclusion over singleton bins.
BigInt count_no_singleton(Index V, Index u) {
  if (u == 0) return 1;
  if (V == 0) return 0;
  BigInt total = 0;
  for (Index t = 0; t <= u; ++t) {
    if (t > V) break;
    BigInt term = big_factorial(t) * big_binom(u, t) * big_binom(V, t) *
                  big_pow(V - t, u - t);
    if (t % 2 == 0)
      total += term;
    else
      total -= term;
  }
  return total;
}

void require_domain(Index h, Index L) {
  if (L < 1) throw std::invalid_argument("frame length L must be >= 1");
  if (h < 0) throw std::invalid_argument("backlog h must be >= 0");
}

/// Exact assignment counts for SPR: counts[k] = #assignments with exactly k
/// singleton slots; counts[k] / L^h = xi_{hk}.
std::vector<BigInt> spr_counts(Index h, Index L) {
  const Index k_max = std::min(h, L);
  std::vector<BigInt> counts(static_cast<size_t>(k_max) + 1);
  for (Index k = 0; k <= k_max; ++k) {
    counts[static_cast<size_t>(k)] = big_binom(L, k) * big_binom(h, k) *
                                     big_factorial(k) *
                                     count_no_singleton(L - k, h - k);
  }
  return counts;
}

/// Exact assignment counts for MPR: slot-by-slot dynamic program over
/// (packets placed, successes so far). Placing x of the remaining packets
/// into the next slot contributes a factor C(remaining, x); the product over
/// slots is the multinomial coefficient.
std::vector<BigInt> mpr_counts(Index h, Index L, int capacity) {
  const Index s_max = std::min<Index>(h, L * capacity);
  const auto cols = static_cast<size_t>(s_max) + 1;
  const auto rows = static_cast<size_t>(h) + 1;
  std::vector<std::vector<BigInt>> cur(rows, std::vector<BigInt>(cols, 0));
  std::vector<std::vector<BigInt>> nxt = cur;
  cur[0][0] = 1;
  for (Index slot = 0; slot < L; ++slot) {
    for (auto& row : nxt) std::fill(row.begin(), row.end(), BigInt(0));
    for (Index p = 0; p <= h; ++p) {
      for (Index s = 0; s <= s_max; ++s) {
        const BigInt& w = cur[static_cast<size_t>(p)][static_cast<size_t>(s)];
        if (w == 0) continue;
        for (Index x = 0; x + p <= h; ++x) {
          const Index gain = (x >= 1 && x <= capacity) ? x : 0;
          if (s + gain > s_max) continue;
          nxt[static_cast<size_t>(p + x)][static_cast<size_t>(s + gain)] +=
              w * big_binom(h - p, x);
        }
      }
    }
    std::swap(cur, nxt);
  }
  std::vector<BigInt> counts(cols);
  for (size_t s = 0; s < cols; ++s) counts[s] = cur[rows - 1][s];
  return counts;
}

Vector counts_to_pmf(const std::vector<BigInt>& counts, Index h, Index L) {
  const BigInt den = big_pow(L, h);
  BigInt sum = 0;
  for (const auto& c : counts) sum += c;
  if (sum != den)
    throw std::logic_error("exact success counts do not sum to L^h");
  Vector xi(static_cast<Index>(counts.size()));
  for (size_t i = 0; i < counts.size(); ++i)
    xi(static_cast<Index>(i)) =
        BigRational(counts[i], den).convert_to<double>();
  return xi;
}

void check_finite(const Vector& v) {
  if (!v.allFinite())
    throw NumericOverflow("non-finite value in success distribution");
}

/// Float MPR path: same slot-by-slot program with conditional binomial
/// weights, all nonnegative. Given p packets already placed and v slots
/// still open, the next slot's occupancy is Binomial(h - p, 1/v).
Vector mpr_float_pmf(Index h, Index L, int capacity, std::uint64_t work_cap) {
  const Index s_max = std::min<Index>(h, L * capacity);
  const double est = static_cast<double>(L) * static_cast<double>(h) *
                     static_cast<double>(h) * static_cast<double>(s_max + 1) /
                     4.0;
  if (est > static_cast<double>(work_cap)) {
    std::ostringstream msg;
    msg << "MPR state space for h=" << h << ", L=" << L << ", M=" << capacity
        << " exceeds the work cap; use approximation";
    throw CapExceeded(msg.str());
  }
  Matrix cur = Matrix::Zero(h + 1, s_max + 1);
  Matrix nxt = Matrix::Zero(h + 1, s_max + 1);
  cur(0, 0) = 1.0;
  for (Index v = L; v >= 1; --v) {
    nxt.setZero();
    for (Index p = 0; p <= h; ++p) {
      const Index r = h - p;
      for (Index s = 0; s <= s_max; ++s) {
        const double w = cur(p, s);
        if (w == 0.0) continue;
        if (v == 1) {
          const Index gain = (r >= 1 && r <= capacity) ? r : 0;
          nxt(h, std::min(s + gain, s_max)) += w;
          continue;
        }
        // weights of Binomial(r, 1/v), built multiplicatively
        double b = std::pow(static_cast<double>(v - 1) / v, r);
        for (Index x = 0; x <= r; ++x) {
          const Index gain = (x >= 1 && x <= capacity) ? x : 0;
          if (s + gain <= s_max) nxt(p + x, s + gain) += w * b;
          b *= static_cast<double>(r - x) /
               (static_cast<double>(x + 1) * (v - 1));
        }
      }
    }
    std::swap(cur, nxt);
  }
  return cur.row(h).transpose();
}

double log_binom(Index n, Index k) {
  return std::lgamma(static_cast<double>(n) + 1) -
         std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

}  // namespace

SuccessLaw SuccessLaw::mpr(int m) {
  if (m < 1) throw std::invalid_argument("MPR capacity must be >= 1");
  return {Reception::Mpr, m};
}

Index SuccessLaw::max_successes(Index h, Index L) const {
  return std::min<Index>(h, L * effective_capacity());
}

std::string SuccessLaw::label() const {
  if (kind == Reception::Spr) return "spr";
  return "mpr" + std::to_string(capacity);
}

double SuccessDistribution::mean() const {
  double m = 0.0;
  for (Index k = 1; k < xi.size(); ++k) m += static_cast<double>(k) * xi(k);
  return m;
}

double PoissonOccupancyApprox::pmf(Index j, Index m) const {
  const double r = rho(j);
  if (r == 0.0) return m == 0 ? 1.0 : 0.0;
  return std::exp(-r + static_cast<double>(m) * std::log(r) -
                  std::lgamma(static_cast<double>(m) + 1));
}

OccupancyPmf occupancy_pmf(Index h, Index L) {
  require_domain(h, L);
  Vector pmf = Vector::Zero(h + 1);
  if (L == 1) {
    pmf(h) = 1.0;
  } else {
    const double p = 1.0 / static_cast<double>(L);
    double t = std::pow(1.0 - p, static_cast<double>(h));
    for (Index x = 0; x <= h; ++x) {
      pmf(x) = t;
      t *= static_cast<double>(h - x) / static_cast<double>(x + 1) * p /
           (1.0 - p);
    }
  }
  return {h, L, std::move(pmf)};
}

SprXiTable::SprXiTable(Index max_slots, Index max_packets)
    : table_(max_slots + 1, max_packets + 1) {
  const Index V = max_slots;
  const Index U = max_packets;
  table_.setZero();
  table_(0, 0) = 1.0;
  if (V >= 1)
    for (Index u = 0; u <= U; ++u) table_(1, u) = (u == 1) ? 0.0 : 1.0;
  for (Index v = 2; v <= V; ++v) {
    table_(v, 0) = 1.0;
    for (Index u = 1; u <= U; ++u) {
      double b = std::pow(static_cast<double>(v - 1) / v, u);
      double acc = 0.0;
      for (Index x = 0; x <= u; ++x) {
        if (x != 1) acc += b * table_(v - 1, u - x);
        b *= static_cast<double>(u - x) /
             (static_cast<double>(x + 1) * (v - 1));
      }
      table_(v, u) = acc;
    }
  }
}

double SprXiTable::xi(Index h, Index L, Index k) const {
  if (k > std::min(h, L)) return 0.0;
  const Index V = L - k;
  const Index u = h - k;
  if (V == 0) return u == 0 ? std::exp(std::lgamma(static_cast<double>(L) + 1) -
                                       static_cast<double>(h) * std::log(L))
                            : 0.0;
  double lp = log_binom(L, k) + log_binom(h, k) +
              std::lgamma(static_cast<double>(k) + 1) -
              static_cast<double>(h) * std::log(static_cast<double>(L));
  if (u > 0) lp += static_cast<double>(u) * std::log(static_cast<double>(V));
  return std::exp(lp) * table_(V, u);
}

Vector SprXiTable::xi_row(Index h, Index L) const {
  const Index k_max = std::min(h, L);
  Vector row(k_max + 1);
  for (Index k = 0; k <= k_max; ++k) row(k) = xi(h, L, k);
  return row;
}

SuccessDistribution xi_spr(Index h, Index L, XiPath path) {
  require_domain(h, L);
  if (h == 0)
    return {0, L, SuccessLaw::spr(), Vector::Ones(1), XiMethod::ExactRational};
  const bool exact =
      path == XiPath::ExactRational ||
      (path == XiPath::Auto && h <= kExactRationalLimit &&
       L <= kExactRationalLimit);
  if (exact) {
    Vector xi = counts_to_pmf(spr_counts(h, L), h, L);
    return {h, L, SuccessLaw::spr(), std::move(xi), XiMethod::ExactRational};
  }
  SprXiTable table(L, h);
  Vector xi = table.xi_row(h, L);
  check_finite(xi);
  return {h, L, SuccessLaw::spr(), std::move(xi), XiMethod::FloatDp};
}

SuccessDistribution xi_mpr(Index h, Index L, int capacity, XiPath path,
                           std::uint64_t work_cap) {
  require_domain(h, L);
  const SuccessLaw law = SuccessLaw::mpr(capacity);
  if (h == 0) return {0, L, law, Vector::Ones(1), XiMethod::ExactRational};
  const bool exact =
      path == XiPath::ExactRational ||
      (path == XiPath::Auto && h <= kExactRationalLimit &&
       L <= kExactRationalLimit);
  if (exact) {
    Vector xi = counts_to_pmf(mpr_counts(h, L, capacity), h, L);
    return {h, L, law, std::move(xi), XiMethod::ExactRational};
  }
  Vector xi = mpr_float_pmf(h, L, capacity, work_cap);
  check_finite(xi);
  return {h, L, law, std::move(xi), XiMethod::FloatDp};
}

SuccessDistribution success_distribution(Index h, Index L, SuccessLaw law,
                                         XiPath path) {
  if (law.kind == Reception::Spr) return xi_spr(h, L, path);
  return xi_mpr(h, L, law.capacity, path);
}

std::vector<std::string> xi_exact_strings(Index h, Index L, SuccessLaw law) {
  require_domain(h, L);
  if (h > kExactRationalLimit || L > kExactRationalLimit)
    throw std::invalid_argument("exact rationals limited to h, L <= 64");
  std::vector<BigInt> counts;
  if (h == 0)
    counts = {BigInt(1)};
  else if (law.kind == Reception::Spr)
    counts = spr_counts(h, L);
  else
    counts = mpr_counts(h, L, law.capacity);
  const BigInt den = h == 0 ? BigInt(1) : big_pow(L, h);
  std::vector<std::string> out;
  out.reserve(counts.size());
  for (const auto& c : counts) {
    if (c == 0) {
      out.emplace_back("0");
      continue;
    }
    const BigInt g = boost::multiprecision::gcd(c, den);
    const BigInt num = c / g;
    const BigInt d = den / g;
    std::ostringstream s;
    s << num;
    if (d != 1) s << "/" << d;
    out.push_back(s.str());
  }
  return out;
}

double expected_successes(Index h, Index L, SuccessLaw law) {
  require_domain(h, L);
  if (h == 0) return 0.0;
  const int cap = law.effective_capacity();
  if (L == 1) return h <= cap ? static_cast<double>(h) : 0.0;
  const double p = 1.0 / static_cast<double>(L);
  const double q = 1.0 - p;
  if (law.kind == Reception::Spr)
    return static_cast<double>(h) * std::pow(q, static_cast<double>(h - 1));
  double term = static_cast<double>(h) * p *
                std::pow(q, static_cast<double>(h - 1));  // C(h,1) p q^{h-1}
  double sum = 0.0;
  for (Index x = 1; x <= std::min<Index>(cap, h); ++x) {
    sum += static_cast<double>(x) * term;
    term *= static_cast<double>(h - x) / static_cast<double>(x + 1) * p / q;
  }
  return static_cast<double>(L) * sum;
}

PoissonOccupancyApprox poisson_occupancy(Index h, Index L, Index j_max) {
  require_domain(h, L);
  if (h < 1) throw std::invalid_argument("poisson_occupancy needs h >= 1");
  if (j_max < 1) throw std::invalid_argument("j_max must be >= 1");
  const double alpha = static_cast<double>(h) / static_cast<double>(L);
  Vector rho(j_max + 1);
  for (Index j = 0; j <= j_max; ++j)
    rho(j) = std::exp(std::log(static_cast<double>(L)) - alpha +
                      static_cast<double>(j) * std::log(alpha) -
                      std::lgamma(static_cast<double>(j) + 1));
  return {h, L, std::move(rho)};
}

double xi_upper_bound(Index h, Index L, Index k) {
  require_domain(h, L);
  if (h < 1) throw std::invalid_argument("xi_upper_bound needs h >= 1");
  if (k < 0 || k > std::min(h, L))
    throw std::invalid_argument("xi_upper_bound needs k <= min(h, L)");
  // Product form of the bound chain: xi_hk <= C(L,k) k! / L^k
  // = prod_{i<k} (1 - i/L). Exact at k = h <= L, and valid at k = 1 where
  // the paired closed form (1 - (k/2)/L)^{k/2} dips below achievable
  // probabilities.
  double bound = 1.0;
  for (Index i = 1; i < k; ++i)
    bound *= 1.0 - static_cast<double>(i) / static_cast<double>(L);
  return bound;
}

SuccessDistribution brute_force_xi(Index h, Index L, SuccessLaw law,
                                   std::uint64_t cap) {
  require_domain(h, L);
  const int m = law.effective_capacity();
  const Index s_max = law.max_successes(h, L);
  if (h == 0)
    return {0, L, law, Vector::Ones(1), XiMethod::BruteForce};
  double total_d = std::pow(static_cast<double>(L), static_cast<double>(h));
  if (total_d > static_cast<double>(cap))
    throw CapExceeded("brute-force enumeration of L^h assignments exceeds cap");
  const auto total = static_cast<std::uint64_t>(std::llround(total_d));

  std::vector<Index> slot(static_cast<size_t>(h), 0);
  std::vector<Index> occ(static_cast<size_t>(L), 0);
  occ[0] = h;
  auto contrib = [m](Index c) { return (c >= 1 && c <= m) ? c : Index{0}; };
  Index succ = contrib(h);
  std::vector<std::uint64_t> tally(static_cast<size_t>(s_max) + 1, 0);

  for (std::uint64_t it = 0;; ++it) {
    ++tally[static_cast<size_t>(succ)];
    if (it + 1 == total) break;
    // odometer increment: move packet i to the next slot, carrying on wrap
    for (size_t i = 0;; ++i) {
      const Index from = slot[i];
      const Index to = (from + 1 == L) ? 0 : from + 1;
      succ -= contrib(occ[static_cast<size_t>(from)]) +
              contrib(occ[static_cast<size_t>(to)]);
      --occ[static_cast<size_t>(from)];
      ++occ[static_cast<size_t>(to)];
      succ += contrib(occ[static_cast<size_t>(from)]) +
              contrib(occ[static_cast<size_t>(to)]);
      slot[i] = to;
      if (to != 0) break;
    }
  }

  Vector xi(s_max + 1);
  for (Index k = 0; k <= s_max; ++k)
    xi(k) = static_cast<double>(tally[static_cast<size_t>(k)]) / total_d;
  return {h, L, law, std::move(xi), XiMethod::BruteForce};
}

}  // namespace fsa
