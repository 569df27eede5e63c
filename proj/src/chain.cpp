#include "fsa/chain.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

namespace fsa {
namespace {

constexpr double kRowTailWarn = 1e-6;

void append_row_csv(std::ostream& out, const TransitionRow& row) {
  for (Index k = 0; k < row.probs.size(); ++k) {
    if (row.probs(k) == 0.0) continue;
    out << row.h << ',' << k << ',' << fmt_g12(row.probs(k)) << '\n';
  }
}

/// Assemble a row from precomputed pieces. xi covers k = 0..s_max, lambda
/// covers n = 0..(k_cap - h + s_max).
TransitionRow assemble_row(Index h, Index L, const Vector& xi,
                           const Vector& lambda, Index k_cap) {
  TransitionRow row{h, L, Vector::Zero(k_cap + 1), 0.0, false};
  const Index s_max = xi.size() - 1;
  auto lam = [&lambda](Index n) {
    return n < lambda.size() ? lambda(n) : 0.0;
  };
  if (h == 0) {
    for (Index k = 0; k <= k_cap; ++k) row.probs(k) = lam(k);
  } else {
    for (Index k = 1; k <= s_max; ++k) {
      double acc = 0.0;
      for (Index n = 0; n + k <= s_max; ++n) acc += lam(n) * xi(n + k);
      row.probs(h - k) = acc;
    }
    double stay = 0.0;
    for (Index n = 0; n <= s_max; ++n) stay += lam(n) * xi(n);
    row.probs(h) = stay;
    for (Index j = 1; h + j <= k_cap; ++j) {
      double acc = 0.0;
      const Index n_hi = std::min<Index>(s_max, lambda.size() - 1 - j);
      for (Index n = 0; n <= n_hi; ++n) acc += lam(n + j) * xi(n);
      row.probs(h + j) = acc;
    }
  }
  row.tail_mass = std::max(0.0, 1.0 - row.probs.sum());
  row.tail_warning = row.tail_mass > kRowTailWarn;
  return row;
}

Vector xi_row_for(Index h, Index L, SuccessLaw law, const SprXiTable* table) {
  if (h == 0) return Vector::Ones(1);
  if (law.kind == Reception::Spr && table != nullptr &&
      L <= table->max_slots() && h <= table->max_packets())
    return table->xi_row(h, L);
  // chain builds stay on the float routes; rows are double precision anyway
  return success_distribution(h, L, law,
                              law.kind == Reception::Spr ? XiPath::Auto
                                                         : XiPath::FloatDp)
      .xi;
}

Index auto_k_cap(Index h, const FrameArrivalPmf& frame) {
  return h + frame.pmf.size() - 1;
}

void run_chunked(Index n, int threads, const std::function<void(Index)>& fn) {
  if (threads <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<Index> next{0};
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (Index i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

FramePolicy FramePolicy::fixed(Index L) {
  if (L < 1) throw std::invalid_argument("fixed frame length must be >= 1");
  FramePolicy p;
  p.kind = Kind::Fixed;
  p.fixed_len = L;
  return p;
}

FramePolicy FramePolicy::proportional(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  FramePolicy p;
  p.kind = Kind::Proportional;
  p.alpha = alpha;
  return p;
}

FramePolicy FramePolicy::sublinear(double epsilon, double scale) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("sublinear exponent must be in (0, 1)");
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  FramePolicy p;
  p.kind = Kind::Sublinear;
  p.exponent = epsilon;
  p.scale = scale;
  return p;
}

FramePolicy FramePolicy::superlinear(double exponent, double scale) {
  if (!(exponent > 1.0))
    throw std::invalid_argument("superlinear exponent must be > 1");
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  FramePolicy p;
  p.kind = Kind::Superlinear;
  p.exponent = exponent;
  p.scale = scale;
  return p;
}

Index FramePolicy::frame_length(Index h) const {
  switch (kind) {
    case Kind::Fixed:
      return fixed_len;
    case Kind::Proportional:
      // round half up; ties like h/alpha = 2.5 go to 3
      return std::max<Index>(
          1, static_cast<Index>(std::floor(double(h) / alpha + 0.5)));
    case Kind::Sublinear:
      return std::max<Index>(
          1, static_cast<Index>(
                 std::ceil(scale * std::pow(double(h), 1.0 - exponent))));
    case Kind::Superlinear:
      return std::max<Index>(
          1, static_cast<Index>(
                 std::ceil(scale * std::pow(double(h), exponent))));
  }
  return 1;
}

std::string FramePolicy::label() const {
  std::ostringstream s;
  switch (kind) {
    case Kind::Fixed:
      s << "fixed(" << fixed_len << ")";
      break;
    case Kind::Proportional:
      s << "proportional(" << alpha << ")";
      break;
    case Kind::Sublinear:
      s << "sublinear(" << exponent << "," << scale << ")";
      break;
    case Kind::Superlinear:
      s << "superlinear(" << exponent << "," << scale << ")";
      break;
  }
  return s.str();
}

double TransitionRow::drift() const {
  double d = 0.0;
  for (Index k = 0; k < probs.size(); ++k)
    d += (static_cast<double>(k) - static_cast<double>(h)) * probs(k);
  return d;
}

double TransitionRow::downward_drift() const {
  double d = 0.0;
  for (Index k = 0; k < std::min<Index>(h, probs.size()); ++k)
    d += (static_cast<double>(k) - static_cast<double>(h)) * probs(k);
  return d;
}

TransitionRow transition_row(Index h, const FramePolicy& policy,
                             const ArrivalModel& model, SuccessLaw law,
                             Index k_cap) {
  if (h < 0) throw std::invalid_argument("state h must be >= 0");
  if (k_cap < h + 1) throw std::invalid_argument("k_cap must be >= h + 1");
  const Index L = policy.frame_length(h);
  const Vector xi = h == 0 ? Vector::Ones(1)
                           : success_distribution(h, L, law).xi;
  const Index s_max = xi.size() - 1;
  const auto frame = frame_arrival_pmf(model, L, k_cap - h + s_max);
  return assemble_row(h, L, xi, frame.pmf, k_cap);
}

Matrix TruncatedChain::lumped_matrix() const {
  const Index n = n_max;
  Matrix P = Matrix::Zero(n + 1, n + 1);
  for (Index h = 0; h <= n; ++h) {
    const auto& row = rows[static_cast<size_t>(h)];
    const Index inside = std::min<Index>(n - 1, row.probs.size() - 1);
    for (Index k = 0; k <= inside; ++k) P(h, k) = row.probs(k);
    double boundary = row.tail_mass;
    for (Index k = n; k < row.probs.size(); ++k) boundary += row.probs(k);
    P(h, n) += boundary;
  }
  return P;
}

TruncatedChain build_truncated_chain(const FramePolicy& policy,
                                     const ArrivalModel& model, SuccessLaw law,
                                     Index n_max, int threads) {
  if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
  TruncatedChain chain;
  chain.n_max = n_max;
  chain.policy = policy;
  chain.law = law;
  chain.per_slot_mean = model.mean();
  chain.model_label = model.label();
  chain.rows.resize(static_cast<size_t>(n_max) + 1);

  std::unique_ptr<SprXiTable> table;
  if (law.kind == Reception::Spr && n_max >= 1) {
    Index max_L = 1;
    for (Index h = 0; h <= n_max; ++h)
      max_L = std::max(max_L, policy.frame_length(h));
    const double cells = double(max_L + 1) * double(n_max + 1);
    const double work = double(max_L) * double(n_max) * double(n_max) / 2.0;
    if (cells > 2e7 || work > 4e9)
      throw CapExceeded(
          "shared SPR table for this policy/n_max is too large; reduce n_max");
    table = std::make_unique<SprXiTable>(max_L, n_max);
  }

  run_chunked(n_max + 1, threads, [&](Index h) {
    const Index L = policy.frame_length(h);
    const Vector xi = xi_row_for(h, L, law, table.get());
    const auto frame = frame_arrival_pmf(model, L);
    chain.rows[static_cast<size_t>(h)] =
        assemble_row(h, L, xi, frame.pmf, auto_k_cap(h, frame));
  });
  return chain;
}

double drift(Index h, const FramePolicy& policy, const ArrivalModel& model,
             SuccessLaw law) {
  const Index L = policy.frame_length(h);
  return static_cast<double>(L) * model.mean() -
         expected_successes(h, L, law);
}

double drift_from_row(const TransitionRow& row) {
  if (row.tail_mass >= 1e-8)
    throw std::invalid_argument(
        "row tail mass too large for a drift cross-check");
  return row.drift();
}

double downward_drift(Index h, const FramePolicy& policy,
                      const ArrivalModel& model, SuccessLaw law) {
  if (h == 0) return 0.0;
  const Index L = policy.frame_length(h);
  const Vector xi = success_distribution(h, L, law).xi;
  const Index s_max = xi.size() - 1;
  const auto frame = frame_arrival_pmf(model, L, s_max);
  double d = 0.0;
  for (Index k = 1; k <= s_max; ++k) {
    double acc = 0.0;
    for (Index n = 0; n + k <= s_max; ++n) acc += frame.pmf(n) * xi(n + k);
    d -= static_cast<double>(k) * acc;
  }
  return d;
}

std::vector<DriftRecord> drift_profile(const FramePolicy& policy,
                                       const ArrivalModel& model,
                                       SuccessLaw law, Index h_begin,
                                       Index h_end, Index step,
                                       bool with_downward) {
  if (h_begin < 0 || h_end < h_begin || step < 1)
    throw std::invalid_argument("bad drift window");
  std::vector<DriftRecord> out;
  for (Index h = h_begin; h <= h_end; h += step) {
    const Index L = policy.frame_length(h);
    DriftRecord rec;
    rec.h = h;
    rec.frame_len = L;
    rec.alpha = L > 0 ? static_cast<double>(h) / static_cast<double>(L) : 0.0;
    rec.lambda = static_cast<double>(L) * model.mean();
    rec.expected_successes = expected_successes(h, L, law);
    rec.drift = rec.lambda - rec.expected_successes;
    if (with_downward) rec.downward = downward_drift(h, policy, model, law);
    out.push_back(rec);
  }
  return out;
}

StationaryResult stationary_distribution(const TruncatedChain& chain,
                                         double tol, Index max_iter) {
  const Matrix P = chain.lumped_matrix();
  const Index n = P.rows();
  StationaryResult res;
  Vector pi = Vector::Zero(n);
  pi(0) = 1.0;
  Vector next(n);
  for (Index it = 1; it <= max_iter; ++it) {
    next.noalias() = P.transpose() * pi;
    next /= next.sum();
    const double residual = (next - pi).lpNorm<1>();
    pi.swap(next);
    res.iterations = it;
    res.residual = residual;
    if (residual < tol) {
      res.converged = true;
      break;
    }
  }
  res.pi = pi;
  const auto top = static_cast<Index>(std::ceil(0.9 * double(n - 1)));
  res.boundary_mass = pi.tail(n - top).sum();
  res.boundary_flagged = res.boundary_mass > 0.1;
  return res;
}

void export_chain_csv(const TruncatedChain& chain, std::ostream& out) {
  out << "h,k,probability\n";
  for (const auto& row : chain.rows) append_row_csv(out, row);
}

void export_chain_json(const TruncatedChain& chain, std::ostream& out) {
  nlohmann::ordered_json doc;
  doc["n_max"] = chain.n_max;
  doc["policy"] = chain.policy.label();
  doc["law"] = chain.law.label();
  doc["arrivals"] = chain.model_label;
  doc["per_slot_mean"] = fmt_g12(chain.per_slot_mean);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : chain.rows) {
    nlohmann::ordered_json r;
    r["h"] = row.h;
    r["L"] = row.frame_len;
    r["tail_mass"] = fmt_g12(row.tail_mass);
    r["tail_warning"] = row.tail_warning;
    auto probs = nlohmann::ordered_json::array();
    for (Index k = 0; k < row.probs.size(); ++k)
      probs.push_back(fmt_g12(row.probs(k)));
    r["probs"] = std::move(probs);
    rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows);
  out << doc.dump(2) << '\n';
}

}  // namespace fsa
