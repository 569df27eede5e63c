#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fsa/chain.hpp"

using namespace fsa;

TEST_CASE("frame policies") {
  auto prop = FramePolicy::proportional(1.0);
  CHECK(prop.frame_length(0) == 1);
  CHECK(prop.frame_length(7) == 7);

  auto half = FramePolicy::proportional(2.0);
  CHECK(half.frame_length(5) == 3);  // round half up: 2.5 -> 3
  CHECK(half.frame_length(4) == 2);

  auto sub = FramePolicy::sublinear(0.5, 1.0);
  CHECK(sub.frame_length(0) == 1);
  CHECK(sub.frame_length(100) == 10);

  auto sup = FramePolicy::superlinear(2.0, 1.0);
  CHECK(sup.frame_length(10) == 100);

  CHECK(FramePolicy::fixed(4).frame_length(12345) == 4);
  CHECK_THROWS_AS(FramePolicy::fixed(0), std::invalid_argument);
  CHECK_THROWS_AS(FramePolicy::proportional(0.0), std::invalid_argument);
  CHECK_THROWS_AS(FramePolicy::sublinear(1.5), std::invalid_argument);
}

TEST_CASE("transition row, empty backlog is arrival-only") {
  auto model = ArrivalModel::poisson(0.25);
  auto policy = FramePolicy::proportional(1.0);
  auto row = transition_row(0, policy, model, SuccessLaw::spr(), 30);
  const double lambda = 0.25;  // L(0) = 1
  CHECK(row.probs(0) == doctest::Approx(std::exp(-lambda)).epsilon(1e-12));
  CHECK(row.probs(2) ==
        doctest::Approx(std::exp(-lambda) * lambda * lambda / 2).epsilon(1e-12));
  CHECK(std::abs(row.probs.sum() + row.tail_mass - 1.0) < 1e-12);
}

TEST_CASE("transition row against hand-computed cases") {
  auto zero = ArrivalModel::none();
  auto policy = FramePolicy::fixed(2);
  auto row = transition_row(2, policy, zero, SuccessLaw::spr(), 10);
  // both packets collide or both succeed
  CHECK(row.probs(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(row.probs(1) == 0.0);
  CHECK(row.probs(2) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(row.tail_mass == 0.0);

  // all packets share one slot and nothing arrives: state is absorbing
  auto one_slot = FramePolicy::fixed(1);
  auto stuck = transition_row(4, one_slot, zero, SuccessLaw::spr(), 10);
  CHECK(stuck.probs(4) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("drift closed forms") {
  auto policy = FramePolicy::proportional(1.0);
  auto law = SuccessLaw::spr();
  auto model = ArrivalModel::poisson(0.2);

  // r_h = h (1 - 1/L)^{h-1} at h = L = 100
  const double expect = 20.0 - 100.0 * std::pow(0.99, 99.0);
  CHECK(drift(100, policy, model, law) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(-16.97).epsilon(1e-3));

  // h = 0: drift is the frame arrival mean
  CHECK(drift(0, policy, model, law) == doctest::Approx(0.2).epsilon(1e-14));

  // MPR at h = L = 100, M = 2: both binomial terms equal (0.99)^99
  const double r_mpr = 2.0 * 100.0 * std::pow(0.99, 99.0);
  CHECK(drift(100, policy, model, SuccessLaw::mpr(2)) ==
        doctest::Approx(20.0 - r_mpr).epsilon(1e-12));
}

TEST_CASE("MPR closed-form mean matches the distribution at reduced scale") {
  const double r = expected_successes(12, 12, SuccessLaw::mpr(2));
  const auto xi = xi_mpr(12, 12, 2);
  CHECK(std::abs(xi.mean() - r) < 1e-12);
}

TEST_CASE("drift from row cross-checks the closed form") {
  auto model = ArrivalModel::poisson(0.2);
  for (Index h : {0, 1, 2, 3, 4, 5, 6})
    for (Index L : {1, 2, 3, 4, 5, 6})
      for (int M : {1, 2}) {
        auto policy = FramePolicy::fixed(L);
        auto law = M == 1 ? SuccessLaw::spr() : SuccessLaw::mpr(M);
        auto row = transition_row(h, policy, model, law, h + 60);
        CHECK(std::abs(drift_from_row(row) - drift(h, policy, model, law)) <
              1e-8);
      }

  auto zero = ArrivalModel::none();
  auto row = transition_row(2, FramePolicy::fixed(2), zero, SuccessLaw::spr(),
                            10);
  CHECK(drift_from_row(row) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("downward drift and its lower bounds") {
  auto zero = ArrivalModel::none();
  CHECK(downward_drift(2, FramePolicy::fixed(2), zero, SuccessLaw::spr()) ==
        doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(downward_drift(0, FramePolicy::fixed(3), zero, SuccessLaw::spr()) ==
        0.0);

  auto model = ArrivalModel::poisson(0.3);
  for (Index h = 0; h <= 6; ++h)
    for (Index L = 1; L <= 6; ++L) {
      auto policy = FramePolicy::fixed(L);
      const double spr = downward_drift(h, policy, model, SuccessLaw::spr());
      CHECK(spr >= -double(std::min(h, L)) - 1e-12);
      for (int M : {2, 3}) {
        const double mpr =
            downward_drift(h, policy, model, SuccessLaw::mpr(M));
        CHECK(mpr >= -double(M) * double(std::min(h, L)) - 1e-12);
        // matches the row-side computation
        auto row = transition_row(h, policy, model, SuccessLaw::mpr(M), h + 60);
        CHECK(std::abs(row.downward_drift() - mpr) < 1e-10);
      }
    }
}

TEST_CASE("drift magnitude bounds") {
  auto model = ArrivalModel::poisson(0.4);
  auto policy = FramePolicy::proportional(1.0);
  for (Index h = 0; h <= 80; h += 5) {
    const Index L = policy.frame_length(h);
    const double lambda = double(L) * model.mean();
    CHECK(std::abs(drift(h, policy, model, SuccessLaw::spr())) <=
          lambda + double(L) + 1e-12);
    const double alpha = h > 0 ? double(h) / double(L) : 0.0;
    CHECK(std::abs(drift(h, policy, model, SuccessLaw::mpr(3))) <=
          lambda + double(L) * alpha + 1e-12);
  }
}

TEST_CASE("truncated chain rows stay normalized") {
  auto model = ArrivalModel::poisson(0.25);
  auto chain = build_truncated_chain(FramePolicy::proportional(1.0), model,
                                     SuccessLaw::spr(), 50);
  REQUIRE(chain.rows.size() == 51);
  for (const auto& row : chain.rows) {
    CHECK(std::abs(row.probs.sum() + row.tail_mass - 1.0) < 1e-10);
    CHECK_FALSE(row.tail_warning);
  }
  const Matrix P = chain.lumped_matrix();
  for (Index h = 0; h <= 50; ++h)
    CHECK(std::abs(P.row(h).sum() - 1.0) < 1e-10);
}

TEST_CASE("threaded build matches the sequential one") {
  auto model = ArrivalModel::poisson(0.3);
  auto a = build_truncated_chain(FramePolicy::proportional(1.0), model,
                                 SuccessLaw::spr(), 40, 1);
  auto b = build_truncated_chain(FramePolicy::proportional(1.0), model,
                                 SuccessLaw::spr(), 40, 4);
  for (size_t h = 0; h < a.rows.size(); ++h) {
    REQUIRE(a.rows[h].probs.size() == b.rows[h].probs.size());
    CHECK((a.rows[h].probs - b.rows[h].probs).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("zero arrivals never grow the backlog") {
  auto zero = ArrivalModel::none();
  auto chain = build_truncated_chain(FramePolicy::fixed(4), zero,
                                     SuccessLaw::spr(), 50);
  for (const auto& row : chain.rows) {
    for (Index k = row.h + 1; k < row.probs.size(); ++k)
      CHECK(row.probs(k) == 0.0);
    CHECK(row.tail_mass == 0.0);
  }
}

TEST_CASE("stationary distribution of degenerate chains") {
  auto zero = ArrivalModel::none();
  auto absorbing = build_truncated_chain(FramePolicy::fixed(1), zero,
                                         SuccessLaw::spr(), 0);
  auto res = stationary_distribution(absorbing);
  CHECK(res.converged);
  CHECK(res.pi(0) == doctest::Approx(1.0).epsilon(1e-12));

  auto chain = build_truncated_chain(FramePolicy::fixed(3), zero,
                                     SuccessLaw::spr(), 20);
  auto drained = stationary_distribution(chain);
  CHECK(drained.converged);
  CHECK(drained.pi(0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("stationary distribution under stable and unstable load") {
  auto policy = FramePolicy::proportional(1.0);
  auto stable = build_truncated_chain(policy, ArrivalModel::poisson(0.25),
                                      SuccessLaw::spr(), 200);
  auto s = stationary_distribution(stable, 1e-12, 100000);
  CHECK(s.converged);
  CHECK(s.pi.head(100).sum() > 1.0 - 1e-6);
  CHECK_FALSE(s.boundary_flagged);

  auto unstable = build_truncated_chain(policy, ArrivalModel::poisson(0.45),
                                        SuccessLaw::spr(), 200);
  auto u = stationary_distribution(unstable, 1e-12, 100000);
  CHECK(u.boundary_mass > 0.5);
  CHECK(u.boundary_flagged);
}

TEST_CASE("drift sign thresholds under proportional policy") {
  auto policy = FramePolicy::proportional(1.0);
  auto law = SuccessLaw::spr();
  // below the boundary e^{-1}: negative drift for every tested h
  auto stable = drift_profile(policy, ArrivalModel::poisson(0.25), law, 1, 400);
  for (const auto& rec : stable) CHECK(rec.drift < 0.0);
  // above the boundary: positive drift beyond a small threshold
  auto unstable =
      drift_profile(policy, ArrivalModel::poisson(0.45), law, 1, 400);
  Index h0 = -1;
  for (const auto& rec : unstable)
    if (rec.drift > 0.0) {
      h0 = rec.h;
      break;
    }
  REQUIRE(h0 > 0);
  CHECK(h0 <= 20);
  for (const auto& rec : unstable)
    if (rec.h >= h0) CHECK(rec.drift > 0.0);
}

TEST_CASE("drift profile records exact per-state alpha") {
  auto profile = drift_profile(FramePolicy::proportional(2.0),
                               ArrivalModel::poisson(0.1), SuccessLaw::spr(),
                               0, 9, 1, true);
  for (const auto& rec : profile) {
    CHECK(rec.frame_len == FramePolicy::proportional(2.0).frame_length(rec.h));
    if (rec.h > 0)
      CHECK(rec.alpha ==
            doctest::Approx(double(rec.h) / double(rec.frame_len)));
    REQUIRE(rec.downward.has_value());
    CHECK(*rec.downward >= -double(std::min(rec.h, rec.frame_len)) - 1e-12);
  }
}

TEST_CASE("chain export formats") {
  auto chain = build_truncated_chain(FramePolicy::fixed(2),
                                     ArrivalModel::none(), SuccessLaw::spr(), 2);
  std::ostringstream csv;
  export_chain_csv(chain, csv);
  CHECK(csv.str().find("h,k,probability\n") == 0);
  CHECK(csv.str().find("2,0,0.5") != std::string::npos);
  CHECK(csv.str().find("2,2,0.5") != std::string::npos);

  std::ostringstream json;
  export_chain_json(chain, json);
  CHECK(json.str().find("\"tail_mass\"") != std::string::npos);
  CHECK(json.str().find("\"n_max\": 2") != std::string::npos);
}
