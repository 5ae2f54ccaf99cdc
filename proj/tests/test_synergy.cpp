#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "synctl/synergy.hpp"

using namespace synctl;

namespace {

MorphologyGraph chain_morph(int k) {
  MorphologyGraph g;
  g.robot_id = "chain";
  g.state_dim = 3;
  for (int i = 0; i < k; ++i) g.parent.push_back(i == 0 ? kRootSentinel : i - 1);
  return g;
}

std::vector<Tensor> random_state_batch(int n, int k, int ds, Rng& rng) {
  std::vector<Tensor> out;
  for (int i = 0; i < n; ++i) out.push_back(oracles::random_tensor(k, ds, rng));
  return out;
}

}  // namespace

TEST_CASE("delta-Q of an action-blind coordinate is exactly zero") {
  Rng rng(41);
  const int k = 4;
  // critic reads every coordinate except 2
  CriticValueFn critic = [](const Tensor&, const Tensor& a) {
    return 3.0 * a.at(0, 0) - a.at(1, 0) * a.at(1, 0) + 0.5 * a.at(3, 0);
  };
  ActorFn actor = [&](const Tensor& s) {
    Tensor a(4, 1);
    for (int i = 0; i < 4; ++i) a.at(i, 0) = std::tanh(s.at(i, 0));
    return a;
  };
  auto dq = estimate_delta_q(critic, actor, random_state_batch(32, k, 3, rng));
  CHECK(dq[2] == 0.0);
  CHECK(dq[0] != 0.0);
}

TEST_CASE("delta-Q closed form for the quadratic critic") {
  Rng rng(42);
  const int k = 5;
  const std::vector<double> w{0.3, 1.1, 0.7, 2.0, 0.05};
  CriticValueFn critic = [&](const Tensor&, const Tensor& a) {
    double q = 0.0;
    for (int i = 0; i < k; ++i) q -= w[static_cast<std::size_t>(i)] * a.at(i, 0) * a.at(i, 0);
    return q;
  };
  // deterministic pseudo-policy so mean(a_k^2) is computable independently
  ActorFn actor = [&](const Tensor& s) {
    Tensor a(k, 1);
    for (int i = 0; i < k; ++i) a.at(i, 0) = std::sin(s.at(i, 0) * 3.0);
    return a;
  };
  auto states = random_state_batch(64, k, 2, rng);
  auto dq = estimate_delta_q(critic, actor, states);

  for (int i = 0; i < k; ++i) {
    double mean_sq = 0.0;
    for (const auto& s : states) {
      const double a = std::sin(s.at(i, 0) * 3.0);
      mean_sq += a * a;
    }
    mean_sq /= static_cast<double>(states.size());
    // dQ_k = mean(w_k (b^2 - a_k^2)) with b = 0
    CHECK(dq[static_cast<std::size_t>(i)] ==
          doctest::Approx(-w[static_cast<std::size_t>(i)] * mean_sq).epsilon(1e-10));
  }
}

TEST_CASE("delta-Q: batch of 512 gives K finite reals") {
  Rng rng(43);
  CriticValueFn critic = [](const Tensor& s, const Tensor& a) {
    return s.at(0, 0) + a.at(0, 0);
  };
  ActorFn actor = [](const Tensor& s) {
    Tensor a(9, 1);
    for (int i = 0; i < 9; ++i) a.at(i, 0) = 0.1 * i;
    return a;
  };
  auto dq = estimate_delta_q(critic, actor, random_state_batch(512, 9, 2, rng));
  REQUIRE(dq.size() == 9);
  for (double v : dq) CHECK(std::isfinite(v));
}

TEST_CASE("delta-Q input validation") {
  CriticValueFn critic = [](const Tensor&, const Tensor&) { return 0.0; };
  ActorFn actor = [](const Tensor& s) { return Tensor(s.rows(), 1); };
  CHECK_THROWS_WITH_AS(estimate_delta_q(critic, actor, {}),
                       doctest::Contains("EmptyBatch"), Error);
  std::vector<Tensor> mixed{Tensor(3, 2), Tensor(4, 2)};
  CHECK_THROWS_WITH_AS(estimate_delta_q(critic, actor, mixed),
                       doctest::Contains("MixedRobots"), Error);
}

TEST_CASE("preference: softmax facts") {
  SUBCASE("equal inputs give the uniform vector") {
    auto p = to_preference({2.5, 2.5, 2.5, 2.5});
    for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("two-point value") {
    auto p = to_preference({1.0, 0.0});
    CHECK(p[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / (std::exp(1.0) + 1.0)).epsilon(1e-12));
  }
  SUBCASE("shift invariance and normalization") {
    Rng rng(44);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> dq;
      for (int i = 0; i < 7; ++i) dq.push_back(rng.uniform(-3, 3));
      auto p = to_preference(dq);
      double sum = 0.0;
      for (double v : p) sum += v;
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
      std::vector<double> shifted = dq;
      for (double& v : shifted) v += 123.456;
      auto p2 = to_preference(shifted);
      for (std::size_t i = 0; i < p.size(); ++i)
        CHECK(p[i] == doctest::Approx(p2[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("synergy mask patterns") {
  SUBCASE("mixed assignment") {
    BoolMat m = synergy_mask({0, 0, 1});
    CHECK(m.at(0, 0));
    CHECK(m.at(0, 1));
    CHECK_FALSE(m.at(0, 2));
    CHECK(m.at(1, 0));
    CHECK_FALSE(m.at(2, 1));
    CHECK(m.at(2, 2));
  }
  SUBCASE("one synergy is all-true, singletons are the identity pattern") {
    BoolMat all = synergy_mask({0, 0, 0});
    BoolMat id = synergy_mask({0, 1, 2});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        CHECK(all.at(i, j));
        CHECK(id.at(i, j) == (i == j));
      }
  }
  SUBCASE("mask is an equivalence relation") {
    Rng rng(45);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<int> assign;
      for (int i = 0; i < 8; ++i) assign.push_back(static_cast<int>(rng.uniform_index(3)));
      BoolMat m = synergy_mask(assign);
      for (int i = 0; i < 8; ++i) {
        CHECK(m.at(i, i));
        for (int j = 0; j < 8; ++j) {
          CHECK(m.at(i, j) == m.at(j, i));
          for (int l = 0; l < 8; ++l)
            if (m.at(i, j) && m.at(j, l)) CHECK(m.at(i, l));
        }
      }
    }
  }
}

TEST_CASE("refresh: freeze window is a no-op and refresh is idempotent inside it") {
  SynergyConfig cfg;
  cfg.period = 100;
  SynergyManager mgr(chain_morph(5), cfg);
  CriticValueFn critic = [](const Tensor&, const Tensor& a) { return a.at(0, 0); };
  ActorFn actor = [](const Tensor& s) { return Tensor(s.rows(), 1); };
  Rng rng(46);
  auto states = random_state_batch(8, 5, 3, rng);

  const SynergyStructure before = mgr.structure();
  CHECK(before.num_synergies == 1);  // warm-up
  CHECK(before.version == 0);
  auto out = mgr.refresh(50, critic, actor, states);  // inside freeze window
  CHECK_FALSE(out.attempted);
  CHECK(mgr.structure().version == before.version);
  CHECK(mgr.structure().assignment == before.assignment);

  auto out2 = mgr.refresh(100, critic, actor, states);  // window elapsed
  CHECK(out2.attempted);
  if (out2.installed) {
    CHECK(mgr.structure().version == before.version + 1);
    CHECK(mgr.structure().frozen_until == 200);
    // idempotent again until the next period
    auto out3 = mgr.refresh(150, critic, actor, states);
    CHECK_FALSE(out3.attempted);
  }
}

TEST_CASE("refresh: K=1 robot always has one synergy") {
  SynergyConfig cfg;
  cfg.period = 10;
  SynergyManager mgr(chain_morph(1), cfg);
  CriticValueFn critic = [](const Tensor&, const Tensor& a) { return -a.at(0, 0) * a.at(0, 0); };
  ActorFn actor = [](const Tensor& s) { return Tensor::full(1, 1, 0.3); };
  Rng rng(47);
  auto states = random_state_batch(4, 1, 3, rng);
  for (std::int64_t step : {10, 20, 30}) {
    mgr.refresh(step, critic, actor, states);
    CHECK(mgr.structure().num_synergies == 1);
  }
}

TEST_CASE("refresh: dominant actuator earns the highest preference") {
  // critic dominated by actuator 0: removing its action moves Q the most
  const int k = 5;
  CriticValueFn critic = [](const Tensor&, const Tensor& a) {
    double q = 10.0 * a.at(0, 0);
    for (int i = 1; i < 5; ++i) q += 0.1 * a.at(i, 0);
    return q;
  };
  ActorFn actor = [](const Tensor& s) {
    Tensor a(5, 1);
    for (int i = 0; i < 5; ++i) a.at(i, 0) = 0.5;
    return a;
  };
  Rng rng(48);
  auto states = random_state_batch(16, k, 3, rng);
  auto dq = estimate_delta_q(critic, actor, states);
  auto pref = to_preference(dq);
  for (int i = 1; i < k; ++i) CHECK(pref[0] > pref[static_cast<std::size_t>(i)]);
}

TEST_CASE("frozen mode never re-clusters") {
  SynergyConfig cfg;
  cfg.period = 10;
  cfg.mode = RefreshMode::kFrozen;
  SynergyManager mgr(chain_morph(4), cfg);
  CriticValueFn critic = [](const Tensor&, const Tensor&) { return 0.0; };
  ActorFn actor = [](const Tensor& s) { return Tensor(s.rows(), 1); };
  Rng rng(49);
  auto states = random_state_batch(4, 4, 3, rng);
  auto out = mgr.refresh(1000, critic, actor, states);
  CHECK_FALSE(out.attempted);
  CHECK(mgr.structure().version == 0);
}

TEST_CASE("no-preference mode clusters from morphology alone") {
  SynergyConfig cfg;
  cfg.period = 10;
  cfg.mode = RefreshMode::kNoPreference;
  SynergyManager mgr(chain_morph(6), cfg);
  // critic/actor must not be consulted
  CriticValueFn critic = [](const Tensor&, const Tensor&) -> double {
    throw std::logic_error("critic consulted in no-preference mode");
  };
  ActorFn actor = [](const Tensor&) -> Tensor {
    throw std::logic_error("actor consulted in no-preference mode");
  };
  auto out = mgr.refresh(10, critic, actor, {});
  CHECK(out.attempted);
  if (out.installed) {
    CHECK(mgr.structure().version == 1);
    CHECK(mgr.structure().num_synergies >= 1);
    CHECK(mgr.structure().num_synergies <= 6);
  }
}

TEST_CASE("structure invariants after clustering") {
  const auto s = morphology_only_structure(chain_morph(7));
  CHECK(s.num_actuators() == 7);
  CHECK(static_cast<int>(s.centers.size()) == s.num_synergies);
  for (int i = 0; i < 7; ++i) {
    const int g = s.assignment[static_cast<std::size_t>(i)];
    CHECK(g >= 0);
    CHECK(g < s.num_synergies);
    for (int j = 0; j < 7; ++j)
      CHECK(s.mask.at(i, j) == (s.assignment[static_cast<std::size_t>(i)] ==
                                s.assignment[static_cast<std::size_t>(j)]));
  }
  // every synergy's center belongs to that synergy
  for (int g = 0; g < s.num_synergies; ++g)
    CHECK(s.assignment[static_cast<std::size_t>(s.centers[static_cast<std::size_t>(g)])] == g);
}
