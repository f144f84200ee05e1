#include <doctest.h>

#include "airfl/star_ris.hpp"

using namespace airfl;

TEST_CASE("all elements T, phase 0, T side gives unit coefficients") {
  auto cfg = make_config(ModePolicy::AllT, 4);
  const CVec d = theta_diagonal(cfg, RisSide::T);
  for (Eigen::Index i = 0; i < d.size(); ++i)
    CHECK(std::abs(d(i) - cxd(1.0, 0.0)) == doctest::Approx(0.0));
}

TEST_CASE("all elements T, R side gives zero coefficients") {
  auto cfg = make_config(ModePolicy::AllT, 4);
  const CVec d = theta_diagonal(cfg, RisSide::R);
  CHECK(d.norm() == 0.0);
}

TEST_CASE("mixed modes evaluate per element") {
  StarRisConfig cfg;
  cfg.mode = {ElementMode::R, ElementMode::T};
  cfg.phase_t = {0.0, kPi};
  cfg.phase_r = {kPi / 2.0, 0.0};
  const CVec d = theta_diagonal(cfg, RisSide::R);
  CHECK(std::abs(d(0) - std::polar(1.0, kPi / 2.0)) < 1e-15);
  CHECK(d(1) == cxd(0.0, 0.0));
}

TEST_CASE("equal split alternates and balances") {
  auto modes = assign_modes(ModePolicy::EqualSplit, 10);
  int t = 0, r = 0;
  for (auto m : modes) (m == ElementMode::T ? t : r)++;
  CHECK(t == 5);
  CHECK(r == 5);
  // prefix stability: the first q elements never depend on Q
  auto modes3 = assign_modes(ModePolicy::EqualSplit, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(modes3[i] == modes[i]);
  // odd Q: T side gets the extra element
  int t3 = 0;
  for (auto m : modes3)
    if (m == ElementMode::T) ++t3;
  CHECK(t3 == 2);
}

TEST_CASE("all-R policy") {
  auto modes = assign_modes(ModePolicy::AllR, 4);
  for (auto m : modes) CHECK(m == ElementMode::R);
}

TEST_CASE("custom list is used verbatim") {
  std::vector<ElementMode> want = {ElementMode::T, ElementMode::R,
                                   ElementMode::R};
  auto modes = assign_modes(ModePolicy::Custom, 3, want);
  CHECK(modes == want);
}

TEST_CASE("custom list length mismatch rejected") {
  CHECK_THROWS_AS(assign_modes(ModePolicy::Custom, 3, {ElementMode::T}),
                  ConfigError);
}

TEST_CASE("every active element has unit modulus on exactly one side") {
  auto cfg = make_config(ModePolicy::EqualSplit, 7);
  for (std::size_t i = 0; i < 7; ++i) {
    cfg.phase_t[i] = 0.3 * static_cast<double>(i);
    cfg.phase_r[i] = 0.7 * static_cast<double>(i);
  }
  const CVec dt = theta_diagonal(cfg, RisSide::T);
  const CVec dr = theta_diagonal(cfg, RisSide::R);
  for (Eigen::Index i = 0; i < 7; ++i) {
    CHECK(std::abs(dt(i)) + std::abs(dr(i)) == doctest::Approx(1.0));
    // supports are disjoint
    CHECK(std::abs(dt(i) * dr(i)) == 0.0);
  }
}

TEST_CASE("off elements contribute nothing on either side") {
  auto cfg = StarRisConfig::all_off(3);
  CHECK(theta_diagonal(cfg, RisSide::T).norm() == 0.0);
  CHECK(theta_diagonal(cfg, RisSide::R).norm() == 0.0);
}

TEST_CASE("policy names round-trip") {
  CHECK(mode_policy_from_string("equal-split") == ModePolicy::EqualSplit);
  CHECK(mode_policy_from_string("all-T") == ModePolicy::AllT);
  CHECK(mode_policy_from_string("all-R") == ModePolicy::AllR);
  CHECK(mode_policy_from_string("custom") == ModePolicy::Custom);
  CHECK_THROWS_AS(mode_policy_from_string("bogus"), ConfigError);
}
