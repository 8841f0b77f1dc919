#include "doctest.h"

#include "spectraforge/encoding.hpp"

#include <random>

using namespace spectraforge;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd random_spectrum(Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 50.0);
  Eigen::VectorXd s(k);
  for (Index i = 0; i < k; ++i) s(i) = u(rng);
  std::sort(s.data(), s.data() + k);
  return s;
}

SpectralEncoding random_encoding(std::mt19937_64& rng) {
  return build_encoding(random_spectrum(15, rng), {{"R", random_spectrum(15, rng)}});
}

}  // namespace

TEST_CASE("diff_encode") {
  CHECK(diff_encode(vec({3, 3, 3, 3})) == Eigen::VectorXd::Zero(3));
  CHECK(diff_encode(vec({0, 1.0, 2.5, 2.5, 4.0})) == vec({1.0, 1.5, 0.0, 1.5}));
  const Eigen::VectorXd s = vec({0.0, 0.7, 1.9, 4.4});
  CHECK((diff_encode(3.5 * s) - 3.5 * diff_encode(s)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(diff_encode(vec({1.0})), Error);
  CHECK_THROWS_AS(diff_encode(vec({2.0, 1.0})), Error);
}

TEST_CASE("diff_encode is nonnegative on sorted spectra") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) CHECK(diff_encode(random_spectrum(30, rng)).minCoeff() >= 0.0);
}

TEST_CASE("build_encoding layouts") {
  std::mt19937_64 rng(2);
  const auto pat = build_encoding(random_spectrum(15, rng), {{"R", random_spectrum(15, rng)}});
  CHECK(pat.size() == 28);
  CHECK(pat.layout == Layout{{"global", 0, 14}, {"R", 14, 14}});

  const auto lbo = build_encoding(random_spectrum(30, rng));
  CHECK(lbo.size() == 29);
  CHECK(lbo.layout == Layout{{"global", 0, 29}});

  const auto multi =
      build_encoding(random_spectrum(10, rng), {{"head", random_spectrum(10, rng)}, {"tail", random_spectrum(10, rng)}});
  CHECK(multi.size() == 27);
  CHECK(multi.layout.size() == 3);
  CHECK(describe_layout(multi.layout) == "global:9,head:9,tail:9");

  CHECK_THROWS_AS(build_encoding(Eigen::VectorXd()), Error);
  CHECK_THROWS_AS(build_encoding(random_spectrum(5, rng), {{"R", Eigen::VectorXd()}}), Error);
  CHECK_THROWS_AS(build_encoding(random_spectrum(5, rng), {{"R", random_spectrum(5, rng)}, {"R", random_spectrum(5, rng)}}),
                  Error);
}

TEST_CASE("segment round trip is the identity") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = random_encoding(rng);
    const auto back = join_segments(split_segments(e));
    CHECK(back.values == e.values);
    CHECK(back.layout == e.layout);
  }
}

TEST_CASE("swap_segments") {
  std::mt19937_64 rng(4);
  const auto a = random_encoding(rng), b = random_encoding(rng);
  CHECK(swap_segments(a, b, {}).values == a.values);
  CHECK(swap_segments(a, b, {"global", "R"}).values == b.values);
  const auto mixed = swap_segments(a, b, {"R"});
  CHECK(mixed.values.head(14) == a.values.head(14));
  CHECK(mixed.values.tail(14) == b.values.tail(14));
  CHECK_THROWS_AS(swap_segments(a, b, {"nope"}), Error);
  const auto other = build_encoding(random_spectrum(16, rng), {{"R", random_spectrum(14, rng)}});
  CHECK_THROWS_AS(swap_segments(a, other, {"R"}), Error);
}

TEST_CASE("interpolate") {
  SpectralEncoding a{vec({2, 4}), {{"global", 0, 2}}};
  SpectralEncoding b{vec({4, 8}), {{"global", 0, 2}}};
  CHECK(interpolate(a, b, 0.5).values == vec({3, 6}));
  CHECK(interpolate(a, b, 0.0).values == a.values);
  CHECK(interpolate(a, b, 1.0).values == b.values);
  CHECK_THROWS_AS(interpolate(a, b, 1.5), Error);
  CHECK_THROWS_AS(interpolate(a, b, -0.1), Error);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_encoding(rng), y = random_encoding(rng);
    const double t = u(rng);
    const auto fwd = interpolate(x, y, t), mirrored = interpolate(x, y, 1.0 - t), reversed = interpolate(y, x, 1.0 - t);
    CHECK((fwd.values + mirrored.values - x.values - y.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((fwd.values - reversed.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fwd.values.minCoeff() >= 0.0);
    const auto local = interpolate(x, y, t, {"R"});
    CHECK(local.values.head(14) == x.values.head(14));
    CHECK(local.values.minCoeff() >= 0.0);
  }
}

TEST_CASE("dataset_stats") {
  SpectralEncoding a{vec({1, 2}), {{"global", 0, 2}}};
  SpectralEncoding b{vec({3, 0}), {{"global", 0, 2}}};
  const auto single = dataset_stats({a});
  CHECK(single.min == a.values);
  CHECK(single.max == a.values);
  const auto both = dataset_stats({a, b});
  CHECK(both.min == vec({1, 0}));
  CHECK(both.max == vec({3, 2}));
  CHECK_THROWS_AS(dataset_stats({}), Error);
  SpectralEncoding c{vec({1, 2, 3}), {{"global", 0, 3}}};
  CHECK_THROWS_AS(dataset_stats({a, c}), Error);
}

TEST_CASE("mixing extremes gives the four corners") {
  std::mt19937_64 rng(6);
  std::vector<SpectralEncoding> all;
  for (int i = 0; i < 10; ++i) all.push_back(random_encoding(rng));
  const auto stats = dataset_stats(all);
  CHECK((stats.min.array() <= stats.max.array()).all());
  const auto lo = mix_extremes(stats, {});
  const auto hi = mix_extremes(stats, {"global", "R"});
  const auto global_hi = mix_extremes(stats, {"global"});
  CHECK(lo.values == stats.min);
  CHECK(hi.values == stats.max);
  CHECK(global_hi.values.head(14) == stats.max.head(14));
  CHECK(global_hi.values.tail(14) == stats.min.tail(14));
}

TEST_CASE("JSON round trips") {
  std::mt19937_64 rng(7);
  const auto e = random_encoding(rng);
  const auto back = encoding_from_json(encoding_to_json(e));
  CHECK(back.values == e.values);
  CHECK(back.layout == e.layout);
  CHECK_THROWS_AS(encoding_from_json(R"({"layout":[{"label":"global","offset":0,"length":3}],"values":[1,2]})"),
                  Error);
  CHECK_THROWS_AS(encoding_from_json("{"), ParseError);

  const auto stats = dataset_stats({e, random_encoding(rng)});
  const auto sback = stats_from_json(stats_to_json(stats));
  CHECK(sback.min == stats.min);
  CHECK(sback.max == stats.max);
  CHECK(sback.layout == stats.layout);
}
