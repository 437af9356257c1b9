// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>

#include "chartforge/errors.hpp"
#include "chartforge/metrics.hpp"
#include "support.hpp"

using namespace chartforge;

namespace {

Matrix transform(const Matrix& p, double angle, double scale, double tx, double ty) {
  Matrix out(p.rows(), 2);
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    out(i, 0) = scale * (c * p(i, 0) - s * p(i, 1)) + tx;
    out(i, 1) = scale * (s * p(i, 0) + c * p(i, 1)) + ty;
  }
  return out;
}

Matrix permuted(const Matrix& p, Rng& rng) {
  std::vector<std::size_t> idx(p.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(std::span<std::size_t>(idx));
  Matrix out(p.rows(), 2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out(i, 0) = p(idx[i], 0);
    out(i, 1) = p(idx[i], 1);
  }
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("identity embeddings are perfect") {
    Rng rng(1);
    const Matrix p = oracle::random_points(rng, 60, 3.0);
    for (const std::size_t k : {1u, 5u, 19u}) {
      CHECK(continuity_ct(p, p, k) == 1.0);
      CHECK(trustworthiness_tw(p, p, k) == 1.0);
    }
    CHECK(ks_statistic(p, p) == 0.0);
    CHECK(mae(p, ChartEmbedding::meters(p)) == 0.0);
  }

  TEST_CASE("a random permutation matches the rank oracle") {
    Rng rng(2);
    const Matrix p = oracle::random_points(rng, 100, 1.0);
    const Matrix e = permuted(p, rng);
    CHECK(std::abs(continuity_ct(p, e, 10) - oracle::continuity(p, e, 10)) <= 1e-12);
    CHECK(std::abs(trustworthiness_tw(p, e, 10) - oracle::trustworthiness(p, e, 10)) <= 1e-12);
    CHECK(continuity_ct(p, e, 10) < 0.9);
  }

  TEST_CASE("uniform scaling leaves rank metrics at one") {
    Rng rng(3);
    const Matrix p = oracle::random_points(rng, 50, 2.0);
    const Matrix e = transform(p, 0.0, 5.0, 0.0, 0.0);
    CHECK(continuity_ct(p, e, 5) == 1.0);
    CHECK(trustworthiness_tw(p, e, 5) == 1.0);
  }

  TEST_CASE("coincident embeddings follow the index tie-break") {
    Rng rng(4);
    const Matrix p = oracle::random_points(rng, 50, 2.0);
    const Matrix e(50, 2, 0.25);
    CHECK(std::abs(trustworthiness_tw(p, e, 5) - oracle::trustworthiness(p, e, 5)) <= 1e-12);
    CHECK(std::abs(continuity_ct(p, e, 5) - oracle::continuity(p, e, 5)) <= 1e-12);
  }

  TEST_CASE("rank metrics are invariant under rotation, translation, and scaling") {
    Rng rng(5);
    const Matrix p = oracle::random_points(rng, 80, 2.0);
    Matrix e = p;
    for (double& v : e.data()) v += rng.uniform(-0.3, 0.3);
    // Quarter turns with power-of-two scales keep every coordinate exact, so
    // ranks cannot move through rounding.
    const double ct = continuity_ct(p, e, 6), tw = trustworthiness_tw(p, e, 6);
    Matrix q(80, 2);
    for (std::size_t i = 0; i < 80; ++i) {
      q(i, 0) = -4.0 * e(i, 1);
      q(i, 1) = 4.0 * e(i, 0);
    }
    CHECK(continuity_ct(p, q, 6) == ct);
    CHECK(trustworthiness_tw(p, q, 6) == tw);
    const Matrix r = transform(e, 1.1, 3.0, -2.0, 7.0);
    CHECK(continuity_ct(p, r, 6) == doctest::Approx(ct).epsilon(1e-12));
    CHECK(trustworthiness_tw(p, r, 6) == doctest::Approx(tw).epsilon(1e-12));
  }

  TEST_CASE("k must lie in the valid range") {
    const Matrix p(10, 2);
    CHECK_THROWS_AS(continuity_ct(p, p, 0), ConfigError);
    CHECK_THROWS_AS(continuity_ct(p, p, 10), ConfigError);
    CHECK_THROWS_AS(trustworthiness_tw(p, p, 7), ConfigError);
    CHECK(default_neighbors(100) == 5);
    CHECK(default_neighbors(10) == 1);
  }

  TEST_CASE("metrics match brute-force oracles on random instances") {
    Rng rng(6);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n = 10 + rng.below(120);
      const Matrix p = oracle::random_points(rng, n, 4.0);
      Matrix e = p;
      const double noise = rng.uniform(0.0, 2.0);
      for (double& v : e.data()) v = 0.5 * v + rng.normal() * noise;
      const std::size_t k = std::max<std::size_t>(1, n / 20) + rng.below(3);
      CHECK(std::abs(continuity_ct(p, e, k) - oracle::continuity(p, e, k)) <= 1e-12);
      CHECK(std::abs(trustworthiness_tw(p, e, k) - oracle::trustworthiness(p, e, k)) <= 1e-12);
      CHECK(std::abs(ks_statistic(p, e) - oracle::ks(p, e)) <= 1e-12);
      const auto chart = ChartEmbedding::meters(e);
      CHECK(std::abs(mae(p, chart) - oracle::mae(p, e)) <= 1e-12);
    }
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("KS ignores scale") {
    Rng rng(7);
    const Matrix p = oracle::random_points(rng, 40, 1.0);
    const Matrix e = oracle::random_points(rng, 40, 1.0);
    // Power-of-two scaling is exact, so normalized distances are unchanged.
    CHECK(ks_statistic(p, transform(p, 0.0, 4.0, 0.0, 0.0)) == 0.0);
    CHECK(ks_statistic(transform(p, 0.0, 4.0, 0, 0), e) == ks_statistic(p, e));
    // Other factors round the normalized distances, which may swap a near tie
    // between the two samples and move the statistic by a single 1/M step.
    const double step = 1.0 / (40.0 * 39.0 / 2.0);
    CHECK(ks_statistic(p, transform(p, 0.0, 3.0, 0.0, 0.0)) <= 2.0 * step);
    CHECK(std::abs(ks_statistic(transform(p, 0.0, 3.0, 0, 0), e) - ks_statistic(p, e)) <=
          2.0 * step);
  }

  TEST_CASE("KS of square corners against collinear points") {
    const Matrix square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const Matrix line{{0, 0}, {1, 0}, {2, 0}, {3, 0}};
    // Square: four sides 1/sqrt2 and two diagonals 1 after normalization.
    // Line: 1/3 x3, 2/3 x2, 1 x1. The CDFs differ most at 2/3: 5/6 vs 0.
    CHECK(std::abs(ks_statistic(square, line) - oracle::ks(square, line)) <= 1e-12);
    CHECK(ks_statistic(square, line) == doctest::Approx(5.0 / 6.0));
  }

  TEST_CASE("KS rejects fully coincident sets") {
    const Matrix p{{0, 0}, {1, 1}, {2, 0}};
    CHECK_THROWS_AS(ks_statistic(p, Matrix(3, 2, 1.0)), DegenerateGeometryError);
    CHECK_THROWS_AS(ks_statistic(Matrix(3, 2), p), DegenerateGeometryError);
  }

  TEST_CASE("MAE of a constant 3-4-5 offset is 0.5") {
    Rng rng(8);
    const Matrix p = oracle::random_points(rng, 17, 3.0);
    Matrix e = p;
    for (std::size_t i = 0; i < 17; ++i) {
      e(i, 0) += 0.3;
      e(i, 1) += 0.4;
    }
    CHECK(mae(p, ChartEmbedding::meters(e)) == doctest::Approx(0.5).epsilon(1e-14));
  }

  TEST_CASE("MAE matches the scalar oracle on four points and requires alignment") {
    Rng rng(9);
    const Matrix p = oracle::random_points(rng, 4, 3.0), e = oracle::random_points(rng, 4, 3.0);
    CHECK(std::abs(mae(p, ChartEmbedding::meters(e)) - oracle::mae(p, e)) <= 1e-12);
    CHECK(mae(p, ChartEmbedding::meters(e)) > 0.0);
    CHECK_THROWS_AS(mae(p, ChartEmbedding::latent(e)), ContractError);
  }

  TEST_CASE("error vectors pair truth with prediction in input order") {
    const Matrix p{{0, 0}, {1, 1}, {2, 5}};
    const auto same = error_vectors(p, ChartEmbedding::meters(p));
    CHECK(same.size() == 3);
    for (const auto& v : same) CHECK(v.truth == v.predicted);
    Matrix e = p;
    e(1, 0) += 0.5;
    const auto one = error_vectors(p, ChartEmbedding::meters(e));
    CHECK(one[1].predicted.x - one[1].truth.x == 0.5);
    CHECK(one[0].truth == one[0].predicted);
    CHECK_THROWS_AS(error_vectors(p, ChartEmbedding::meters(Matrix(2, 2))), ShapeError);
    CHECK_THROWS_AS(error_vectors(p, ChartEmbedding::latent(p)), ContractError);
  }

  TEST_CASE("histogram KL is zero for identical charts and positive otherwise") {
    Rng rng(10);
    const Matrix p = oracle::random_points(rng, 50, 1.0);
    CHECK(kl_divergence_hist(p, p) == doctest::Approx(0.0).scale(1.0));
    CHECK(kl_divergence_hist(p, oracle::random_points(rng, 50, 1.0)) > 0.0);
  }

  TEST_CASE("reports serialize in table order") {
    Rng rng(11);
    const Matrix p = oracle::random_points(rng, 40, 1.0);
    const auto report = evaluate_chart(p, ChartEmbedding::meters(p), 0, true);
    CHECK(report.k_neighbors == 2);
    CHECK(report.n_points == 40);
    CHECK(report.to_csv() == "CT,TW,KS,MAE\n1,1,0,0\n");
    const auto j = nlohmann::json::parse(report.to_json());
    CHECK(j.at("ct").get<double>() == 1.0);
    CHECK(j.at("k_neighbors").get<std::size_t>() == 2);
    CHECK(j.contains("kl"));
    CHECK_FALSE(nlohmann::json::parse(evaluate_chart(p, ChartEmbedding::meters(p)).to_json())
                    .contains("kl"));
  }
}
