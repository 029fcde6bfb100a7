#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "diffse/training.hpp"
#include "helpers.hpp"

using namespace diffse;

namespace {

double brute_force_norm2(const ComplexSpectrogram& a) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      acc += a(i, j).real() * a(i, j).real() + a(i, j).imag() * a(i, j).imag();
    }
  }
  return acc;
}

struct Draw {
  ComplexSpectrogram x0, y, z, x_t, mu;
  double t, sigma;
};

Draw random_draw(Rng& rng, const SdeParams& p, Eigen::Index rows = 5, Eigen::Index cols = 7) {
  Draw d;
  d.x0 = rng.complex_normal(rows, cols);
  d.y = d.x0 + 0.7 * rng.complex_normal(rows, cols);
  d.t = rng.uniform(p.t_eps, p.t_max);
  d.sigma = kernel_std(d.t, p);
  d.z = rng.complex_normal(rows, cols);
  d.mu = kernel_mean(d.x0, d.y, d.t, p);
  d.x_t = d.mu + d.sigma * d.z;
  return d;
}

std::vector<TrainingPair> structured_pairs(int n, std::uint64_t seed, Eigen::Index rows,
                                           Eigen::Index cols) {
  // Clean: a few horizontal lines; noisy: clean plus white noise.
  Rng rng(seed);
  std::vector<TrainingPair> out;
  for (int k = 0; k < n; ++k) {
    ComplexSpectrogram x0 = ComplexSpectrogram::Zero(rows, cols);
    for (int line = 0; line < 3; ++line) {
      const auto r = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(rows)));
      x0.row(r) += rng.uniform(0.5, 1.0) * Complex(1.0, 0.0);
    }
    out.push_back({x0, x0 + 0.4 * rng.complex_normal(rows, cols)});
  }
  return out;
}

}  // namespace

TEST_CASE("score matching loss") {
  Rng rng(1);
  const ComplexSpectrogram s = rng.complex_normal(6, 4);
  const ComplexSpectrogram z = rng.complex_normal(6, 4);
  const double sigma = 0.3;
  CHECK(score_matching_loss(-z / sigma, z, sigma) == 0.0);
  CHECK(score_matching_loss(0.0 * s, z, sigma) ==
        doctest::Approx(brute_force_norm2(z) / (sigma * sigma)).epsilon(1e-13));
  CHECK(score_matching_loss(s, z, sigma) ==
        doctest::Approx(brute_force_norm2(s + z / sigma)).epsilon(1e-13));
  CHECK_THROWS_AS(score_matching_loss(s, z, 0.0), NumericalDomainError);
  CHECK_THROWS_AS(score_matching_loss(s, rng.complex_normal(5, 4), sigma), InvalidInput);
}

TEST_CASE("alpha schedule") {
  const SdeParams p;
  CHECK(alpha_weight(p.t_eps, p) == 1.0);
  CHECK(alpha_weight(p.t_max, p) == 0.0);
  // (sigma(1) - sigma(0.5)) / (sigma(1) - sigma(0.03)) from reference values.
  CHECK(alpha_weight(0.5, p) == doctest::Approx(0.7222030979834954).epsilon(1e-10));
  double prev = 2.0;
  for (int i = 0; i < 1000; ++i) {
    const double t = p.t_eps + (p.t_max - p.t_eps) * i / 999.0;
    const double a = alpha_weight(t, p);
    CHECK(a < prev);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    prev = a;
  }
  SdeParams flat = p;
  flat.sigma_max = flat.sigma_min;
  CHECK_THROWS_AS(alpha_weight(0.5, flat), NumericalDomainError);
  CHECK_THROWS_AS(alpha_weight(0.01, p), InvalidInput);

  CHECK(AlphaSchedule::parse("paper").kind == AlphaSchedule::Kind::paper);
  const auto c = AlphaSchedule::parse("const:0.25");
  CHECK(c.kind == AlphaSchedule::Kind::constant);
  CHECK(c.value == 0.25);
  CHECK(alpha_value(c, 0.9, p) == 0.25);
  CHECK(AlphaSchedule::parse(c.str()).value == 0.25);
  CHECK_THROWS_AS(AlphaSchedule::parse("const:1.5"), ConfigError);
  CHECK_THROWS_AS(AlphaSchedule::parse("const:"), ConfigError);
  CHECK_THROWS_AS(AlphaSchedule::parse("cosine"), ConfigError);
}

TEST_CASE("tweedie estimate") {
  const SdeParams p;
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const Draw d = random_draw(rng, p);
    const ComplexSpectrogram s_conj = -(d.x_t - d.mu) / (d.sigma * d.sigma);
    const ComplexSpectrogram s_real = 2.0 * s_conj;
    CHECK(test::relative_l2(tweedie_estimate(d.x_t, d.y, d.t, s_conj, p, TweedieFactor::full), d.x0) <=
          1e-10);
    CHECK(test::relative_l2(tweedie_estimate(d.x_t, d.y, d.t, s_real, p, TweedieFactor::half), d.x0) <=
          1e-10);
    // The mismatched pairing lands halfway: x_t + sigma^2/2 s = (x_t + mu) / 2.
    const double e = std::exp(-p.gamma * d.t);
    const ComplexSpectrogram halfway = ((d.x_t + d.mu) / 2.0 - (1.0 - e) * d.y) / e;
    CHECK(test::relative_l2(tweedie_estimate(d.x_t, d.y, d.t, s_conj, p, TweedieFactor::half), halfway) <=
          1e-10);
  }
  const Draw d = random_draw(rng, p);
  CHECK_THROWS_AS(tweedie_estimate(d.x_t, d.y, 0.0, d.z, p, TweedieFactor::half), InvalidInput);
  SdeParams stiff = p;
  stiff.gamma = 40.0;
  CHECK_THROWS_AS(tweedie_estimate(d.x_t, d.y, 0.9, d.z, stiff, TweedieFactor::half),
                  NumericalDomainError);
}

TEST_CASE("supervised loss") {
  const SdeParams p;
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const Draw d = random_draw(rng, p);
    const ComplexSpectrogram zero = ComplexSpectrogram::Zero(d.x0.rows(), d.x0.cols());
    CHECK(supervised_loss(d.x_t, d.y, d.t, zero, d.x0, p, TweedieFactor::half) ==
          doctest::Approx(d.sigma * d.sigma * brute_force_norm2(d.z)).epsilon(1e-10));
    const ComplexSpectrogram s_conj = -(d.x_t - d.mu) / (d.sigma * d.sigma);
    CHECK(supervised_loss(d.x_t, d.y, d.t, s_conj, d.x0, p, TweedieFactor::full) <= 1e-24);
    CHECK(supervised_loss(d.x_t, d.y, d.t, 2.0 * s_conj, d.x0, p, TweedieFactor::half) <= 1e-24);
    const ComplexSpectrogram s = rng.complex_normal(d.x0.rows(), d.x0.cols());
    for (auto f : {TweedieFactor::half, TweedieFactor::full}) {
      const double e2 = std::exp(-2.0 * p.gamma * d.t);
      const double rhs = e2 * brute_force_norm2(tweedie_estimate(d.x_t, d.y, d.t, s, p, f) - d.x0);
      CHECK(supervised_loss(d.x_t, d.y, d.t, s, d.x0, p, f) == doctest::Approx(rhs).epsilon(1e-10));
    }
  }
}

TEST_CASE("direct supervised loss") {
  Rng rng(4);
  const ComplexSpectrogram x0 = rng.complex_normal(4, 5);
  CHECK(supervised_direct_loss(x0, x0) == 0.0);
  const Complex c(0.3, -0.4);
  CHECK(supervised_direct_loss(x0 + c, x0) == doctest::Approx(std::norm(c)).epsilon(1e-12));
  CHECK(supervised_direct_loss(0.0 * x0, x0) == doctest::Approx(brute_force_norm2(x0) / 20.0));
  CHECK_THROWS_AS(supervised_direct_loss(x0, rng.complex_normal(4, 4)), InvalidInput);
}

TEST_CASE("weighted loss reductions") {
  const SdeParams p;
  Rng data_rng(5);
  std::vector<TrainingPair> batch;
  for (int i = 0; i < 3; ++i) {
    const ComplexSpectrogram x0 = data_rng.complex_normal(6, 5);
    batch.push_back({x0, x0 + 0.5 * data_rng.complex_normal(6, 5)});
  }
  ScorerArchitecture arch;
  arch.hidden_channels = {4};
  arch.dilations = {1, 1};
  arch.time_embedding = 2;
  NeuralScorer model(arch, p, 6);
  {
    Rng r(7);
    std::vector<double> theta(model.parameters().begin(), model.parameters().end());
    for (double& v : theta) v += 0.2 * r.normal();
    model.set_parameters(theta);
  }

  // Replays the per-element draws of weighted_loss.
  const auto replay = [&](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LossSample> out;
    for (const auto& pair : batch) out.push_back(draw_loss_sample(pair, p, rng));
    return out;
  };

  LossConfig cfg;
  cfg.alpha_schedule = AlphaSchedule::parse("const:0");
  Rng rng_a(42);
  const auto [total0, rec0] = weighted_loss(batch, rng_a, model, cfg, p);
  double score_sum = 0.0;
  for (const auto& s : replay(42)) {
    score_sum += score_matching_loss(model.evaluate(s.x_t, s.y, s.t), s.z, kernel_std(s.t, p));
  }
  CHECK(total0 == score_sum / 3.0);
  CHECK(rec0.t.size() == 3);

  cfg.alpha_schedule = AlphaSchedule::parse("const:1");
  Rng rng_b(43);
  const auto [total1, rec1] = weighted_loss(batch, rng_b, model, cfg, p);
  double sup_sum = 0.0;
  for (const auto& s : replay(43)) {
    sup_sum += supervised_loss(s.x_t, s.y, s.t, model.evaluate(s.x_t, s.y, s.t), s.x0, p,
                               cfg.tweedie_factor);
  }
  CHECK(total1 == sup_sum / 3.0);

  // score_only ignores the schedule.
  cfg.mode = LossMode::score_only;
  cfg.alpha_schedule = AlphaSchedule::parse("const:1");
  Rng rng_c(42);
  CHECK(weighted_loss(batch, rng_c, model, cfg, p).first == total0);

  SUBCASE("oracle score zeroes both terms") {
    LossConfig w;
    w.tweedie_factor = TweedieFactor::full;
    for (int k = 0; k < 10; ++k) {
      const auto& pair = batch[static_cast<std::size_t>(k % 3)];
      const OracleScore oracle(pair.x0, p, ScoreConvention::conjugate);
      Rng r(100 + k);
      const std::vector<TrainingPair> one{pair};
      const auto [total, rec] = weighted_loss(one, r, oracle, w, p);
      CHECK(total <= 1e-12);
      CHECK(rec.score_loss <= 1e-12);
      CHECK(rec.sup_loss <= 1e-12);
    }
  }

  SUBCASE("record bookkeeping") {
    LossConfig w;
    Rng r(44);
    const auto [total, rec] = weighted_loss(batch, r, model, w, p);
    CHECK(rec.total == total);
    CHECK(rec.score_term + rec.sup_term == doctest::Approx(total).epsilon(1e-12));
    double alpha = 0.0;
    for (double t : rec.t) alpha += alpha_weight(t, p);
    CHECK(rec.alpha_mean == doctest::Approx(alpha / 3.0));
  }

  Rng r(1);
  CHECK_THROWS_AS(weighted_loss(std::span<const TrainingPair>{}, r, model, cfg, p), InvalidInput);
}

TEST_CASE("output gradient of the batch loss") {
  const SdeParams p;
  Rng rng(8);
  std::vector<LossSample> samples;
  for (int i = 0; i < 2; ++i) {
    const ComplexSpectrogram x0 = rng.complex_normal(3, 4);
    samples.push_back(draw_loss_sample({x0, x0 + rng.complex_normal(3, 4)}, p, rng));
  }
  std::vector<ComplexSpectrogram> outputs{rng.complex_normal(3, 4), rng.complex_normal(3, 4)};
  for (auto mode : {LossMode::score_only, LossMode::weighted, LossMode::supervised_direct}) {
    LossConfig cfg;
    cfg.mode = mode;
    const auto g = evaluate_batch_loss(samples, outputs, cfg, p).output_gradient;
    const double h = 1e-6;
    for (std::size_t b = 0; b < 2; ++b) {
      for (Eigen::Index i : {0, 7}) {
        for (Complex dir : {Complex(1, 0), Complex(0, 1)}) {
          auto up = outputs;
          auto down = outputs;
          up[b](i) += h * dir;
          down[b](i) -= h * dir;
          const double numeric = (evaluate_batch_loss(samples, up, cfg, p).total -
                                  evaluate_batch_loss(samples, down, cfg, p).total) /
                                 (2 * h);
          const double analytic = dir.real() != 0.0 ? g[b](i).real() : g[b](i).imag();
          CHECK(analytic == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("loss samples draw t in (t_eps, T]") {
  const SdeParams p;
  Rng rng(9);
  const ComplexSpectrogram x0 = rng.complex_normal(2, 2);
  double lo = 1.0;
  double hi = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const auto s = draw_loss_sample({x0, x0}, p, rng);
    lo = std::min(lo, s.t);
    hi = std::max(hi, s.t);
    CHECK(s.t > p.t_eps);
    CHECK(s.t <= p.t_max);
  }
  CHECK(lo < 0.05);
  CHECK(hi > 0.98);
}

TEST_CASE("optimizer helpers") {
  std::vector<double> g{3.0, 4.0};
  CHECK(clip_global_norm(g, 1.0) == 5.0);
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  std::vector<double> small{0.1, 0.0};
  clip_global_norm(small, 1.0);
  CHECK(small[0] == 0.1);

  // Adam's first step moves each coordinate by the learning rate.
  Adam adam(2, 0.01);
  std::vector<double> x{1.0, -1.0};
  const std::vector<double> grad{5.0, -0.001};
  adam.step(x, grad);
  CHECK(x[0] == doctest::Approx(0.99));
  CHECK(x[1] == doctest::Approx(-0.99).epsilon(1e-4));
  CHECK(adam.iterations() == 1);
}

TEST_CASE("training loop") {
  const SdeParams p;
  const auto data = structured_pairs(8, 10, 16, 12);
  ScorerArchitecture arch;
  arch.hidden_channels = {8, 8};
  arch.dilations = {1, 2, 1};
  arch.time_embedding = 4;

  SUBCASE("zero steps keep the initial weights") {
    LossConfig cfg;
    cfg.total_steps = 0;
    NeuralScorer init(arch, p, 1);
    const auto r = train(data, init, cfg, 3);
    CHECK(r.log.empty());
    CHECK(std::equal(r.model.parameters().begin(), r.model.parameters().end(),
                     init.parameters().begin()));
  }

  SUBCASE("deterministic given the seed") {
    LossConfig cfg;
    cfg.total_steps = 5;
    cfg.batch_size = 2;
    const auto a = train(data, NeuralScorer(arch, p, 1), cfg, 3);
    const auto b = train(data, NeuralScorer(arch, p, 1), cfg, 3);
    CHECK(std::equal(a.model.parameters().begin(), a.model.parameters().end(),
                     b.model.parameters().begin()));
    REQUIRE(a.log.size() == 5);
    CHECK(a.log[4].total == b.log[4].total);
    CHECK(a.log[4].step == 5);
  }

  SUBCASE("loss falls on a tiny dataset") {
    LossConfig cfg;
    cfg.total_steps = 2000;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.ema_decay = 0.0;
    const NeuralScorer init(arch, p, 1);
    const auto r = train(data, init, cfg, 3);
    const auto eval = [&](const NeuralScorer& m) {
      Rng rng(77);
      double acc = 0.0;
      for (int rep = 0; rep < 20; ++rep) acc += weighted_loss(data, rng, m, cfg, p).first;
      return acc;
    };
    const double before = eval(init);
    const double after = eval(r.model);
    MESSAGE("weighted loss " << before << " -> " << after);
    CHECK(after < 0.5 * before);
  }

  SUBCASE("mode and role must agree") {
    LossConfig cfg;
    cfg.mode = LossMode::supervised_direct;
    cfg.total_steps = 1;
    CHECK_THROWS_AS(train(data, NeuralScorer(arch, p, 1), cfg, 3), ConfigError);
  }

  SUBCASE("divergence is reported with its record") {
    LossConfig cfg;
    cfg.total_steps = 3;
    auto bad = data;
    bad[0].x0(0, 0) = Complex(std::nan(""), 0.0);
    bad.resize(1);
    try {
      (void)train(bad, NeuralScorer(arch, p, 1), cfg, 3);
      FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
      CHECK(e.record().step == 1);
    }
  }
}

TEST_CASE("loss log format") {
  test::TempDir dir("log");
  TrainRecord r;
  r.step = 3;
  r.score_loss = 2.0;
  r.sup_loss = 1.0;
  r.alpha_mean = 0.5;
  r.total = 1.5;
  r.score_term = 1.0;
  r.sup_term = 0.5;
  write_loss_log(dir.path() / "a.tsv", std::vector<TrainRecord>{r});
  write_loss_log(dir.path() / "empty.tsv", std::vector<TrainRecord>{});
  std::ifstream f(dir.path() / "a.tsv");
  std::string header;
  std::string line;
  std::getline(f, header);
  std::getline(f, line);
  CHECK(header == "step\tscore_loss\tsup_loss\talpha_mean\ttotal\tscore_term\tsup_term");
  CHECK(line == "3\t2\t1\t0.5\t1.5\t1\t0.5");
  std::ifstream e(dir.path() / "empty.tsv");
  std::stringstream ss;
  ss << e.rdbuf();
  CHECK(ss.str() == header + "\n");
}

TEST_CASE("string conversions") {
  CHECK(loss_mode_from_string("score_only") == LossMode::score_only);
  CHECK(loss_mode_from_string("weighted") == LossMode::weighted);
  CHECK(loss_mode_from_string("supervised_direct") == LossMode::supervised_direct);
  CHECK_THROWS_AS(loss_mode_from_string("sgmse"), ConfigError);
  CHECK(tweedie_from_string("half") == TweedieFactor::half);
  CHECK(tweedie_from_string("full") == TweedieFactor::full);
  CHECK_THROWS_AS(tweedie_from_string("quarter"), ConfigError);
  CHECK(matched_tweedie(ScoreConvention::real_view) == TweedieFactor::half);
  CHECK(matched_tweedie(ScoreConvention::conjugate) == TweedieFactor::full);
}
