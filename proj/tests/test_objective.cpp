#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hccf/errors.hpp"
#include "hccf/model.hpp"
#include "hccf/objective.hpp"
#include "test_util.hpp"

using namespace hccf;
using hccf::test::finite_diff;
using hccf::test::max_rel_err;

namespace {

// Small fixed setup shared by the total_loss cases.
struct TinyInstance {
  ModelConfig model_cfg;
  ModelParams params;
  SparseMatrix adj;
  PairBatch batch;

  TinyInstance() {
    model_cfg.embed_dim = 4;
    model_cfg.layers = 2;
    model_cfg.hyperedges = 3;
    model_cfg.hyper_layers = 2;
    model_cfg.dropout = 0.0;
    Rng rng(101);
    std::vector<std::tuple<std::size_t, std::size_t, double>> t;
    for (std::size_t u = 0; u < 8; ++u)
      for (std::size_t i = 0; i < 10; ++i)
        if (rng.bernoulli(0.3)) t.emplace_back(u, i, rng.uniform(0.2, 1.0));
    adj = SparseMatrix::from_triplets(8, 10, t);
    params = ModelParams::init(model_cfg, 8, 10, 3);
    batch.anchors = {0, 2, 5, 7};
    batch.positives = {1, 4, 0, 9};
    batch.negatives = {3, 8, 6, 2};
  }
};

DenseMatrix unit_rows(std::initializer_list<std::initializer_list<double>> rows) {
  DenseMatrix m(rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double n = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) n += m.at(i, j) * m.at(i, j);
    n = std::sqrt(n);
    for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) /= n;
  }
  return m;
}

}  // namespace

TEST_CASE("margin loss") {
  SUBCASE("single pair 0.5 vs 0.2 gives 0.7") {
    Tensor pos = Tensor::param({{0.5}});
    Tensor neg = Tensor::param({{0.2}});
    CHECK(margin_loss(pos, neg).scalar() == doctest::Approx(0.7));
  }
  SUBCASE("saturated hinge contributes zero") {
    Tensor pos = Tensor::param({{2.0}});
    Tensor neg = Tensor::param({{1.0}});
    CHECK(margin_loss(pos, neg).scalar() == 0.0);
    // exactly at the margin boundary too
    Tensor pos2 = Tensor::param({{1.0}});
    Tensor neg2 = Tensor::param({{0.0}});
    CHECK(margin_loss(pos2, neg2).scalar() == 0.0);
  }
  SUBCASE("batch of three terms sums to 2.0") {
    // terms: 0.7, 0.0, 1.3
    Tensor pos = Tensor::param({{0.5}, {3.0}, {0.1}});
    Tensor neg = Tensor::param({{0.2}, {0.0}, {0.4}});
    CHECK(margin_loss(pos, neg).scalar() == doctest::Approx(2.0));
  }
  SUBCASE("length mismatch rejected") {
    Tensor pos = Tensor::param(DenseMatrix(3, 1, 0.0));
    Tensor neg = Tensor::param(DenseMatrix(2, 1, 0.0));
    CHECK_THROWS_AS(margin_loss(pos, neg), ContractError);
  }
  SUBCASE("score gradients are 0 or +-1 per term") {
    Tensor pos = Tensor::param({{0.5}, {3.0}, {0.1}});
    Tensor neg = Tensor::param({{0.2}, {0.0}, {0.4}});
    Tensor loss = margin_loss(pos, neg);
    backward(loss);
    for (std::size_t k = 0; k < 3; ++k) {
      const double gp = pos.grad().at(k, 0);
      const double gn = neg.grad().at(k, 0);
      CHECK((gp == 0.0 || gp == -1.0));
      CHECK((gn == 0.0 || gn == 1.0));
      CHECK(gp == -gn);
    }
  }
}

TEST_CASE("infonce closed forms") {
  SUBCASE("two candidates, self-sim 1, other-sim 0, tau 1") {
    Tensor z = Tensor::param({{1.0, 0.0}});
    Tensor g = Tensor::param({{1.0, 0.0}, {0.0, 1.0}});
    const double loss = infonce_loss(z, g, {0}, 1.0).scalar();
    CHECK(loss == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)))
                      .epsilon(1e-12));
    CHECK(loss == doctest::Approx(0.31326168751822286).epsilon(1e-12));
  }
  SUBCASE("all candidates identical gives log K per anchor") {
    for (std::size_t K : {2, 5, 11}) {
      DenseMatrix g(K, 3);
      for (std::size_t k = 0; k < K; ++k) {
        g.at(k, 0) = 0.3;
        g.at(k, 1) = -0.4;
        g.at(k, 2) = 0.2;
      }
      Tensor z = Tensor::param({{1.0, 2.0, -0.5}});
      const double loss = infonce_loss(z, Tensor::param(g), {1}, 0.7).scalar();
      CHECK(std::abs(loss - std::log(static_cast<double>(K))) < 1e-9);
    }
  }
  SUBCASE("positive rescaling of view rows leaves the loss unchanged") {
    Rng rng(7);
    DenseMatrix g = DenseMatrix::random_uniform(4, 3, -1, 1, rng);
    DenseMatrix z = DenseMatrix::random_uniform(2, 3, -1, 1, rng);
    const double base =
        infonce_loss(Tensor::param(z), Tensor::param(g), {0, 2}, 0.5).scalar();
    DenseMatrix g2 = g;
    for (std::size_t j = 0; j < 3; ++j) {
      g2.at(1, j) *= 7.5;
      g2.at(3, j) *= 0.02;
    }
    DenseMatrix z2 = z;
    for (std::size_t j = 0; j < 3; ++j) z2.at(0, j) *= 42.0;
    const double scaled =
        infonce_loss(Tensor::param(z2), Tensor::param(g2), {0, 2}, 0.5).scalar();
    CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("zero-norm candidate view is treated as cosine 0") {
    Tensor z = Tensor::param({{1.0, 0.0}});
    Tensor g = Tensor::param({{1.0, 0.0}, {0.0, 0.0}});
    const double loss = infonce_loss(z, g, {0}, 1.0).scalar();
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0))));
  }
  SUBCASE("per-anchor terms are nonnegative") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      DenseMatrix g = DenseMatrix::random_uniform(6, 4, -1, 1, rng);
      DenseMatrix z = DenseMatrix::random_uniform(1, 4, -1, 1, rng);
      const std::size_t pos = static_cast<std::size_t>(rng.uniform_below(6));
      const double term = infonce_loss(Tensor::param(z), Tensor::param(g), {pos}, 0.4).scalar();
      CHECK(term >= 0.0);
    }
  }
  SUBCASE("raising one negative's similarity strictly raises the term") {
    // anchor along e1; negative swept toward the anchor
    Tensor z = Tensor::param({{1.0, 0.0}});
    double prev = -1.0;
    for (double x : {0.0, 0.3, 0.6, 0.9}) {
      DenseMatrix g(2, 2);
      g.at(0, 0) = 1.0;  // positive, sim 1
      g.at(1, 0) = x;
      g.at(1, 1) = std::sqrt(1.0 - x * x);
      const double term = infonce_loss(z, Tensor::param(g), {0}, 1.0).scalar();
      CHECK(term > prev);
      prev = term;
    }
  }
  SUBCASE("stable at tau = 0.01 with |s| <= 1") {
    Tensor z = Tensor::param(unit_rows({{0.6, 0.8}}));
    Tensor g = Tensor::param(unit_rows({{0.6, 0.8}, {-0.8, 0.6}, {1.0, 0.0}}));
    const double loss = infonce_loss(z, g, {0}, 0.01).scalar();
    CHECK(std::isfinite(loss));
    backward(infonce_loss(z, g, {0}, 0.01));
    CHECK(z.grad().all_finite());
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(13);
    Tensor z = Tensor::param(DenseMatrix::random_uniform(3, 4, -1, 1, rng));
    Tensor g = Tensor::param(DenseMatrix::random_uniform(5, 4, -1, 1, rng));
    std::vector<std::size_t> idx = {0, 2, 4};
    auto build = [&]() { return infonce_loss(z, g, idx, 0.7); };
    Tensor loss = build();
    z.zero_grad();
    g.zero_grad();
    backward(loss);
    DenseMatrix gz = z.grad(), gg = g.grad();
    auto value = [&]() { return build().scalar(); };
    CHECK(max_rel_err(gz, finite_diff(z, value)) < 1e-4);
    CHECK(max_rel_err(gg, finite_diff(g, value)) < 1e-4);
  }
}

TEST_CASE("weight decay") {
  SUBCASE("zeros give zero") {
    std::vector<Tensor> p = {Tensor::param(DenseMatrix(3, 3, 0.0))};
    CHECK(weight_decay(p).scalar() == 0.0);
  }
  SUBCASE("[[1,2],[3,4]] gives 30") {
    std::vector<Tensor> p = {Tensor::param({{1, 2}, {3, 4}})};
    CHECK(weight_decay(p).scalar() == 30.0);
  }
  SUBCASE("gradient is 2 theta") {
    Rng rng(17);
    std::vector<Tensor> p = {Tensor::param(DenseMatrix::random_uniform(3, 4, -2, 2, rng)),
                             Tensor::param(DenseMatrix::random_uniform(2, 2, -2, 2, rng))};
    Tensor reg = weight_decay(p);
    backward(reg);
    for (const Tensor& t : p) {
      for (std::size_t i = 0; i < t.value().size(); ++i)
        CHECK(t.grad().data[i] == doctest::Approx(2.0 * t.value().data[i]).epsilon(1e-14));
    }
    // cross-check against finite differences as well
    auto value = [&]() { return weight_decay(p).scalar(); };
    Tensor first = p[0];
    CHECK(max_rel_err(first.grad(), finite_diff(first, value)) < 1e-4);
  }
}

TEST_CASE("total loss assembly") {
  TinyInstance tiny;

  SUBCASE("lambda1 = lambda2 = 0 reduces exactly to the margin term") {
    LossConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    LayerStates st = forward(tiny.params, tiny.model_cfg, tiny.adj, nullptr);
    auto [total, report] = total_loss(st, tiny.batch, tiny.params, cfg);
    CHECK(report.total == report.margin);
    Tensor margin = margin_loss(
        predict(st.user.psi, st.item.psi, tiny.batch.anchors, tiny.batch.positives),
        predict(st.user.psi, st.item.psi, tiny.batch.anchors, tiny.batch.negatives));
    CHECK(total.scalar() == margin.scalar());
  }
  SUBCASE("report satisfies the composition identity") {
    LossConfig cfg;
    cfg.lambda1 = 1e-3;
    cfg.lambda2 = 1e-4;
    LayerStates st = forward(tiny.params, tiny.model_cfg, tiny.adj, nullptr);
    auto [total, report] = total_loss(st, tiny.batch, tiny.params, cfg);
    const double recomposed = report.margin +
                              cfg.lambda1 * (report.infonce_user + report.infonce_item) +
                              cfg.lambda2 * report.regularizer;
    CHECK(report.total == doctest::Approx(recomposed).epsilon(1e-12));
    CHECK(report.margin >= 0.0);
    CHECK(report.infonce_user >= 0.0);
    CHECK(report.infonce_item >= 0.0);
    CHECK(report.regularizer > 0.0);
  }
  SUBCASE("forced arithmetic: components (2, 4, 6, 100) with 1e-3/1e-4 give 2.02") {
    const double total = 2.0 + 1e-3 * (4.0 + 6.0) + 1e-4 * 100.0;
    CHECK(total == doctest::Approx(2.02).epsilon(1e-14));
  }
  SUBCASE("ccl disabled drops the contrastive terms from graph and report") {
    LossConfig cfg;
    cfg.contrastive_enabled = false;
    LayerStates st = forward(tiny.params, tiny.model_cfg, tiny.adj, nullptr);
    auto [total, report] = total_loss(st, tiny.batch, tiny.params, cfg);
    CHECK(report.infonce_user == 0.0);
    CHECK(report.infonce_item == 0.0);
    CHECK(report.total ==
          doctest::Approx(report.margin + cfg.lambda2 * report.regularizer).epsilon(1e-12));
  }
  SUBCASE("hyper disabled silently skips contrastive (one warning)") {
    ModelConfig cfg_nohyper = tiny.model_cfg;
    cfg_nohyper.hyper = false;
    ModelParams p = ModelParams::init(cfg_nohyper, 8, 10, 3);
    LossConfig cfg;
    LayerStates st = forward(p, cfg_nohyper, tiny.adj, nullptr);
    auto [total, report] = total_loss(st, tiny.batch, p, cfg);
    CHECK(report.infonce_user == 0.0);
    CHECK(std::isfinite(report.total));
  }
  SUBCASE("batch negatives scope restricts the denominator") {
    LossConfig all_cfg;
    LossConfig batch_cfg;
    batch_cfg.negatives_scope = NegativeScope::Batch;
    LayerStates st = forward(tiny.params, tiny.model_cfg, tiny.adj, nullptr);
    auto [t1, r1] = total_loss(st, tiny.batch, tiny.params, all_cfg);
    auto [t2, r2] = total_loss(st, tiny.batch, tiny.params, batch_cfg);
    // fewer candidates -> smaller log-sum-exp -> smaller contrastive term
    CHECK(r2.infonce_user < r1.infonce_user);
    CHECK(r2.infonce_item < r1.infonce_item);
  }
  SUBCASE("full tiny-instance gradient matches finite differences") {
    LossConfig cfg;
    cfg.lambda1 = 1e-3;
    cfg.lambda2 = 1e-4;
    auto build = [&]() {
      LayerStates st = forward(tiny.params, tiny.model_cfg, tiny.adj, nullptr);
      return total_loss(st, tiny.batch, tiny.params, cfg).first;
    };
    tiny.params.zero_grads();
    backward(build());
    auto value = [&]() { return build().scalar(); };
    for (auto& [name, t] : tiny.params.named()) {
      Tensor tensor = t;
      CHECK_MESSAGE(max_rel_err(tensor.grad(), finite_diff(tensor, value)) < 1e-4, name);
    }
  }
}
