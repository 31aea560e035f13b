#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "relparcel/data.hpp"
#include "relparcel/errors.hpp"
#include "relparcel/training.hpp"

using namespace relparcel;

namespace {

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.backbone.input_size = 16;
  cfg.backbone.block_channels = {4, 6};
  cfg.num_labels = 6;
  cfg.parcel_channels = 2;
  cfg.relation_channels = 4;
  cfg.head_hidden = 6;
  return cfg;
}

Dataset small_data(std::size_t n, std::uint64_t seed) {
  SceneRecipe r = default_recipe();
  r.image_size = 16;
  return generate_dataset(r, n, seed);
}

std::vector<ScheduleDecision> trace(const std::vector<double>& losses, TrainConfig cfg = {}) {
  TrainState state;
  std::vector<ScheduleDecision> out;
  for (double v : losses) out.push_back(schedule_update(state, v, cfg));
  return out;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("bce goldens") {
    CHECK(bce_loss(Tensor::from({1}, {0.5}), {1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(bce_loss(Tensor::from({1}, {1.0}), {1}).item() == doctest::Approx(0.0));
    CHECK(std::isfinite(bce_loss(Tensor::from({2}, {0.0, 1.0}), {1, 0}).item()));
    Tensor p = Tensor::from({1}, {0.5}, true);
    backward(bce_loss(p, {1}));
    CHECK(p.grad()[0] == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK_THROWS_AS(bce_loss(Tensor::from({2}, {0.5, 0.5}), {1}), DimensionError);
  }

  TEST_CASE("nadam golden first step") {
    Tensor theta = Tensor::zeros({1}, true);
    theta.mutable_grad()[0] = 1.0;
    std::vector<Tensor> params{theta};
    OptimizerState st;
    st.lr = 1e-4;
    nadam_step(params, st);
    // m = 0.1, v = 0.001; m_hat = 0.9*0.1/(1-0.81) + 0.1/(1-0.9) = 0.4736842105263158 + 1;
    // v_hat = 1; update = -1e-4 * 1.4736842105263158 / (1 + 1e-8).
    CHECK(theta[0] == doctest::Approx(-1.4736841957894738e-4).epsilon(1e-12));
    CHECK(st.step == 1);
  }

  TEST_CASE("nadam zero gradient and identical params") {
    Tensor a = Tensor::from({2}, {0.3, -0.7}, true), b = Tensor::from({2}, {0.3, -0.7}, true);
    std::vector<Tensor> params{a, b};
    OptimizerState st;
    for (int i = 0; i < 3; ++i) nadam_step(params, st);
    CHECK(a[0] == 0.3);
    CHECK(a[1] == -0.7);
    for (int i = 0; i < 3; ++i) {
      a.mutable_grad()[0] = 0.25 * i;
      b.mutable_grad()[0] = 0.25 * i;
      nadam_step(params, st);
      a.zero_grad();
      b.zero_grad();
    }
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
  }

  TEST_CASE("schedule traces") {
    const auto d = trace({10, 9, 9.5, 9.6, 9.7, 9.8, 9.9});
    CHECK(d[0] == ScheduleDecision::continue_training);
    CHECK(d[1] == ScheduleDecision::continue_training);
    CHECK(d[2] == ScheduleDecision::decay_lr);
    for (std::size_t i = 2; i < 6; ++i) CHECK(d[i] != ScheduleDecision::stop);
    CHECK(d[6] == ScheduleDecision::stop);

    for (auto x : trace({5, 4, 3, 2, 1, 0.5, 0.25})) CHECK(x == ScheduleDecision::continue_training);

    // A dip resets the increase streak.
    const auto reset = trace({10, 11, 12, 13, 14, 13.5, 14, 15, 16, 17});
    CHECK(std::count(reset.begin(), reset.end(), ScheduleDecision::stop) == 0);

    TrainConfig slow;
    slow.decay_patience = 3;
    const auto p3 = trace({4, 5, 5, 5, 5}, slow);
    CHECK(p3[1] == ScheduleDecision::continue_training);
    CHECK(p3[2] == ScheduleDecision::continue_training);
    CHECK(p3[3] == ScheduleDecision::decay_lr);
  }

  TEST_CASE("decay arithmetic") {
    TrainConfig cfg;
    TrainState state;
    double lr = 1e-4;
    schedule_update(state, 1.0, cfg);
    if (schedule_update(state, 1.0, cfg) == ScheduleDecision::decay_lr) lr /= cfg.decay_factor;
    CHECK(lr == doctest::Approx(1e-5).epsilon(1e-15));
    CHECK(state.lr_decays == 1);
  }

  TEST_CASE("splits") {
    const Split s = split_train_val(100, 0.1, 3);
    CHECK(s.train.size() == 90);
    CHECK(s.val.size() == 10);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.val.begin(), s.val.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(100);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    CHECK(split_train_val(100, 0.1, 3).val == s.val);
    CHECK(split_train_val(100, 0.1, 4).val != s.val);
    CHECK_THROWS_AS(split_train_val(1, 0.1, 0), ContractError);

    const auto folds = k_fold_split(100, 5, 1);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> seen;
    for (const auto& f : folds) {
      CHECK(f.size() == 20);
      seen.insert(f.begin(), f.end());
    }
    CHECK(seen.size() == 100);
    std::vector<std::size_t> sizes;
    for (const auto& f : k_fold_split(7, 5, 1)) sizes.push_back(f.size());
    CHECK(sizes == std::vector<std::size_t>{2, 2, 1, 1, 1});
    CHECK_THROWS_AS(k_fold_split(3, 5, 1), ContractError);
  }

  TEST_CASE("binarize boundary") {
    const std::vector<double> p{0.49, 0.5, 0.51};
    CHECK(binarize(p, 0.5) == MultiHotLabel{0, 1, 1});
    CHECK(binarize(std::vector<double>{0.1, 0.2}, 0.5) == MultiHotLabel{0, 0});
    CHECK(binarize(std::vector<double>{0.0, 0.3}, 0.0) == MultiHotLabel{1, 1});
  }

  TEST_CASE("one step descends on a frozen batch") {
    const Dataset ds = small_data(16, 4);
    int descended = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Model model = build_model(small_model(), seed);
      OptimizerState opt;
      opt.lr = 1e-3;
      const std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5, 6, 7};
      const double before = train_step(model, ds, batch, opt);
      CHECK(before == doctest::Approx(batch_loss(build_model(small_model(), seed), ds, batch)).epsilon(1e-14));
      if (batch_loss(model, ds, batch) < before) ++descended;
    }
    CHECK(descended >= 4);
  }

  TEST_CASE("training is deterministic and finite") {
    const Dataset ds = small_data(20, 5);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    const TrainResult a = train(small_model(), cfg, ds, 9), b = train(small_model(), cfg, ds, 9);
    REQUIRE(a.state.history.size() == b.state.history.size());
    for (std::size_t i = 0; i < a.state.history.size(); ++i) {
      CHECK(a.state.history[i].train_loss == b.state.history[i].train_loss);
      CHECK(a.state.history[i].val_loss == b.state.history[i].val_loss);
    }
    const auto pa = a.model.parameters(), pb = b.model.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      for (std::size_t j = 0; j < pa[i].tensor.numel(); ++j) {
        CHECK(pa[i].tensor[j] == pb[i].tensor[j]);
        CHECK(std::isfinite(pa[i].tensor[j]));
      }
    }
    for (const auto& m : a.optimizer.second_moment)
      for (double v : m) CHECK(std::isfinite(v));
    // The logged final report is the metrics of the final model on the data.
    const Evaluation ev = evaluate(a.model, ds, cfg.threshold);
    CHECK(ev.report.mean_f1 == doctest::Approx(a.final_train_report.mean_f1).epsilon(1e-12));
  }

  TEST_CASE("lr floor ends training") {
    const Dataset ds = small_data(12, 6);
    TrainConfig cfg;
    cfg.max_epochs = 40;
    cfg.lr = 1e-3;
    cfg.min_lr = 1e-4;
    cfg.patience = 100;
    const TrainResult r = train(small_model(), cfg, ds, 2);
    for (const auto& rec : r.state.history) CHECK(rec.lr >= 1e-4);
    if (r.state.history.size() < 40) CHECK(r.state.history.back().lr == doctest::Approx(1e-4));
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.val_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.min_lr = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}
