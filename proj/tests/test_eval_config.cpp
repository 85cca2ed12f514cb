#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "vsrlab/checkpoint.hpp"
#include "vsrlab/config.hpp"
#include "vsrlab/errors.hpp"
#include "vsrlab/eval.hpp"

using namespace vsrlab;
using testkit::random_tensor;

namespace {

eval::Model exact_inverse(const seq::FrameSequence& hr) {
  return {"oracle", [hr](const seq::FrameSequence&, int) { return hr; }};
}

train::Dataset clipset(std::vector<seq::FrameSequence> clips) {
  train::Dataset ds;
  int i = 0;
  for (auto& c : clips) ds.clips.push_back({"clip" + std::to_string(i++), {}, std::move(c)});
  return ds;
}

}  // namespace

TEST(EvaluateClip, IdentityOracleHitsCaps) {
  const auto hr = testkit::synthetic_clip(2, 32, 32);
  const auto row = eval::evaluate_clip(exact_inverse(hr), "c", hr, 2, Interpolation::bicubic);
  EXPECT_EQ(row.psnr, 100.0);
  EXPECT_NEAR(row.ssim, 1.0, 1e-6);
  EXPECT_FALSE(row.lpips.has_value());
  EXPECT_EQ(row.model, "oracle");
}

TEST(EvaluateClip, BaselineFiniteAndDeterministic) {
  const auto hr = testkit::synthetic_clip(2, 32, 32);
  for (int scale : {2, 4}) {
    for (auto m : {Interpolation::bicubic, Interpolation::bilinear}) {
      const auto model = eval::interpolation_model(Interpolation::bicubic);
      const auto a = eval::evaluate_clip(model, "c", hr, scale, m);
      EXPECT_GT(a.psnr, 0.0);
      EXPECT_LT(a.psnr, 100.0);
      EXPECT_EQ(a, eval::evaluate_clip(model, "c", hr, scale, m));
      // Same metric implementation as the loss module.
      const auto lr = seq::downsample(hr, scale, m);
      const auto pred = model.upscale(lr, scale);
      EXPECT_DOUBLE_EQ(a.psnr, loss::psnr(hr.tensor(), pred.tensor()));
      EXPECT_DOUBLE_EQ(a.ssim, loss::ssim_value(hr.tensor(), pred.tensor()));
    }
  }
  EXPECT_THROW((void)eval::evaluate_clip(eval::interpolation_model(Interpolation::bicubic), "c", hr, 3,
                                         Interpolation::bicubic),
               ConfigError);
}

TEST(EvaluateClip, LpipsOnlyWithPretrainedExtractor) {
  const auto hr = testkit::synthetic_clip(1, 32, 32);
  const loss::ConvFeatureExtractor seeded(4);
  const auto model = eval::interpolation_model(Interpolation::bilinear);
  EXPECT_FALSE(eval::evaluate_clip(model, "c", hr, 2, Interpolation::bicubic, &seeded).lpips.has_value());

  testkit::TempDir dir("lpips");
  seeded.save(dir.path() / "ex.ckpt");
  const auto loaded = loss::ConvFeatureExtractor::load(dir.path() / "ex.ckpt");
  EXPECT_TRUE(loaded.pretrained());
  const auto row = eval::evaluate_clip(model, "c", hr, 2, Interpolation::bicubic, &loaded);
  ASSERT_TRUE(row.lpips.has_value());
  EXPECT_GE(*row.lpips, 0.0);
  EXPECT_THROW(loss::ConvFeatureExtractor::load(dir.path() / "missing.ckpt"), DependencyError);
}

TEST(CompareModels, CrossProductAndAggregates) {
  eval::EvalOptions opts;
  opts.scales = {2};
  const std::vector<eval::Model> models{eval::interpolation_model(Interpolation::bicubic),
                                        eval::interpolation_model(Interpolation::bilinear)};
  const auto report = eval::compare_models(models, clipset({testkit::synthetic_clip(2, 34, 30)}), opts);
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.aggregates.size(), 4u);
  for (const auto& agg : report.aggregates) EXPECT_EQ(agg.rows, 1);

  opts.scales = {2, 4};
  const auto two = eval::compare_models(models, clipset({testkit::synthetic_clip(2, 32, 32),
                                                         testkit::synthetic_clip(2, 32, 32, 9)}),
                                        opts);
  ASSERT_EQ(two.rows.size(), 16u);
  // Aggregates recomputed from the rows.
  for (const auto& agg : two.aggregates) {
    double psnr = 0, ssim = 0;
    int n = 0;
    for (const auto& r : two.rows) {
      if (r.model == agg.model && r.method == agg.method && r.scale == agg.scale) {
        psnr += r.psnr;
        ssim += r.ssim;
        ++n;
      }
    }
    EXPECT_EQ(n, agg.rows);
    EXPECT_DOUBLE_EQ(agg.psnr, psnr / n);
    EXPECT_DOUBLE_EQ(agg.ssim, ssim / n);
  }
  EXPECT_THROW(eval::compare_models(models, {}, opts), ConfigError);
  EXPECT_THROW(eval::compare_models({}, clipset({testkit::synthetic_clip(1, 32, 32)}), opts), ConfigError);
}

TEST(CompareModels, AggregateOfIdenticalRows) {
  eval::Row r{"c", Interpolation::bilinear, 4, 31.25, 0.875, std::nullopt, "m"};
  const auto aggs = eval::aggregate({r, r, r});
  ASSERT_EQ(aggs.size(), 1u);
  EXPECT_EQ(aggs[0].psnr, r.psnr);
  EXPECT_EQ(aggs[0].ssim, r.ssim);
  EXPECT_EQ(aggs[0].rows, 3);
  EXPECT_FALSE(aggs[0].lpips.has_value());
}

TEST(MetricsReport, CsvRoundTrip) {
  eval::MetricsReport report;
  report.rows = {{"a", Interpolation::bicubic, 2, 28.123456789012345, 0.91234567890123, 0.1234567890123, "m1"},
                 {"b,c", Interpolation::bilinear, 4, 100.0, 1.0, std::nullopt, "builtin:bicubic"}};
  report.aggregates = eval::aggregate(report.rows);
  const auto text = report.to_csv();
  EXPECT_EQ(text.substr(0, text.find('\n')).find("clip_id,method,scale,psnr,ssim,lpips"), 0u);
  EXPECT_EQ(eval::MetricsReport::rows_from_csv(text), report.rows);
  EXPECT_THROW(eval::MetricsReport::rows_from_csv("clip_id,method\nx,y\n"), ConfigError);
  const auto j = report.aggregates_json();
  ASSERT_EQ(j.size(), 2u);
  EXPECT_FALSE(report.format_table().empty());
}

TEST(Config, DefaultsAndRoundTrip) {
  const auto d = config::parse("");
  EXPECT_EQ(d, config::RunConfig{});
  EXPECT_EQ(config::parse(config::serialize(d)), d);

  const std::string text =
      "[run]\nseed = 42\nout = results\n"
      "[degrade]\nplan = custom\nstep.2 = gaussian_noise p=0.5 sigma=0.01..0.05\nstep.1 = gaussian_blur sigma=0.5..1.5\n"
      "[generator]\nvariant = residual_based\nbase_channels = 16\nnum_blocks = 2\nnonlocal_positions = 0,2\n"
      "pairwise = concatenation\n"
      "[loss]\nweight.charbonnier = 0.25\nweight.adversarial = 0\n"
      "[train]\noptimizer = sgd\nlearning_rate = 0.01\ncrop_size = 64\npatch_order = random\n"
      "[eval]\nscales = 2\nmethods = bilinear\n";
  const auto c = config::parse(text);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.out, "results");
  ASSERT_EQ(c.custom_steps.size(), 2u);
  EXPECT_EQ(c.custom_steps[0].kind, degrade::OperatorKind::gaussian_blur);
  EXPECT_DOUBLE_EQ(c.custom_steps[1].apply_probability, 0.5);
  EXPECT_EQ(c.generator.nonlocal_positions, (std::vector<int>{0, 2}));
  EXPECT_EQ(c.generator.pairwise, gen::Affinity::concatenation);
  EXPECT_DOUBLE_EQ(c.loss.weight(loss::Term::charbonnier), 0.25);
  EXPECT_EQ(c.train.optimizer.kind, train::OptimizerKind::sgd);
  EXPECT_EQ(c.train.patch_order, train::PatchOrder::random);
  EXPECT_EQ(c.eval.methods, (std::vector<Interpolation>{Interpolation::bilinear}));
  EXPECT_EQ(config::parse(config::serialize(c)), c);
  EXPECT_EQ(config::serialize(config::parse(config::serialize(c))), config::serialize(c));
  EXPECT_EQ(c.plan().steps, c.custom_steps);
  EXPECT_EQ(c.plan(), config::parse(text).plan());
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config::parse("[nope]\nx = 1\n"), ConfigError);
  EXPECT_THROW(config::parse("[run]\ncolour = blue\n"), ConfigError);
  EXPECT_THROW(config::parse("[run]\nseed = -3\n"), ConfigError);
  EXPECT_THROW(config::parse("[train]\ncrop_size = big\n"), ConfigError);
  EXPECT_THROW(config::parse("[train]\ncrop_size = 96\n"), ConfigError);
  EXPECT_THROW(config::parse("[generator]\nbase_channels = 7\n"), ConfigError);
  EXPECT_THROW(config::parse("[discriminator]\nenabled = false\n"), ConfigError);  // default adversarial weight > 0
  EXPECT_THROW(config::parse("[degrade]\nstep.1 = gaussian_blur sigma=0.5\n"), ConfigError);
  EXPECT_THROW(config::parse("[degrade]\nplan = custom\nstep.1 = gaussian_blur radius=2\n"), ConfigError);
  EXPECT_THROW(config::load("/nonexistent/run.ini"), ConfigError);
  EXPECT_NO_THROW(config::parse("[discriminator]\nenabled = false\n[loss]\nweight.adversarial = 0\n"));
}

TEST(Config, StepTextRoundTrip) {
  const auto s = config::parse_step("gaussian_noise p=0.25 sigma=0.01..0.04");
  EXPECT_EQ(s.kind, degrade::OperatorKind::gaussian_noise);
  EXPECT_DOUBLE_EQ(s.apply_probability, 0.25);
  EXPECT_EQ(config::parse_step(config::format_step(s)), s);
  for (const auto& step : degrade::DegradationPlan::default_plan().steps) {
    EXPECT_EQ(config::parse_step(config::format_step(step)), step);
  }
  EXPECT_THROW(config::parse_step(""), ConfigError);
  EXPECT_THROW(config::parse_step("gaussian_blur sigma"), ConfigError);
  EXPECT_THROW(config::parse_step("sharpen"), ConfigError);
}

TEST(Archive, RoundTripAndHalfPrecision) {
  testkit::TempDir dir("archive");
  ckpt::Archive a;
  a.meta = {{"kind", "test"}, {"n", 3}};
  a.tensors.push_back({"x", random_tensor({2, 3, 4, 5}, 1, -2, 2)});
  a.tensors.push_back({"y", Tensor({1, 1, 1, 1}, 0.1f)});
  ckpt::save(dir.path() / "f32.ckpt", a);
  const auto b = ckpt::load(dir.path() / "f32.ckpt");
  EXPECT_EQ(b.meta, a.meta);
  ASSERT_EQ(b.tensors.size(), 2u);
  EXPECT_EQ(b.find("x")->storage(), a.tensors[0].value.storage());
  EXPECT_EQ(b.find("missing"), nullptr);

  ckpt::save(dir.path() / "f16.ckpt", a, ckpt::DType::f16);
  const auto h = ckpt::load(dir.path() / "f16.ckpt");
  EXPECT_LE(max_abs_diff(*h.find("x"), a.tensors[0].value), 2.0 * 1e-3);
  EXPECT_LT(std::filesystem::file_size(dir.path() / "f16.ckpt"), std::filesystem::file_size(dir.path() / "f32.ckpt"));
}

TEST(Archive, MalformedFilesAreIoErrors) {
  testkit::TempDir dir("bad");
  EXPECT_THROW(ckpt::load(dir.path() / "absent.ckpt"), IoError);
  {
    std::ofstream(dir.path() / "magic.ckpt") << "NOTACKPT........";
  }
  EXPECT_THROW(ckpt::load(dir.path() / "magic.ckpt"), IoError);
  ckpt::Archive a;
  a.tensors.push_back({"x", random_tensor({1, 1, 8, 8}, 2)});
  ckpt::save(dir.path() / "ok.ckpt", a);
  const auto size = std::filesystem::file_size(dir.path() / "ok.ckpt");
  std::filesystem::resize_file(dir.path() / "ok.ckpt", size - 10);
  EXPECT_THROW(ckpt::load(dir.path() / "ok.ckpt"), IoError);
}

TEST(Archive, RestoreChecksNamesAndShapes) {
  const nn::ParamList params{{"w", ag::parameter(Tensor({1, 1, 2, 2}))}};
  ckpt::Archive a;
  ckpt::append(a, params, "net.");
  EXPECT_EQ(a.tensors[0].name, "net.w");
  EXPECT_NO_THROW(ckpt::restore(a, params, "net."));
  EXPECT_THROW(ckpt::restore(a, params, "other."), ConsistencyError);
  const nn::ParamList wider{{"w", ag::parameter(Tensor({1, 1, 3, 3}))}};
  EXPECT_THROW(ckpt::restore(a, wider, "net."), ConsistencyError);
}
