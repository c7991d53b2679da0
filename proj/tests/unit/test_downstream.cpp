#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lego/corpus/dataset.hpp"
#include "lego/corpus/sr_pair.hpp"
#include "lego/downstream/ctc.hpp"
#include "lego/downstream/metrics.hpp"
#include "lego/downstream/recognizer.hpp"
#include "lego/downstream/report.hpp"
#include "lego/downstream/sr.hpp"
#include "lego/hash.hpp"
#include "oracles.hpp"

namespace lego::downstream {
namespace {

TEST(Ctc, ConfidentSingleFrame) {
  auto logits = torch::full({1, num_classes()}, -50.0, torch::kFloat64);
  logits[0][1] = 50.0;
  EXPECT_LT(ctc_loss(logits, encode_transcript("a")).item<double>(), 1e-12);
}

TEST(Ctc, InfeasibleTranscriptRejected) {
  auto logits = torch::zeros({2, num_classes()}, torch::kFloat64);
  EXPECT_THROW(ctc_loss(logits, encode_transcript("aa")), ValidationError);
  EXPECT_NO_THROW(ctc_loss(torch::zeros({3, num_classes()}), encode_transcript("aa")));
  EXPECT_THROW(ctc_loss(logits, std::vector<int64_t>{0}), ValidationError);
}

TEST(Ctc, UniformLogitsCountAlignments) {
  for (int64_t classes = 2; classes <= 4; ++classes)
    for (int64_t steps = 1; steps <= 4; ++steps) {
      auto logits = torch::zeros({steps, classes}, torch::kFloat64);
      const std::vector<int64_t> label = {1};
      const double expected =
          -std::log(static_cast<double>(testing::ctc_alignment_count(steps, classes, label)) *
                    std::pow(1.0 / static_cast<double>(classes), static_cast<double>(steps)));
      EXPECT_NEAR(ctc_loss(logits, label).item<double>(), expected, 1e-12);
    }
}

TEST(Ctc, ExhaustiveAgreementWithBruteForce) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int64_t v = 1; v <= 3; ++v) {
    const int64_t classes = v + 1;
    for (int64_t steps = 1; steps <= 4; ++steps) {
      // Every label sequence over v symbols of length 0..steps.
      std::vector<std::vector<int64_t>> targets = {{}};
      for (size_t i = 0; i < targets.size(); ++i) {
        if (static_cast<int64_t>(targets[i].size()) == steps) continue;
        for (int64_t c = 1; c <= v; ++c) {
          auto t = targets[i];
          t.push_back(c);
          targets.push_back(t);
        }
      }
      for (const auto& target : targets) {
        if (min_ctc_length(target) > steps) continue;
        auto logits = torch::empty({steps, classes}, torch::kFloat64);
        for (int64_t i = 0; i < logits.numel(); ++i) logits.view(-1)[i] = normal(rng);
        const double got = ctc_loss(logits, target).item<double>();
        const double want = testing::ctc_brute_force(logits, target);
        ASSERT_LT(std::abs(got - want) / std::max(std::abs(want), 1e-12), 1e-6)
            << "v=" << v << " T=" << steps << " len=" << target.size();
      }
    }
  }
}

TEST(Ctc, BatchedLossIsMeanOfSingles) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  auto logits = torch::randn({3, 6, num_classes()}, gen, torch::kFloat64);
  std::vector<std::vector<int64_t>> labels = {encode_transcript("ab"), encode_transcript(""), encode_transcript("zzz")};
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) sum += ctc_loss(logits[i], labels[i]).item<double>();
  EXPECT_NEAR(ctc_loss(logits, labels).item<double>(), sum / 3, 1e-10);
}

TEST(Ctc, GradientIsFinite) {
  auto logits = torch::zeros({16, num_classes()}, torch::kFloat64).requires_grad_(true);
  ctc_loss(logits, encode_transcript("hello")).backward();
  EXPECT_TRUE(torch::isfinite(logits.grad()).all().item<bool>());
}

TEST(Ctc, GreedyDecodeRules) {
  auto path_logits = [](const std::vector<int64_t>& path) {
    auto l = torch::zeros({static_cast<int64_t>(path.size()), num_classes()});
    for (size_t t = 0; t < path.size(); ++t) l[t][path[t]] = 1.0;
    return l;
  };
  EXPECT_EQ(ctc_greedy_decode(path_logits({1, 1, 0, 2})), "ab");
  EXPECT_EQ(ctc_greedy_decode(path_logits({0, 0, 0})), "");
  EXPECT_EQ(ctc_greedy_decode(path_logits({1, 0, 1})), "aa");

  std::mt19937_64 rng(9);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(9);
  for (int i = 0; i < 1000; ++i) {
    const int64_t steps = 1 + static_cast<int64_t>(rng() % 5);
    auto logits = torch::randn({steps, 4}, gen);
    auto arg = logits.argmax(-1);
    std::vector<int64_t> path(arg.data_ptr<int64_t>(), arg.data_ptr<int64_t>() + steps);
    EXPECT_EQ(collapse_path(path), testing::collapse_reference(path));
  }
}

TEST(Ctc, OneHotAlignmentDecodesToTranscript) {
  for (const std::string word : {"hello", "book", "a", "zz9", "aaab"}) {
    auto labels = encode_transcript(word);
    // Canonical alignment: blank between every pair of characters.
    std::vector<int64_t> path;
    for (auto l : labels) {
      path.push_back(l);
      path.push_back(0);
    }
    auto logits = torch::zeros({static_cast<int64_t>(path.size()), num_classes()});
    for (size_t t = 0; t < path.size(); ++t) logits[t][path[t]] = 1.0;
    EXPECT_EQ(ctc_greedy_decode(logits), word);
  }
}

TEST(Metrics, WordAccuracy) {
  EXPECT_EQ(word_accuracy({"a", "b"}, {"a", "b"}), 1.0);
  EXPECT_EQ(word_accuracy({"x", "y"}, {"a", "b"}), 0.0);
  EXPECT_EQ(word_accuracy({"tea", "Cup", "lego", "no"}, {"tea", "cup", "lego", "yes"}), 0.75);
  EXPECT_THROW(word_accuracy({"a"}, {}), ValidationError);
}

TEST(Metrics, PsnrValues) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
  auto a = torch::rand({3, 32, 128}, gen, torch::kFloat64) * 0.8;
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_NEAR(psnr(a, a + 0.1), 20.0, 1e-9);
  auto b = torch::rand({3, 32, 128}, gen, torch::kFloat64);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_THROW(psnr(a, b.narrow(2, 0, 64)), ValidationError);
}

TEST(Metrics, SsimValues) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(2);
  auto a = torch::rand({3, 32, 128}, gen, torch::kFloat64);
  auto b = torch::rand({3, 32, 128}, gen, torch::kFloat64);
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_EQ(ssim(a, b), ssim(b, a));
  EXPECT_GE(ssim(a, b), -1.0);
  EXPECT_LE(ssim(a, b), 1.0);
  EXPECT_THROW(ssim(a, b.narrow(1, 0, 16)), ValidationError);

  for (int trial = 0; trial < 20; ++trial) {
    auto x = torch::rand({1, 8, 8}, gen, torch::kFloat64), y = torch::rand({1, 8, 8}, gen, torch::kFloat64);
    std::vector<double> xv(x.data_ptr<double>(), x.data_ptr<double>() + 64);
    std::vector<double> yv(y.data_ptr<double>(), y.data_ptr<double>() + 64);
    EXPECT_NEAR(ssim(x, y), testing::ssim_window_reference(xv, yv, kSsimK1, kSsimK2), 1e-8);
  }
}

TEST(Report, JsonRoundTripAndRanges) {
  EvalReport r;
  r.split = "test";
  r.task = "super_resolution";
  r.psnr = kPsnrIdentical;
  r.ssim = 0.5;
  r.samples = 4;
  auto back = EvalReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_TRUE(std::isinf(*back.psnr));
  EXPECT_EQ(*back.ssim, 0.5);
  r.word_accuracy = 1.5;
  EXPECT_THROW(r.validate(), ValidationError);
}

TEST(Recognizer, ProbeKeepsEncoderAndShapes) {
  auto train = corpus::generate_samples({"ab", "cd", "ef"}, 12, 3);
  pretext::ViTEncoder encoder(pretext::ViTConfig::tiny(), 5);
  const auto before = hash_module(*encoder);
  RecognizerOptions options;
  options.epochs = 2;
  options.batch_size = 6;
  auto model = probe_train(encoder, train, options);
  EXPECT_EQ(hash_module(*encoder), before);
  auto logits = model->forward(torch::stack({train[0].image, train[1].image}));
  EXPECT_EQ(logits.sizes(), torch::IntArrayRef({2, 16, num_classes()}));
  auto report = evaluate_recognizer(model, train, "train");
  EXPECT_GE(*report.word_accuracy, 0.0);
  EXPECT_LE(*report.word_accuracy, 1.0);

  options.pooling = ColumnPooling::kMean;
  auto ft = finetune(pretext::ViTEncoder(pretext::ViTConfig::tiny(), 5), train, options);
  EXPECT_NE(hash_module(*ft->encoder()), before);
}

TEST(Recognizer, ProbeLearnsTinyVocabulary) {
  std::vector<corpus::TextSample> train;
  for (int i = 0; i < 40; ++i) {
    corpus::RenderSpec spec;
    spec.word = i % 2 ? "cat" : "dog";
    spec.geometry_seed = i;
    train.push_back(corpus::render_sample(spec));
  }
  RecognizerOptions options;
  options.epochs = 100;
  options.batch_size = 20;
  options.lr = 1e-2;
  auto model = probe_train(pretext::ViTEncoder(pretext::ViTConfig::tiny(), 2), train, options);
  EXPECT_GT(*evaluate_recognizer(model, train, "train").word_accuracy, 0.5);
}

TEST(Sr, StartsAtBicubicAndImproves) {
  auto samples = corpus::generate_samples(corpus::default_wordlist(), 24, 6);
  std::vector<corpus::SRPair> pairs;
  for (size_t i = 0; i < samples.size(); ++i) pairs.push_back(corpus::make_sr_pair(samples[i], i));
  SrModel model(pretext::ViTEncoder(pretext::ViTConfig::tiny(), 1), 8, 2);
  auto before = evaluate_sr(model, pairs, "train");
  EXPECT_NEAR(*before.psnr, *before.baseline_psnr, 1e-9);
  SrOptions options;
  options.epochs = 15;
  options.batch_size = 8;
  auto history = sr_finetune(model, pairs, options);
  EXPECT_LT(history.back(), history.front());
  auto out = sr_predict(model, stack_lr(pairs));
  EXPECT_EQ(out.sizes(), torch::IntArrayRef({24, 3, 32, 128}));
  EXPECT_GE(out.min().item<float>(), 0.0f);
  EXPECT_LE(out.max().item<float>(), 1.0f);
}

}  // namespace
}  // namespace lego::downstream
