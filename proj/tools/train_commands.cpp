#include <iostream>

#include "commands.hpp"
#include "lego/codebook/codebook.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/corpus/sr_pair.hpp"
#include "lego/downstream/recognizer.hpp"
#include "lego/downstream/sr.hpp"
#include "lego/rng.hpp"
#include "lego/trainer/pretrain.hpp"

namespace lego::cli {

namespace {

struct PretrainArgs {
  std::string config;
  std::string corpus;
  std::string codebook;
  std::string out;
  std::string resume;
};

// Where the encoder comes from: a pretraining checkpoint, or a fresh
// randomly initialised ViT of the given preset.
struct EncoderArgs {
  std::string ckpt;
  std::string preset = "desk";
  uint64_t init_seed = 0;

  pretext::ViTEncoder build() const {
    if (!ckpt.empty()) return trainer::load_encoder(ckpt);
    trainer::PretrainConfig config;
    config.vit_preset = preset;
    return pretext::ViTEncoder(config.vit(), init_seed);
  }

  std::string config_hash() const {
    if (!ckpt.empty()) return trainer::read_checkpoint_info(ckpt).config_hash;
    return "random-init:" + preset + ":" + std::to_string(init_seed);
  }
};

struct RecognizerArgs {
  EncoderArgs encoder;
  std::string corpus;
  std::string pooling = "concat";
  int64_t epochs = 30;
  int64_t batch = 64;
  double lr = 1e-3;
  double encoder_lr_scale = 0.1;
  uint64_t seed = 0;
  std::string save;
  std::string report;
};

struct SrArgs {
  EncoderArgs encoder;
  std::string corpus;
  int64_t epochs = 50;
  int64_t batch = 32;
  double lr = 1e-3;
  bool freeze_encoder = false;
  uint64_t seed = 0;
  std::string save;
  std::string report;
};

struct EvalArgs {
  EncoderArgs encoder;
  std::string task = "recognition";
  std::string model;
  std::string corpus;
  std::string split = "test";
  std::string pooling = "concat";
  uint64_t seed = 0;
  std::string report;
};

void add_encoder_options(CLI::App* cmd, EncoderArgs& e) {
  auto* ckpt = cmd->add_option("--ckpt", e.ckpt, "Pretraining checkpoint supplying the encoder")
                   ->check(CLI::ExistingFile);
  cmd->add_option("--vit-preset", e.preset, "Random-init encoder preset when --ckpt is absent")
      ->default_val("desk")
      ->excludes(ckpt);
  cmd->add_option("--init-seed", e.init_seed, "Seed of the random-init encoder")->default_val(0);
}

std::vector<corpus::TextSample> split_or_throw(const std::string& dir, const std::string& split) {
  auto samples = corpus::load_corpus(dir, split);
  if (samples.empty()) throw ValidationError("corpus " + dir + " has no '" + split + "' samples");
  return samples;
}

std::vector<corpus::SRPair> sr_pairs(const std::vector<corpus::TextSample>& samples, uint64_t seed) {
  std::vector<corpus::SRPair> pairs;
  pairs.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    pairs.push_back(corpus::make_sr_pair(samples[i], derive_seed(seed, {0x7372, i})));
  }
  return pairs;
}

void finish(const downstream::EvalReport& report, const std::string& path) {
  std::cout << report.to_json().dump(2) << "\n";
  if (!path.empty()) downstream::write_report(path, report);
}

void pretrain(const PretrainArgs& a) {
  trainer::apply_determinism_from_env();
  const auto config = trainer::PretrainConfig::from_file(a.config);
  const auto cb = codebook::TextKnowledgeCodebook::load(a.codebook);
  const auto samples = corpus::load_corpus(a.corpus, "train");
  trainer::RunOptions options;
  options.out_dir = a.out;
  if (!a.resume.empty()) options.resume = a.resume;
  const auto final_ckpt = trainer::run_pretraining(config, samples, cb, options);
  std::cout << "final checkpoint " << final_ckpt.string() << "\n";
}

downstream::RecognizerOptions recognizer_options(const RecognizerArgs& a) {
  downstream::RecognizerOptions o;
  o.pooling = downstream::parse_pooling(a.pooling);
  o.epochs = a.epochs;
  o.batch_size = a.batch;
  o.lr = a.lr;
  o.encoder_lr_scale = a.encoder_lr_scale;
  o.seed = a.seed;
  return o;
}

void recognizer(const RecognizerArgs& a, bool trainable) {
  const auto train = split_or_throw(a.corpus, "train");
  const auto test = split_or_throw(a.corpus, "test");
  const auto options = recognizer_options(a);
  auto model = trainable ? downstream::finetune(a.encoder.build(), train, options)
                         : downstream::probe_train(a.encoder.build(), train, options);
  if (!a.save.empty()) torch::save(model, a.save);
  auto report = downstream::evaluate_recognizer(model, test, "test");
  report.config_hash = a.encoder.config_hash();
  finish(report, a.report);
}

void finetune_sr(const SrArgs& a) {
  const auto train = sr_pairs(split_or_throw(a.corpus, "train"), a.seed);
  const auto test = sr_pairs(split_or_throw(a.corpus, "test"), derive_seed(a.seed, {1}));
  downstream::SrOptions options;
  options.epochs = a.epochs;
  options.batch_size = a.batch;
  options.lr = a.lr;
  options.train_encoder = !a.freeze_encoder;
  options.seed = a.seed;
  downstream::SrModel model(a.encoder.build(), 32, a.seed);
  const auto losses = downstream::sr_finetune(model, train, options);
  for (size_t e = 0; e < losses.size(); ++e) std::cout << "epoch " << e << " mse " << losses[e] << "\n";
  if (!a.save.empty()) torch::save(model, a.save);
  auto report = downstream::evaluate_sr(model, test, "test");
  report.config_hash = a.encoder.config_hash();
  finish(report, a.report);
}

void evaluate(const EvalArgs& a) {
  const auto samples = split_or_throw(a.corpus, a.split);
  downstream::EvalReport report;
  if (a.task == "recognition") {
    downstream::RecognizerModel model(a.encoder.build(), downstream::parse_pooling(a.pooling));
    torch::load(model, a.model);
    model->eval();
    report = downstream::evaluate_recognizer(model, samples, a.split);
  } else if (a.task == "sr") {
    downstream::SrModel model(a.encoder.build());
    torch::load(model, a.model);
    model->eval();
    report = downstream::evaluate_sr(model, sr_pairs(samples, derive_seed(a.seed, {1})), a.split);
  } else {
    throw ConfigError("unknown task: " + a.task);
  }
  report.config_hash = a.encoder.config_hash();
  finish(report, a.report);
}

void add_recognizer_options(CLI::App* cmd, RecognizerArgs& a) {
  add_encoder_options(cmd, a.encoder);
  cmd->add_option("--corpus", a.corpus, "Rendered corpus with train and test splits")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--pooling", a.pooling, "Column features: concat or mean")
      ->default_val("concat")
      ->check(CLI::IsMember({"concat", "mean"}));
  cmd->add_option("--epochs", a.epochs)->default_val(30);
  cmd->add_option("--batch", a.batch)->default_val(64);
  cmd->add_option("--lr", a.lr)->default_val(1e-3);
  cmd->add_option("--seed", a.seed)->default_val(0);
  cmd->add_option("--save", a.save, "Write the trained model here");
  cmd->add_option("--report", a.report, "Write the test-split EvalReport JSON here");
}

}  // namespace

void add_pretrain_command(CLI::App& app) {
  auto a = std::make_shared<PretrainArgs>();
  auto* cmd = app.add_subcommand("pretrain", "Joint SID + MIM + RTR pretraining");
  cmd->add_option("--config", a->config, "key = value config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--corpus", a->corpus)->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--codebook", a->codebook)->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", a->out, "Directory for metrics.jsonl and checkpoints")->required();
  cmd->add_option("--resume", a->resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  cmd->callback([a] { pretrain(*a); });
}

void add_downstream_commands(CLI::App& app) {
  auto probe = std::make_shared<RecognizerArgs>();
  auto* p = app.add_subcommand("probe", "Train a CTC head on the frozen encoder");
  add_recognizer_options(p, *probe);
  p->callback([probe] { recognizer(*probe, false); });

  auto ft = std::make_shared<RecognizerArgs>();
  auto* f = app.add_subcommand("finetune-recognizer", "Train encoder and CTC head together");
  add_recognizer_options(f, *ft);
  f->add_option("--encoder-lr-scale", ft->encoder_lr_scale, "Encoder lr relative to --lr")->default_val(0.1);
  f->callback([ft] { recognizer(*ft, true); });

  auto sr = std::make_shared<SrArgs>();
  auto* s = app.add_subcommand("finetune-sr", "Train the super-resolution head on degraded pairs");
  add_encoder_options(s, sr->encoder);
  s->add_option("--corpus", sr->corpus)->required()->check(CLI::ExistingDirectory);
  s->add_option("--epochs", sr->epochs)->default_val(50);
  s->add_option("--batch", sr->batch)->default_val(32);
  s->add_option("--lr", sr->lr)->default_val(1e-3);
  s->add_flag("--freeze-encoder", sr->freeze_encoder);
  s->add_option("--seed", sr->seed)->default_val(0);
  s->add_option("--save", sr->save);
  s->add_option("--report", sr->report);
  s->callback([sr] { finetune_sr(*sr); });

  auto ev = std::make_shared<EvalArgs>();
  auto* e = app.add_subcommand("eval", "Evaluate a saved recognizer or SR model");
  add_encoder_options(e, ev->encoder);
  e->add_option("--task", ev->task)->default_val("recognition")->check(CLI::IsMember({"recognition", "sr"}));
  e->add_option("--model", ev->model, "File written by --save")->required()->check(CLI::ExistingFile);
  e->add_option("--corpus", ev->corpus)->required()->check(CLI::ExistingDirectory);
  e->add_option("--split", ev->split)->default_val("test");
  e->add_option("--pooling", ev->pooling)->default_val("concat")->check(CLI::IsMember({"concat", "mean"}));
  e->add_option("--seed", ev->seed, "Degradation seed for SR pairs")->default_val(0);
  e->add_option("--report", ev->report)->required();
  e->callback([ev] { evaluate(*ev); });
}

}  // namespace lego::cli
