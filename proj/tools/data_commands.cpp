#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "lego/codebook/codebook.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/image_ops.hpp"
#include "lego/tvqvae/codebook_file.hpp"
#include "lego/tvqvae/train.hpp"

namespace fs = std::filesystem;

namespace lego::cli {

namespace {

constexpr int64_t kChunk = 64;

struct RenderArgs {
  std::string wordlist;
  size_t count = 1000;
  uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string corpus;
  std::string out;
  uint64_t seed = 0;
  int epochs = 30;
  double lr = 1e-3;
  int batch = 64;
};

struct ReconstructArgs {
  std::string model;
  std::string image;
  std::string out;
};

struct InspectArgs {
  std::string model;
  std::string corpus;
  int64_t index = 0;
  size_t limit = 64;
  std::string out;
};

struct TokenizeArgs {
  std::string model;
  std::string corpus;
  std::string out;
};

void render(const RenderArgs& a) {
  const auto words = a.wordlist.empty() ? corpus::default_wordlist() : corpus::read_wordlist(a.wordlist);
  const auto records = corpus::build_corpus(words, a.count, a.seed, a.out);
  std::cout << "wrote " << records.size() << " images to " << a.out << "\n";
}

void train(const TrainArgs& a) {
  const auto samples = corpus::load_corpus(a.corpus, "train");
  tvqvae::TvqvaeModel model(tvqvae::TvqvaeConfig{}, a.seed);
  tvqvae::TrainOptions options;
  options.seed = a.seed;
  options.epochs = a.epochs;
  options.lr = a.lr;
  options.batch_size = a.batch;
  tvqvae::train_tvqvae(model, samples, options, [](const tvqvae::EpochStats& s) {
    std::cout << "epoch " << s.epoch << " reconstruction " << s.reconstruction << " codebook " << s.codebook
              << " commitment " << s.commitment << " utilization " << s.utilization << "\n";
  });
  tvqvae::save_codebook_file(*model, a.out);
  std::cout << "codebook " << tvqvae::codebook_file_hash(a.out) << " -> " << a.out << "\n";
}

void reconstruct(const ReconstructArgs& a) {
  auto model = tvqvae::load_codebook_file(a.model);
  const auto image = read_png(a.image);
  torch::NoGradGuard no_grad;
  auto result = model->forward(image.unsqueeze(0));
  const auto z = result.quantized.z.flatten();
  std::cout << "indices";
  for (int64_t i = 0; i < z.numel(); ++i) std::cout << " " << z[i].item<int64_t>();
  std::cout << "\n";
  const fs::path out = a.out.empty() ? fs::path(a.image).replace_extension(".recon.png") : fs::path(a.out);
  // Input on the left, reconstruction on the right.
  write_png(out, torch::cat({image, result.reconstruction[0]}, 2));
  std::cout << "wrote " << out.string() << "\n";
}

// Mosaic of every patch quantized to index K, in corpus order.
void inspect(const InspectArgs& a) {
  auto model = tvqvae::load_codebook_file(a.model);
  const auto& cfg = model->config();
  if (a.index < 0 || a.index >= cfg.codebook_size) throw ValidationError("index out of range");
  const auto samples = corpus::load_corpus(a.corpus);
  std::vector<torch::Tensor> patches;
  torch::NoGradGuard no_grad;
  for (size_t begin = 0; begin < samples.size() && patches.size() < a.limit; begin += kChunk) {
    const size_t end = std::min(samples.size(), begin + kChunk);
    std::vector<Image> images;
    for (size_t i = begin; i < end; ++i) images.push_back(samples[i].image);
    const auto batch = stack_images(images);
    const auto z = model->forward(batch).quantized.z;  // [B, gh, gw]
    for (int64_t b = 0; b < z.size(0) && patches.size() < a.limit; ++b) {
      for (int64_t i = 0; i < z.size(1); ++i) {
        for (int64_t j = 0; j < z.size(2); ++j) {
          if (z[b][i][j].item<int64_t>() != a.index || patches.size() >= a.limit) continue;
          patches.push_back(batch[b]
                                .narrow(1, i * cfg.patch_h, cfg.patch_h)
                                .narrow(2, j * cfg.patch_w, cfg.patch_w));
        }
      }
    }
  }
  std::cout << patches.size() << " patches use index " << a.index << "\n";
  if (patches.empty()) return;
  write_png(a.out, torch::cat(patches, 2));
  std::cout << "wrote " << a.out << "\n";
}

void tokenize(const TokenizeArgs& a) {
  const auto cb = codebook::TextKnowledgeCodebook::load(a.model);
  const auto samples = corpus::load_corpus(a.corpus);
  std::ofstream out(a.out);
  if (!out) throw IoError("cannot write " + a.out);
  for (const auto& s : samples) {
    const auto tokens = cb.tokenize(s.image, s.sample_id);
    nlohmann::ordered_json j;
    j["source_id"] = tokens.source_id;
    j["indices"] = tokens.indices;
    out << j.dump() << "\n";
  }
  std::cout << "tokenized " << samples.size() << " images\n";
}

}  // namespace

void add_corpus_commands(CLI::App& app) {
  auto* corpus = app.add_subcommand("corpus", "Synthetic text-image corpora");
  corpus->require_subcommand(1);
  auto a = std::make_shared<RenderArgs>();
  auto* r = corpus->add_subcommand("render", "Render a word corpus to PNG files plus manifest.jsonl");
  r->add_option("--wordlist", a->wordlist, "One word per line (default: built-in list)")->check(CLI::ExistingFile);
  r->add_option("--count", a->count, "Number of images")->default_val(1000);
  r->add_option("--seed", a->seed)->default_val(0);
  r->add_option("--out", a->out)->required();
  r->callback([a] { render(*a); });
}

void add_tvqvae_commands(CLI::App& app) {
  auto* tv = app.add_subcommand("tvqvae", "Train and inspect the text VQ-VAE");
  tv->require_subcommand(1);

  auto t = std::make_shared<TrainArgs>();
  auto* train_cmd = tv->add_subcommand("train", "Train on the train split and write a codebook file");
  train_cmd->add_option("--corpus", t->corpus)->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", t->out)->required();
  train_cmd->add_option("--seed", t->seed)->default_val(0);
  train_cmd->add_option("--epochs", t->epochs)->default_val(30);
  train_cmd->add_option("--lr", t->lr)->default_val(1e-3);
  train_cmd->add_option("--batch", t->batch)->default_val(64);
  train_cmd->callback([t] { train(*t); });

  auto r = std::make_shared<ReconstructArgs>();
  auto* rec = tv->add_subcommand("reconstruct", "Write input and reconstruction side by side");
  rec->add_option("--model", r->model)->required()->check(CLI::ExistingFile);
  rec->add_option("--image", r->image)->required()->check(CLI::ExistingFile);
  rec->add_option("--out", r->out, "Output PNG (default: <image>.recon.png)");
  rec->callback([r] { reconstruct(*r); });

  auto i = std::make_shared<InspectArgs>();
  auto* ins = tv->add_subcommand("inspect", "Dump the image patches assigned to one codebook index");
  ins->add_option("--model", i->model)->required()->check(CLI::ExistingFile);
  ins->add_option("--corpus", i->corpus)->required()->check(CLI::ExistingDirectory);
  ins->add_option("--index", i->index)->required();
  ins->add_option("--limit", i->limit)->default_val(64);
  ins->add_option("--out", i->out)->required();
  ins->callback([i] { inspect(*i); });
}

void add_codebook_commands(CLI::App& app) {
  auto* cb = app.add_subcommand("codebook", "Tokenize images with a frozen codebook");
  cb->require_subcommand(1);
  auto a = std::make_shared<TokenizeArgs>();
  auto* tok = cb->add_subcommand("tokenize", "Write one JSON record of 8 indices per image");
  tok->add_option("--model", a->model)->required()->check(CLI::ExistingFile);
  tok->add_option("--corpus", a->corpus)->required()->check(CLI::ExistingDirectory);
  tok->add_option("--out", a->out)->required();
  tok->callback([a] { tokenize(*a); });
}

}  // namespace lego::cli
