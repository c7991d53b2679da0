#include "lego/corpus/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lego/binary_io.hpp"
#include "lego/image_ops.hpp"
#include "lego/rng.hpp"

namespace lego::corpus {

namespace fs = std::filesystem;

namespace {

std::string image_name(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.png", index);
  return buf;
}

}  // namespace

std::vector<TextSample> generate_samples(const std::vector<std::string>& wordlist, size_t count,
                                         uint64_t seed) {
  if (wordlist.empty()) throw ValidationError("wordlist is empty");
  std::vector<TextSample> samples;
  samples.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, {0x776f7264, i}));
    const auto& word = wordlist[rng.below(wordlist.size())];
    auto spec = random_spec(word, derive_seed(seed, {0x72656e64, i}));
    samples.push_back(render_sample(spec, "s" + std::to_string(seed) + "-" + std::to_string(i)));
  }
  return samples;
}

std::string split_for(uint64_t seed, size_t index, const CorpusOptions& options) {
  Rng rng(derive_seed(seed, {0x73706c6974, index}));
  const double u = rng.uniform();
  if (u < options.test_fraction) return "test";
  if (u < options.test_fraction + options.val_fraction) return "val";
  return "train";
}

std::vector<ManifestRecord> build_corpus(const std::vector<std::string>& wordlist, size_t count,
                                         uint64_t seed, const fs::path& out_dir,
                                         const CorpusOptions& options) {
  if (wordlist.empty()) throw ValidationError("wordlist is empty");
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  auto samples = generate_samples(wordlist, count, seed);
  std::vector<ManifestRecord> records;
  std::string manifest;
  for (size_t i = 0; i < samples.size(); ++i) {
    ManifestRecord rec{"images/" + image_name(i), samples[i].transcript, split_for(seed, i, options)};
    write_png(out_dir / rec.path, samples[i].image);
    nlohmann::ordered_json j;
    j["path"] = rec.path;
    j["transcript"] = rec.transcript;
    j["split"] = rec.split;
    manifest += j.dump() + "\n";
    records.push_back(std::move(rec));
  }
  write_file_atomic(out_dir / "manifest.jsonl", {manifest.begin(), manifest.end()});
  return records;
}

std::vector<ManifestRecord> read_manifest(const fs::path& dataset_dir) {
  std::ifstream in(dataset_dir / "manifest.jsonl");
  if (!in) throw IoError("cannot open " + (dataset_dir / "manifest.jsonl").string());
  std::vector<ManifestRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("path").get<std::string>(), j.at("transcript").get<std::string>(),
                     j.value("split", std::string("train"))});
    } catch (const nlohmann::json::exception& e) {
      throw IoError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TextSample> load_corpus(const fs::path& dataset_dir, const std::string& split) {
  std::vector<TextSample> out;
  for (const auto& rec : read_manifest(dataset_dir)) {
    if (!split.empty() && rec.split != split) continue;
    auto image = read_png(dataset_dir / rec.path);
    check_image(image);
    out.push_back({image, normalize_transcript(rec.transcript), fs::path(rec.path).stem().string()});
  }
  return out;
}

std::vector<std::string> read_wordlist(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open wordlist " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    words.push_back(normalize_transcript(line));
  }
  if (words.empty()) throw ValidationError("wordlist " + path.string() + " is empty");
  return words;
}

}  // namespace lego::corpus
