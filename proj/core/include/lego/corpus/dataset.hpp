#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lego/corpus/render.hpp"

namespace lego::corpus {

struct ManifestRecord {
  std::string path;  // relative to the dataset root, e.g. "images/000017.png"
  std::string transcript;
  std::string split;  // "train" | "val" | "test"
};

struct CorpusOptions {
  double val_fraction = 0.1;
  double test_fraction = 0.1;
};

// In-memory generation: `count` samples, words drawn from `wordlist`.
std::vector<TextSample> generate_samples(const std::vector<std::string>& wordlist, size_t count,
                                         uint64_t seed);

// Split assignment used by build_corpus for sample `index`.
std::string split_for(uint64_t seed, size_t index, const CorpusOptions& options = {});

// Writes images/*.png and manifest.jsonl under out_dir. Deterministic.
std::vector<ManifestRecord> build_corpus(const std::vector<std::string>& wordlist, size_t count,
                                         uint64_t seed, const std::filesystem::path& out_dir,
                                         const CorpusOptions& options = {});

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& dataset_dir);

// Loads every record (or only one split when `split` is non-empty).
std::vector<TextSample> load_corpus(const std::filesystem::path& dataset_dir,
                                    const std::string& split = {});

std::vector<std::string> read_wordlist(const std::filesystem::path& path);

}  // namespace lego::corpus
