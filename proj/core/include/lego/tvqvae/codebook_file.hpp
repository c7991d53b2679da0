#pragma once

#include <filesystem>
#include <string>

#include "lego/tvqvae/model.hpp"

namespace lego::tvqvae {

// Codebook file layout (all integers little-endian):
//   magic "LEGOTKCB" | u32 version | u32 N | u32 D | u32 r1 | u32 r2
//   | u32 H | u32 W | u32 hidden | u32 depth | u32 decoder_hidden | f64 in_eps
//   | N*D float32 embeddings, row-major
//   | named tensor blob (encoder + decoder parameters)
//   | 32-byte SHA-256 of every preceding byte
inline constexpr char kCodebookMagic[8] = {'L', 'E', 'G', 'O', 'T', 'K', 'C', 'B'};
inline constexpr uint32_t kCodebookVersion = 1;

std::vector<unsigned char> serialize_codebook(TvqvaeModelImpl& model);
void save_codebook_file(TvqvaeModelImpl& model, const std::filesystem::path& path);
// Verifies the trailing digest; returns a frozen model.
TvqvaeModel load_codebook_file(const std::filesystem::path& path);
// Hex digest stored in the trailer (the file's content hash).
std::string codebook_file_hash(const std::filesystem::path& path);

}  // namespace lego::tvqvae
