#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace lego {

// Little-endian byte buffer writer. All on-disk formats of this library are
// assembled in memory and then written atomically.
class ByteWriter {
 public:
  void u32(uint32_t v);
  void u64(uint64_t v);
  void i64(int64_t v);
  void f64(double v);
  void str(const std::string& s);
  void raw(const void* data, size_t size);
  // dtype tag, rank, dims, then float32/float64/int64 payload.
  void tensor(const torch::Tensor& t);
  void named_tensors(const std::vector<std::pair<std::string, torch::Tensor>>& named);

  const std::vector<unsigned char>& bytes() const { return buf_; }
  std::vector<unsigned char>& bytes() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& buf, size_t offset = 0)
      : buf_(buf), pos_(offset) {}

  uint32_t u32();
  uint64_t u64();
  int64_t i64();
  double f64();
  std::string str();
  void raw(void* out, size_t size);
  torch::Tensor tensor();
  std::vector<std::pair<std::string, torch::Tensor>> named_tensors();

  size_t position() const { return pos_; }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(size_t n) const;
  const std::vector<unsigned char>& buf_;
  size_t pos_;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path);
// Writes to "<path>.tmp" then renames over path.
void write_file_atomic(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

// Copies parameters and buffers of a module (name order) into a flat list.
std::vector<std::pair<std::string, torch::Tensor>> state_of(const torch::nn::Module& module);
// Loads values by name; throws ConfigError on missing names or shape mismatch.
void load_state(torch::nn::Module& module,
                const std::vector<std::pair<std::string, torch::Tensor>>& named);

}  // namespace lego
