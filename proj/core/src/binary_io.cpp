#include "lego/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lego/common.hpp"

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

namespace lego {

namespace {

enum class DType : uint32_t { kFloat32 = 1, kFloat64 = 2, kInt64 = 3 };

DType dtype_tag(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return DType::kFloat32;
    case torch::kFloat64: return DType::kFloat64;
    case torch::kInt64: return DType::kInt64;
    default: throw ConfigError("unsupported tensor dtype for serialization");
  }
}

torch::ScalarType scalar_type(DType tag) {
  switch (tag) {
    case DType::kFloat32: return torch::kFloat32;
    case DType::kFloat64: return torch::kFloat64;
    case DType::kInt64: return torch::kInt64;
  }
  throw IoError("corrupt tensor dtype tag");
}

}  // namespace

void ByteWriter::raw(const void* data, size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  buf_.insert(buf_.end(), p, p + size);
}
void ByteWriter::u32(uint32_t v) { raw(&v, sizeof v); }
void ByteWriter::u64(uint64_t v) { raw(&v, sizeof v); }
void ByteWriter::i64(int64_t v) { raw(&v, sizeof v); }
void ByteWriter::f64(double v) { raw(&v, sizeof v); }
void ByteWriter::str(const std::string& s) {
  u32(static_cast<uint32_t>(s.size()));
  raw(s.data(), s.size());
}

void ByteWriter::tensor(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kCPU).contiguous();
  u32(static_cast<uint32_t>(dtype_tag(c.scalar_type())));
  u32(static_cast<uint32_t>(c.dim()));
  for (int64_t d : c.sizes()) i64(d);
  raw(c.data_ptr(), c.numel() * c.element_size());
}

void ByteWriter::named_tensors(const std::vector<std::pair<std::string, torch::Tensor>>& named) {
  u64(named.size());
  for (const auto& [name, t] : named) {
    str(name);
    tensor(t);
  }
}

void ByteReader::need(size_t n) const {
  if (pos_ + n > buf_.size()) throw IoError("unexpected end of data");
}
void ByteReader::raw(void* out, size_t size) {
  need(size);
  std::memcpy(out, buf_.data() + pos_, size);
  pos_ += size;
}
uint32_t ByteReader::u32() { uint32_t v; raw(&v, sizeof v); return v; }
uint64_t ByteReader::u64() { uint64_t v; raw(&v, sizeof v); return v; }
int64_t ByteReader::i64() { int64_t v; raw(&v, sizeof v); return v; }
double ByteReader::f64() { double v; raw(&v, sizeof v); return v; }
std::string ByteReader::str() {
  const uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

torch::Tensor ByteReader::tensor() {
  const auto type = scalar_type(static_cast<DType>(u32()));
  const uint32_t rank = u32();
  if (rank > 8) throw IoError("corrupt tensor rank");
  std::vector<int64_t> dims(rank);
  for (auto& d : dims) {
    d = i64();
    if (d < 0) throw IoError("corrupt tensor shape");
  }
  auto t = torch::empty(dims, torch::TensorOptions().dtype(type));
  raw(t.data_ptr(), t.numel() * t.element_size());
  return t;
}

std::vector<std::pair<std::string, torch::Tensor>> ByteReader::named_tensors() {
  const uint64_t n = u64();
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (uint64_t i = 0; i < n; ++i) {
    auto name = str();
    out.emplace_back(std::move(name), tensor());
  }
  return out;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<std::pair<std::string, torch::Tensor>> state_of(const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : module.named_parameters(true)) out.emplace_back(item.key(), item.value());
  for (const auto& item : module.named_buffers(true)) out.emplace_back(item.key(), item.value());
  return out;
}

void load_state(torch::nn::Module& module,
                const std::vector<std::pair<std::string, torch::Tensor>>& named) {
  std::unordered_map<std::string, const torch::Tensor*> by_name;
  for (const auto& [name, t] : named) by_name[name] = &t;
  torch::NoGradGuard no_grad;
  auto assign = [&](const std::string& name, torch::Tensor& dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigError("missing tensor '" + name + "' in saved state");
    if (it->second->sizes() != dst.sizes()) {
      throw ConfigError("shape mismatch for '" + name + "'");
    }
    dst.copy_(*it->second);
  };
  for (auto& item : module.named_parameters(true)) assign(item.key(), item.value());
  for (auto& item : module.named_buffers(true)) assign(item.key(), item.value());
}

}  // namespace lego
