#include "lego/tvqvae/codebook_file.hpp"

#include <cstring>

#include "lego/binary_io.hpp"
#include "lego/hash.hpp"

namespace lego::tvqvae {

namespace {

constexpr size_t kDigestBytes = 32;

std::vector<unsigned char> digest_bytes(const std::vector<unsigned char>& data) {
  const auto hex = sha256_hex(data);
  std::vector<unsigned char> out(kDigestBytes);
  for (size_t i = 0; i < kDigestBytes; ++i) out[i] = static_cast<unsigned char>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  return out;
}

std::string hex_of(const unsigned char* bytes, size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (size_t i = 0; i < n; ++i) {
    s += digits[bytes[i] >> 4];
    s += digits[bytes[i] & 0xF];
  }
  return s;
}

std::vector<std::pair<std::string, torch::Tensor>> prefixed(const torch::nn::Module& m, const std::string& prefix) {
  auto named = state_of(m);
  for (auto& [name, t] : named) {
    name = prefix + name;
    t = t.to(torch::kFloat32);
  }
  return named;
}

}  // namespace

std::vector<unsigned char> serialize_codebook(TvqvaeModelImpl& model) {
  const auto& c = model.config();
  ByteWriter w;
  w.raw(kCodebookMagic, sizeof kCodebookMagic);
  w.u32(kCodebookVersion);
  for (int64_t v : {c.codebook_size, c.dim, c.patch_h, c.patch_w, c.image_h, c.image_w, c.hidden, c.depth,
                    c.decoder_hidden}) {
    w.u32(static_cast<uint32_t>(v));
  }
  w.f64(c.in_eps);
  const auto emb = model.embeddings().detach().to(torch::kFloat32).contiguous();
  w.raw(emb.data_ptr<float>(), emb.numel() * sizeof(float));
  auto params = prefixed(*model.encoder(), "encoder.");
  auto dec = prefixed(*model.decoder(), "decoder.");
  params.insert(params.end(), dec.begin(), dec.end());
  w.named_tensors(params);
  auto digest = digest_bytes(w.bytes());
  w.raw(digest.data(), digest.size());
  return w.bytes();
}

void save_codebook_file(TvqvaeModelImpl& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_codebook(model));
}

TvqvaeModel load_codebook_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < sizeof kCodebookMagic + kDigestBytes ||
      std::memcmp(bytes.data(), kCodebookMagic, sizeof kCodebookMagic) != 0) {
    throw IoError(path.string() + " is not a codebook file");
  }
  const std::vector<unsigned char> body(bytes.begin(), bytes.end() - kDigestBytes);
  if (digest_bytes(body) != std::vector<unsigned char>(bytes.end() - kDigestBytes, bytes.end())) {
    throw IoError(path.string() + ": content hash mismatch");
  }
  ByteReader r(body, sizeof kCodebookMagic);
  if (r.u32() != kCodebookVersion) throw IoError(path.string() + ": unsupported codebook version");
  TvqvaeConfig c;
  c.codebook_size = r.u32();
  c.dim = r.u32();
  c.patch_h = r.u32();
  c.patch_w = r.u32();
  c.image_h = r.u32();
  c.image_w = r.u32();
  c.hidden = r.u32();
  c.depth = r.u32();
  c.decoder_hidden = r.u32();
  c.in_eps = r.f64();
  TvqvaeModel model(c);
  {
    torch::NoGradGuard no_grad;
    auto emb = torch::empty({c.codebook_size, c.dim}, torch::kFloat32);
    r.raw(emb.data_ptr<float>(), emb.numel() * sizeof(float));
    model->embeddings().copy_(emb);
  }
  std::vector<std::pair<std::string, torch::Tensor>> enc, dec;
  for (auto& [name, t] : r.named_tensors()) {
    if (name.rfind("encoder.", 0) == 0) enc.emplace_back(name.substr(8), t);
    else if (name.rfind("decoder.", 0) == 0) dec.emplace_back(name.substr(8), t);
    else throw IoError(path.string() + ": unexpected tensor " + name);
  }
  load_state(*model->encoder(), enc);
  load_state(*model->decoder(), dec);
  if (r.remaining() != 0) throw IoError(path.string() + ": trailing bytes");
  model->freeze();
  return model;
}

std::string codebook_file_hash(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < kDigestBytes) throw IoError(path.string() + " is truncated");
  return hex_of(bytes.data() + bytes.size() - kDigestBytes, kDigestBytes);
}

}  // namespace lego::tvqvae
