#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

namespace rdm {

inline std::string sha256_bytes(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha256: EVP_MD_CTX_new failed");
  bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
            EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
            EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256_file: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return sha256_bytes(bytes);
}

// manifest.txt: a `# seed: N` comment (ignored by sha256sum --check), then
// one `<sha256>  <relative path>` line per artifact.
inline std::string render_manifest(uint64_t seed,
                                   const std::vector<std::string>& rel_paths,
                                   const std::string& base_dir) {
  std::string out = "# seed: " + std::to_string(seed) + "\n";
  for (const std::string& rel : rel_paths)
    out += sha256_file(base_dir + "/" + rel) + "  " + rel + "\n";
  return out;
}

}  // namespace rdm
