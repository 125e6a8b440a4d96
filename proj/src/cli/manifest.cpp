#include <cstdio>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "common/bytes.hpp"
#include "nggan/cli.hpp"
#include "nggan/error.hpp"

namespace nggan::cli {

using nlohmann::ordered_json;

std::string sha256_hex(const std::vector<unsigned char>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 digest failed");
  }
  std::string out;
  char hex[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", digest[i]);
    out += hex;
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(detail::read_file(path)); }

void write_manifest(const RunConfig& cfg, const Manifest& manifest) {
  ordered_json j;
  j["format"] = "nggan-manifest";
  j["command"] = manifest.command;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["config_ini"] = cfg.to_ini();
  j["inputs"] = ordered_json::array();
  for (const auto& p : manifest.inputs) {
    j["inputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  }
  j["artifacts"] = ordered_json::array();
  for (const auto& p : manifest.artifacts) {
    const auto full = cfg.out / p;
    j["artifacts"].push_back(
        {{"path", p.generic_string()}, {"bytes", std::filesystem::file_size(full)}, {"sha256", sha256_file(full)}});
  }
  const auto text = j.dump(2) + "\n";
  detail::write_file(cfg.out / "manifest.json", std::vector<unsigned char>(text.begin(), text.end()));
}

}  // namespace nggan::cli
