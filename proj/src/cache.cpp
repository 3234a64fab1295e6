#include "ideolens/cache.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include <ctime>
#include <memory>
#include <nlohmann/json.hpp>

#include "ideolens/error.hpp"

namespace ideolens {

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw Error("sha256 failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string ScoreCache::flat(const CacheKey& key) {
  std::string s = key.backend_id;
  s += '\x1f';
  s += to_string(key.mode);
  s += '\x1f';
  s += key.prompt_sha256;
  s += '\x1f';
  s += key.variant;
  return s;
}

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::uintmax_t torn_at = 0;
  bool torn = false;
  {
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    std::size_t lineno = 0;
    std::uintmax_t offset = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::uintmax_t start = offset;
      offset += line.size() + 1;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        CacheKey key{j.at("backend_id").get<std::string>(),
                     parse_scoring_mode(j.at("mode").get<std::string>()),
                     j.at("prompt_sha256").get<std::string>(), j.at("variant").get<std::string>()};
        entries_[flat(key)] = j.at("log_prob").get<double>();
      } catch (const std::exception& e) {
        if (in.peek() != std::char_traits<char>::eof())
          throw ParseError(fmt::format("{}:{}: {}", path_.string(), lineno, e.what()));
        // torn tail from an interrupted run
        torn = true;
        torn_at = start;
      }
    }
  }
  if (torn) std::filesystem::resize_file(path_, torn_at);
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(fmt::format("cannot append to cache {}", path_.string()));
  // A record may be complete but missing its newline.
  if (std::filesystem::file_size(path_) > 0) {
    std::ifstream tail(path_, std::ios::binary);
    tail.seekg(-1, std::ios::end);
    if (tail.get() != '\n') out_ << '\n';
  }
}

std::optional<double> ScoreCache::lookup(const CacheKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(flat(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::insert(const CacheKey& key, double log_prob) {
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(flat(key), log_prob).second) return;
  if (!out_.is_open()) return;
  const nlohmann::json line{{"backend_id", key.backend_id},
                            {"mode", to_string(key.mode)},
                            {"prompt_sha256", key.prompt_sha256},
                            {"variant", key.variant},
                            {"log_prob", log_prob},
                            {"created_at", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)))}};
  out_ << line.dump() << '\n';
  out_.flush();
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace ideolens
