#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "ideolens/backend.hpp"

namespace ideolens {

std::string sha256_hex(std::string_view data);

struct CacheKey {
  std::string backend_id;
  ScoringMode mode = ScoringMode::Continuation;
  std::string prompt_sha256;
  std::string variant;
};

/// Append-only JSON-lines score cache:
/// `{"backend_id","mode","prompt_sha256","variant","log_prob","created_at"}` per line.
/// Existing lines are loaded on construction; a torn final line (interrupted
/// writer) is ignored. Inserts from many threads are serialized onto one writer.
class ScoreCache {
 public:
  /// Empty path = in-memory only.
  explicit ScoreCache(std::filesystem::path path = {});

  std::optional<double> lookup(const CacheKey& key) const;
  void insert(const CacheKey& key, double log_prob);
  std::size_t size() const;

 private:
  static std::string flat(const CacheKey& key);

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, double> entries_;
  std::ofstream out_;
};

}  // namespace ideolens
