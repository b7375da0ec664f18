// Append-only line-delimited key=value logs (verdicts, forwarded frames,
// counters) plus the reader and the non-bypass audit over them.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mavguard {

class KvLogWriter {
 public:
  KvLogWriter() = default;  // disabled
  explicit KvLogWriter(const std::string& path);

  void write(const std::vector<std::pair<std::string, std::string>>& kvs);
  void flush();
  bool enabled() const { return out_.is_open(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::mutex mu_;
};

using KvRecord = std::map<std::string, std::string>;

std::vector<KvRecord> read_kv_log(const std::string& path);

std::string kv_escape(std::string_view value);

// Non-bypass audit: every forwarded frame must have a matching Accept
// verdict (by uplink index), with no extras and no rejected index forwarded.
struct AuditResult {
  bool ok = false;
  std::uint64_t forwarded = 0;
  std::uint64_t accepted = 0;
  std::uint64_t extras = 0;            // forwarded without an Accept verdict
  std::uint64_t rejected_forwarded = 0;
  std::string detail;
};

AuditResult audit_non_bypass(const std::string& verdict_log_path,
                             const std::string& forwarded_log_path);

}  // namespace mavguard
