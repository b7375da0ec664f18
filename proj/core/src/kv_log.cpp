#include "mavguard/kv_log.hpp"

#include <set>
#include <sstream>

namespace mavguard {

KvLogWriter::KvLogWriter(const std::string& path) : path_(path) {
  if (!path.empty()) out_.open(path, std::ios::out | std::ios::trunc);
}

std::string kv_escape(std::string_view value) {
  bool plain = !value.empty();
  for (char c : value) {
    if (c == ' ' || c == '"' || c == '=' || c == '\n') {
      plain = false;
      break;
    }
  }
  if (plain) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  out += '"';
  return out;
}

void KvLogWriter::write(const std::vector<std::pair<std::string, std::string>>& kvs) {
  if (!out_.is_open()) return;
  std::lock_guard<std::mutex> lock(mu_);
  bool first = true;
  for (const auto& [k, v] : kvs) {
    if (!first) out_ << ' ';
    first = false;
    out_ << k << '=' << kv_escape(v);
  }
  out_ << '\n';
}

void KvLogWriter::flush() {
  if (!out_.is_open()) return;
  std::lock_guard<std::mutex> lock(mu_);
  out_.flush();
}

std::vector<KvRecord> read_kv_log(const std::string& path) {
  std::vector<KvRecord> records;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    KvRecord rec;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      std::size_t eq = line.find('=', i);
      if (eq == std::string::npos) break;
      std::string key = line.substr(i, eq - i);
      i = eq + 1;
      std::string value;
      if (i < line.size() && line[i] == '"') {
        ++i;
        while (i < line.size() && line[i] != '"') {
          if (line[i] == '\\' && i + 1 < line.size()) {
            ++i;
            value += line[i] == 'n' ? '\n' : line[i];
          } else {
            value += line[i];
          }
          ++i;
        }
        if (i < line.size()) ++i;  // closing quote
      } else {
        std::size_t sp = line.find(' ', i);
        value = line.substr(i, sp == std::string::npos ? std::string::npos : sp - i);
        i = sp == std::string::npos ? line.size() : sp;
      }
      rec[key] = value;
    }
    if (!rec.empty()) records.push_back(std::move(rec));
  }
  return records;
}

AuditResult audit_non_bypass(const std::string& verdict_log_path,
                             const std::string& forwarded_log_path) {
  AuditResult res;
  std::set<std::uint64_t> accepts;
  std::set<std::uint64_t> rejects;
  for (const auto& rec : read_kv_log(verdict_log_path)) {
    auto idx = rec.find("idx");
    auto dec = rec.find("decision");
    if (idx == rec.end() || dec == rec.end()) continue;
    const std::uint64_t i = std::stoull(idx->second);
    if (dec->second == "accept") {
      accepts.insert(i);
    } else {
      rejects.insert(i);
    }
  }
  res.accepted = accepts.size();

  std::ostringstream detail;
  for (const auto& rec : read_kv_log(forwarded_log_path)) {
    auto idx = rec.find("idx");
    if (idx == rec.end()) continue;
    ++res.forwarded;
    const std::uint64_t i = std::stoull(idx->second);
    if (rejects.count(i) != 0) {
      ++res.rejected_forwarded;
      detail << "rejected idx " << i << " was forwarded; ";
    } else if (accepts.count(i) == 0) {
      ++res.extras;
      detail << "forwarded idx " << i << " has no accept verdict; ";
    }
  }
  res.ok = res.extras == 0 && res.rejected_forwarded == 0;
  res.detail = detail.str();
  return res;
}

}  // namespace mavguard
