#ifndef POLARSEG_CONFIG_HPP
#define POLARSEG_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>

namespace polarseg {

// Flat key=value store. Serialization is sorted by key, one pair per line,
// so two equal maps always produce identical bytes.
using KvMap = std::map<std::string, std::string>;

// Parses line-oriented key=value text. Blank lines and lines starting with
// '#' are skipped; a non-blank line without '=' is a ConfigError.
KvMap parse_kv(const std::string& text);

std::string format_kv(const KvMap& kv);

KvMap read_kv_file(const std::string& path);
void write_kv_file(const std::string& path, const KvMap& kv);

// FNV-1a over the file bytes, as a fixed-width hex string. Used for input
// digests in run manifests.
std::uint64_t file_digest(const std::string& path);
std::string digest_hex(std::uint64_t digest);

// Typed accessors with ConfigError on malformed values.
double kv_double(const KvMap& kv, const std::string& key, double fallback);
std::int64_t kv_int(const KvMap& kv, const std::string& key,
                    std::int64_t fallback);
std::string kv_string(const KvMap& kv, const std::string& key,
                      const std::string& fallback);

}  // namespace polarseg

#endif  // POLARSEG_CONFIG_HPP
