#ifndef KEYMOTION_TOOLS_CONFIG_HPP_
#define KEYMOTION_TOOLS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace keymotion::cli {

const std::vector<std::string>& CommandNames();

// Flat key-value parameters of one command. Every key has a default; keys the
// command does not know are rejected.
class RunConfig {
 public:
  // Throws ConfigError for an unknown command.
  static RunConfig For(std::string_view command);

  const std::string& command() const { return command_; }

  // `source` names the file or flag the value came from, for diagnostics.
  void Set(std::string_view key, std::string_view value, std::string_view source);
  // Lines `key = value`; '#' starts a comment.
  void LoadFile(const std::filesystem::path& path);
  // `key=value`
  void ApplyOverride(std::string_view assignment);

  bool Has(std::string_view key) const;
  const std::string& Get(std::string_view key) const;
  double GetDouble(std::string_view key) const;
  long long GetInt(std::string_view key) const;
  std::uint64_t GetSeed(std::string_view key) const;
  bool GetBool(std::string_view key) const;
  std::vector<std::string> GetList(std::string_view key) const;
  // Throws ConfigError naming the key when the value is empty.
  const std::string& Require(std::string_view key) const;

  // Every key in definition order, loadable by LoadFile.
  std::string Resolved() const;
  // FNV-1a 64 over Resolved().
  std::uint64_t Hash() const;

 private:
  struct Entry {
    std::string key;
    std::string value;
  };
  const Entry& Find(std::string_view key) const;

  std::string command_;
  std::vector<Entry> entries_;
};

std::uint64_t Fnv1a(std::string_view bytes);

// `<root>/<command>-<16 hex digits of the config hash>`; root comes from
// `override_root`, else $KEYMOTION_RUN_DIR, else ./runs.
std::filesystem::path RunDirectory(const RunConfig& config, const std::string& override_root);

}  // namespace keymotion::cli

#endif  // KEYMOTION_TOOLS_CONFIG_HPP_
