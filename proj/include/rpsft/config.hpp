#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rpsft {

enum class KeyType {
    real,
    integer,
    /// 64-bit unsigned, used for seeds
    unsigned64,
    boolean,
    text,
    real_list,
    integer_list,
    text_list,
    /// "auto" or a non-negative integer
    rank,
};

struct KeySpec {
    std::string key;
    KeyType type = KeyType::real;
    std::string default_value;
    std::string help;
    std::optional<double> min;
    std::optional<double> max;
    /// min is exclusive
    bool above_min = false;
    /// Allowed values for text keys; empty means any.
    std::vector<std::string> choices;
};

using Schema = std::vector<KeySpec>;

/// Validated key/value settings for one command. Values are stored in a
/// canonical text form so equal settings always print identically.
class Config {
public:
    explicit Config(Schema schema);

    /// Throws ConfigError naming key and line (0 for overrides) on unknown
    /// keys, malformed values or range violations.
    void set(const std::string& key, std::string_view value, std::size_t line);

    double real(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    std::uint64_t seed() const;
    bool flag(const std::string& key) const;
    const std::string& text(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;
    std::vector<std::size_t> counts(const std::string& key) const;
    std::vector<std::string> texts(const std::string& key) const;
    /// nullopt for "auto"
    std::optional<std::size_t> rank(const std::string& key) const;

    const Schema& schema() const noexcept { return schema_; }
    /// "key = value" per schema entry, in schema order.
    std::vector<std::string> lines() const;

    bool operator==(const Config& other) const { return values_ == other.values_; }

private:
    const KeySpec& spec(const std::string& key) const;
    const std::string& raw(const std::string& key) const;

    Schema schema_;
    std::map<std::string, std::string> values_;
};

/// Parses "key = value" lines (# starts a comment, blank lines ignored) and
/// then applies "key=value" overrides in order.
Config parse_config(const Schema& schema, std::string_view text, const std::vector<std::string>& overrides = {});
/// Reads the file at `path` when given. Throws IoError when unreadable.
Config load_config(const Schema& schema, const std::optional<std::filesystem::path>& path,
                   const std::vector<std::string>& overrides = {});

} // namespace rpsft
