#include "rpsft/config.hpp"

#include "rpsft/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rpsft {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> items;
    if (trim(s).empty()) {
        return items;
    }
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        items.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return items;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Canonicalizer {
public:
    Canonicalizer(const KeySpec& spec, std::size_t line) : spec_(spec), line_(line) {}

    std::string operator()(std::string_view value) const {
        switch (spec_.type) {
        case KeyType::real:
            return format_real(real(value));
        case KeyType::integer:
            return std::to_string(integer(value));
        case KeyType::unsigned64:
            return std::to_string(unsigned64(value));
        case KeyType::boolean:
            return boolean(value) ? "true" : "false";
        case KeyType::text:
            return text(value);
        case KeyType::rank:
            return value == "auto" ? std::string("auto") : std::to_string(integer(value));
        case KeyType::real_list:
        case KeyType::integer_list:
        case KeyType::text_list: {
            std::string out;
            for (auto item : split_list(value)) {
                if (item.empty()) {
                    fail("empty list item");
                }
                out += out.empty() ? "" : ",";
                out += spec_.type == KeyType::real_list      ? format_real(real(item))
                       : spec_.type == KeyType::integer_list ? std::to_string(integer(item))
                                                             : text(item);
            }
            return out;
        }
        }
        return std::string(value);
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(spec_.key, line_, what); }

    void check_range(double v) const {
        if (spec_.min && (spec_.above_min ? !(v > *spec_.min) : !(v >= *spec_.min))) {
            fail("value " + format_real(v) + " must be " + (spec_.above_min ? "> " : ">= ") + format_real(*spec_.min));
        }
        if (spec_.max && !(v <= *spec_.max)) {
            fail("value " + format_real(v) + " must be <= " + format_real(*spec_.max));
        }
    }

    double real(std::string_view s) const {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
            fail("expected a finite number, got '" + std::string(s) + "'");
        }
        check_range(v);
        return v;
    }

    std::int64_t integer(std::string_view s) const {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            fail("expected an integer, got '" + std::string(s) + "'");
        }
        check_range(static_cast<double>(v));
        return v;
    }

    std::uint64_t unsigned64(std::string_view s) const {
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            fail("expected an unsigned 64-bit integer, got '" + std::string(s) + "'");
        }
        return v;
    }

    bool boolean(std::string_view s) const {
        if (s == "true" || s == "1") {
            return true;
        }
        if (s == "false" || s == "0") {
            return false;
        }
        fail("expected true or false, got '" + std::string(s) + "'");
    }

    std::string text(std::string_view s) const {
        if (!spec_.choices.empty()) {
            for (const auto& c : spec_.choices) {
                if (s == c) {
                    return c;
                }
            }
            std::string allowed;
            for (const auto& c : spec_.choices) {
                allowed += (allowed.empty() ? "" : ", ") + c;
            }
            fail("'" + std::string(s) + "' is not one of " + allowed);
        }
        return std::string(s);
    }

    const KeySpec& spec_;
    std::size_t line_;
};

} // namespace

Config::Config(Schema schema) : schema_(std::move(schema)) {
    for (const auto& spec : schema_) {
        if (values_.count(spec.key) != 0) {
            throw ParameterError("schema lists key " + spec.key + " twice");
        }
        values_[spec.key] = Canonicalizer(spec, 0)(spec.default_value);
    }
}

const KeySpec& Config::spec(const std::string& key) const {
    for (const auto& s : schema_) {
        if (s.key == key) {
            return s;
        }
    }
    throw ParameterError("no config key " + key);
}

const std::string& Config::raw(const std::string& key) const {
    spec(key);
    return values_.at(key);
}

void Config::set(const std::string& key, std::string_view value, std::size_t line) {
    const KeySpec* found = nullptr;
    for (const auto& s : schema_) {
        if (s.key == key) {
            found = &s;
        }
    }
    if (found == nullptr) {
        throw ConfigError(key, line, "unknown key");
    }
    values_[key] = Canonicalizer(*found, line)(trim(value));
}

double Config::real(const std::string& key) const {
    return std::stod(raw(key));
}

std::int64_t Config::integer(const std::string& key) const {
    return std::stoll(raw(key));
}

std::size_t Config::count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) {
        throw ConfigError(key, ConfigError::kResolved, "expected a non-negative count");
    }
    return static_cast<std::size_t>(v);
}

std::uint64_t Config::seed() const {
    return std::stoull(raw("seed"));
}

bool Config::flag(const std::string& key) const {
    return raw(key) == "true";
}

const std::string& Config::text(const std::string& key) const {
    return raw(key);
}

std::vector<double> Config::reals(const std::string& key) const {
    std::vector<double> out;
    for (auto item : split_list(raw(key))) {
        out.push_back(std::stod(std::string(item)));
    }
    return out;
}

std::vector<std::size_t> Config::counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (auto item : split_list(raw(key))) {
        const auto v = std::stoll(std::string(item));
        if (v < 0) {
            throw ConfigError(key, ConfigError::kResolved, "expected non-negative counts");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::vector<std::string> Config::texts(const std::string& key) const {
    std::vector<std::string> out;
    for (auto item : split_list(raw(key))) {
        out.emplace_back(item);
    }
    return out;
}

std::optional<std::size_t> Config::rank(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "auto") {
        return std::nullopt;
    }
    return count(key);
}

std::vector<std::string> Config::lines() const {
    std::vector<std::string> out;
    for (const auto& s : schema_) {
        out.push_back(s.key + " = " + values_.at(s.key));
    }
    return out;
}

Config parse_config(const Schema& schema, std::string_view text, const std::vector<std::string>& overrides) {
    Config config(schema);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError(std::string(line), line_no, "expected key = value");
            }
            const std::string key(trim(line.substr(0, eq)));
            if (key.empty()) {
                throw ConfigError("", line_no, "missing key before '='");
            }
            config.set(key, line.substr(eq + 1), line_no);
        }
        if (end == std::string_view::npos) {
            break;
        }
        start = end + 1;
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(o, 0, "override must look like key=value");
        }
        config.set(std::string(trim(std::string_view(o).substr(0, eq))), std::string_view(o).substr(eq + 1), 0);
    }
    return config;
}

Config load_config(const Schema& schema, const std::optional<std::filesystem::path>& path,
                   const std::vector<std::string>& overrides) {
    std::string text;
    if (path) {
        std::ifstream f(*path);
        if (!f) {
            throw IoError("cannot read config " + path->string());
        }
        std::ostringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    return parse_config(schema, text, overrides);
}

} // namespace rpsft
