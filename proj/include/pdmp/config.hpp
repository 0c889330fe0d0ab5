#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/common.hpp"

namespace pdmp {

// Experiment configuration: sections of key = value lines. Storage is sorted,
// so serialize() is canonical and parse/serialize round-trips bit-identically.
class Config {
  public:
    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (t.front() == '[') {
                if (t.back() != ']' || t.size() < 3)
                    throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
                section = trim(t.substr(1, t.size() - 2));
                cfg.sections_[section];
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            cfg.sections_[section][key] = value;
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }

    std::string serialize() const {
        std::ostringstream out;
        bool first = true;
        for (const auto& [section, entries] : sections_) {
            if (!first) out << "\n";
            first = false;
            out << "[" << section << "]\n";
            for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
        }
        return out.str();
    }

    std::uint64_t hash() const {
        const std::string s = serialize();
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ull;
        }
        return h;
    }

    bool has(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    std::string get(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        if (s == sections_.end() || !s->second.count(key))
            throw ConfigError("missing config key [" + section + "] " + key);
        return s->second.at(key);
    }

    std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const {
        return has(section, key) ? get(section, key) : fallback;
    }

    double number(const std::string& section, const std::string& key) const {
        return to_number(get(section, key), section, key);
    }

    double number_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? number(section, key) : fallback;
    }

    long integer(const std::string& section, const std::string& key) const {
        const double v = number(section, key);
        const long n = static_cast<long>(v);
        if (static_cast<double>(n) != v)
            throw ConfigError("config key [" + section + "] " + key + " must be an integer");
        return n;
    }

    long integer_or(const std::string& section, const std::string& key, long fallback) const {
        return has(section, key) ? integer(section, key) : fallback;
    }

    // whitespace-separated list of numbers
    std::vector<double> numbers(const std::string& section, const std::string& key) const {
        std::istringstream in(get(section, key));
        std::vector<double> out;
        std::string tok;
        while (in >> tok) out.push_back(to_number(tok, section, key));
        return out;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        sections_[section][key] = value;
    }

    const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

  private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static double to_number(const std::string& s, const std::string& section, const std::string& key) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key + ": not a number: " + s);
        }
    }

    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace pdmp
