#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "transnet/tensor.hpp"

// Line-based config files: `key = value` entries under `[section]` headers,
// `#` comments. Consumers bind every key they understand and then call
// finish(), which fails fast on anything left over.

namespace transnet {

class ConfigReader {
public:
    static ConfigReader from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw format_error("cannot open config file: " + path);
        std::stringstream ss;
        ss << is.rdbuf();
        return from_string(ss.str(), path);
    }

    static ConfigReader from_string(const std::string& text, const std::string& origin = "<string>") {
        ConfigReader r;
        r.origin_ = origin;
        std::string section;
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::string t = trim(strip_comment(line));
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw format_error(origin + ":" + std::to_string(lineno) + ": unterminated section header");
                section = trim(t.substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw format_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw format_error(origin + ":" + std::to_string(lineno) + ": empty key");
            if (!r.values_.emplace(section + "." + key, value).second)
                throw format_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                                   section + "." + key + "'");
        }
        return r;
    }

    bool has(const std::string& section, const std::string& key) const {
        return values_.count(section + "." + key) > 0;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        consumed_.insert(it->first);
        return it->second;
    }

    int get_int(const std::string& section, const std::string& key, int fallback) {
        return parse<int>(section, key, fallback);
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) {
        return parse<std::uint64_t>(section, key, fallback);
    }

    double get_double(const std::string& section, const std::string& key, double fallback) {
        return parse<double>(section, key, fallback);
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        consumed_.insert(it->first);
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw input_error(origin_ + ": key '" + it->first + "' expects a boolean, got '" +
                          it->second + "'");
    }

    std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                  std::vector<int> fallback) {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        consumed_.insert(it->first);
        std::vector<int> out;
        std::string item;
        std::istringstream is(it->second);
        while (std::getline(is, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw input_error(origin_ + ": key '" + it->first + "' has a non-integer item '" +
                                  item + "'");
            }
        }
        return out;
    }

    /// Unknown keys are errors.
    void finish() const {
        std::vector<std::string> unknown;
        for (const auto& [key, value] : values_)
            if (!consumed_.count(key)) unknown.push_back(key);
        if (!unknown.empty()) {
            std::string msg = origin_ + ": unknown config key(s):";
            for (const std::string& k : unknown) msg += " '" + k + "'";
            throw input_error(msg);
        }
    }

private:
    template <typename T>
    T parse(const std::string& section, const std::string& key, T fallback) {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        consumed_.insert(it->first);
        std::istringstream is(it->second);
        T v{};
        if (!(is >> v) || !(is >> std::ws).eof())
            throw input_error(origin_ + ": key '" + it->first + "' has malformed value '" +
                              it->second + "'");
        return v;
    }

    static std::string strip_comment(const std::string& s) {
        const auto pos = s.find('#');
        return pos == std::string::npos ? s : s.substr(0, pos);
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::string origin_;
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

}  // namespace transnet
