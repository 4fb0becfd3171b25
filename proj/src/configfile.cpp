// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/configfile.hpp"

#include <fstream>
#include <sstream>

#include "clgt/common.hpp"

namespace clgt {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValueError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ValueError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = val;
    }
    return out;
}

ConfigMap read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const ConfigMap& cfg) {
    std::ostringstream out;
    for (const auto& [k, v] : cfg) out << k << " = " << v << "\n";
    return out.str();
}

void apply_override(ConfigMap& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ValueError("override must be key=value, got: " + assignment);
    std::string key = trim(assignment.substr(0, eq));
    cfg[key] = trim(assignment.substr(eq + 1));
}

}  // namespace clgt
