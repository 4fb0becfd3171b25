// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat dotted-key config text: one `key = value` per line, `#` comments.

#ifndef CLGT_CONFIGFILE_HPP
#define CLGT_CONFIGFILE_HPP

#include <map>
#include <string>

namespace clgt {

using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::string& path);
std::string serialize_config(const ConfigMap& cfg);

// "key=value" override, CLI precedence over file values.
void apply_override(ConfigMap& cfg, const std::string& assignment);

}  // namespace clgt

#endif
