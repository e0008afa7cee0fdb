#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iterator>
#include <sstream>

namespace taskbench::cli {

/// --config reader: a flat JSON object, or CLI11's TOML/INI syntax otherwise.
/// Keys are the long option names of the subcommand.
class JsonOrTomlConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        const std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || text[first] != '{') {
            std::istringstream toml(text);
            return CLI::ConfigTOML::from_config(toml);
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
        }
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : j.items()) {
            CLI::ConfigItem item;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(key, v));
            } else {
                item.inputs.push_back(scalar(key, value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    static std::string scalar(const std::string& key, const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConversionError("config key '" + key + "' must be a string, number, boolean or list of those");
    }
};

}  // namespace taskbench::cli
