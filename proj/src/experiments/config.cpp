#include <fstream>
#include <regex>
#include <sstream>

#include "recipes.hpp"

namespace cmalab {

namespace {

std::string where(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Overlays `user` on `def`. Keys absent from the defaults are rejected and
// scalar types must match; floats are stored as doubles so that resolving a
// resolved document reproduces it byte for byte.
Json merge(const Json& def, const Json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError(path.empty() ? "config must be a JSON object" : "'" + path + "' must be an object");
    Json out = def;
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string& key = it.key();
        const std::string at = where(path, key);
        if (!def.contains(key)) throw ConfigError("unknown key '" + at + "'");
        const Json& d = def[key];
        const Json& u = it.value();
        if (key == "params") {
            if (!u.is_object()) throw ConfigError("'" + at + "' must be an object of numbers");
            for (auto p = u.begin(); p != u.end(); ++p)
                if (!p.value().is_number() || p.value().is_boolean())
                    throw ConfigError("'" + where(at, p.key()) + "' must be a number");
            out[key] = u;
        } else if (d.is_object()) {
            out[key] = merge(d, u, at);
        } else if (d.is_null()) {
            if (!(u.is_null() || (u.is_number() && !u.is_boolean()))) throw ConfigError("'" + at + "' must be a number or null");
            out[key] = u.is_null() ? Json() : Json(u.get<double>());
        } else if (d.is_number_integer()) {
            if (!u.is_number_integer() || u.get<long long>() < 0) throw ConfigError("'" + at + "' must be a non-negative integer");
            out[key] = u.get<long long>();
        } else if (d.is_number()) {
            if (!u.is_number() || u.is_boolean()) throw ConfigError("'" + at + "' must be a number");
            out[key] = u.get<double>();
        } else if (d.is_string()) {
            if (!u.is_string()) throw ConfigError("'" + at + "' must be a string");
            out[key] = u;
        } else if (d.is_boolean()) {
            if (!u.is_boolean()) throw ConfigError("'" + at + "' must be true or false");
            out[key] = u;
        } else if (d.is_array()) {
            if (!u.is_array()) throw ConfigError("'" + at + "' must be an array");
            out[key] = u;
        }
    }
    return out;
}

}  // namespace

ExperimentConfig resolve_config(const Json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (!doc.contains("recipe") || !doc["recipe"].is_string()) throw ConfigError("missing string key 'recipe'");
    if (!doc.contains("name") || !doc["name"].is_string()) throw ConfigError("missing string key 'name'");
    const std::string recipe = doc["recipe"].get<std::string>();
    const detail::Recipe* rec = nullptr;
    try {
        rec = &detail::find_recipe(recipe);
    } catch (const std::out_of_range&) {
        throw ConfigError("unknown recipe '" + recipe + "'");
    }
    const std::string name = doc["name"].get<std::string>();
    static const std::regex safe("[A-Za-z0-9][A-Za-z0-9._-]*");
    if (!std::regex_match(name, safe)) throw ConfigError("name must match [A-Za-z0-9][A-Za-z0-9._-]*");

    Json def = {{"name", ""}, {"recipe", ""}, {"output_root", ""}};
    for (auto it = rec->defaults.begin(); it != rec->defaults.end(); ++it) def[it.key()] = it.value();
    Json cfg = merge(def, doc, "");
    try {
        rec->validate(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return {name, recipe, std::move(cfg)};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Json doc;
    try {
        doc = Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return resolve_config(doc);
}

std::vector<RecipeInfo> list_recipes() {
    std::vector<RecipeInfo> out;
    for (const auto& r : detail::recipe_registry()) out.push_back({r.name, r.description});
    return out;
}

std::string recipe_table() {
    std::size_t width = 0;
    for (const auto& r : list_recipes()) width = std::max(width, r.name.size());
    std::string out;
    for (const auto& r : list_recipes()) out += r.name + std::string(width - r.name.size() + 2, ' ') + r.description + "\n";
    return out;
}

}  // namespace cmalab
