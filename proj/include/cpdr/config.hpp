#pragma once

// Flat key=value run configuration. '#' starts a comment, blank lines are
// skipped, unknown keys are hard errors so a typo cannot silently fall back
// to a default mid-ablation.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpdr/data.hpp"
#include "cpdr/loss.hpp"
#include "cpdr/network.hpp"

namespace cpdr {

struct RunConfig {
    ModelConfig model;
    LossConfig loss;
    double base_lr = 1e-3;
    long warmup_epochs = 5;
    long total_epochs = 20;
    double gamma = 3.0;
    long batch_size = 16;

    void validate() const {
        model.validate();
        loss.validate();
        if (base_lr <= 0.0) throw ConfigError("base_lr must be positive");
        if (gamma < 0.0) throw ConfigError("gamma must be nonnegative");
        if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be nonnegative");
        if (total_epochs < 1) throw ConfigError("total_epochs must be at least 1");
        if (warmup_epochs >= total_epochs)
            throw ConfigError("warmup_epochs must be smaller than total_epochs");
        if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    }
};

namespace configdetail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline long parse_long(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long out = 0;
    try {
        out = std::stol(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + " expects an integer, got '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + " expects an integer, got '" + v + "'");
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + " expects a number, got '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + " expects a number, got '" + v + "'");
    return out;
}

inline std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) parts.push_back(trim(item));
    return parts;
}

inline void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "backbone_widths") {
        const auto parts = split_commas(value);
        if (parts.size() != 3)
            throw ConfigError("backbone_widths expects exactly 3 comma-separated integers");
        for (int i = 0; i < 3; ++i)
            cfg.model.backbone_widths[static_cast<std::size_t>(i)] = parse_long(key, parts[static_cast<std::size_t>(i)]);
    } else if (key == "decoder_width") {
        cfg.model.decoder_width = parse_long(key, value);
    } else if (key == "arch") {
        if (value == "fpn") cfg.model.arch = Arch::FPN;
        else if (value == "unet") cfg.model.arch = Arch::UNET;
        else throw ConfigError("arch must be fpn or unet, got '" + value + "'");
    } else if (key == "refine") {
        if (value == "adf_auf") cfg.model.refine = Refine::ADF_AUF;
        else if (value == "dacf") cfg.model.refine = Refine::DACF;
        else if (value == "none") cfg.model.refine = Refine::NONE;
        else throw ConfigError("refine must be adf_auf, dacf or none, got '" + value + "'");
    } else if (key == "input_h") {
        cfg.model.input_h = parse_long(key, value);
    } else if (key == "input_w") {
        cfg.model.input_w = parse_long(key, value);
    } else if (key == "epsilon") {
        cfg.loss.epsilon = parse_double(key, value);
    } else if (key == "dice_variant") {
        if (value == "standard2x") cfg.loss.dice_variant = DiceVariant::Standard2x;
        else if (value == "verbatim") cfg.loss.dice_variant = DiceVariant::Verbatim;
        else throw ConfigError("dice_variant must be standard2x or verbatim, got '" + value + "'");
    } else if (key == "stage_weights") {
        const auto parts = split_commas(value);
        if (parts.size() != 3)
            throw ConfigError("stage_weights expects exactly 3 comma-separated numbers");
        for (int i = 0; i < 3; ++i)
            cfg.loss.stage_weights[static_cast<std::size_t>(i)] = parse_double(key, parts[static_cast<std::size_t>(i)]);
    } else if (key == "base_lr") {
        cfg.base_lr = parse_double(key, value);
    } else if (key == "warmup_epochs") {
        cfg.warmup_epochs = parse_long(key, value);
    } else if (key == "total_epochs") {
        cfg.total_epochs = parse_long(key, value);
    } else if (key == "gamma") {
        cfg.gamma = parse_double(key, value);
    } else if (key == "batch_size") {
        cfg.batch_size = parse_long(key, value);
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

} // namespace configdetail

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    long lineno = 0;
    for (std::string line; std::getline(ss, line);) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = configdetail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              " is not key=value: '" + line + "'");
        const std::string key = configdetail::trim(line.substr(0, eq));
        const std::string value = configdetail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
        configdetail::apply_key(cfg, key, value);
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    RunConfig cfg = parse_config_text(buffer.str());
    cfg.validate();
    return cfg;
}

// --synthetic takes the same key=value grammar, comma separated on one line;
// unset keys keep the values of the supplied base spec
inline SynthSpec parse_synth_spec(const std::string& text, SynthSpec spec = SynthSpec{}) {
    if (configdetail::trim(text).empty()) return spec;
    for (const std::string& part : configdetail::split_commas(text)) {
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos)
            throw ConfigError("synthetic spec entries are key=value, got '" + part + "'");
        const std::string key = configdetail::trim(part.substr(0, eq));
        const std::string value = configdetail::trim(part.substr(eq + 1));
        if (key == "count") spec.count = configdetail::parse_long(key, value);
        else if (key == "size") spec.size = configdetail::parse_long(key, value);
        else if (key == "max_shapes") spec.max_shapes = configdetail::parse_long(key, value);
        else if (key == "noise") spec.noise = configdetail::parse_double(key, value);
        else if (key == "seed") spec.seed = configdetail::parse_long(key, value);
        else throw ConfigError("unknown synthetic spec key: " + key);
    }
    return spec;
}

} // namespace cpdr
