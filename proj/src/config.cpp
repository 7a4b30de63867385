#include "prunekit/config.hpp"

#include <cstdio>
#include <fstream>

#include "prunekit/tensor.hpp"

namespace prunekit {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v, int lo, int hi) {
    size_t pos = 0;
    long n = 0;
    try {
        n = std::stol(v, &pos);
    } catch (...) {
        fail("bad value for " + key + ": '" + v + "'");
    }
    check(pos == v.size(), "bad value for " + key + ": '" + v + "'");
    check(n >= lo && n <= hi, key + " out of range: " + v);
    return static_cast<int>(n);
}

std::uint32_t parse_seed(const std::string& key, const std::string& v) {
    size_t pos = 0;
    unsigned long n = 0;
    try {
        n = std::stoul(v, &pos);
    } catch (...) {
        fail("bad value for " + key + ": '" + v + "'");
    }
    check(pos == v.size() && n <= 0xffffffffUL, "bad value for " + key + ": '" + v + "'");
    return static_cast<std::uint32_t>(n);
}

double parse_real(const std::string& key, const std::string& v, double lo, double hi) {
    size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (...) {
        fail("bad value for " + key + ": '" + v + "'");
    }
    check(pos == v.size(), "bad value for " + key + ": '" + v + "'");
    check(d >= lo && d <= hi, key + " out of range: " + v);
    return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("bad value for " + key + ": '" + v + "' (expected true or false)");
}

} // namespace

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "arch") cfg.arch = value;
    else if (key == "classes") cfg.classes = parse_int(key, value, 2, 256);
    else if (key == "train_per_class") cfg.train_per_class = parse_int(key, value, 1, 1000000);
    else if (key == "eval_per_class") cfg.eval_per_class = parse_int(key, value, 1, 1000000);
    else if (key == "data_seed") cfg.data_seed = parse_seed(key, value);
    else if (key == "seed") cfg.seed = parse_seed(key, value);
    else if (key == "batch") cfg.batch = parse_int(key, value, 1, 65536);
    else if (key == "epochs") cfg.epochs = parse_int(key, value, 0, 100000);
    else if (key == "lr") cfg.lr = static_cast<float>(parse_real(key, value, 1e-12, 1e6));
    else if (key == "momentum") cfg.momentum = static_cast<float>(parse_real(key, value, 0.0, 1.0));
    else if (key == "weight_decay") cfg.weight_decay = static_cast<float>(parse_real(key, value, 0.0, 1.0));
    else if (key == "criterion") cfg.criterion = value;
    else if (key == "keep_ratio") cfg.keep_ratio = parse_real(key, value, 1e-9, 1.0);
    else if (key == "bins") cfg.bins = parse_int(key, value, 2, 1000000);
    else if (key == "strategy") cfg.strategy = value;
    else if (key == "quick_epochs") cfg.quick_epochs = parse_int(key, value, 0, 100000);
    else if (key == "adaptive_quick") cfg.adaptive_quick = parse_bool(key, value);
    else if (key == "quick_extra_drop") cfg.quick_extra_drop = parse_real(key, value, 0.0, 100.0);
    else if (key == "quick_lr") cfg.quick_lr = static_cast<float>(parse_real(key, value, 1e-12, 1e6));
    else if (key == "careful_epochs") cfg.careful_epochs = parse_int(key, value, 0, 100000);
    else if (key == "stats_per_class") cfg.stats_per_class = parse_int(key, value, 1, 1000000);
    else fail("unknown config key '" + key + "'");
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream f(path);
    check(f.good(), "cannot read config " + path);
    std::string line;
    int ln = 0;
    while (std::getline(f, line)) {
        ++ln;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        check(eq != std::string::npos,
              path + ":" + std::to_string(ln) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        check(!key.empty() && !value.empty(),
              path + ":" + std::to_string(ln) + ": expected key = value");
        try {
            apply_config_kv(base, key, value);
        } catch (const std::exception& e) {
            fail(path + ":" + std::to_string(ln) + ": " + e.what());
        }
    }
    return base;
}

std::string config_text(const RunConfig& c) {
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "arch = %s\n"
                  "classes = %d\n"
                  "train_per_class = %d\n"
                  "eval_per_class = %d\n"
                  "data_seed = %u\n"
                  "seed = %u\n"
                  "batch = %d\n"
                  "epochs = %d\n"
                  "lr = %g\n"
                  "momentum = %g\n"
                  "weight_decay = %g\n"
                  "criterion = %s\n"
                  "keep_ratio = %g\n"
                  "bins = %d\n"
                  "strategy = %s\n"
                  "quick_epochs = %d\n"
                  "adaptive_quick = %s\n"
                  "quick_extra_drop = %g\n"
                  "quick_lr = %g\n"
                  "careful_epochs = %d\n"
                  "stats_per_class = %d\n",
                  c.arch.c_str(), c.classes, c.train_per_class, c.eval_per_class,
                  c.data_seed, c.seed, c.batch, c.epochs, static_cast<double>(c.lr),
                  static_cast<double>(c.momentum), static_cast<double>(c.weight_decay),
                  c.criterion.c_str(), c.keep_ratio, c.bins, c.strategy.c_str(),
                  c.quick_epochs, c.adaptive_quick ? "true" : "false", c.quick_extra_drop,
                  static_cast<double>(c.quick_lr), c.careful_epochs, c.stats_per_class);
    return buf;
}

} // namespace prunekit
