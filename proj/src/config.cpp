#include "cnnucb/config.hpp"

#include "cnnucb/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cnnucb {

Algorithm parse_algorithm(const std::string& name) {
    if (name == "cnn-ucb") return Algorithm::cnn_ucb;
    if (name == "fc-ucb") return Algorithm::fc_ucb;
    if (name == "linucb") return Algorithm::linucb;
    if (name == "kernelucb") return Algorithm::kernelucb;
    if (name == "random") return Algorithm::random;
    throw ConfigError("unknown algorithm '" + name +
                      "' (expected cnn-ucb, fc-ucb, linucb, kernelucb or random)");
}

std::string to_string(Algorithm a) {
    switch (a) {
    case Algorithm::cnn_ucb: return "cnn-ucb";
    case Algorithm::fc_ucb: return "fc-ucb";
    case Algorithm::linucb: return "linucb";
    case Algorithm::kernelucb: return "kernelucb";
    case Algorithm::random: return "random";
    }
    return "?";
}

DatasetKind parse_dataset_kind(const std::string& name) {
    if (name == "mnist") return DatasetKind::mnist;
    if (name == "notmnist") return DatasetKind::notmnist;
    if (name == "cifar10") return DatasetKind::cifar10;
    if (name == "synthetic") return DatasetKind::synthetic;
    throw ConfigError("unknown dataset '" + name + "' (expected mnist, notmnist, cifar10 or synthetic)");
}

std::string to_string(DatasetKind d) {
    switch (d) {
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::notmnist: return "notmnist";
    case DatasetKind::cifar10: return "cifar10";
    case DatasetKind::synthetic: return "synthetic";
    }
    return "?";
}

namespace {

PrecisionChoice parse_precision_choice(const std::string& s) {
    if (s == "auto") return PrecisionChoice::automatic;
    if (s == "full") return PrecisionChoice::full;
    if (s == "diagonal") return PrecisionChoice::diagonal;
    throw ConfigError("unknown precision '" + s + "' (expected auto, full or diagonal)");
}

std::string to_string(PrecisionChoice p) {
    switch (p) {
    case PrecisionChoice::automatic: return "auto";
    case PrecisionChoice::full: return "full";
    case PrecisionChoice::diagonal: return "diagonal";
    }
    return "?";
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& s) {
    Int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

struct Field {
    const char* section;
    const char* key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define DOUBLE_FIELD(sec, name, member)                                                          \
    Field {                                                                                      \
        sec, name, [](const ExperimentConfig& c) { return fmt(c.member); },                      \
            [](ExperimentConfig& c, const std::string& v) { c.member = parse_double(name, v); } \
    }
#define SIZE_FIELD(sec, name, member)                                                           \
    Field {                                                                                     \
        sec, name, [](const ExperimentConfig& c) { return std::to_string(c.member); },          \
            [](ExperimentConfig& c, const std::string& v) {                                     \
                c.member = parse_int<decltype(c.member)>(name, v);                              \
            }                                                                                   \
    }
#define BOOL_FIELD(sec, name, member)                                                           \
    Field {                                                                                     \
        sec, name, [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }, \
            [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(name, v); }   \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"experiment", "dataset", [](const ExperimentConfig& c) { return to_string(c.dataset); },
         [](ExperimentConfig& c, const std::string& v) { c.dataset = parse_dataset_kind(v); }},
        {"experiment", "synthetic_kind",
         [](const ExperimentConfig& c) { return to_string(c.synthetic_kind); },
         [](ExperimentConfig& c, const std::string& v) {
             c.synthetic_kind = parse_synthetic_kind(v);
         }},
        {"experiment", "data_dir", [](const ExperimentConfig& c) { return c.data_dir.string(); },
         [](ExperimentConfig& c, const std::string& v) { c.data_dir = v; }},
        {"experiment", "images", [](const ExperimentConfig& c) { return c.images; },
         [](ExperimentConfig& c, const std::string& v) { c.images = v; }},
        {"experiment", "labels", [](const ExperimentConfig& c) { return c.labels; },
         [](ExperimentConfig& c, const std::string& v) { c.labels = v; }},
        {"experiment", "cifar_batches",
         [](const ExperimentConfig& c) { return join(c.cifar_batches); },
         [](ExperimentConfig& c, const std::string& v) { c.cifar_batches = split_list(v); }},
        SIZE_FIELD("experiment", "rounds", rounds),
        SIZE_FIELD("experiment", "repeats", repeats),
        SIZE_FIELD("experiment", "seed", seed),
        {"experiment", "algorithms",
         [](const ExperimentConfig& c) {
             std::vector<std::string> names;
             for (auto a : c.algorithms) names.push_back(to_string(a));
             return join(names);
         },
         [](ExperimentConfig& c, const std::string& v) {
             c.algorithms.clear();
             for (const auto& n : split_list(v)) c.algorithms.push_back(parse_algorithm(n));
         }},
        BOOL_FIELD("experiment", "timing", timing),
        BOOL_FIELD("experiment", "logdet_report", logdet_report),

        SIZE_FIELD("cnn", "layers", cnn_layers),
        SIZE_FIELD("cnn", "channels", cnn_channels),
        SIZE_FIELD("cnn", "kernel", cnn_kernel),
        {"cnn", "activation", [](const ExperimentConfig& c) { return to_string(c.activation); },
         [](ExperimentConfig& c, const std::string& v) { c.activation = parse_activation(v); }},

        SIZE_FIELD("fc", "depth", fc_depth),
        SIZE_FIELD("fc", "width", fc_width),

        DOUBLE_FIELD("bandit", "lambda", lambda),
        DOUBLE_FIELD("bandit", "eta", eta),
        DOUBLE_FIELD("bandit", "delta", explore.delta),
        DOUBLE_FIELD("bandit", "nu", explore.nu),
        DOUBLE_FIELD("bandit", "s_bar", explore.s_bar),
        {"bandit", "mode", [](const ExperimentConfig& c) { return to_string(c.explore.mode); },
         [](ExperimentConfig& c, const std::string& v) {
             c.explore.mode = parse_explore_mode(v);
         }},
        DOUBLE_FIELD("bandit", "c0", explore.constants.c0),
        DOUBLE_FIELD("bandit", "c1", explore.constants.c1),
        DOUBLE_FIELD("bandit", "c2", explore.constants.c2),
        {"bandit", "precision", [](const ExperimentConfig& c) { return to_string(c.precision); },
         [](ExperimentConfig& c, const std::string& v) {
             c.precision = parse_precision_choice(v);
         }},
        SIZE_FIELD("bandit", "full_precision_max_dim", full_precision_max_dim),

        SIZE_FIELD("training", "k_threshold", k_threshold),
        SIZE_FIELD("training", "k_after", k_after),
        SIZE_FIELD("training", "k_max", k_max),
        BOOL_FIELD("training", "warm_start", warm_start),
        SIZE_FIELD("training", "batch_size", batch_size),

        SIZE_FIELD("synthetic", "arms", synthetic_arms),
        SIZE_FIELD("synthetic", "dim", synthetic_dim),
        DOUBLE_FIELD("synthetic", "noise", synthetic_noise),

        {"linucb", "alpha",
         [](const ExperimentConfig& c) {
             return c.linucb_alpha ? fmt(*c.linucb_alpha) : std::string("default");
         },
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "default") c.linucb_alpha.reset();
             else c.linucb_alpha = parse_double("alpha", v);
         }},

        {"kernelucb", "gamma",
         [](const ExperimentConfig& c) {
             return c.kernel_gamma ? fmt(*c.kernel_gamma) : std::string("median");
         },
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "median") c.kernel_gamma.reset();
             else c.kernel_gamma = parse_double("gamma", v);
         }},
        DOUBLE_FIELD("kernelucb", "beta", kernel_beta),
        SIZE_FIELD("kernelucb", "capacity", kernel_capacity),
    };
    return table;
}

#undef DOUBLE_FIELD
#undef SIZE_FIELD
#undef BOOL_FIELD

} // namespace

void ExperimentConfig::validate() const {
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (algorithms.empty()) throw ConfigError("no algorithms selected");
    if (cnn_layers < 1 || cnn_channels < 1 || cnn_kernel < 1)
        throw ConfigError("cnn layers, channels and kernel must be >= 1");
    if (fc_depth < 2 || fc_width < 1) throw ConfigError("fc depth must be >= 2 and width >= 1");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    explore.validate();
    if (dataset == DatasetKind::synthetic) {
        if (synthetic_arms < 1 || synthetic_dim < 1)
            throw ConfigError("synthetic arms and dim must be >= 1");
        if (!(synthetic_noise >= 0.0)) throw ConfigError("synthetic noise must be >= 0");
    }
    if (linucb_alpha && !(*linucb_alpha >= 0.0)) throw ConfigError("linucb alpha must be >= 0");
    if (kernel_gamma && !(*kernel_gamma > 0.0)) throw ConfigError("kernel gamma must be positive");
    if (!(kernel_beta >= 0.0)) throw ConfigError("kernel beta must be >= 0");
    if (kernel_capacity < 1) throw ConfigError("kernel capacity must be >= 1");
}

std::filesystem::path ExperimentConfig::resolved_data_dir() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("CNNUCB_DATA_DIR"); env && *env) return env;
    return "data";
}

std::size_t ExperimentConfig::k_schedule(std::size_t t) const {
    const std::size_t k = t <= k_threshold ? t : k_after;
    return k_max ? std::min(k, k_max) : k;
}

PrecisionMode ExperimentConfig::precision_for(std::size_t d) const {
    switch (precision) {
    case PrecisionChoice::full: return PrecisionMode::full;
    case PrecisionChoice::diagonal: return PrecisionMode::diagonal;
    case PrecisionChoice::automatic: break;
    }
    return d <= full_precision_max_dim ? PrecisionMode::full : PrecisionMode::diagonal;
}

ExperimentConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    std::map<std::string, const Field*> by_name;
    for (const auto& f : fields()) by_name[std::string(f.section) + "." + f.key] = &f;

    ExperimentConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config: key '" + section + "' outside a [section]");
        for (const auto& [key, value] : body) {
            const auto it = by_name.find(section + "." + key);
            if (it == by_name.end())
                throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
            std::string v = value.get_value<std::string>();
            if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
            it->second->set(cfg, v);
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
    std::string section;
    for (const auto& f : fields()) {
        if (section != f.section) {
            if (!section.empty()) out << '\n';
            section = f.section;
            out << '[' << section << "]\n";
        }
        out << f.key << " = " << f.get(cfg) << '\n';
    }
}

} // namespace cnnucb
