#include "frh/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace frh {
namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::string fmt_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::string fmt_stages(const std::array<bool, 4>& stages) {
    std::string s;
    for (int i = 0; i < 4; ++i) {
        if (!stages[static_cast<std::size_t>(i)]) continue;
        if (!s.empty()) s += ",";
        s += std::to_string(i + 1);
    }
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config line " + std::to_string(line) + ": bad boolean '" + v + "'");
}

double parse_double(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::runtime_error("config line " + std::to_string(line) + ": bad number '" + v + "'");
    }
}

int parse_int(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const int i = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return i;
    } catch (...) {
        throw std::runtime_error("config line " + std::to_string(line) + ": bad integer '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const unsigned long long i = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return i;
    } catch (...) {
        throw std::runtime_error("config line " + std::to_string(line) + ": bad integer '" + v + "'");
    }
}

std::vector<int> parse_ints(const std::string& v, int line) {
    std::vector<int> out;
    if (trim(v).empty()) return out;
    std::istringstream is(v);
    std::string cell;
    while (std::getline(is, cell, ',')) out.push_back(parse_int(trim(cell), line));
    return out;
}

std::array<bool, 4> parse_stages(const std::string& v, int line) {
    std::array<bool, 4> stages = {false, false, false, false};
    for (int s : parse_ints(v, line)) {
        if (s < 1 || s > 4)
            throw std::runtime_error("config line " + std::to_string(line) +
                                     ": stage index out of range");
        stages[static_cast<std::size_t>(s - 1)] = true;
    }
    return stages;
}

}  // namespace

std::string config_to_string(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "[trainer]\n"
       << "epochs = " << cfg.epochs << "\n"
       << "batch_size = " << cfg.batch_size << "\n"
       << "base_lr = " << fmt(cfg.base_lr) << "\n"
       << "decay_epochs = " << fmt_ints(cfg.decay_epochs) << "\n"
       << "decay_factor = " << fmt(cfg.decay_factor) << "\n"
       << "warmup_epochs = " << cfg.warmup_epochs << "\n"
       << "momentum = " << fmt(cfg.momentum) << "\n"
       << "weight_decay = " << fmt(cfg.weight_decay) << "\n"
       << "seed = " << cfg.seed << "\n"
       << "frames = " << cfg.frames << "\n"
       << "eval_fraction = " << fmt(cfg.eval_fraction) << "\n"
       << "modality = " << modality_to_string(cfg.modality) << "\n"
       << "precision = " << cfg.precision << "\n"
       << "determinism = " << fmt(cfg.determinism) << "\n"
       << "record_steps = " << fmt(cfg.record_steps) << "\n"
       << "ablation_cl_loss = " << fmt(cfg.ablation.cl_loss) << "\n"
       << "ablation_st_decouple = " << fmt(cfg.ablation.st_decouple) << "\n"
       << "ablation_multi_level = " << fmt(cfg.ablation.multi_level) << "\n"
       << "\n[backbone]\n"
       << "joints = " << cfg.backbone.joints << "\n"
       << "classes = " << cfg.backbone.classes << "\n"
       << "base_channels = " << cfg.backbone.base_channels << "\n"
       << "temporal_kernel = " << cfg.backbone.temporal_kernel << "\n"
       << "temporal_kernel_2 = " << cfg.backbone.temporal_kernel_2 << "\n"
       << "\n[head]\n"
       << "hidden = " << cfg.head.hidden << "\n"
       << "temperature = " << fmt(cfg.head.temperature) << "\n"
       << "ema_alpha = " << fmt(cfg.head.ema_alpha) << "\n"
       << "lambda1 = " << fmt(cfg.head.lambdas[0]) << "\n"
       << "lambda2 = " << fmt(cfg.head.lambdas[1]) << "\n"
       << "lambda3 = " << fmt(cfg.head.lambdas[2]) << "\n"
       << "lambda4 = " << fmt(cfg.head.lambdas[3]) << "\n"
       << "w_cl = " << fmt(cfg.head.w_cl) << "\n"
       << "stages = " << fmt_stages(cfg.head.enabled_stages) << "\n"
       << "tp_only_anchors = " << fmt(cfg.head.tp_only_anchors) << "\n";
    return os.str();
}

void write_config(const std::string& path, const TrainConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << config_to_string(cfg);
    if (!os) throw std::runtime_error("write failed: " + path);
}

TrainConfig parse_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        std::string s = trim(raw);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw std::runtime_error("config line " + std::to_string(line) +
                                         ": unterminated section header");
            section = s.substr(1, s.size() - 2);
            if (section != "trainer" && section != "backbone" && section != "head")
                throw std::runtime_error("config line " + std::to_string(line) +
                                         ": unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line) +
                                     ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string val = trim(s.substr(eq + 1));
        if (section == "trainer") {
            if (key == "epochs") cfg.epochs = parse_int(val, line);
            else if (key == "batch_size") cfg.batch_size = parse_int(val, line);
            else if (key == "base_lr") cfg.base_lr = parse_double(val, line);
            else if (key == "decay_epochs") cfg.decay_epochs = parse_ints(val, line);
            else if (key == "decay_factor") cfg.decay_factor = parse_double(val, line);
            else if (key == "warmup_epochs") cfg.warmup_epochs = parse_int(val, line);
            else if (key == "momentum") cfg.momentum = parse_double(val, line);
            else if (key == "weight_decay") cfg.weight_decay = parse_double(val, line);
            else if (key == "seed") cfg.seed = parse_u64(val, line);
            else if (key == "frames") cfg.frames = parse_int(val, line);
            else if (key == "eval_fraction") cfg.eval_fraction = parse_double(val, line);
            else if (key == "modality") cfg.modality = modality_from_string(val);
            else if (key == "precision") cfg.precision = val;
            else if (key == "determinism") cfg.determinism = parse_bool(val, line);
            else if (key == "record_steps") cfg.record_steps = parse_bool(val, line);
            else if (key == "ablation_cl_loss") cfg.ablation.cl_loss = parse_bool(val, line);
            else if (key == "ablation_st_decouple") cfg.ablation.st_decouple = parse_bool(val, line);
            else if (key == "ablation_multi_level") cfg.ablation.multi_level = parse_bool(val, line);
            else throw std::runtime_error("config line " + std::to_string(line) +
                                          ": unknown trainer key '" + key + "'");
        } else if (section == "backbone") {
            if (key == "joints") cfg.backbone.joints = parse_int(val, line);
            else if (key == "classes") cfg.backbone.classes = parse_int(val, line);
            else if (key == "base_channels") cfg.backbone.base_channels = parse_int(val, line);
            else if (key == "temporal_kernel") cfg.backbone.temporal_kernel = parse_int(val, line);
            else if (key == "temporal_kernel_2") cfg.backbone.temporal_kernel_2 = parse_int(val, line);
            else throw std::runtime_error("config line " + std::to_string(line) +
                                          ": unknown backbone key '" + key + "'");
        } else if (section == "head") {
            if (key == "hidden") cfg.head.hidden = parse_int(val, line);
            else if (key == "temperature") cfg.head.temperature = parse_double(val, line);
            else if (key == "ema_alpha") cfg.head.ema_alpha = parse_double(val, line);
            else if (key == "lambda1") cfg.head.lambdas[0] = parse_double(val, line);
            else if (key == "lambda2") cfg.head.lambdas[1] = parse_double(val, line);
            else if (key == "lambda3") cfg.head.lambdas[2] = parse_double(val, line);
            else if (key == "lambda4") cfg.head.lambdas[3] = parse_double(val, line);
            else if (key == "w_cl") cfg.head.w_cl = parse_double(val, line);
            else if (key == "stages") cfg.head.enabled_stages = parse_stages(val, line);
            else if (key == "tp_only_anchors") cfg.head.tp_only_anchors = parse_bool(val, line);
            else throw std::runtime_error("config line " + std::to_string(line) +
                                          ": unknown head key '" + key + "'");
        } else {
            throw std::runtime_error("config line " + std::to_string(line) +
                                     ": key outside any section");
        }
    }
    return cfg;
}

TrainConfig read_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config(buf.str());
}

}  // namespace frh
