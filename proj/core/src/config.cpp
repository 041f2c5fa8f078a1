#include "srp/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace srp {

void TrainConfig::validate() const {
    if (batch < 1) throw ConfigError("train.batch must be >= 1");
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (lr <= 0) throw ConfigError("train.lr must be positive");
    for (size_t i = 1; i < milestones.size(); ++i)
        if (milestones[i] <= milestones[i - 1])
            throw ConfigError("train.milestones must be strictly increasing");
    if (mixup_alpha <= 0) throw ConfigError("augment.mixup_alpha must be positive");
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

class KvReader {
public:
    explicit KvReader(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string val = trim(line.substr(eq + 1));
            if (key.empty() || val.empty())
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": empty key or value");
            kv_[key] = val;
        }
    }

    bool has(const std::string& key) {
        return kv_.count(key) != 0;
    }
    std::string str(const std::string& key, const std::string& dflt) {
        consumed_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }
    int integer(const std::string& key, int dflt) {
        const std::string s = str(key, std::to_string(dflt));
        try {
            size_t pos;
            int v = std::stoi(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected an integer, got '" + s + "'");
        }
    }
    double real(const std::string& key, double dflt) {
        const std::string s = str(key, std::to_string(dflt));
        try {
            size_t pos;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected a number, got '" + s + "'");
        }
    }
    bool boolean(const std::string& key, bool dflt) {
        const std::string s = str(key, dflt ? "true" : "false");
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError(key + ": expected true/false, got '" + s + "'");
    }
    std::vector<int> int_list(const std::string& key, const std::string& dflt) {
        const std::string s = str(key, dflt);
        std::vector<int> out;
        if (s == "none") return out;
        std::istringstream in(s);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw ConfigError(key + ": expected a comma-separated integer list, got '" + s +
                                  "'");
            }
        }
        return out;
    }

    void reject_unknown() const {
        for (const auto& [key, val] : kv_)
            if (!consumed_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

private:
    std::map<std::string, std::string> kv_;
    std::set<std::string> consumed_;
};

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    KvReader r(text);
    RunConfig cfg;

    cfg.net.depth = r.integer("model.depth", 14);
    cfg.net.widths = r.int_list("model.widths", "16,32,64");
    cfg.net.classes = r.integer("model.classes", 10);

    const std::string attn = r.str("attention.kind", "one");
    if (attn == "none")
        cfg.net.attention = AttentionKind::None;
    else if (attn == "one")
        cfg.net.attention = AttentionKind::One;
    else if (attn == "double")
        cfg.net.attention = AttentionKind::Double;
    else
        throw ConfigError("attention.kind must be none/one/double, got '" + attn + "'");
    cfg.net.reduction = r.integer("attention.reduction", 16);
    cfg.net.fold_filters = r.integer("attention.fold_filters", 4);

    const std::string mode = r.str("srp.mode", "off");
    if (mode == "off")
        cfg.net.srp.mode = SrpMode::Off;
    else if (mode == "ss")
        cfg.net.srp.mode = SrpMode::SS;
    else if (mode == "ms")
        cfg.net.srp.mode = SrpMode::MS;
    else
        throw ConfigError("srp.mode must be off/ss/ms, got '" + mode + "'");
    // Default scale ratio: 0.8 for SS, 0.6 for MS (with M = 5).
    const double lambda_default = cfg.net.srp.mode == SrpMode::MS ? 0.6 : 0.8;
    cfg.net.srp.lambda_target = r.real("srp.lambda", lambda_default);
    cfg.net.srp.regions = r.integer("srp.regions", 5);
    const std::string sched = r.str("srp.schedule", "linear");
    if (sched == "linear")
        cfg.net.srp.schedule = SrpSchedule::LinearDepth;
    else if (sched == "fixed")
        cfg.net.srp.schedule = SrpSchedule::Fixed;
    else
        throw ConfigError("srp.schedule must be linear/fixed, got '" + sched + "'");
    cfg.net.srp.validate();

    cfg.train.epochs = r.integer("train.epochs", cfg.train.epochs);
    cfg.train.batch = r.integer("train.batch", cfg.train.batch);
    cfg.train.lr = r.real("train.lr", cfg.train.lr);
    cfg.train.milestones = r.int_list("train.milestones", "10");
    cfg.train.decay = r.real("train.decay", cfg.train.decay);
    cfg.train.momentum = r.real("train.momentum", cfg.train.momentum);
    cfg.train.weight_decay = r.real("train.weight_decay", cfg.train.weight_decay);
    cfg.train.seed = static_cast<std::uint64_t>(r.integer("train.seed", 1));
    cfg.train.augment.translate = r.boolean("augment.translate", true);
    cfg.train.augment.mirror = r.boolean("augment.mirror", true);
    cfg.train.mixup = r.boolean("augment.mixup", false);
    cfg.train.mixup_alpha = r.real("augment.mixup_alpha", 1.0);
    cfg.train.train_subset = r.integer("data.train_subset", 0);
    cfg.train.test_subset = r.integer("data.test_subset", 0);

    r.reject_unknown();
    cfg.train.validate();
    cfg.net.blocks_per_stage();  // validates depth
    return cfg;
}

RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "model.depth = " << cfg.net.depth << "\n";
    out << "model.widths = ";
    for (size_t i = 0; i < cfg.net.widths.size(); ++i)
        out << (i ? "," : "") << cfg.net.widths[i];
    out << "\n";
    out << "model.classes = " << cfg.net.classes << "\n";
    out << "attention.kind = "
        << (cfg.net.attention == AttentionKind::None
                ? "none"
                : cfg.net.attention == AttentionKind::One ? "one" : "double")
        << "\n";
    out << "attention.reduction = " << cfg.net.reduction << "\n";
    out << "attention.fold_filters = " << cfg.net.fold_filters << "\n";
    out << "srp.mode = "
        << (cfg.net.srp.mode == SrpMode::Off ? "off"
                                             : cfg.net.srp.mode == SrpMode::SS ? "ss" : "ms")
        << "\n";
    out << "srp.lambda = " << cfg.net.srp.lambda_target << "\n";
    out << "srp.regions = " << cfg.net.srp.regions << "\n";
    out << "srp.schedule = "
        << (cfg.net.srp.schedule == SrpSchedule::Fixed ? "fixed" : "linear") << "\n";
    out << "train.epochs = " << cfg.train.epochs << "\n";
    out << "train.batch = " << cfg.train.batch << "\n";
    out << "train.lr = " << cfg.train.lr << "\n";
    out << "train.milestones = ";
    if (cfg.train.milestones.empty()) out << "none";
    for (size_t i = 0; i < cfg.train.milestones.size(); ++i)
        out << (i ? "," : "") << cfg.train.milestones[i];
    out << "\n";
    out << "train.decay = " << cfg.train.decay << "\n";
    out << "train.momentum = " << cfg.train.momentum << "\n";
    out << "train.weight_decay = " << cfg.train.weight_decay << "\n";
    out << "train.seed = " << cfg.train.seed << "\n";
    out << "augment.translate = " << (cfg.train.augment.translate ? "true" : "false") << "\n";
    out << "augment.mirror = " << (cfg.train.augment.mirror ? "true" : "false") << "\n";
    out << "augment.mixup = " << (cfg.train.mixup ? "true" : "false") << "\n";
    out << "augment.mixup_alpha = " << cfg.train.mixup_alpha << "\n";
    out << "data.train_subset = " << cfg.train.train_subset << "\n";
    out << "data.test_subset = " << cfg.train.test_subset << "\n";
    return out.str();
}

}  // namespace srp
