#include "graphmem/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace graphmem {

using nlohmann::json;

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw config_error("config: " + key + " expects an integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw config_error("config: " + key + " expects a number, got '" + v + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw config_error("config: " + key + " expects an unsigned integer, got '" + v +
                           "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw config_error("config: " + key + " expects on/off, got '" + v + "'");
}

}  // namespace

std::string decay_mode_name(DecayMode m) {
    switch (m) {
        case DecayMode::Learned: return "learned";
        case DecayMode::Uniform: return "uniform";
        case DecayMode::None: return "none";
    }
    return "?";
}

std::string graph_mode_name(GraphMode m) {
    switch (m) {
        case GraphMode::Learned: return "learned";
        case GraphMode::CosineThreshold: return "threshold";
        case GraphMode::Dense: return "dense";
    }
    return "?";
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "seed") seed = to_u64(key, value);
    else if (key == "d_raw") d_raw = to_int(key, value);
    else if (key == "d") d = to_int(key, value);
    else if (key == "window") window = to_int(key, value);
    else if (key == "rebuild_every") rebuild_every = to_int(key, value);
    else if (key == "beam") beam = to_int(key, value);
    else if (key == "top_k") top_k = to_int(key, value);
    else if (key == "tau") tau = to_double(key, value);
    else if (key == "lambda_init_v") lambda_init[0] = to_double(key, value);
    else if (key == "lambda_init_x") lambda_init[1] = to_double(key, value);
    else if (key == "lambda_init_k") lambda_init[2] = to_double(key, value);
    else if (key == "w_edge") w_edge = to_double(key, value);
    else if (key == "w_decay") w_decay = to_double(key, value);
    else if (key == "lr_stage1") lr_stage1 = to_double(key, value);
    else if (key == "lr_stage2") lr_stage2 = to_double(key, value);
    else if (key == "lr_stage2_predictor") lr_stage2_predictor = to_double(key, value);
    else if (key == "gamma_baseline") gamma_baseline = to_double(key, value);
    else if (key == "steps_stage1") steps_stage1 = to_int(key, value);
    else if (key == "steps_stage2") steps_stage2 = to_int(key, value);
    else if (key == "batch_pairs") batch_pairs = to_int(key, value);
    else if (key == "batch_episodes") batch_episodes = to_int(key, value);
    else if (key == "stage1_episode_pool") stage1_episode_pool = to_int(key, value);
    else if (key == "train_projections") train_projections = to_bool(key, value);
    else if (key == "adam_beta1") adam_beta1 = to_double(key, value);
    else if (key == "adam_beta2") adam_beta2 = to_double(key, value);
    else if (key == "adam_eps") adam_eps = to_double(key, value);
    else if (key == "weight_decay") weight_decay = to_double(key, value);
    else if (key == "env_T") env_T = to_int(key, value);
    else if (key == "n_actions") n_actions = to_int(key, value);
    else if (key == "key_modality") key_modality = value;
    else if (key == "distractor_strength") distractor_strength = to_double(key, value);
    else if (key == "recency_bias") recency_bias = to_double(key, value);
    else if (key == "decay") {
        if (value == "learned") decay_mode = DecayMode::Learned;
        else if (value == "uniform") decay_mode = DecayMode::Uniform;
        else if (value == "none") decay_mode = DecayMode::None;
        else throw config_error("config: decay expects learned|uniform|none, got '" +
                                value + "'");
    } else if (key == "graph") {
        if (value == "learned") graph_mode = GraphMode::Learned;
        else if (value == "dense") graph_mode = GraphMode::Dense;
        else if (value.rfind("threshold:", 0) == 0) {
            graph_mode = GraphMode::CosineThreshold;
            graph_cosine_tau = to_double(key, value.substr(10));
        } else {
            throw config_error(
                "config: graph expects learned|threshold:<tau>|dense, got '" + value + "'");
        }
    } else if (key == "hierarchy") hierarchy = to_bool(key, value);
    else if (key == "stage2") stage2 = to_bool(key, value);
    else if (key == "workers") workers = to_int(key, value);
    else throw config_error("config: unknown key '" + key + "'");
}

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw config_error("config: " + msg);
    };
    require(d_raw >= 16, "d_raw must be >= 16");
    require(d >= 1, "d must be >= 1");
    require(window >= 1, "window must be >= 1");
    require(rebuild_every >= 1, "rebuild_every must be >= 1");
    require(beam >= 1, "beam must be >= 1");
    require(top_k >= 1, "top_k must be >= 1");
    require(tau > 0.0, "tau must be > 0");
    for (double l : lambda_init) require(l >= 0.0 && l <= 5.0, "lambda_init in [0, 5]");
    require(w_edge >= 0.0 && w_decay >= 0.0, "loss weights must be >= 0");
    require(lr_stage1 > 0.0 && lr_stage2 > 0.0 && lr_stage2_predictor > 0.0,
            "learning rates must be > 0");
    require(gamma_baseline >= 0.0 && gamma_baseline < 1.0, "gamma_baseline in [0, 1)");
    require(steps_stage1 >= 0 && steps_stage2 >= 0, "step counts must be >= 0");
    require(batch_pairs >= 1, "batch_pairs must be >= 1");
    require(batch_episodes >= 1, "batch_episodes must be >= 1");
    require(stage1_episode_pool >= 1, "stage1_episode_pool must be >= 1");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 in [0, 1)");
    require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 in [0, 1)");
    require(adam_eps > 0.0, "adam_eps must be > 0");
    require(weight_decay >= 0.0, "weight_decay must be >= 0");
    require(env_T >= 6, "env_T must be >= 6");
    require(n_actions >= 2, "n_actions must be >= 2");
    require(key_modality == "v" || key_modality == "x" || key_modality == "k" ||
                key_modality == "mix",
            "key_modality expects v|x|k|mix");
    require(distractor_strength >= 0.0 && distractor_strength <= 1.0,
            "distractor_strength in [0, 1]");
    require(recency_bias >= 0.0, "recency_bias must be >= 0");
    require(graph_cosine_tau >= -1.0 && graph_cosine_tau <= 1.0,
            "graph threshold tau in [-1, 1]");
    require(workers >= 1, "workers must be >= 1");
    require(d_raw >= n_actions + 4 + 8, "d_raw too small for the environment layout");
}

std::string RunConfig::to_json_string() const {
    json j = {
        {"seed", seed},
        {"d_raw", d_raw},
        {"d", d},
        {"window", window},
        {"rebuild_every", rebuild_every},
        {"beam", beam},
        {"top_k", top_k},
        {"tau", tau},
        {"lambda_init_v", lambda_init[0]},
        {"lambda_init_x", lambda_init[1]},
        {"lambda_init_k", lambda_init[2]},
        {"w_edge", w_edge},
        {"w_decay", w_decay},
        {"lr_stage1", lr_stage1},
        {"lr_stage2", lr_stage2},
        {"lr_stage2_predictor", lr_stage2_predictor},
        {"gamma_baseline", gamma_baseline},
        {"steps_stage1", steps_stage1},
        {"steps_stage2", steps_stage2},
        {"batch_pairs", batch_pairs},
        {"batch_episodes", batch_episodes},
        {"stage1_episode_pool", stage1_episode_pool},
        {"train_projections", train_projections},
        {"adam_beta1", adam_beta1},
        {"adam_beta2", adam_beta2},
        {"adam_eps", adam_eps},
        {"weight_decay", weight_decay},
        {"env_T", env_T},
        {"n_actions", n_actions},
        {"key_modality", key_modality},
        {"distractor_strength", distractor_strength},
        {"recency_bias", recency_bias},
        {"decay", decay_mode_name(decay_mode)},
        {"graph", graph_mode == GraphMode::CosineThreshold
                      ? ("threshold:" + std::to_string(graph_cosine_tau))
                      : graph_mode_name(graph_mode)},
        {"hierarchy", hierarchy},
        {"stage2", stage2},
        {"workers", workers},
    };
    return j.dump();
}

RunConfig RunConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config json parse error: ") + e.what());
    }
    RunConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const json& v = it.value();
        std::string s;
        if (v.is_string()) s = v.get<std::string>();
        else if (v.is_boolean()) s = v.get<bool>() ? "on" : "off";
        else s = v.dump();
        cfg.set(it.key(), s);
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config: expected key=value, got '" + line + "'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    base.validate();
    return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), std::move(base));
}

}  // namespace graphmem
