#include "ctsac/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctsac/common.hpp"

namespace ctsac::cfg {
namespace {

double parse_double(const std::string& value, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') {
        throw ConfigError(key + ": not a number: '" + value + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
    const double v = parse_double(value, key);
    if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
        throw ConfigError(key + ": not a nonnegative integer: '" + value + "'");
    }
    return static_cast<std::uint64_t>(v);
}

std::size_t parse_size(const std::string& value, const std::string& key) {
    return static_cast<std::size_t>(parse_u64(value, key));
}

int parse_int(const std::string& value, const std::string& key) {
    return static_cast<int>(parse_u64(value, key));
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string trim(std::string s) {
    const char* ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::finalize() {
    net.state_dim = static_cast<std::size_t>(lidar.d) + 4;
    net.seq_len = sac.seq_len;
    lidar.validate();
    env.validate();
    reward.validate();
    net.validate();
    sac.validate();
    curriculum.validate();
    if (checkpoint_every == 0) throw ConfigError("sac.checkpoint_every must be positive");
    if (episode_budget == 0) throw ConfigError("curriculum.episode_budget must be positive");
    if (stop_sr < 0.0 || stop_sr > 1.0) {
        throw ConfigError("curriculum.stop_sr must lie in [0, 1]");
    }
    if (stop_window == 0) throw ConfigError("curriculum.stop_window must be positive");
    if (eval_runs == 0) throw ConfigError("eval.runs must be positive");
}

RunConfig default_config() { return RunConfig{}; }

RunConfig preset(const std::string& name) {
    RunConfig c;
    if (name == "paper") {
        // Defaults already carry the full-scale values.
    } else if (name == "desk") {
        c.net.embed_dim = 32;
        c.net.blocks_override = 1;
        c.net.heads = 4;
        c.net.ffn_mult = 2;
        c.net.dropout = 0.0;
        c.sac.batch_size = 64;
        c.sac.seq_len = 8;
        c.sac.update_every = 8;
        c.sac.warmup_steps = 800;
        c.sac.tau_alpha = 1e-3;
        c.env.max_steps = 300;
        c.reward.goal_reward_mode = GoalRewardMode::Inverted;
        c.episode_budget = 3000;
        c.stop_sr = 0.8;
        c.stop_window = 50;
        c.checkpoint_every = 200;
        c.eval_runs = 20;
    } else {
        throw ConfigError("unknown preset '" + name + "' (available: paper, desk)");
    }
    c.finalize();
    return c;
}

void apply_key(RunConfig& c, const std::string& raw_key, const std::string& value) {
    // transformer.* is accepted as an alias for the net.* section.
    std::string key = raw_key;
    if (key.rfind("transformer.", 0) == 0) key = "net." + key.substr(12);

    if (key == "seed") { c.sac.seed = parse_u64(value, key); return; }

    if (key == "lidar.segments") { c.lidar.d = parse_int(value, key); return; }
    if (key == "lidar.rays") { c.lidar.rays_per_scan = parse_int(value, key); return; }
    if (key == "lidar.max_range") { c.lidar.max_range = parse_double(value, key); return; }
    if (key == "lidar.noise_sigma") { c.lidar.noise_sigma = parse_double(value, key); return; }
    if (key == "lidar.dropout_prob") { c.lidar.dropout_prob = parse_double(value, key); return; }

    if (key == "env.dt") { c.env.dt = parse_double(value, key); return; }
    if (key == "env.tau_v") { c.env.tau_v = parse_double(value, key); return; }
    if (key == "env.max_steps") { c.env.max_steps = parse_int(value, key); return; }
    if (key == "env.robot_radius") { c.env.robot_radius = parse_double(value, key); return; }

    if (key == "reward.lambda1") { c.reward.lambda1 = parse_double(value, key); return; }
    if (key == "reward.lambda2") { c.reward.lambda2 = parse_double(value, key); return; }
    if (key == "reward.lambda3") { c.reward.lambda3 = parse_double(value, key); return; }
    if (key == "reward.lambda4") { c.reward.lambda4 = parse_double(value, key); return; }
    if (key == "reward.lambda5") { c.reward.lambda5 = parse_double(value, key); return; }
    if (key == "reward.lambda6") { c.reward.lambda6 = parse_double(value, key); return; }
    if (key == "reward.lambda7") { c.reward.lambda7 = parse_double(value, key); return; }
    if (key == "reward.delta") { c.reward.delta = parse_double(value, key); return; }
    if (key == "reward.goal_radius") { c.reward.goal_radius = parse_double(value, key); return; }
    if (key == "reward.collision_distance") {
        c.reward.collision_distance = parse_double(value, key);
        return;
    }
    if (key == "reward.goal_reward_mode") {
        if (value == "as_printed") c.reward.goal_reward_mode = GoalRewardMode::AsPrinted;
        else if (value == "inverted") c.reward.goal_reward_mode = GoalRewardMode::Inverted;
        else throw ConfigError(key + ": expected as_printed or inverted, got '" + value + "'");
        return;
    }

    if (key == "net.embed_dim") { c.net.embed_dim = parse_size(value, key); return; }
    if (key == "net.encoder_blocks") { c.net.encoder_blocks = parse_size(value, key); return; }
    if (key == "net.decoder_blocks") { c.net.decoder_blocks = parse_size(value, key); return; }
    if (key == "net.blocks") { c.net.blocks_override = parse_size(value, key); return; }
    if (key == "net.heads") { c.net.heads = parse_size(value, key); return; }
    if (key == "net.ffn_mult") { c.net.ffn_mult = parse_size(value, key); return; }
    if (key == "net.dropout") { c.net.dropout = parse_double(value, key); return; }
    if (key == "net.weight_decay") { c.net.weight_decay = parse_double(value, key); return; }
    if (key == "net.positional_encoding") {
        c.net.positional_encoding = parse_bool(value, key);
        return;
    }
    if (key == "net.log_sigma_min") { c.net.log_sigma_min = parse_double(value, key); return; }
    if (key == "net.log_sigma_max") { c.net.log_sigma_max = parse_double(value, key); return; }

    if (key == "sac.gamma") { c.sac.gamma = parse_double(value, key); return; }
    if (key == "sac.buffer_capacity") { c.sac.buffer_capacity = parse_size(value, key); return; }
    if (key == "sac.batch_size") { c.sac.batch_size = parse_size(value, key); return; }
    if (key == "sac.learning_rate") { c.sac.learning_rate = parse_double(value, key); return; }
    if (key == "sac.tau_soft") { c.sac.tau_soft = parse_double(value, key); return; }
    if (key == "sac.update_every") { c.sac.update_every = parse_size(value, key); return; }
    if (key == "sac.alpha0") { c.sac.alpha0 = parse_double(value, key); return; }
    if (key == "sac.tau_alpha") { c.sac.tau_alpha = parse_double(value, key); return; }
    if (key == "sac.seq_len") { c.sac.seq_len = parse_size(value, key); return; }
    if (key == "sac.seed") { c.sac.seed = parse_u64(value, key); return; }
    if (key == "sac.warmup_steps") { c.sac.warmup_steps = parse_size(value, key); return; }
    if (key == "sac.checkpoint_every") { c.checkpoint_every = parse_size(value, key); return; }

    if (key == "curriculum.beta") { c.curriculum.beta = parse_double(value, key); return; }
    if (key == "curriculum.window") { c.curriculum.window = parse_size(value, key); return; }
    if (key == "curriculum.max_stage") { c.curriculum.max_stage = parse_size(value, key); return; }
    if (key == "curriculum.fixed_stage") {
        c.curriculum.fixed_stage = parse_size(value, key);
        return;
    }
    if (key == "curriculum.episode_budget") { c.episode_budget = parse_size(value, key); return; }
    if (key == "curriculum.stop_sr") { c.stop_sr = parse_double(value, key); return; }
    if (key == "curriculum.stop_window") { c.stop_window = parse_size(value, key); return; }

    if (key == "eval.runs") { c.eval_runs = parse_size(value, key); return; }
    if (key == "eval.seed") { c.eval_seed = parse_u64(value, key); return; }

    throw ConfigError("unknown config key '" + raw_key + "'");
}

RunConfig parse_text(const std::string& text, RunConfig base) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected 'section.key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": empty key or value");
        }
        try {
            apply_key(base, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    base.finalize();
    return base;
}

RunConfig parse_file(const std::string& path, RunConfig base) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_text(buf.str(), std::move(base));
}

std::string to_text(const RunConfig& c) {
    std::ostringstream os;
    auto d = [&](const char* key, double v) { os << key << " = " << format_double(v) << '\n'; };
    auto u = [&](const char* key, std::uint64_t v) { os << key << " = " << v << '\n'; };
    auto b = [&](const char* key, bool v) { os << key << " = " << (v ? "true" : "false") << '\n'; };

    u("lidar.segments", static_cast<std::uint64_t>(c.lidar.d));
    u("lidar.rays", static_cast<std::uint64_t>(c.lidar.rays_per_scan));
    d("lidar.max_range", c.lidar.max_range);
    d("lidar.noise_sigma", c.lidar.noise_sigma);
    d("lidar.dropout_prob", c.lidar.dropout_prob);

    d("env.dt", c.env.dt);
    d("env.tau_v", c.env.tau_v);
    u("env.max_steps", static_cast<std::uint64_t>(c.env.max_steps));
    d("env.robot_radius", c.env.robot_radius);

    d("reward.lambda1", c.reward.lambda1);
    d("reward.lambda2", c.reward.lambda2);
    d("reward.lambda3", c.reward.lambda3);
    d("reward.lambda4", c.reward.lambda4);
    d("reward.lambda5", c.reward.lambda5);
    d("reward.lambda6", c.reward.lambda6);
    d("reward.lambda7", c.reward.lambda7);
    d("reward.delta", c.reward.delta);
    d("reward.goal_radius", c.reward.goal_radius);
    d("reward.collision_distance", c.reward.collision_distance);
    os << "reward.goal_reward_mode = "
       << (c.reward.goal_reward_mode == GoalRewardMode::AsPrinted ? "as_printed"
                                                                  : "inverted")
       << '\n';

    u("net.embed_dim", c.net.embed_dim);
    u("net.encoder_blocks", c.net.encoder_blocks);
    u("net.decoder_blocks", c.net.decoder_blocks);
    u("net.blocks", c.net.blocks_override);
    u("net.heads", c.net.heads);
    u("net.ffn_mult", c.net.ffn_mult);
    d("net.dropout", c.net.dropout);
    d("net.weight_decay", c.net.weight_decay);
    b("net.positional_encoding", c.net.positional_encoding);
    d("net.log_sigma_min", c.net.log_sigma_min);
    d("net.log_sigma_max", c.net.log_sigma_max);

    d("sac.gamma", c.sac.gamma);
    u("sac.buffer_capacity", c.sac.buffer_capacity);
    u("sac.batch_size", c.sac.batch_size);
    d("sac.learning_rate", c.sac.learning_rate);
    d("sac.tau_soft", c.sac.tau_soft);
    u("sac.update_every", c.sac.update_every);
    d("sac.alpha0", c.sac.alpha0);
    d("sac.tau_alpha", c.sac.tau_alpha);
    u("sac.seq_len", c.sac.seq_len);
    u("sac.seed", c.sac.seed);
    u("sac.warmup_steps", c.sac.warmup_steps);
    u("sac.checkpoint_every", c.checkpoint_every);

    d("curriculum.beta", c.curriculum.beta);
    u("curriculum.window", c.curriculum.window);
    u("curriculum.max_stage", c.curriculum.max_stage);
    u("curriculum.fixed_stage", c.curriculum.fixed_stage);
    u("curriculum.episode_budget", c.episode_budget);
    d("curriculum.stop_sr", c.stop_sr);
    u("curriculum.stop_window", c.stop_window);

    u("eval.runs", c.eval_runs);
    u("eval.seed", c.eval_seed);
    return os.str();
}

}  // namespace ctsac::cfg
