#include "gridrl/run_config.hpp"

#include <cstdlib>
#include <sstream>

namespace gridrl {

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    if (const char* env_out = std::getenv("GRID_RL_OUT")) cfg.out_dir = env_out;
    if (cfg.out_dir.empty()) cfg.out_dir = ".";

    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view sv(raw);
        auto hash = sv.find('#');
        if (hash != std::string_view::npos) sv = sv.substr(0, hash);
        sv = trim(sv);
        if (sv.empty()) continue;
        if (sv.front() == '[') {
            if (sv.back() != ']') throw ParseError("unterminated section header", line_no);
            section = std::string(trim(sv.substr(1, sv.size() - 2)));
            continue;
        }
        auto eq = sv.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
        std::string key(trim(sv.substr(0, eq)));
        std::string val(trim(sv.substr(eq + 1)));

        auto bad_key = [&]() -> ParseError {
            return ParseError("unknown key '" + key + "' in section [" + section + "]", line_no);
        };

        if (section == "paths") {
            if (key == "network")
                cfg.network_path = val;
            else if (key == "train_scenarios")
                cfg.train_scenarios_path = val;
            else if (key == "out")
                cfg.out_dir = val;
            else
                throw bad_key();
        } else if (section == "run") {
            if (key == "seed")
                cfg.seed = static_cast<std::uint64_t>(parse_int(val, line_no));
            else if (key == "workers")
                cfg.workers = static_cast<int>(parse_int(val, line_no));
            else if (key == "variant") {
                if (val != "ph" && val != "plain") throw ParseError("variant must be ph or plain", line_no);
                cfg.variant = val;
            } else
                throw bad_key();
        } else if (section == "env") {
            if (key == "horizon")
                cfg.env.horizon = static_cast<int>(parse_int(val, line_no));
            else if (key == "v_min")
                cfg.env.v_min = parse_double(val, line_no);
            else if (key == "v_max")
                cfg.env.v_max = parse_double(val, line_no);
            else if (key == "base_kw")
                cfg.solver.base_kw = parse_double(val, line_no);
            else if (key == "v_slack")
                cfg.solver.v_slack = parse_double(val, line_no);
            else
                throw bad_key();
        } else if (section == "ph") {
            if (key == "k")
                cfg.env.k = static_cast<int>(parse_int(val, line_no));
            else if (key == "refresh") {
                if (val == "per_episode")
                    cfg.env.ph_refresh = EnvConfig::Refresh::PerEpisode;
                else if (val == "per_step")
                    cfg.env.ph_refresh = EnvConfig::Refresh::PerStep;
                else
                    throw ParseError("refresh must be per_episode or per_step", line_no);
            } else
                throw bad_key();
        } else if (section == "gcapcn") {
            if (key == "layers")
                cfg.gcapcn.layers = static_cast<int>(parse_int(val, line_no));
            else if (key == "hidden")
                cfg.gcapcn.hidden = static_cast<int>(parse_int(val, line_no));
            else if (key == "p")
                cfg.gcapcn.moment_order = static_cast<int>(parse_int(val, line_no));
            else if (key == "K")
                cfg.gcapcn.filter_degree = static_cast<int>(parse_int(val, line_no));
            else if (key == "activation") {
                if (val == "tanh")
                    cfg.gcapcn.activation = GcapcnConfig::Activation::Tanh;
                else if (val == "relu")
                    cfg.gcapcn.activation = GcapcnConfig::Activation::Relu;
                else
                    throw ParseError("activation must be tanh or relu", line_no);
            } else
                throw bad_key();
        } else if (section == "train") {
            if (key == "total_steps")
                cfg.train.total_steps = parse_int(val, line_no);
            else if (key == "rollout")
                cfg.train.rollout_len = static_cast<int>(parse_int(val, line_no));
            else if (key == "minibatch")
                cfg.train.minibatch = static_cast<int>(parse_int(val, line_no));
            else if (key == "epochs")
                cfg.train.epochs = static_cast<int>(parse_int(val, line_no));
            else if (key == "clip")
                cfg.train.clip = parse_double(val, line_no);
            else if (key == "gamma")
                cfg.train.gamma = parse_double(val, line_no);
            else if (key == "lambda")
                cfg.train.lam = parse_double(val, line_no);
            else if (key == "lr")
                cfg.train.lr = parse_double(val, line_no);
            else if (key == "value_coef")
                cfg.train.value_coef = parse_double(val, line_no);
            else if (key == "entropy_coef")
                cfg.train.entropy_coef = parse_double(val, line_no);
            else if (key == "checkpoint_interval")
                cfg.train.checkpoint_interval = parse_int(val, line_no);
            else if (key == "ma_window")
                cfg.train.ma_window = static_cast<int>(parse_int(val, line_no));
            else
                throw bad_key();
        } else {
            throw ParseError("unknown section [" + section + "]", line_no);
        }
    }
    cfg.train.seed = cfg.seed;
    cfg.train.workers = cfg.workers;
    return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path)); }

}  // namespace gridrl
