#include "gridrl/eval.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

namespace gridrl {

namespace {

ScenarioMetrics evaluate_one(const GcapcnPolicy& policy, const OutageScenario& scenario, Env& env,
                             int index) {
    ScenarioMetrics m;
    m.scenario = index;
    try {
        NoGradGuard ng;
        Observation obs = env.reset(scenario);
        std::vector<Matrix> l_powers = policy.laplacian_powers(env.current_laplacian());
        std::uint64_t l_epoch = env.laplacian_epoch();
        double cum = 0.0;
        Env::StepResult sr;
        for (int t = 0; t < env.config().horizon; ++t) {
            if (env.laplacian_epoch() != l_epoch) {
                l_powers = policy.laplacian_powers(env.current_laplacian());
                l_epoch = env.laplacian_epoch();
            }
            auto fw = policy.forward(obs.voltages, obs.e_supp, obs.v_viol, obs.branch_flows,
                                     obs.action_mask(policy.sizes().action_size()), l_powers);
            auto action = GcapcnPolicy::greedy_action(fw.probs.values());
            sr = env.step(action);
            cum += sr.reward;
            obs = sr.obs;
        }
        m.reward = sr.reward;
        m.e_supp = sr.obs.e_supp;
        m.v_viol = sr.obs.v_viol;
        m.cum_reward = cum;
    } catch (const std::exception&) {
        m.reward = -1.0;
        m.e_supp = 0.0;
        m.v_viol = 0.0;
        m.cum_reward = -1.0;
    }
    return m;
}

}  // namespace

std::vector<ScenarioMetrics> evaluate(const GcapcnPolicy& policy,
                                      const std::vector<OutageScenario>& scenarios, const Env& env,
                                      int workers) {
    std::vector<ScenarioMetrics> out(scenarios.size());
    if (workers <= 1) {
        Env local = env;
        for (std::size_t i = 0; i < scenarios.size(); ++i)
            out[i] = evaluate_one(policy, scenarios[i], local, static_cast<int>(i));
        return out;
    }
    std::vector<std::thread> pool;
    std::size_t per = (scenarios.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        std::size_t lo = w * per, hi = std::min(scenarios.size(), lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi]() {
            Env local = env;
            for (std::size_t i = lo; i < hi; ++i)
                out[i] = evaluate_one(policy, scenarios[i], local, static_cast<int>(i));
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

MetricSummary summarize(const std::vector<ScenarioMetrics>& metrics) {
    MetricSummary s;
    s.n = static_cast<int>(metrics.size());
    std::vector<double> r, e, v, c;
    for (const auto& m : metrics) {
        r.push_back(m.reward);
        e.push_back(m.e_supp);
        v.push_back(m.v_viol);
        c.push_back(m.cum_reward);
    }
    s.mean_reward = mean(r);
    s.std_reward = sample_std(r);
    s.mean_e_supp = mean(e);
    s.std_e_supp = sample_std(e);
    s.mean_v_viol = mean(v);
    s.std_v_viol = sample_std(v);
    s.mean_cum = mean(c);
    s.std_cum = sample_std(c);
    return s;
}

void export_metrics(const std::string& path, const std::vector<ScenarioMetrics>& metrics) {
    std::ostringstream out;
    out << "scenario,reward,e_supp,v_viol,cum_reward\n";
    for (const auto& m : metrics)
        out << m.scenario << "," << format_double(m.reward) << "," << format_double(m.e_supp) << ","
            << format_double(m.v_viol) << "," << format_double(m.cum_reward) << "\n";
    write_text_file(path, out.str());
}

void export_summary(const std::string& path, const MetricSummary& s) {
    std::ostringstream out;
    out << "metric,mean,std\n";
    out << "reward," << format_double(s.mean_reward) << "," << format_double(s.std_reward) << "\n";
    out << "e_supp," << format_double(s.mean_e_supp) << "," << format_double(s.std_e_supp) << "\n";
    out << "v_viol," << format_double(s.mean_v_viol) << "," << format_double(s.std_v_viol) << "\n";
    out << "cum_reward," << format_double(s.mean_cum) << "," << format_double(s.std_cum) << "\n";
    write_text_file(path, out.str());
}

std::vector<ScenarioMetrics> load_metrics(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "scenario,reward,e_supp,v_viol,cum_reward")
        throw ParseError("bad metrics header", 1);
    std::vector<ScenarioMetrics> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto parts = split(line, ',');
        if (parts.size() != 5) throw ParseError("expected 5 columns", line_no);
        ScenarioMetrics m;
        m.scenario = static_cast<int>(parse_int(parts[0], line_no));
        m.reward = parse_double(parts[1], line_no);
        m.e_supp = parse_double(parts[2], line_no);
        m.v_viol = parse_double(parts[3], line_no);
        m.cum_reward = parse_double(parts[4], line_no);
        out.push_back(m);
    }
    return out;
}

std::string comparison_report(const std::string& name_a, const std::vector<ScenarioMetrics>& a,
                              const std::string& name_b, const std::vector<ScenarioMetrics>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("comparison needs matched scenario lists");
    MetricSummary sa = summarize(a), sb = summarize(b);

    auto col = [&](double m, double s) {
        std::ostringstream ss;
        ss << format_double(m) << " +/- " << format_double(s);
        return ss.str();
    };

    std::vector<double> ra, rb, ea, eb, va, vb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].scenario != b[i].scenario)
            throw std::invalid_argument("comparison scenario ids do not match");
        ra.push_back(a[i].reward);
        rb.push_back(b[i].reward);
        ea.push_back(a[i].e_supp);
        eb.push_back(b[i].e_supp);
        va.push_back(a[i].v_viol);
        vb.push_back(b[i].v_viol);
    }
    WinCount wins = win_rate(ra, rb);
    TTestResult tr = paired_t_test(ra, rb);
    TTestResult te = paired_t_test(ea, eb);
    TTestResult tv = paired_t_test(va, vb);

    std::ostringstream out;
    out << "comparison over " << a.size() << " scenarios\n";
    out << "metric," << name_a << "," << name_b << "\n";
    out << "reward," << col(sa.mean_reward, sa.std_reward) << "," << col(sb.mean_reward, sb.std_reward) << "\n";
    out << "e_supp," << col(sa.mean_e_supp, sa.std_e_supp) << "," << col(sb.mean_e_supp, sb.std_e_supp) << "\n";
    out << "v_viol," << col(sa.mean_v_viol, sa.std_v_viol) << "," << col(sb.mean_v_viol, sb.std_v_viol) << "\n";
    out << "cum_reward," << col(sa.mean_cum, sa.std_cum) << "," << col(sb.mean_cum, sb.std_cum) << "\n";
    out << "wins," << wins.wins_a << "," << wins.wins_b << "\n";
    out << "ties," << wins.ties << ",\n";
    out << "paired_t_p,reward=" << format_double(tr.p) << ",e_supp=" << format_double(te.p)
        << ",v_viol=" << format_double(tv.p) << "\n";
    return out.str();
}

}  // namespace gridrl
