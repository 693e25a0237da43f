#include "rcmdp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rcmdp {

using nlohmann::json;
namespace fs = std::filesystem;

const char* kTraceHeader =
    "algorithm,seed,iteration,robust_reward_raw,robust_utility_raw,"
    "nominal_reward_raw,nominal_utility_raw,robust_reward_norm,"
    "robust_utility_norm,b,realized_kl,eps_reward,eps_utility,m_estimate,"
    "thm_reward_rhs,thm_utility_rhs,reward_bound_ok,utility_bound_ok,"
    "kl_lemma_ok,flags";

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw std::invalid_argument("config: unknown key '" + it.key() +
                                        "' in " + where);
}

BaselineKind parse_algorithm(const std::string& name) {
    if (name == "CPO") return BaselineKind::CPO;
    if (name == "PCPO") return BaselineKind::PCPO;
    if (name == "RVI") return BaselineKind::RVI;
    throw std::invalid_argument("config: unknown algorithm '" + name + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
    if (env.name.empty())
        throw std::invalid_argument("config: env.name is required");
    if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
    std::vector<std::uint64_t> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("config: seeds must be distinct");
    if (algorithms.empty())
        throw std::invalid_argument("config: algorithms must be non-empty");
    if (eval_every < 1)
        throw std::invalid_argument("config: eval_every must be >= 1");
    rcpo.validate();
}

ExperimentConfig load_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("config: cannot open " + file.string());
    json j = json::parse(in);
    check_keys(j,
               {"env", "algorithms", "seeds", "rcpo", "output_dir",
                "emit_plots", "eval_every", "init_policy_noise"},
               "top level");

    ExperimentConfig cfg;
    const json& env = j.at("env");
    check_keys(env, {"name", "overrides"}, "env");
    cfg.env.name = env.at("name").get<std::string>();
    if (env.contains("overrides"))
        for (auto it = env["overrides"].begin(); it != env["overrides"].end(); ++it)
            cfg.env.overrides[it.key()] = it.value().get<double>();

    if (j.contains("algorithms")) {
        cfg.algorithms.clear();
        for (const auto& a : j["algorithms"])
            cfg.algorithms.push_back(a.get<std::string>());
    } else {
        cfg.algorithms = {"RCPO", "PCPO", "RVI"};
    }
    for (const auto& a : cfg.algorithms)
        if (a != "RCPO") parse_algorithm(a);  // validates the name

    if (j.contains("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : j["seeds"])
            cfg.seeds.push_back(s.get<std::uint64_t>());
    }

    if (j.contains("rcpo")) {
        const json& r = j["rcpo"];
        check_keys(r,
                   {"delta", "pgd_steps", "max_iterations", "eps_tol", "mode",
                    "dual_bisection_tol", "literal_constraint_scale",
                    "pgd_beta0", "pgd_decay"},
                   "rcpo");
        if (r.contains("delta")) cfg.rcpo.delta = r["delta"].get<double>();
        if (r.contains("pgd_steps")) cfg.rcpo.pgd_steps = r["pgd_steps"].get<int>();
        if (r.contains("max_iterations"))
            cfg.rcpo.max_iterations = r["max_iterations"].get<int>();
        if (r.contains("eps_tol")) cfg.rcpo.eps_tol = r["eps_tol"].get<double>();
        if (r.contains("dual_bisection_tol"))
            cfg.rcpo.dual_bisection_tol = r["dual_bisection_tol"].get<double>();
        if (r.contains("literal_constraint_scale"))
            cfg.rcpo.literal_constraint_scale =
                r["literal_constraint_scale"].get<bool>();
        if (r.contains("mode")) {
            std::string mode = r["mode"].get<std::string>();
            if (mode == "exact_tabular")
                cfg.rcpo.mode = SolverMode::exact_tabular;
            else if (mode == "practical_parametric")
                cfg.rcpo.mode = SolverMode::practical_parametric;
            else
                throw std::invalid_argument("config: unknown rcpo.mode '" + mode +
                                            "'");
        }
        double beta0 = r.contains("pgd_beta0") ? r["pgd_beta0"].get<double>() : 3.0;
        double decay = r.contains("pgd_decay") ? r["pgd_decay"].get<double>() : 200.0;
        cfg.rcpo.pgd_schedule = [beta0, decay](int t) {
            return beta0 / (1.0 + t / decay);
        };
    }

    if (j.contains("output_dir"))
        cfg.output_dir = j["output_dir"].get<std::string>();
    if (const char* env_dir = std::getenv("RCPO_OUTPUT_DIR"))
        cfg.output_dir = env_dir;
    if (j.contains("emit_plots")) cfg.emit_plots_flag = j["emit_plots"].get<bool>();
    if (j.contains("eval_every")) cfg.eval_every = j["eval_every"].get<int>();
    if (j.contains("init_policy_noise"))
        cfg.init_policy_noise = j["init_policy_noise"].get<double>();

    cfg.validate();
    return cfg;
}

StochasticPolicy seeded_initial_policy(int n_states, int n_actions,
                                       std::uint64_t seed, double noise) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix probs(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        Eigen::RowVectorXd r(n_actions);
        for (int a = 0; a < n_actions; ++a)
            r(a) = -std::log(std::max(unit(rng), 1e-300));
        r /= r.sum();
        probs.row(s) =
            (1.0 - noise) * Eigen::RowVectorXd::Constant(n_actions, 1.0 / n_actions) +
            noise * r;
    }
    return StochasticPolicy(probs);
}

namespace {

TraceRow base_row(const std::string& algorithm, std::uint64_t seed, int iteration,
                  const BuiltEnv& env, const RobustEvalResult& ref_r,
                  const RobustEvalResult& ref_c, double nominal_r,
                  double nominal_c) {
    TraceRow row;
    row.algorithm = algorithm;
    row.seed = seed;
    row.iteration = iteration;
    row.robust_reward_norm = ref_r.scalar_return;
    row.robust_utility_norm = ref_c.scalar_return;
    row.robust_reward_raw = ref_r.scalar_return * env.reward_scale;
    row.robust_utility_raw = ref_c.scalar_return * env.utility_scale;
    row.nominal_reward_raw = nominal_r * env.reward_scale;
    row.nominal_utility_raw = nominal_c * env.utility_scale;
    return row;
}

std::vector<TraceRow> run_rcpo(const ExperimentConfig& cfg, const BuiltEnv& env,
                               std::uint64_t seed) {
    UncertaintySet u = env.uncertainty();
    StochasticPolicy pi0 = seeded_initial_policy(
        env.cmdp.n_states, env.cmdp.n_actions, seed, cfg.init_policy_noise);
    TrainResult result = rcpo_train(env.cmdp, u, cfg.rcpo, pi0);
    std::vector<TraceRow> rows;
    for (const IterationRecord& rec : result.trace) {
        if (rec.iteration % cfg.eval_every != 0 &&
            rec.iteration + 1 != cfg.rcpo.max_iterations)
            continue;
        TraceRow row;
        row.algorithm = "RCPO";
        row.seed = seed;
        row.iteration = rec.iteration;
        row.robust_reward_norm = rec.robust_reward_return;
        row.robust_utility_norm = rec.robust_utility_return;
        row.robust_reward_raw = rec.robust_reward_return * env.reward_scale;
        row.robust_utility_raw = rec.robust_utility_return * env.utility_scale;
        row.nominal_reward_raw = rec.nominal_reward_return * env.reward_scale;
        row.nominal_utility_raw = rec.nominal_utility_return * env.utility_scale;
        row.b = rec.constraint_slack_b;
        row.realized_kl = rec.realized_kl_step;
        row.eps_reward = rec.eps_reward;
        row.eps_utility = rec.eps_utility;
        row.m_estimate = rec.m_estimate;
        row.thm_reward_rhs = rec.theorem_reward_rhs;
        row.thm_utility_rhs = rec.theorem_utility_rhs;
        row.reward_bound_ok = rec.reward_bound_ok;
        row.utility_bound_ok = rec.utility_bound_ok;
        row.kl_lemma_ok = rec.kl_lemma_ok;
        row.flags = rec.flags;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<TraceRow> run_baseline_loop(const ExperimentConfig& cfg,
                                        const BuiltEnv& env, BaselineKind kind,
                                        std::uint64_t seed) {
    UncertaintySet u = env.uncertainty();
    const TabularCMDP& m = env.cmdp;
    std::vector<TraceRow> rows;
    std::string name = kind == BaselineKind::CPO ? "CPO" : "PCPO";

    StochasticPolicy pi = seeded_initial_policy(m.n_states, m.n_actions, seed,
                                                cfg.init_policy_noise);
    RobustEvalResult ref_c_prev =
        robust_policy_evaluation(m, u, pi, Signal::utility);
    Vector d_nom = occupancy(m, pi, m.nominal_kernel);

    for (int k = 0; k < cfg.rcpo.max_iterations; ++k) {
        PolicyStepResult step =
            kind == BaselineKind::CPO
                ? cpo_update(m, pi, cfg.rcpo.delta, cfg.rcpo.dual_bisection_tol)
                : pcpo_update(m, pi, cfg.rcpo.delta, cfg.rcpo.dual_bisection_tol);
        StochasticPolicy pi_next = step.policy;
        double realized = policy_kl(pi_next, pi, d_nom);

        RobustEvalResult ref_r =
            robust_policy_evaluation(m, u, pi_next, Signal::reward);
        RobustEvalResult ref_c =
            robust_policy_evaluation(m, u, pi_next, Signal::utility);

        if (k % cfg.eval_every == 0 || k + 1 == cfg.rcpo.max_iterations) {
            double nom_r =
                evaluate_policy(m, pi_next, m.nominal_kernel, Signal::reward)
                    .scalar_return;
            double nom_c =
                evaluate_policy(m, pi_next, m.nominal_kernel, Signal::utility)
                    .scalar_return;
            TraceRow row = base_row(name, seed, k, env, ref_r, ref_c, nom_r, nom_c);
            row.b = m.threshold_d - ref_c_prev.scalar_return;
            row.realized_kl = realized;
            row.flags = step.flag;
            rows.push_back(std::move(row));
        }
        pi = pi_next;
        ref_c_prev = ref_c;
        d_nom = occupancy(m, pi, m.nominal_kernel);
    }
    return rows;
}

std::vector<TraceRow> run_rvi(const ExperimentConfig& cfg, const BuiltEnv& env,
                              std::uint64_t seed) {
    UncertaintySet u = env.uncertainty();
    const TabularCMDP& m = env.cmdp;
    std::vector<TraceRow> rows;
    Vector v = Vector::Zero(m.n_states);
    const int sweeps_per_iter = 5;
    for (int k = 0; k < cfg.rcpo.max_iterations; ++k) {
        for (int t = 0; t < sweeps_per_iter; ++t)
            robust_vi_sweep(m, u, Signal::reward, v);
        StochasticPolicy pi = robust_greedy_policy(m, u, Signal::reward, v);
        if (k % cfg.eval_every != 0 && k + 1 != cfg.rcpo.max_iterations)
            continue;
        RobustEvalResult ref_r = robust_policy_evaluation(m, u, pi, Signal::reward);
        RobustEvalResult ref_c =
            robust_policy_evaluation(m, u, pi, Signal::utility);
        double nom_r = evaluate_policy(m, pi, m.nominal_kernel, Signal::reward)
                           .scalar_return;
        double nom_c = evaluate_policy(m, pi, m.nominal_kernel, Signal::utility)
                           .scalar_return;
        TraceRow row = base_row("RVI", seed, k, env, ref_r, ref_c, nom_r, nom_c);
        row.b = m.threshold_d - ref_c.scalar_return;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string format_trace_row(const TraceRow& r) {
    std::ostringstream out;
    out << r.algorithm << ',' << r.seed << ',' << r.iteration << ','
        << fmt(r.robust_reward_raw) << ',' << fmt(r.robust_utility_raw) << ','
        << fmt(r.nominal_reward_raw) << ',' << fmt(r.nominal_utility_raw) << ','
        << fmt(r.robust_reward_norm) << ',' << fmt(r.robust_utility_norm) << ','
        << fmt(r.b) << ',' << fmt(r.realized_kl) << ',' << fmt(r.eps_reward)
        << ',' << fmt(r.eps_utility) << ',' << fmt(r.m_estimate) << ','
        << fmt(r.thm_reward_rhs) << ',' << fmt(r.thm_utility_rhs) << ','
        << (r.reward_bound_ok ? 1 : 0) << ',' << (r.utility_bound_ok ? 1 : 0)
        << ',' << (r.kl_lemma_ok ? 1 : 0) << ',' << r.flags;
    return out.str();
}

std::vector<TraceRow> run_experiment_rows(const ExperimentConfig& config,
                                          const BuiltEnv& env) {
    std::vector<TraceRow> rows;
    for (const std::string& algo : config.algorithms) {
        for (std::uint64_t seed : config.seeds) {
            std::vector<TraceRow> part;
            if (algo == "RCPO")
                part = run_rcpo(config, env, seed);
            else if (algo == "RVI")
                part = run_rvi(config, env, seed);
            else
                part = run_baseline_loop(config, env, parse_algorithm(algo), seed);
            rows.insert(rows.end(), part.begin(), part.end());
        }
    }
    return rows;
}

namespace {

struct SummaryRow {
    std::string algorithm;
    int iteration;
    std::string metric;
    double mean, std;
};

std::vector<SummaryRow> summarize(const std::vector<TraceRow>& rows) {
    struct Key {
        std::string algorithm;
        int iteration;
        std::string metric;
        bool operator<(const Key& o) const {
            return std::tie(algorithm, iteration, metric) <
                   std::tie(o.algorithm, o.iteration, o.metric);
        }
    };
    std::map<Key, std::vector<double>> groups;
    for (const TraceRow& r : rows) {
        groups[{r.algorithm, r.iteration, "robust_reward_raw"}].push_back(
            r.robust_reward_raw);
        groups[{r.algorithm, r.iteration, "robust_utility_raw"}].push_back(
            r.robust_utility_raw);
        groups[{r.algorithm, r.iteration, "nominal_reward_raw"}].push_back(
            r.nominal_reward_raw);
        groups[{r.algorithm, r.iteration, "nominal_utility_raw"}].push_back(
            r.nominal_utility_raw);
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, vals] : groups) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= vals.size();  // population std across seeds
        out.push_back({key.algorithm, key.iteration, key.metric, mean,
                       std::sqrt(var)});
    }
    return out;
}

}  // namespace

std::filesystem::path run_experiment(const ExperimentConfig& config) {
    BuiltEnv env = make_env(config.env.name, config.env.overrides);
    std::vector<TraceRow> rows = run_experiment_rows(config, env);

    fs::create_directories(config.output_dir);
    {
        std::ofstream trace(config.output_dir / "trace.csv", std::ios::binary);
        trace << kTraceHeader << '\n';
        for (const TraceRow& r : rows) trace << format_trace_row(r) << '\n';
    }
    {
        std::ofstream summary(config.output_dir / "summary.csv", std::ios::binary);
        summary << "algorithm,iteration,metric,mean,std\n";
        for (const SummaryRow& r : summarize(rows))
            summary << r.algorithm << ',' << r.iteration << ',' << r.metric << ','
                    << fmt(r.mean) << ',' << fmt(r.std) << '\n';
    }
    {
        json echo;
        echo["env"]["name"] = config.env.name;
        for (const auto& [key, value] : config.env.overrides)
            echo["env"]["overrides"][key] = value;
        echo["algorithms"] = config.algorithms;
        echo["seeds"] = config.seeds;
        echo["rcpo"]["delta"] = config.rcpo.delta;
        echo["rcpo"]["pgd_steps"] = config.rcpo.pgd_steps;
        echo["rcpo"]["max_iterations"] = config.rcpo.max_iterations;
        echo["rcpo"]["eps_tol"] = config.rcpo.eps_tol;
        echo["rcpo"]["mode"] = config.rcpo.mode == SolverMode::exact_tabular
                                   ? "exact_tabular"
                                   : "practical_parametric";
        echo["rcpo"]["dual_bisection_tol"] = config.rcpo.dual_bisection_tol;
        echo["rcpo"]["literal_constraint_scale"] =
            config.rcpo.literal_constraint_scale;
        echo["eval_every"] = config.eval_every;
        echo["init_policy_noise"] = config.init_policy_noise;
        echo["resolved"]["reward_scale"] = env.reward_scale;
        echo["resolved"]["utility_scale"] = env.utility_scale;
        echo["resolved"]["raw_threshold"] = env.raw_threshold;
        echo["resolved"]["normalized_threshold"] = env.cmdp.threshold_d;
        echo["resolved"]["gamma"] = env.cmdp.gamma;
        echo["resolved"]["radius"] = env.radius;
        std::ofstream out(config.output_dir / "config_echo.json");
        out << echo.dump(2) << '\n';
    }
    if (config.emit_plots_flag) emit_plots(config.output_dir);
    return config.output_dir;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        // A trailing empty field (e.g. empty flags column) is dropped by
        // getline; pad to keep indexing uniform.
        if (!line.empty() && line.back() == ',') fields.push_back("");
        rows.push_back(std::move(fields));
    }
    return rows;
}

struct Series {
    std::vector<double> iteration, mean, std;
};

const std::map<std::string, std::string> kColors = {
    {"RCPO", "#1f77b4"}, {"PCPO", "#ff7f0e"}, {"RVI", "#2ca02c"},
    {"CPO", "#d62728"}};

std::string svg_panel(const std::map<std::string, Series>& series,
                      const std::string& ylabel,
                      std::optional<double> threshold) {
    const double W = 640, H = 420, ml = 60, mr = 20, mt = 30, mb = 45;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& [name, s] : series) {
        (void)name;
        for (size_t i = 0; i < s.iteration.size(); ++i) {
            double lo = s.mean[i] - s.std[i], hi = s.mean[i] + s.std[i];
            if (first) {
                xmin = xmax = s.iteration[i];
                ymin = lo;
                ymax = hi;
                first = false;
            }
            xmin = std::min(xmin, s.iteration[i]);
            xmax = std::max(xmax, s.iteration[i]);
            ymin = std::min(ymin, lo);
            ymax = std::max(ymax, hi);
        }
    }
    if (threshold) {
        ymin = std::min(ymin, *threshold);
        ymax = std::max(ymax, *threshold);
    }
    if (xmax == xmin) xmax = xmin + 1;
    double pad = 0.05 * (ymax - ymin + 1e-12);
    ymin -= pad;
    ymax += pad;

    auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto Y = [&](double y) {
        return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double xv = xmin + i * (xmax - xmin) / 4.0;
        double yv = ymin + i * (ymax - ymin) / 4.0;
        svg << "<text x=\"" << X(xv) << "\" y=\"" << H - mb + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(std::round(xv))
            << "</text>\n";
        char ybuf[32];
        std::snprintf(ybuf, sizeof(ybuf), "%.3g", yv);
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << Y(yv) + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << ybuf << "</text>\n";
    }
    svg << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 10
        << "\" font-size=\"13\" text-anchor=\"middle\">iteration</text>\n";
    svg << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << (mt + H - mb) / 2 << ")\">" << ylabel << "</text>\n";

    int legend_i = 0;
    for (const auto& [name, s] : series) {
        auto color_it = kColors.find(name);
        std::string color = color_it == kColors.end() ? "#555555" : color_it->second;
        // +/- 1 std band
        std::ostringstream band;
        for (size_t i = 0; i < s.iteration.size(); ++i)
            band << (i ? " " : "") << X(s.iteration[i]) << ","
                 << Y(s.mean[i] + s.std[i]);
        for (size_t i = s.iteration.size(); i-- > 0;)
            band << " " << X(s.iteration[i]) << "," << Y(s.mean[i] - s.std[i]);
        svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color
            << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
        std::ostringstream line;
        for (size_t i = 0; i < s.iteration.size(); ++i)
            line << (i ? " " : "") << X(s.iteration[i]) << "," << Y(s.mean[i]);
        svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\""
            << color << "\" stroke-width=\"1.8\"/>\n";
        double ly = mt + 14 + 16 * legend_i++;
        svg << "<line x1=\"" << W - mr - 110 << "\" y1=\"" << ly << "\" x2=\""
            << W - mr - 85 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << W - mr - 80 << "\" y=\"" << ly + 4
            << "\" font-size=\"12\">" << name << "</text>\n";
    }
    if (threshold) {
        svg << "<line id=\"threshold\" x1=\"" << ml << "\" y1=\"" << Y(*threshold)
            << "\" x2=\"" << W - mr << "\" y2=\"" << Y(*threshold)
            << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
        svg << "<text x=\"" << ml + 6 << "\" y=\"" << Y(*threshold) - 6
            << "\" font-size=\"11\">threshold " << fmt(*threshold) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

std::vector<fs::path> emit_plots(const fs::path& trace_dir) {
    auto summary = read_csv(trace_dir / "summary.csv");
    if (summary.size() <= 1)
        throw std::runtime_error("emit_plots: empty or missing summary.csv");
    json echo;
    {
        std::ifstream in(trace_dir / "config_echo.json");
        if (!in) throw std::runtime_error("emit_plots: missing config_echo.json");
        in >> echo;
    }
    std::string env_name = echo["env"]["name"].get<std::string>();
    double raw_threshold = echo["resolved"]["raw_threshold"].get<double>();

    std::map<std::string, Series> reward, utility;
    for (size_t i = 1; i < summary.size(); ++i) {
        const auto& f = summary[i];
        if (f.size() < 5) throw std::runtime_error("emit_plots: corrupt summary.csv");
        const std::string& metric = f[2];
        std::map<std::string, Series>* target = nullptr;
        if (metric == "robust_reward_raw") target = &reward;
        if (metric == "robust_utility_raw") target = &utility;
        if (!target) continue;
        Series& s = (*target)[f[0]];
        s.iteration.push_back(std::stod(f[1]));
        s.mean.push_back(std::stod(f[3]));
        s.std.push_back(std::stod(f[4]));
    }

    std::vector<fs::path> written;
    fs::path reward_path = trace_dir / (env_name + "_reward.svg");
    fs::path utility_path = trace_dir / (env_name + "_utility.svg");
    std::ofstream(reward_path)
        << svg_panel(reward, "robust reward return", std::nullopt);
    std::ofstream(utility_path)
        << svg_panel(utility, "robust utility return", raw_threshold);
    written.push_back(reward_path);
    written.push_back(utility_path);
    return written;
}

bool check_bounds(const fs::path& trace_dir, std::ostream& out) {
    auto trace = read_csv(trace_dir / "trace.csv");
    if (trace.size() <= 1) throw std::runtime_error("check-bounds: empty trace.csv");
    json echo;
    {
        std::ifstream in(trace_dir / "config_echo.json");
        if (!in) throw std::runtime_error("check-bounds: missing config_echo.json");
        in >> echo;
    }
    const double delta = echo["rcpo"]["delta"].get<double>();

    // column indices in the fixed schema
    enum {
        kAlgo = 0, kSeed = 1, kIter = 2, kRewNorm = 7, kUtilNorm = 8, kB = 9,
        kKl = 10, kThmR = 14, kThmC = 15, kRewOk = 16, kUtilOk = 17, kKlOk = 18
    };

    struct Check {
        const char* name;
        int pass = 0, fail = 0;
    };
    Check thm_reward{"theorem-4.3/4.4 reward improvement"};
    Check thm_utility{"theorem-4.3/4.4 utility lower bound"};
    Check lemma_c1{"lemma-C.1 KL containment (feasible iters)"};
    Check lemma_d1{"lemma-D.1 KL containment (infeasible iters)"};

    std::map<std::string, std::vector<std::vector<std::string>>> by_seed;
    for (size_t i = 1; i < trace.size(); ++i) {
        if (trace[i][kAlgo] != "RCPO") continue;
        by_seed[trace[i][kSeed]].push_back(trace[i]);
    }
    for (auto& [seed, rows] : by_seed) {
        (void)seed;
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return std::stoi(a[kIter]) < std::stoi(b[kIter]);
        });
        for (size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            double b = std::stod(r[kB]);
            double kl = std::stod(r[kKl]);
            bool feasible = b <= 0.0;
            if (feasible)
                (kl <= delta + 1e-6 ? lemma_c1.pass : lemma_c1.fail) += 1;
            else
                (r[kKlOk] == "1" ? lemma_d1.pass : lemma_d1.fail) += 1;

            double util_norm = std::stod(r[kUtilNorm]);
            double thm_c = std::stod(r[kThmC]);
            (util_norm >= thm_c - 1e-6 ? thm_utility.pass : thm_utility.fail) += 1;

            if (i > 0) {
                double improvement =
                    std::stod(r[kRewNorm]) - std::stod(rows[i - 1][kRewNorm]);
                double thm_r = std::stod(r[kThmR]);
                (improvement >= thm_r - 1e-6 ? thm_reward.pass : thm_reward.fail) +=
                    1;
            } else {
                (r[kRewOk] == "1" ? thm_reward.pass : thm_reward.fail) += 1;
            }
        }
    }

    bool ok = true;
    for (const Check* c : {&thm_reward, &thm_utility, &lemma_c1, &lemma_d1}) {
        bool pass = c->fail == 0;
        ok = ok && pass;
        out << (pass ? "PASS" : "FAIL") << "  " << c->name << "  (" << c->pass
            << " pass, " << c->fail << " fail)\n";
    }
    return ok;
}

}  // namespace rcmdp
