#include "sfk/cli.hpp"

#include "sfk/digest.hpp"
#include "sfk/ergodic.hpp"
#include "sfk/error.hpp"
#include "sfk/lyapunov.hpp"
#include "sfk/noise.hpp"
#include "sfk/persistence.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace sfk
{

namespace
{

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& reason)
{
    throw Error(ErrorCode::ConfigInvalid, field + ": " + reason);
}

// Object reader that remembers which keys were consumed so that unknown
// keys can be rejected afterwards.
class Fields
{
public:
    Fields(const json& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node.is_object())
            bad(path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* optional(const std::string& key)
    {
        used_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    const json& required(const std::string& key)
    {
        const json* v = optional(key);
        if (!v)
            bad(at(key), "missing required field");
        return *v;
    }

    void finish() const
    {
        for (const auto& item : node_.items())
            if (!used_.count(item.key()))
                bad(at(item.key()), "unknown field");
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

double number(const json& v, const std::string& field)
{
    if (!v.is_number())
        bad(field, "expected a number");
    return v.get<double>();
}

std::uint64_t integer(const json& v, const std::string& field)
{
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        bad(field, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::vector<double> vector_of(const json& v, const std::string& field)
{
    if (!v.is_array())
        bad(field, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

Eigen::VectorXd eigen_vector(const json& v, const std::string& field)
{
    const auto values = vector_of(v, field);
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd matrix_of(const json& v, const std::string& field)
{
    if (!v.is_array() || v.empty())
        bad(field, "expected a non-empty array of rows");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    Eigen::MatrixXd m;
    for (std::size_t i = 0; i < rows; ++i)
    {
        const auto row = vector_of(v[i], field + "[" + std::to_string(i) + "]");
        if (i == 0)
        {
            cols = row.size();
            m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        }
        if (row.size() != cols || cols == 0)
            bad(field, "rows must have equal, non-zero length");
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    return m;
}

void require_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const std::string& field)
{
    if (m.rows() != rows || m.cols() != cols)
        bad(field, "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

std::size_t model_dimension(const CatalogModel& model)
{
    return std::visit(
        [](const auto& m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LVCompetitive>)
                return static_cast<std::size_t>(m.a.size());
            else if constexpr (std::is_same_v<T, PredatorPrey3>)
                return 3;
            else if constexpr (std::is_same_v<T, Replicator>)
                return static_cast<std::size_t>(m.sigma.size());
            else if constexpr (std::is_same_v<T, SIR>)
                return 2;
            else
                return static_cast<std::size_t>(m.m.size()) + 1;
        },
        model);
}

CatalogModel parse_model(Fields& f, const std::string& type, const Eigen::MatrixXd& gamma)
{
    auto r_of = [&] { return f.optional("r") ? number(*f.optional("r"), f.at("r")) : 0.0; };
    if (type == "LVCompetitive")
    {
        LVCompetitive lv;
        lv.a = eigen_vector(f.required("a"), f.at("a"));
        const auto n = lv.a.size();
        lv.b = matrix_of(f.required("b"), f.at("b"));
        require_shape(lv.b, n, n, f.at("b"));
        lv.b_hat = Eigen::MatrixXd::Zero(n, n);
        if (const json* bh = f.optional("b_hat"))
        {
            lv.b_hat = matrix_of(*bh, f.at("b_hat"));
            require_shape(lv.b_hat, n, n, f.at("b_hat"));
        }
        lv.r = r_of();
        lv.gamma = gamma;
        return lv;
    }
    if (type == "PredatorPrey3")
    {
        PredatorPrey3 pp;
        const auto a = eigen_vector(f.required("a"), f.at("a"));
        if (a.size() != 3)
            bad(f.at("a"), "expected 3 entries");
        pp.a = a;
        const auto b = matrix_of(f.required("b"), f.at("b"));
        require_shape(b, 3, 3, f.at("b"));
        pp.b = b;
        pp.b_hat = Eigen::Matrix3d::Zero();
        if (const json* bh = f.optional("b_hat"))
        {
            const auto m = matrix_of(*bh, f.at("b_hat"));
            require_shape(m, 3, 3, f.at("b_hat"));
            pp.b_hat = m;
        }
        pp.r = r_of();
        pp.gamma = gamma;
        return pp;
    }
    if (type == "Replicator")
    {
        Replicator rep;
        rep.sigma = eigen_vector(f.required("sigma"), f.at("sigma"));
        const auto n = rep.sigma.size();
        rep.payoff = matrix_of(f.required("payoff"), f.at("payoff"));
        require_shape(rep.payoff, n, n, f.at("payoff"));
        rep.payoff_offset = Eigen::VectorXd::Zero(n);
        if (const json* off = f.optional("payoff_offset"))
        {
            rep.payoff_offset = eigen_vector(*off, f.at("payoff_offset"));
            if (rep.payoff_offset.size() != n)
                bad(f.at("payoff_offset"), "expected one entry per strategy");
        }
        if (const json* total = f.optional("total"))
            rep.total = number(*total, f.at("total"));
        rep.r = r_of();
        return rep;
    }
    if (type == "SIR")
    {
        SIR sir;
        sir.a = number(f.required("a"), f.at("a"));
        sir.b1 = number(f.required("b1"), f.at("b1"));
        sir.b2 = number(f.required("b2"), f.at("b2"));
        sir.c1 = number(f.required("c1"), f.at("c1"));
        sir.c2 = number(f.required("c2"), f.at("c2"));
        sir.r = r_of();
        sir.gamma = gamma;
        return sir;
    }
    if (type == "Chemostat")
    {
        Chemostat chem;
        chem.a = number(f.required("a"), f.at("a"));
        chem.m = eigen_vector(f.required("m"), f.at("m"));
        chem.k = eigen_vector(f.required("k"), f.at("k"));
        if (chem.m.size() != chem.k.size() || chem.m.size() == 0)
            bad(f.at("k"), "m and k must have the same non-zero length");
        chem.r = r_of();
        chem.gamma = gamma;
        return chem;
    }
    bad(f.at("type"), "unknown model type '" + type + "'");
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::InvalidParameter, "cannot write " + path.string());
    out << content;
}

InitialSegment constant_initial(const std::vector<double>& value)
{
    return [value](double, std::span<double> out) { std::copy(value.begin(), value.end(), out.begin()); };
}

double lv_lipschitz(const LVCompetitive& lv)
{
    double D0 = 0.0;
    for (Eigen::Index i = 0; i < lv.b.rows(); ++i)
        D0 = std::max(D0, lv.b.row(i).sum() + lv.b_hat.row(i).cwiseAbs().sum());
    return D0;
}

} // namespace

ExperimentConfig parse_config(const std::string& text)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        bad("config", std::string("not valid JSON (") + e.what() + ")");
    }

    ExperimentConfig cfg;
    Fields top(doc, "");

    const json& model_node = top.required("model");
    Fields model(model_node, "model");
    const json& type = model.required("type");
    if (!type.is_string())
        bad("model.type", "expected a string");
    cfg.model_type = type.get<std::string>();

    Eigen::MatrixXd gamma;
    const json* noise_node = top.optional("noise");
    if (cfg.model_type == "Replicator")
    {
        if (noise_node)
            bad("noise", "not used by Replicator (noise enters through model.sigma)");
    }
    else
    {
        if (!noise_node)
            bad("noise", "missing required field");
        Fields noise(*noise_node, "noise");
        gamma = matrix_of(noise.required("gamma"), "noise.gamma");
        noise.finish();
        if (gamma.rows() != gamma.cols())
            bad("noise.gamma", "DimensionMismatch (matrix must be square)");
        try
        {
            validate_noise(gamma);
        }
        catch (const Error& e)
        {
            bad("noise.gamma", std::string(to_string(e.code())));
        }
    }

    cfg.model = parse_model(model, cfg.model_type, gamma);
    model.finish();
    const std::size_t n = model_dimension(cfg.model);
    if (cfg.model_type != "Replicator" && static_cast<std::size_t>(gamma.rows()) != n)
        bad("noise.gamma", "DimensionMismatch (expected " + std::to_string(n) + "x" + std::to_string(n) + ")");

    ModelSpec spec;
    try
    {
        spec = build(cfg.model);
    }
    catch (const Error& e)
    {
        bad("model", e.what());
    }

    const json& task = top.required("task");
    if (!task.is_string())
        bad("task", "expected a string");
    cfg.task = task.get<std::string>();
    static const std::set<std::string> tasks = {"simulate", "classify", "audit", "thresholds", "couple"};
    if (!tasks.count(cfg.task))
        bad("task", "must be one of simulate, classify, audit, thresholds, couple");

    Fields sim(top.required("sim"), "sim");
    cfg.sim.dt = number(sim.required("dt"), "sim.dt");
    cfg.sim.T = number(sim.required("T"), "sim.T");
    if (const json* v = sim.optional("burn_in"))
        cfg.sim.burn_in = number(*v, "sim.burn_in");
    if (const json* v = sim.optional("seed"))
        cfg.sim.seed = integer(*v, "sim.seed");
    if (const json* v = sim.optional("stream_id"))
        cfg.sim.stream_id = integer(*v, "sim.stream_id");
    if (const json* v = sim.optional("thinning"))
        cfg.sim.thinning = integer(*v, "sim.thinning");
    if (const json* v = sim.optional("positivity_floor"))
        cfg.sim.positivity_floor = number(*v, "sim.positivity_floor");
    sim.finish();
    try
    {
        validate(cfg.sim, spec.r);
    }
    catch (const Error& e)
    {
        bad("sim", e.what());
    }

    if (const json* v = top.optional("outputs"))
    {
        if (!v->is_string() || v->get<std::string>().empty())
            bad("outputs", "expected a directory path");
        cfg.outputs = v->get<std::string>();
    }
    if (const json* v = top.optional("replicates"))
    {
        cfg.replicates = integer(*v, "replicates");
        if (cfg.replicates < 1)
            bad("replicates", "must be >= 1");
    }
    auto positive_state = [&](const std::vector<double>& x, const std::string& field) {
        if (x.size() != n)
            bad(field, "expected " + std::to_string(n) + " entries");
        for (double v : x)
            if (!(v > 0.0) || !std::isfinite(v))
                bad(field, "entries must be positive and finite");
    };
    if (const json* v = top.optional("initial"))
    {
        cfg.initial = vector_of(*v, "initial");
        positive_state(*cfg.initial, "initial");
    }

    if (const json* v = top.optional("options"))
    {
        Fields opt(*v, "options");
        if (const json* e = opt.optional("epsilon"))
        {
            cfg.options.epsilon = number(*e, "options.epsilon");
            if (!(*cfg.options.epsilon > 0.0 && *cfg.options.epsilon < 1.0))
                bad("options.epsilon", "must lie in (0, 1)");
        }
        if (const json* e = opt.optional("lambda_tilde"))
        {
            cfg.options.lambda_tilde = number(*e, "options.lambda_tilde");
            if (!(cfg.options.lambda_tilde >= 0.0))
                bad("options.lambda_tilde", "must be >= 0");
        }
        if (const json* e = opt.optional("d0"))
        {
            cfg.options.d0 = number(*e, "options.d0");
            if (!(cfg.options.d0 >= 0.0))
                bad("options.d0", "must be >= 0");
        }
        if (const json* e = opt.optional("phi_tilde"))
        {
            cfg.options.phi_tilde = vector_of(*e, "options.phi_tilde");
            positive_state(*cfg.options.phi_tilde, "options.phi_tilde");
        }
        if (const json* e = opt.optional("N"))
            cfg.options.audit_samples = integer(*e, "options.N");
        if (const json* e = opt.optional("sampler_bound"))
        {
            cfg.options.sampler_bound = number(*e, "options.sampler_bound");
            if (!(*cfg.options.sampler_bound > 1e-4))
                bad("options.sampler_bound", "must exceed 1e-4");
        }
        if (const json* e = opt.optional("sampler_seed"))
            cfg.options.sampler_seed = integer(*e, "options.sampler_seed");
        if (const json* e = opt.optional("D0"))
            cfg.options.lipschitz_D0 = number(*e, "options.D0");
        if (const json* e = opt.optional("lipschitz_d0"))
            cfg.options.lipschitz_d0 = number(*e, "options.lipschitz_d0");
        opt.finish();
    }
    top.finish();

    if (cfg.task == "couple" && !spec.all_kolmogorov())
        bad("task", "couple requires a model whose coordinates are all Kolmogorov");
    if (cfg.task == "audit" && cfg.model_type != "LVCompetitive")
        bad("task", "audit has built-in Lyapunov parameters for LVCompetitive only");

    cfg.digest = fnv1a_hex(doc.dump());
    return cfg;
}

RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options)
{
    const ModelSpec spec = build(config.model);
    const std::filesystem::path dir = options.out_dir ? *options.out_dir : config.outputs;
    std::filesystem::create_directories(dir);
    const InitialSegment initial = config.initial ? constant_initial(*config.initial) : default_initial(spec);

    RunOutcome outcome;
    auto emit = [&](const std::string& name, const std::string& content) {
        write_file(dir / name, content);
        outcome.artifacts.push_back((dir / name).string());
    };

    if (config.task == "simulate")
    {
        SimConfig sim = config.sim;
        sim.record_path = true;
        std::vector<Observable> observables;
        for (std::size_t i = 0; i < spec.n; ++i)
            observables.push_back([i](const SegmentView& seg) { return seg.now(i); });
        const auto result = simulate(spec, initial, sim, observables);

        std::string csv = "t";
        for (std::size_t i = 0; i < spec.n; ++i)
            csv += ",X_" + std::to_string(i + 1);
        csv += "\n";
        const auto& path = *result.path;
        for (std::size_t k = 0; k < path.t.size(); ++k)
        {
            csv += num(path.t[k]);
            for (std::size_t i = 0; i < spec.n; ++i)
                csv += "," + num(path.x[k * spec.n + i]);
            csv += "\n";
        }
        emit("trajectory.csv", csv);

        std::string jsonl;
        std::vector<std::size_t> all(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i)
            all[i] = i + 1;
        for (std::size_t i = 0; i < spec.n; ++i)
            if (!result.stats[i].empty())
                jsonl += stats_jsonl("X_" + std::to_string(i + 1), all, result.stats[i], sim) + "\n";
        emit("stats.jsonl", jsonl);
        outcome.summary = "simulate: " + std::to_string(result.steps) + " steps, " + std::to_string(result.samples) +
                          " samples";
    }
    else if (config.task == "classify")
    {
        ScanOptions scan;
        scan.replicates = config.replicates;
        scan.workers = options.workers;
        scan.initial = initial;
        const auto report = classify(spec, config.sim, scan);
        emit("report.json", report_json(report, config.sim, config.digest) + "\n");
        outcome.summary = "classify: " + std::string(to_string(report.classification)) +
                          ", kappa_star = " + num(report.kappa_star);
        if (config.options.epsilon)
        {
            const auto check = empirical_persistence_check(spec, config.sim, *config.options.epsilon, initial);
            nlohmann::ordered_json j;
            j["epsilon"] = *config.options.epsilon;
            j["R"] = check.R;
            j["frequency"] = check.frequency;
            j["achieved"] = check.achieved;
            emit("persistence.json", j.dump(2) + "\n");
            outcome.summary += check.achieved ? ", band reached at R = " + num(check.R) : ", band not reached";
        }
    }
    else if (config.task == "thresholds")
    {
        const auto rows = compare_thresholds(config.model, config.sim, options.workers);
        emit("thresholds.csv", thresholds_csv(rows));
        std::size_t passed = 0;
        std::size_t checked = 0;
        for (const auto& row : rows)
            if (row.entry.value)
            {
                ++checked;
                passed += row.pass;
            }
        outcome.summary = "thresholds: " + std::to_string(passed) + "/" + std::to_string(checked) + " pass, " +
                          std::to_string(rows.size() - checked) + " simulation-only";
    }
    else if (config.task == "audit")
    {
        const auto& lv = std::get<LVCompetitive>(config.model);
        const auto params = suggest_params_lv(lv);
        const double bound = config.options.sampler_bound.value_or(10.0 * params.M);
        const std::size_t N = config.options.audit_samples;
        SegmentSampler s1(spec.n, spec.r, bound, config.options.sampler_seed);
        SegmentSampler s2 = s1;
        SegmentSampler s4 = s1;
        const auto a13 = check_assumption_1_3(spec, params, s1, N);
        const auto a2 = check_assumption_2(spec, params, s2, N);
        LipschitzCandidate candidate{config.options.lipschitz_D0.value_or(lv_lipschitz(lv)),
                                     config.options.lipschitz_d0, DelayMeasure::point(-spec.r)};
        const auto a4 = check_assumption_4(spec, candidate, s4, N);
        emit("audit.jsonl", audit_json(a13) + "\n" + audit_json(a2) + "\n" + audit_json(a4) + "\n");
        outcome.summary = "audit: " + std::to_string(a13.violations + a2.violations + a4.violations) +
                          " violations over " + std::to_string(N) + " samples";
    }
    else if (config.task == "couple")
    {
        std::vector<double> phi(spec.n);
        initial(0.0, phi);
        std::vector<double> tilde = config.options.phi_tilde.value_or(std::vector<double>{});
        if (tilde.empty())
            for (double v : phi)
                tilde.push_back(2.0 * v);
        CoupledConfig ccfg{config.options.lambda_tilde, config.options.d0};
        const auto path = simulate_coupled(spec, initial, constant_initial(tilde), ccfg, config.sim);
        std::string csv = "t,Z\n";
        for (std::size_t k = 0; k < path.t.size(); ++k)
            csv += num(path.t[k]) + "," + num(path.z[k]) + "\n";
        emit("coupling.csv", csv);
        outcome.summary = "couple: |Z| from " + num(path.z.front()) + " to " + num(path.z.back());
    }
    return outcome;
}

namespace
{

struct CatalogEntry
{
    const char* name;
    std::vector<std::pair<const char*, const char*>> params;
    std::vector<const char*> constraints;
};

const std::vector<CatalogEntry>& catalog_entries()
{
    static const std::vector<CatalogEntry> entries = {
        {"LVCompetitive",
         {{"a", "n-vector, growth rates"},
          {"b", "n x n, instantaneous competition"},
          {"b_hat", "n x n, delayed competition (default 0)"},
          {"r", "delay >= 0"},
          {"noise.gamma", "n x n"}},
         {"a_i > 0", "b_ii > 0", "b_ij >= 0 for i != j", "b_hat_ij > -b_ii", "gamma^T gamma positive definite"}},
        {"PredatorPrey3",
         {{"a", "3-vector: prey growth, predator death rates"},
          {"b", "3 x 3 interaction magnitudes"},
          {"b_hat", "3 x 3 delayed interactions (default 0)"},
          {"r", "delay >= 0"},
          {"noise.gamma", "3 x 3"}},
         {"a_i > 0", "b_ii > 0", "b_ij >= 0 for i != j", "b_hat_ij > -b_ii", "gamma^T gamma positive definite"}},
        {"Replicator",
         {{"payoff", "n x n, F_i(y) = offset_i + sum_j payoff_ij y_j / total"},
          {"payoff_offset", "n-vector (default 0)"},
          {"sigma", "n-vector of noise intensities"},
          {"total", "simplex total X (default 1)"},
          {"r", "delay >= 0"}},
         {"n >= 2", "total X > 0", "sigma_i >= 0", "no noise section"}},
        {"SIR",
         {{"a", "recruitment"},
          {"b1", "death rate of S"},
          {"b2", "death and recovery rate of I"},
          {"c1", "incidence on S(t)"},
          {"c2", "incidence on S(t - r)"},
          {"r", "delay >= 0"},
          {"noise.gamma", "2 x 2"}},
         {"a > 0", "b1 > 0", "b2 > 0", "c1 > 0", "c2 > 0", "gamma^T gamma positive definite"}},
        {"Chemostat",
         {{"a", "recycled fraction of the delayed nutrient"},
          {"m", "n-vector, maximal uptake"},
          {"k", "n-vector, half-saturation"},
          {"r", "delay >= 0"},
          {"noise.gamma", "(n+1) x (n+1), nutrient first"}},
         {"0 <= a < 1", "m_i > 0", "k_i > 0", "gamma^T gamma positive definite"}},
    };
    return entries;
}

} // namespace

std::string list_models_text()
{
    std::string out;
    for (const auto& e : catalog_entries())
    {
        out += e.name;
        out += "\n  parameters:\n";
        for (const auto& [name, what] : e.params)
            out += std::string("    ") + name + ": " + what + "\n";
        out += "  constraints:";
        for (std::size_t k = 0; k < e.constraints.size(); ++k)
            out += std::string(k ? ", " : " ") + e.constraints[k];
        out += "\n";
    }
    return out;
}

std::string list_models_json()
{
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : catalog_entries())
    {
        nlohmann::ordered_json m;
        m["name"] = e.name;
        nlohmann::ordered_json params = nlohmann::ordered_json::object();
        for (const auto& [name, what] : e.params)
            params[name] = what;
        m["parameters"] = params;
        m["constraints"] = e.constraints;
        arr.push_back(m);
    }
    return arr.dump(2);
}

} // namespace sfk
