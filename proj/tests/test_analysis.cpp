#include <doctest.h>

#include "sfk/cli.hpp"
#include "sfk/ergodic.hpp"
#include "sfk/error.hpp"
#include "sfk/lyapunov.hpp"
#include "sfk/persistence.hpp"
#include "support.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace sfk;

namespace
{

const ThresholdEntry& entry(const std::vector<ThresholdEntry>& entries, const std::string& name)
{
    for (const auto& e : entries)
        if (e.name == name)
            return e;
    FAIL("missing entry " << name);
    return entries.front();
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string config_error(const std::string& text)
{
    try
    {
        parse_config(text);
    }
    catch (const Error& e)
    {
        CHECK(e.code() == ErrorCode::ConfigInvalid);
        return e.what();
    }
    FAIL("config accepted");
    return {};
}

SimConfig short_run(double T, double dt, std::uint64_t seed)
{
    SimConfig cfg;
    cfg.T = T;
    cfg.dt = dt;
    cfg.seed = seed;
    return cfg;
}

const FaceMeasureEstimate& face_of(const std::vector<FaceMeasureEstimate>& faces, std::vector<std::size_t> face)
{
    for (const auto& f : faces)
        if (f.face == face)
            return f;
    FAIL("face missing");
    return faces.front();
}

} // namespace

TEST_CASE("time averages")
{
    const ModelSpec lv = build(test::scalar_lv(3.0, 2.0, 1.0));
    const std::size_t face[] = {0};
    const auto one = time_average(lv, face, [](const SegmentView&) { return 1.0; }, short_run(20.0, 0.01, 1));
    CHECK(one.mean == 1.0);
    CHECK(one.ci_half_width == 0.0);

    const auto dirac = estimate_lambda(lv, {}, 0, short_run(20.0, 0.01, 1));
    CHECK(dirac.mean == 2.5);
    CHECK(dirac.ci_half_width == 0.0);

    const ModelSpec two = build(test::coexistence_lv());
    CHECK_THROWS_AS(estimate_lambda(two, face, 0, short_run(20.0, 0.01, 1)), Error);

    SimConfig tiny = short_run(0.05, 0.01, 1);
    tiny.burn_in = 0.0;
    try
    {
        time_average(lv, face, [](const SegmentView& s) { return s.now(0); }, tiny);
        FAIL("expected InsufficientBatches");
    }
    catch (const Error& e)
    {
        CHECK(e.code() == ErrorCode::InsufficientBatches);
    }
}

TEST_CASE("LP against the grid oracle")
{
    const std::vector<std::vector<double>> table = {{2.5, 1.5}, {0.0, 0.25}, {1.75, 0.0}};
    const std::size_t coords[] = {0, 1};
    const auto lp = solve_rho_lp(table, coords, 2);
    const auto [grid, grid_rho] = test::grid_kappa(table);
    CHECK(std::abs(lp.kappa_lp - grid) < 1e-3);
    CHECK(std::abs(lp.rho[0] - grid_rho) < 1e-3);
    CHECK(lp.kappa_lp == doctest::Approx(0.21875).epsilon(1e-9));
    CHECK(lp.kappa_star == doctest::Approx(lp.kappa_lp / 2.0));
    CHECK(lp.rho[0] + lp.rho[1] == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& row : table)
        CHECK(lp.rho[0] * row[0] + lp.rho[1] * row[1] >= lp.kappa_lp - 1e-9);
    for (double r : lp.rho)
        CHECK(r >= kRhoMin - 1e-12);

    for (double c : {0.1, 3.0, 40.0})
    {
        std::vector<std::vector<double>> scaled = table;
        for (auto& row : scaled)
            for (auto& v : row)
                v *= c;
        CHECK(solve_rho_lp(scaled, coords, 2).kappa_lp == doctest::Approx(c * lp.kappa_lp).epsilon(1e-9));
    }

    CHECK(solve_rho_lp({{1.0, 1.0}}, coords, 2).kappa_lp == doctest::Approx(1.0));
    CHECK(solve_rho_lp({{-1.0, -1.0}}, coords, 2).kappa_lp == doctest::Approx(-1.0));

    const std::vector<std::vector<double>> other = {{-0.4, 1.2}, {0.9, -0.3}, {0.2, 0.2}};
    const auto [g2, r2] = test::grid_kappa(other);
    CHECK(std::abs(solve_rho_lp(other, coords, 2).kappa_lp - g2) < 1e-3);
}

TEST_CASE("face lattice")
{
    const ModelSpec dying = build(test::scalar_lv(0.2, 1.0, 1.0));
    const auto faces = boundary_scan(dying, short_run(50.0, 0.01, 2));
    // Only proper faces are scanned; for n = 1 that is the origin alone.
    REQUIRE(faces.size() == 1);
    CHECK(faces[0].face.empty());
    CHECK(faces[0].occupancy == Occupancy::Occupied);
    CHECK(faces[0].lambda[0].mean == doctest::Approx(-0.3));
    CHECK(faces[0].lambda[0].exact);

    const auto pair = boundary_scan(build(test::coexistence_lv()), short_run(50.0, 0.01, 2));
    REQUIRE(pair.size() == 3);
    CHECK(pair[0].face.empty());
    CHECK(pair[1].face.size() == 1);
    CHECK(pair[2].face.size() == 1);
}

TEST_CASE("classification of failing and knife-edge LV")
{
    auto weak = test::coexistence_lv();
    weak.a(1) = 0.4;
    const auto failing = classify(build(weak), short_run(2000.0, 0.01, 5));
    CHECK(failing.classification == Classification::CriterionFails);
    CHECK(face_of(failing.faces, {1}).occupancy == Occupancy::Empty);
    CHECK(face_of(failing.faces, {0}).lambda[1].mean == doctest::Approx(-1.35).epsilon(0.05));

    auto edge = test::coexistence_lv();
    edge.a(1) = 0.5 + 1.25;
    const auto knife = classify(build(edge), short_run(500.0, 0.01, 5));
    CHECK(knife.classification == Classification::Inconclusive);
}

TEST_CASE("closed-form thresholds")
{
    const auto lv = analytic_threshold(test::coexistence_lv());
    CHECK(*entry(lv, "lambda_1(delta*)").value == doctest::Approx(2.5));
    CHECK(*entry(lv, "lambda_2(delta*)").value == doctest::Approx(1.5));
    CHECK(*entry(lv, "lambda_2(pi_1)").value == doctest::Approx(0.25));
    CHECK(*entry(lv, "lambda_1(pi_2)").value == doctest::Approx(1.75));
    CHECK(*entry(lv, "mean_1(pi_1)").value == doctest::Approx(1.25));

    const auto pp = analytic_threshold(test::predator_prey());
    CHECK(*entry(pp, "mean_1(pi_1)").value == doctest::Approx(3.5));
    CHECK(*entry(pp, "lambda_2(pi_1)").value == doctest::Approx(2.0));
    CHECK(*entry(pp, "lambda_3(pi_1)").value == doctest::Approx(1.0));
    CHECK(*entry(pp, "mean_1(pi_12)").value == 2.5);
    CHECK(*entry(pp, "mean_2(pi_12)").value == 1.0);
    CHECK(*entry(pp, "lambda_3(pi_12)").value == doctest::Approx(-0.5));

    Replicator rep;
    rep.payoff.resize(2, 2);
    rep.payoff << 0.0, 1.0, 1.0, 0.0;
    rep.payoff_offset = Eigen::Vector2d::Zero();
    rep.sigma = Eigen::Vector2d(0.5, 0.5);
    const auto rp = analytic_threshold(rep);
    CHECK(*entry(rp, "lambda_1(delta_2)").value == doctest::Approx(0.75));
    CHECK(*entry(rp, "lambda_2(delta_1)").value == doctest::Approx(0.75));

    const auto sir = analytic_threshold(test::unit_sir());
    CHECK(*entry(sir, "lambda_I(pi)").value == doctest::Approx(0.5));

    Chemostat chem;
    chem.a = 0.5;
    chem.m = Eigen::VectorXd::Constant(1, 2.0);
    chem.k = Eigen::VectorXd::Constant(1, 1.0);
    chem.gamma = Eigen::MatrixXd::Identity(2, 2);
    const auto ch = analytic_threshold(chem);
    CHECK(*entry(ch, "mean_S(pi_0)").value == doctest::Approx(2.0));
    CHECK_FALSE(entry(ch, "lambda_1(pi_0)").value.has_value());
}

TEST_CASE("Lyapunov functional values")
{
    LyapunovParams p;
    p.c = {1.0};
    p.A2 = 1.0;
    p.gamma = 1.0;
    p.rho = {0.0};
    p.h = [](std::span<const double>) { return 1.0; };
    p.mu = DelayMeasure::point(-1.0);
    SegmentBuffer zero(1, 1.0, 0.01);
    const double z[] = {0.0};
    zero.fill_constant(z);
    const double rho0[] = {0.0};
    CHECK(eval_V(p, zero, rho0) == doctest::Approx(5.5749415).epsilon(1e-8));

    p.A2 = 0.0;
    SegmentBuffer four(1, 1.0, 0.01);
    const double x4[] = {4.0};
    four.fill_constant(x4);
    CHECK(eval_V(p, four, rho0) == doctest::Approx(5.0));
    const double rho[] = {0.1};
    CHECK(eval_V(p, four, rho) == doctest::Approx(5.7434918).epsilon(1e-8));

    p.A2 = 0.7;
    p.h = [](std::span<const double> x) { return 1.0 + std::abs(x[0]); };
    SegmentBuffer wavy(1, 1.0, 0.01);
    wavy.fill([](double s, std::span<double> out) { out[0] = 2.0 + std::sin(4.0 * s); });
    CHECK(eval_U(p, wavy, rho) == doctest::Approx(std::log(eval_V(p, wavy, rho))).epsilon(1e-12));
    CHECK(eval_V(p, wavy, rho0) >= 1.0);

    const double neg[] = {-0.1};
    CHECK_THROWS_AS(eval_V(p, zero, neg), Error);
}

TEST_CASE("Q0 at the origin and with kernels off")
{
    const auto lv = test::coexistence_lv(1.0);
    const ModelSpec spec = build(lv);
    auto params = suggest_params_lv(lv);
    CHECK(check_params(params, spec.noise->sigma()).empty());

    SegmentBuffer zero(2, 1.0, 0.01);
    const double z[] = {0.0, 0.0};
    zero.fill_constant(z);
    CHECK(std::abs(eval_Q0(spec, params, zero)) < 1e-12);
    const double half[] = {0.5, 0.5};
    CHECK(eval_Q_rho_star(spec, params, half, zero) == doctest::Approx(-2.0).epsilon(1e-12));

    params.A2 = 0.0;
    SegmentBuffer x(2, 1.0, 0.01);
    const double xv[] = {0.7, 1.6};
    x.fill_constant(xv);
    const Eigen::Vector2d f = eval_growth(spec, x);
    const double s = 1.0 + xv[0] + xv[1];
    const double expected = (xv[0] * f(0) + xv[1] * f(1)) / s - 0.5 * (xv[0] * xv[0] + xv[1] * xv[1]) / (s * s);
    CHECK(eval_Q0(spec, params, x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("assumption audits")
{
    const auto lv = test::coexistence_lv(1.0);
    const ModelSpec spec = build(lv);
    const auto params = suggest_params_lv(lv);

    SegmentSampler sampler(2, 1.0, 10.0 * params.M, 4);
    const auto vacuous = check_assumption_1_3(spec, params, sampler, 0);
    CHECK(vacuous.vacuous);
    CHECK(vacuous.violations == 0);

    const auto ok = check_assumption_1_3(spec, params, sampler, 300);
    CHECK(ok.violations == 0);

    const auto growth = check_assumption_2(spec, params, sampler, 300);
    REQUIRE(growth.k_tilde);
    CHECK(*growth.k_tilde <= 3.0 + 3.0 + 2.0 + 3.0 + 2.0);
    CHECK_FALSE(growth.unbounded_trend);

    const auto lip = check_assumption_4(spec, {4.0, 0.0, DelayMeasure::point(-1.0)}, sampler, 300);
    CHECK(lip.violations == 0);
    REQUIRE(lip.inverse_norm);
    CHECK(*lip.inverse_norm == doctest::Approx(1.0));
    const auto loose = check_assumption_4(spec, {0.0, 0.0, DelayMeasure::point(-1.0)}, sampler, 100);
    CHECK(loose.violations > 0);

    // Quadratic per-capita growth outpaces h = 1 + |x|.
    ModelSpec fast = spec;
    fast.growth = [](const SegmentView& seg, std::span<double> out) {
        out[0] = 1.0 - seg.now(0) * seg.now(0);
        out[1] = 1.0 - seg.now(1) * seg.now(1);
    };
    const auto trend = check_assumption_2(fast, params, sampler, 300);
    CHECK(trend.unbounded_trend);
}

TEST_CASE("config validation")
{
    const std::string base = R"({"model":{"type":"LVCompetitive","a":[1.0],"b":[[1.0]]},)"
                             R"("noise":{"gamma":[[0.5]]},"task":"simulate","sim":{"dt":0.01,"T":1,"seed":1}})";
    CHECK_NOTHROW(parse_config(base));

    auto with = [&](const std::string& from, const std::string& to) {
        std::string text = base;
        text.replace(text.find(from), from.size(), to);
        return text;
    };
    CHECK(config_error(with("[[0.5]]", "[[1,0],[1,0]]")).find("noise.gamma: SingularCovariance") !=
          std::string::npos);
    CHECK(config_error(with("\"seed\":1", "\"seed\":1,\"extra\":2")).find("sim.extra: unknown field") !=
          std::string::npos);
    CHECK(config_error(with("\"task\":\"simulate\"", "\"task\":\"fly\"")).find("task:") != std::string::npos);
    CHECK(config_error(with("[[1.0]]", "[[0.0]]")).find("model:") != std::string::npos);
    CHECK(config_error(with("\"dt\":0.01", "\"dt\":-1")).find("sim:") != std::string::npos);
    CHECK(config_error(with("[[0.5]]", "[[1,0],[0,1]]")).find("noise.gamma: DimensionMismatch") !=
          std::string::npos);
    CHECK(config_error("{").find("config:") != std::string::npos);
}

TEST_CASE("simulate artifacts are byte-deterministic")
{
    const auto dir = std::filesystem::temp_directory_path() / "sfk_cli_test";
    std::filesystem::remove_all(dir);
    const std::string text = R"({"model":{"type":"LVCompetitive","a":[1.0],"b":[[1.0]]},)"
                             R"("noise":{"gamma":[[1.0]]},"task":"simulate",)"
                             R"("sim":{"dt":0.001,"T":1,"seed":42,"thinning":10}})";
    const auto config = parse_config(text);
    run_experiment(config, {(dir / "a").string(), 1});
    run_experiment(config, {(dir / "b").string(), 1});
    const auto csv = slurp(dir / "a" / "trajectory.csv");
    CHECK(csv.rfind("t,X_1\n", 0) == 0);
    CHECK(csv == slurp(dir / "b" / "trajectory.csv"));
    CHECK(slurp(dir / "a" / "stats.jsonl") == slurp(dir / "b" / "stats.jsonl"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("model listing")
{
    const auto listing = nlohmann::json::parse(list_models_json());
    CHECK(listing.size() == 5);
    CHECK(listing[0]["name"] == "LVCompetitive");
    CHECK(list_models_text().find("b_hat_ij > -b_ii") != std::string::npos);
    CHECK(list_models_json().find("b_hat_ij > -b_ii") != std::string::npos);
}
