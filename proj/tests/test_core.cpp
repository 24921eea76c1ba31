#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sfk/engine.hpp"
#include "sfk/error.hpp"
#include "sfk/model.hpp"
#include "sfk/noise.hpp"
#include "sfk/segment.hpp"
#include "sfk/stats.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>

using namespace sfk;
using sfk::test::constant;

namespace
{

template <class Fn>
ErrorCode code_of(Fn&& fn)
{
    try
    {
        fn();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::ConfigInvalid;
}

} // namespace

TEST_CASE("philox known answers")
{
    using W = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("noise validation")
{
    const auto id = validate_noise(Eigen::MatrixXd::Identity(2, 2));
    CHECK(id.sigma().isApprox(Eigen::MatrixXd::Identity(2, 2)));

    Eigen::MatrixXd rank1(2, 2);
    rank1 << 1, 0, 1, 0;
    CHECK(code_of([&] { validate_noise(rank1); }) == ErrorCode::SingularCovariance);

    Eigen::MatrixXd g(2, 2);
    g << 1, 0, 0.5, 0.8660254;
    const auto spec = validate_noise(g);
    CHECK(spec.sigma()(0, 0) == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(spec.sigma()(0, 1) == doctest::Approx(0.4330127).epsilon(1e-12));
    CHECK(spec.sigma()(1, 0) == doctest::Approx(0.4330127).epsilon(1e-12));
    CHECK(spec.sigma()(1, 1) == doctest::Approx(0.75).epsilon(1e-7));

    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
    bad(0, 1) = std::nan("");
    CHECK(code_of([&] { validate_noise(bad); }) == ErrorCode::NonFinite);
}

TEST_CASE("increments")
{
    Eigen::MatrixXd g(2, 2);
    g << 1, 0, 0.5, 0.8660254;
    const auto spec = validate_noise(g);

    for (const auto& v : sample_increments(spec, 0.0, {1, 0}, 10))
        CHECK(v.norm() == 0.0);

    const auto a = sample_increments(spec, 0.01, {7, 3}, 1000);
    const auto b = sample_increments(spec, 0.01, {7, 3}, 1000);
    const auto c = sample_increments(spec, 0.01, {7, 4}, 1000);
    bool same = true;
    bool differs = false;
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        same = same && a[k] == b[k];
        differs = differs || a[k] != c[k];
    }
    CHECK(same);
    CHECK(differs);

    // Variance scales linearly in dt.
    const std::size_t N = 200000;
    auto variance = [&](double dt) {
        double s = 0.0;
        for (const auto& v : sample_increments(validate_noise(Eigen::MatrixXd::Identity(1, 1)), dt, {11, 0}, N))
            s += v(0) * v(0);
        return s / static_cast<double>(N);
    };
    CHECK(variance(0.01) / variance(0.04) == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("segment taps")
{
    SegmentBuffer lin(1, 1.0, 0.5);
    lin.fill([](double s, std::span<double> out) { out[0] = s; });
    CHECK(lin.at(-0.25, 0) == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(lin.at(-0.5, 0) == -0.5);
    CHECK(lin.at(0.0, 0) == lin.head()[0]);
    CHECK(code_of([&] { lin.at(-1.5, 0); }) == ErrorCode::OutOfRange);

    SegmentBuffer quad(1, 1.0, 0.5);
    quad.fill([](double s, std::span<double> out) { out[0] = s * s; });
    CHECK(std::abs(quad.at(-0.25, 0) - 0.0625) <= 0.125);
    CHECK(quad.at(-0.25, 0) == doctest::Approx(0.125));

    const double x[] = {0.7};
    lin.push(x);
    CHECK(lin.at(0.0, 0) == 0.7);

    const double c[] = {2.0, 3.0};
    SegmentBuffer cst(2, 1.0, 0.1);
    cst.fill_constant(c);
    for (double s : {-1.0, -0.55, -0.3, 0.0})
        CHECK(cst.at(s, 1) == doctest::Approx(3.0));
}

TEST_CASE("measure and kernel integrals")
{
    SegmentBuffer buf(1, 1.0, 0.001);
    buf.fill([](double s, std::span<double> out) { out[0] = std::exp(s); });
    const StateFunction id = [](std::span<const double> x) { return x[0]; };
    const DelayMeasure half({{-1.0, 0.5}, {0.0, 0.5}});
    CHECK(integrate_measure(buf, half, id) == doctest::Approx(0.6839397).epsilon(1e-6));
    CHECK(integrate_measure(buf, DelayMeasure::point(-1.0), id) == doctest::Approx(std::exp(-1.0)));

    // Linearity in h.
    const StateFunction h1 = [](std::span<const double> x) { return std::sin(3.0 * x[0]); };
    const StateFunction h2 = [](std::span<const double> x) { return x[0] * x[0]; };
    const StateFunction diff = [&](std::span<const double> x) { return h1(x) - h2(x); };
    CHECK(std::abs(integrate_measure(buf, half, diff) - integrate_measure(buf, half, h1) +
                   integrate_measure(buf, half, h2)) < 1e-12);

    const StateFunction one = [](std::span<const double>) { return 1.0; };
    const StateFunction zero = [](std::span<const double>) { return 0.0; };
    SegmentBuffer grid(1, 1.0, 0.01);
    const double v[] = {1.0};
    grid.fill_constant(v);
    CHECK(std::abs(kernel_integral(grid, DelayMeasure::point(-1.0), 1.0, one) - (std::numbers::e - 1.0)) < 1e-3);
    const DelayMeasure two({{-1.0, 0.5}, {-0.5, 0.5}});
    CHECK(std::abs(kernel_integral(grid, two, 1.0, one) - 1.1834881) < 1e-3);
    CHECK(kernel_integral(grid, DelayMeasure::point(-1.0), 1.0, zero) == 0.0);
    CHECK(kernel_integral(grid, DelayMeasure::point(-1.0), 1.0, one, KernelRule::ExponentialFit) ==
          doctest::Approx(std::numbers::e - 1.0).epsilon(1e-12));

    SegmentBuffer flat(1, 0.0, 0.01);
    flat.fill_constant(v);
    CHECK(kernel_integral(flat, DelayMeasure::point(0.0), 1.0, one) == 0.0);
}

TEST_CASE("sup norm")
{
    SegmentBuffer circle(2, std::numbers::pi, 0.001);
    circle.fill([](double s, std::span<double> out) {
        out[0] = std::sin(s);
        out[1] = std::cos(s);
    });
    CHECK(std::abs(sup_norm(circle) - 1.0) < 1e-9);

    SegmentBuffer lin(1, 1.0, 0.01);
    lin.fill([](double s, std::span<double> out) { out[0] = s; });
    CHECK(sup_norm(lin) == doctest::Approx(1.0));
}

TEST_CASE("catalog evaluation")
{
    const ModelSpec lv = build(test::coexistence_lv());
    SegmentBuffer buf(2, 0.0, 0.01);
    const double zero[] = {0.0, 0.0};
    buf.fill_constant(zero);
    CHECK(eval_growth(lv, buf).isApprox(Eigen::Vector2d(3.0, 2.0)));
    CHECK(eval_drift(lv, buf).norm() == 0.0);
    CHECK(eval_diffusion(lv, buf).norm() == 0.0);
    std::vector<double> g(2);
    lv.diffusion(buf, g);
    CHECK(g == std::vector<double>{1.0, 1.0});

    const double ones[] = {1.0, 1.0};
    buf.fill_constant(ones);
    CHECK(eval_drift(lv, buf).isApprox(Eigen::Vector2d(0.0, -1.0)));

    const ModelSpec sir = build(test::unit_sir());
    buf.fill_constant(ones);
    CHECK(eval_drift(sir, buf).isApprox(Eigen::Vector2d(-2.0, 1.0)));
    CHECK(sir.kolmogorov == std::vector<bool>{false, true});

    Replicator rep;
    rep.payoff = Eigen::MatrixXd::Zero(2, 2);
    rep.payoff_offset = Eigen::Vector2d(1.0, 0.0);
    rep.sigma = Eigen::Vector2d(0.0, 0.0);
    const ModelSpec rs = build(rep);
    const double half[] = {0.5, 0.5};
    buf.fill_constant(half);
    CHECK(eval_drift(rs, buf)(0) == doctest::Approx(0.25));

    auto broken = test::coexistence_lv();
    broken.b_hat(0, 0) = -2.0;
    CHECK(code_of([&] { build(broken); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("face restriction")
{
    const ModelSpec lv = build(test::coexistence_lv(0.5));
    const std::size_t keep1[] = {0};
    const ModelSpec face = restrict_to_face(lv, keep1);
    CHECK(face.n == 1);

    SegmentBuffer full(2, 0.5, 0.01);
    SegmentBuffer small(1, 0.5, 0.01);
    full.fill([](double s, std::span<double> out) {
        out[0] = 1.3 + 0.4 * s;
        out[1] = 0.0;
    });
    small.fill([](double s, std::span<double> out) { out[0] = 1.3 + 0.4 * s; });
    CHECK(std::abs(eval_drift(face, small)(0) - eval_drift(lv, full)(0)) < 1e-12);
    CHECK(eval_drift(lv, full)(1) == 0.0);

    const std::size_t both[] = {0, 1};
    const ModelSpec same = restrict_to_face(lv, both);
    full.fill([](double s, std::span<double> out) {
        out[0] = 1.0 - s;
        out[1] = 2.0 + s;
    });
    CHECK(eval_drift(same, full).isApprox(eval_drift(lv, full)));

    Chemostat chem;
    chem.a = 0.3;
    chem.m = Eigen::VectorXd::Constant(1, 2.0);
    chem.k = Eigen::VectorXd::Constant(1, 1.0);
    chem.r = 0.5;
    chem.gamma = Eigen::MatrixXd::Identity(2, 2);
    const ModelSpec cs = build(chem);
    const std::size_t nutrient[] = {0};
    const ModelSpec s_only = restrict_to_face(cs, nutrient);
    SegmentBuffer sb(1, 0.5, 0.01);
    sb.fill([](double s, std::span<double> out) { out[0] = 2.0 + s; });
    CHECK(eval_drift(s_only, sb)(0) == doctest::Approx(1.0 - 2.0 + 0.3 * 1.5));
    const std::size_t species_only[] = {1};
    CHECK(code_of([&] { restrict_to_face(cs, species_only); }) == ErrorCode::NonExtinguishable);
}

TEST_CASE("batch means and merge")
{
    BatchMeansAccumulator acc(300);
    for (int k = 0; k < 300; ++k)
        acc.add(1.0);
    const auto ones = acc.finish();
    CHECK(ones.mean == 1.0);
    CHECK(ones.ci_half_width == 0.0);
    CHECK(ones.batch_count == kDefaultBatches);

    auto value = [](int k) { return std::sin(0.37 * k) + 0.01 * k; };
    BatchMeansAccumulator a(300), b(600);
    for (int k = 0; k < 300; ++k)
        a.add(value(k));
    for (int k = 300; k < 900; ++k)
        b.add(value(k));
    const auto sa = a.finish();
    const auto sb = b.finish();
    const auto ab = merge(sa, sb);
    const auto ba = merge(sb, sa);
    std::vector<Batch> all = sa.batches;
    all.insert(all.end(), sb.batches.begin(), sb.batches.end());
    const auto direct = ObservableStats::from_batches(all);
    CHECK(ab.mean == ba.mean);
    CHECK(ab.mean == doctest::Approx(direct.mean).epsilon(1e-14));
    CHECK(ab.batch_means_variance == doctest::Approx(direct.batch_means_variance).epsilon(1e-10));
    double sum = 0.0;
    for (int k = 0; k < 900; ++k)
        sum += value(k);
    CHECK(ab.mean == doctest::Approx(sum / 900.0).epsilon(1e-12));
    CHECK(ab.ci_half_width == doctest::Approx(1.96 * std::sqrt(ab.batch_means_variance / ab.batch_count)));
}

TEST_CASE("occupation histogram")
{
    OccupationHistogram h(1);
    const double one[] = {1.0};
    for (int k = 0; k < 10; ++k)
        h.add(one);
    CHECK(frequency_in_band(h, 10.0).frequency[0] == 1.0);
    const double tiny[] = {1e-9};
    for (int k = 0; k < 10; ++k)
        h.add(tiny);
    CHECK(h.total() == 20);
    const auto band = frequency_in_band(h, 10.0);
    CHECK(band.frequency[0] == 0.5);
    CHECK(band.R == doctest::Approx(10.0));
    CHECK(code_of([] { frequency_in_band(OccupationHistogram(1), 10.0); }) == ErrorCode::EmptyHistogram);
}

TEST_CASE("engine basics")
{
    const ModelSpec null = test::scalar_model([](double) { return 0.0; }, 0.0, 1.0);
    SimulationState st(null, 0.01);
    const double x0[] = {0.8};
    st.fill_constant(x0);
    const double dB[] = {0.3};
    step(st, null, 0.01, dB);
    CHECK(st.segment().now(0) == 0.8);

    const ModelSpec lv = build(test::coexistence_lv(0.2));
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.T = 5.0;
    cfg.burn_in = 5.0;
    cfg.seed = 3;
    const Observable x1 = [](const SegmentView& s) { return s.now(0); };
    const auto empty = simulate(lv, constant({1.0, 1.0}), cfg, std::span(&x1, 1));
    CHECK(empty.samples == 0);
    CHECK(empty.stats[0].empty());

    cfg.burn_in = 1.0;
    cfg.record_path = true;
    const auto a = simulate(lv, constant({1.0, 1.0}), cfg);
    const auto b = simulate(lv, constant({1.0, 1.0}), cfg);
    CHECK(a.path->x == b.path->x);
    for (double v : a.path->x)
        CHECK(v > 0.0);

    const auto face = simulate(lv, constant({1.0, 0.0}), cfg);
    bool pinned = true;
    for (std::size_t k = 0; k < face.path->t.size(); ++k)
        pinned = pinned && face.path->x[2 * k + 1] == 0.0;
    CHECK(pinned);
}

TEST_CASE("deterministic logistic")
{
    const ModelSpec spec = test::scalar_model([](double x) { return 1.0 - x; }, 0.0, 1.0);
    const double x = test::terminal_value(spec, 0.5, 1e-3, 1.0, {1, 0});
    CHECK(std::abs(x - 0.5 * std::numbers::e / (1.0 + 0.5 * (std::numbers::e - 1.0))) <= 2e-3);
}

TEST_CASE("coupled copies with equal starts stay identical")
{
    const ModelSpec lv = build(test::coexistence_lv(0.1));
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.T = 5.0;
    cfg.seed = 9;
    const auto path = simulate_coupled(lv, constant({1.0, 2.0}), constant({1.0, 2.0}), {0.0, 1.0}, cfg);
    for (double z : path.z)
        CHECK(z == 0.0);
    const auto pulled = simulate_coupled(lv, constant({1.0, 2.0}), constant({2.0, 1.0}), {50.0, 1.0}, cfg);
    CHECK(pulled.z.back() < 0.01 * pulled.z.front());
}

TEST_CASE("simulation config validation")
{
    SimConfig cfg;
    cfg.dt = 0.0;
    CHECK(code_of([&] { validate(cfg, 0.0); }) == ErrorCode::InvalidParameter);
    cfg.dt = 0.1;
    cfg.burn_in = 2.0;
    cfg.T = 1.0;
    CHECK(code_of([&] { validate(cfg, 0.0); }) == ErrorCode::InvalidParameter);
    cfg.burn_in = 1.0;
    validate(cfg, 0.0);
}
