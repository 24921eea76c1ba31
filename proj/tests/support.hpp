#pragma once

#include "sfk/engine.hpp"
#include "sfk/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace sfk::test
{

/// a = (3, 2), b = [[2, 1], [1, 2]], no delayed coupling, Gamma = I.
inline LVCompetitive coexistence_lv(double r = 0.0)
{
    LVCompetitive lv;
    lv.a = Eigen::Vector2d(3.0, 2.0);
    lv.b.resize(2, 2);
    lv.b << 2.0, 1.0, 1.0, 2.0;
    lv.b_hat = Eigen::MatrixXd::Zero(2, 2);
    lv.r = r;
    lv.gamma = Eigen::MatrixXd::Identity(2, 2);
    return lv;
}

inline LVCompetitive scalar_lv(double a, double b, double sigma, double r = 0.0)
{
    LVCompetitive lv;
    lv.a = Eigen::VectorXd::Constant(1, a);
    lv.b = Eigen::MatrixXd::Constant(1, 1, b);
    lv.b_hat = Eigen::MatrixXd::Zero(1, 1);
    lv.r = r;
    lv.gamma = Eigen::MatrixXd::Constant(1, 1, std::sqrt(sigma));
    return lv;
}

inline PredatorPrey3 predator_prey()
{
    PredatorPrey3 pp;
    pp.a = Eigen::Vector3d(4.0, 1.0, 2.0);
    pp.b << 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.5, 1.0;
    pp.b_hat = Eigen::Matrix3d::Zero();
    pp.gamma = Eigen::MatrixXd::Identity(3, 3);
    return pp;
}

inline SIR unit_sir()
{
    SIR sir;
    sir.a = sir.b1 = sir.b2 = sir.c1 = sir.c2 = 1.0;
    sir.gamma = Eigen::MatrixXd::Identity(2, 2);
    return sir;
}

/// Scalar model dX = X f(x) dt + X g dE with Gamma = [[sqrt(sigma)]].
template <class F>
ModelSpec scalar_model(F f, double g, double sigma)
{
    ModelSpec spec = build(scalar_lv(1.0, 1.0, sigma));
    spec.growth = [f](const SegmentView& seg, std::span<double> out) { out[0] = f(seg.now(0)); };
    spec.diffusion = [g](const SegmentView&, std::span<double> out) { out[0] = g; };
    return spec;
}

inline InitialSegment constant(std::vector<double> value)
{
    return [value](double, std::span<double> out) { std::copy(value.begin(), value.end(), out.begin()); };
}

/// X(T) of one path driven by stream (seed, id).
inline double terminal_value(const ModelSpec& spec, double x0, double dt, double T, RngStream stream)
{
    SimulationState st(spec, dt);
    const double init[] = {x0};
    st.fill_constant(init);
    const NormalGenerator gen(stream);
    const auto steps = static_cast<std::uint64_t>(std::llround(T / dt));
    const double scale = std::sqrt(dt);
    double dB[1];
    for (std::uint64_t k = 0; k < steps; ++k)
    {
        gen.fill(k, 0, dB);
        dB[0] *= scale;
        step(st, spec, dt, dB, &gen);
    }
    return st.segment().now(0);
}

/// Brute-force max over rho_1 in [rho_min, 1 - rho_min] of min_j rho . lambda_j.
inline std::pair<double, double> grid_kappa(const std::vector<std::vector<double>>& table, double rho_min = 1e-3,
                                            double resolution = 1e-5)
{
    double best = -1e300;
    double best_rho = 0.0;
    const auto steps = static_cast<long>(std::llround((1.0 - 2.0 * rho_min) / resolution));
    for (long k = 0; k <= steps; ++k)
    {
        const double r1 = rho_min + static_cast<double>(k) * resolution;
        double worst = 1e300;
        for (const auto& row : table)
            worst = std::min(worst, r1 * row[0] + (1.0 - r1) * row[1]);
        if (worst > best)
        {
            best = worst;
            best_rho = r1;
        }
    }
    return {best, best_rho};
}

} // namespace sfk::test
