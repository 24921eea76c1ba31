#pragma once

#include "sfk/noise.hpp"
#include "sfk/segment.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sfk
{

/// Writes one value per coordinate of the model evaluated at a segment.
using VectorFunctional = std::function<void(const SegmentView&, std::span<double>)>;

/// Writes the n x m noise loading L: coordinate i receives x_i * sum_k L_ik dB_k.
using LoadingFunctional = std::function<void(const SegmentView&, Eigen::Ref<Eigen::MatrixXd>)>;

/// dX_i = (b_i + X_i f_i) dt + X_i g_i dE_i with E = Gamma^T B.
///
/// Coordinates with kolmogorov[i] == true have b_i == 0 and are advanced in
/// log space; the others (nutrient, susceptibles) are affine. A model may
/// replace g and Gamma by an explicit state-dependent loading against the
/// independent B, which the replicator dynamics need.
struct ModelSpec
{
    std::string name;
    std::size_t n = 0;
    std::vector<std::string> coordinate_names;
    std::vector<bool> kolmogorov;

    VectorFunctional affine; ///< b; empty when every coordinate is Kolmogorov
    VectorFunctional growth; ///< f
    VectorFunctional diffusion; ///< g
    LoadingFunctional loading; ///< optional, overrides g and Gamma

    std::shared_ptr<const NoiseSpec> noise;
    /// Component of E driving each coordinate.
    std::vector<std::size_t> noise_rows;

    double r = 0.0;
    std::map<std::string, DelayMeasure> delay_measures;
    /// Set for dynamics on the simplex sum x_i = total.
    std::optional<double> simplex_total;

    /// Coordinate index in the unrestricted model this spec descends from.
    std::vector<std::size_t> root_index;
    std::size_t root_n = 0;

    std::size_t noise_dimension() const noexcept { return noise->dimension(); }
    bool all_kolmogorov() const noexcept;
};

// Catalog models. Matrices are row-major in the usual (i, j) sense.

struct LVCompetitive
{
    Eigen::VectorXd a;
    Eigen::MatrixXd b;
    Eigen::MatrixXd b_hat;
    double r = 0.0;
    Eigen::MatrixXd gamma;
};

/// One prey (coordinate 1) and two competing predators.
struct PredatorPrey3
{
    Eigen::Vector3d a;
    Eigen::Matrix3d b;
    Eigen::Matrix3d b_hat;
    double r = 0.0;
    Eigen::MatrixXd gamma;
};

/// Payoff of strategy i given the delayed state y = x(t - r).
using PayoffFunction = std::function<double(std::span<const double> y)>;

/// Replicator dynamics on the simplex sum x_i = total. Payoffs are either
/// user closures or linear: F_i(y) = payoff_offset_i + sum_j payoff_ij y_j / total.
struct Replicator
{
    double total = 1.0;
    Eigen::VectorXd payoff_offset;
    Eigen::MatrixXd payoff;
    std::vector<PayoffFunction> payoffs;
    Eigen::VectorXd sigma;
    double r = 0.0;
};

/// Incidence f(S(t), S(t-r), I(t), I(t-r)).
using IncidenceFunction = std::function<double(double s0, double sr, double i0, double ir)>;

/// Coordinates (S, I). Linear incidence c1 S + c2 S(t-r) unless both
/// incidence closures are set.
struct SIR
{
    double a = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    IncidenceFunction incidence_s;
    IncidenceFunction incidence_i;
    double r = 0.0;
    Eigen::MatrixXd gamma;
};

using UptakeFunction = std::function<double(double s)>;

/// Coordinates (S, x_1, ..., x_n). Monod uptakes p_i(S) = m_i S / (k_i + S)
/// unless `uptake` closures are given.
struct Chemostat
{
    double a = 0.0;
    Eigen::VectorXd m;
    Eigen::VectorXd k;
    std::vector<UptakeFunction> uptake;
    double r = 0.0;
    Eigen::MatrixXd gamma;
};

using CatalogModel = std::variant<LVCompetitive, PredatorPrey3, Replicator, SIR, Chemostat>;

std::string catalog_name(const CatalogModel& catalog);

/// Throws Error{InvalidParameter} naming the violated constraint.
ModelSpec build(const CatalogModel& catalog);

/// Keeps exactly the coordinates in `keep` (indices into spec, any order);
/// the rest are pinned to 0. Throws NonExtinguishable if an affine coordinate
/// would be pinned.
ModelSpec restrict_to_face(const ModelSpec& spec, std::span<const std::size_t> keep);

/// `species` together with every affine coordinate, sorted.
std::vector<std::size_t> with_affine(const ModelSpec& spec, std::span<const std::size_t> species);

/// Indices of the Kolmogorov coordinates, i.e. those a face may pin.
std::vector<std::size_t> kolmogorov_coordinates(const ModelSpec& spec);

Eigen::VectorXd eval_growth(const ModelSpec& spec, const SegmentView& seg);
/// b_i + x_i f_i.
Eigen::VectorXd eval_drift(const ModelSpec& spec, const SegmentView& seg);
/// x_i g_i; with an explicit loading, x_i sqrt(C_ii).
Eigen::VectorXd eval_diffusion(const ModelSpec& spec, const SegmentView& seg);
/// n x m loading L.
void eval_loading(const ModelSpec& spec, const SegmentView& seg, Eigen::Ref<Eigen::MatrixXd> out);
/// C = L L^T, the covariance rate of the per-capita noise (g_i g_j sigma_ij).
Eigen::MatrixXd eval_noise_covariance(const ModelSpec& spec, const SegmentView& seg);

/// f_i - C_ii / 2, the integrand of the invasion rate of coordinate i.
double invasion_integrand(const ModelSpec& spec, const SegmentView& seg, std::size_t i);

} // namespace sfk
