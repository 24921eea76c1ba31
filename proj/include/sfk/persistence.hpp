#pragma once

#include "sfk/engine.hpp"
#include "sfk/model.hpp"
#include "sfk/stats.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sfk
{

inline constexpr double kRhoMin = 1e-3;

enum class Occupancy
{
    Occupied,
    Empty,
    Inconclusive,
};

std::string_view to_string(Occupancy occupancy) noexcept;

struct LambdaEstimate
{
    double mean = 0.0;
    double ci = 0.0;
    bool exact = false;
};

struct FaceMeasureEstimate
{
    std::vector<std::size_t> face; ///< Kolmogorov coordinates kept positive
    Occupancy occupancy = Occupancy::Empty;
    /// One entry per coordinate. Entries inside the face are exactly 0;
    /// entries of affine coordinates are unused and 0.
    std::vector<LambdaEstimate> lambda;
    /// Time averages of the simulated coordinates (face plus affine); 0 elsewhere.
    std::vector<LambdaEstimate> means;
    std::vector<std::uint64_t> stream_ids;
    /// False when replicate estimates disagree by more than 3 CIs.
    bool replicates_agree = true;

    bool in_measure_set() const noexcept { return occupancy != Occupancy::Empty; }
};

struct ScanOptions
{
    std::size_t replicates = 1;
    std::size_t workers = 1;
    InitialSegment initial; ///< defaults to default_initial(spec)
};

/// Visits the faces spanned by the Kolmogorov coordinates in order of size.
/// The empty face is the Dirac measure at 0 (for the replicator the lattice
/// starts at the vertices). A face is occupied when every occupied proper
/// sub-face is repelled by some coordinate of the face with a rate whose CI
/// lies above 0, empty when some occupied sub-face is attracting for every
/// coordinate with CIs below 0, and inconclusive otherwise.
std::vector<FaceMeasureEstimate> boundary_scan(const ModelSpec& spec, const SimConfig& cfg,
                                               const ScanOptions& options = {});

struct RhoStar
{
    std::vector<double> rho; ///< one entry per coordinate (0 on affine ones)
    double kappa_lp = 0.0; ///< max over rho of min_j rho . lambda_j
    double kappa_star = 0.0; ///< kappa_lp / 2
};

/// Plain LP on a table of lambda vectors (one row per measure) restricted to
/// the columns in `coords`. Throws InfeasibleLP when the simplex reports it.
RhoStar solve_rho_lp(const std::vector<std::vector<double>>& table, std::span<const std::size_t> coords,
                     std::size_t n, double rho_min = kRhoMin);

/// LP over the faces in the measure set, using the estimated means.
RhoStar find_rho_star(std::span<const FaceMeasureEstimate> faces, const ModelSpec& spec);

enum class Classification
{
    Persistent,
    CriterionFails,
    Inconclusive,
};

std::string_view to_string(Classification classification) noexcept;

struct PersistenceReport
{
    std::string model;
    Classification classification = Classification::Inconclusive;
    std::vector<double> rho_star;
    double kappa_star = 0.0;
    /// kappa_star recomputed with every estimate at the lower / upper end of its CI.
    double kappa_lower = 0.0;
    double kappa_upper = 0.0;
    std::vector<FaceMeasureEstimate> faces;
    std::vector<std::string> diagnostics;
};

PersistenceReport classify(const ModelSpec& spec, const SimConfig& cfg, const ScanOptions& options = {});

/// {model, classification, kappa_star, rho_star, faces, seeds, config_digest}.
std::string report_json(const PersistenceReport& report, const SimConfig& cfg, const std::string& config_digest);

enum class ThresholdKind
{
    Lambda, ///< invasion rate of `target` on the face
    Mean, ///< time average of `target` on the face
};

struct ThresholdEntry
{
    std::string name;
    ThresholdKind kind = ThresholdKind::Lambda;
    std::vector<std::size_t> face; ///< Kolmogorov coordinates of the face
    std::size_t target = 0;
    std::optional<double> value; ///< empty: no closed form, simulation only
};

/// Closed-form boundary quantities of a catalog model. Throws SingularSystem.
std::vector<ThresholdEntry> analytic_threshold(const CatalogModel& catalog);

struct ThresholdComparison
{
    ThresholdEntry entry;
    ObservableStats estimate;
    double abs_err = 0.0; ///< NaN without closed form
    bool pass = false;
};

/// Estimates every invasion-rate entry of analytic_threshold by simulation;
/// pass = |err| <= max(3 CI, 0.03).
std::vector<ThresholdComparison> compare_thresholds(const CatalogModel& catalog, const SimConfig& cfg,
                                                    std::size_t workers = 1);

/// CSV `entry,analytic,estimate,ci,abs_err,pass`.
std::string thresholds_csv(std::span<const ThresholdComparison> rows);

struct EmpiricalPersistence
{
    double R = 0.0; ///< snapped to a quarter decade
    std::vector<double> frequency;
    bool achieved = false; ///< all frequencies >= 1 - epsilon at R
};

/// Smallest quarter-decade R with every band frequency >= 1 - epsilon, or
/// the frequencies at R = 1e8 when none qualifies.
EmpiricalPersistence empirical_persistence_check(const ModelSpec& spec, const SimConfig& cfg, double epsilon,
                                                 const InitialSegment& initial = {});

} // namespace sfk
