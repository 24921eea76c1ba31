#pragma once

#include "sfk/model.hpp"
#include "sfk/noise.hpp"
#include "sfk/segment.hpp"
#include "sfk/stats.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace sfk
{

struct SimConfig
{
    double dt = 1e-3;
    double T = 1.0;
    /// Defaults to 10% of T.
    std::optional<double> burn_in;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    std::size_t thinning = 1;
    double positivity_floor = 1e-300;
    double divergence_bound = 1e12;
    bool record_path = false;

    double effective_burn_in() const noexcept { return burn_in ? *burn_in : 0.1 * T; }
    RngStream stream() const noexcept { return {seed, stream_id}; }
};

/// Throws InvalidParameter unless 0 < dt (<= r when r > 0), 0 <= burn_in <= T
/// and thinning >= 1.
void validate(const SimConfig& cfg, double r);

/// Scalar functional of the segment, evaluated in the coordinates of the
/// simulated model.
using Observable = std::function<double(const SegmentView&)>;

struct RecordedPath
{
    std::size_t n = 0;
    std::vector<double> t;
    std::vector<double> x; ///< row-major, n values per time
};

struct SimulationResult
{
    std::vector<ObservableStats> stats;
    OccupationHistogram histogram;
    std::optional<RecordedPath> path;
    std::uint64_t steps = 0;
    std::uint64_t samples = 0;
    std::uint64_t floor_hits = 0;
    std::uint64_t halvings = 0;
};

struct CoupledConfig
{
    double lambda_tilde = 50.0;
    double d0 = 1.0;
};

struct CoupledPath
{
    std::vector<double> t;
    std::vector<double> z; ///< |Y(t) - Y~(t)|
};

/// Buffer plus per-step scratch and counters of one running simulation.
class SimulationState
{
public:
    SimulationState(const ModelSpec& spec, double dt);

    void fill(const InitialSegment& initial);
    void fill_constant(std::span<const double> value);

    const SegmentBuffer& segment() const noexcept { return buffer_; }
    std::uint64_t step_index() const noexcept { return step_index_; }
    std::uint64_t floor_hits() const noexcept { return floor_hits_; }
    std::uint64_t halvings() const noexcept { return halvings_; }
    void set_positivity_floor(double floor) noexcept { floor_ = floor; }

private:
    friend void step(SimulationState&, const ModelSpec&, double, std::span<const double>, const NormalGenerator*);
    friend struct StepKernel;
    friend SimulationResult simulate(const ModelSpec&, const InitialSegment&, const SimConfig&,
                                     std::span<const Observable>);
    friend CoupledPath simulate_coupled(const ModelSpec&, const InitialSegment&, const InitialSegment&,
                                        const CoupledConfig&, const SimConfig&);

    SegmentBuffer buffer_;
    std::uint64_t step_index_ = 0;
    std::uint64_t floor_hits_ = 0;
    std::uint64_t halvings_ = 0;
    double floor_ = 1e-300;

    std::vector<double> growth_;
    std::vector<double> affine_;
    std::vector<double> next_;
    std::vector<double> trial_;
    std::vector<double> noise_;
    std::vector<double> variance_;
    Eigen::MatrixXd loading_;
};

/// One Euler step driven by the independent Brownian increment dB (length
/// m = noise dimension; the correlated increment is dE = Gamma^T dB).
/// Kolmogorov coordinates advance in log space, x <- x exp((f - C_ii/2) dt + dN);
/// affine coordinates by direct Euler, halving the substep on non-positive
/// proposals with Brownian-bridge refinements drawn from `bridge` (midpoints
/// when null). Throws StepUnderflow, NonFinite.
void step(SimulationState& state, const ModelSpec& spec, double dt, std::span<const double> dB,
          const NormalGenerator* bridge = nullptr);

/// Runs from 0 to T. After burn-in, every `thinning` steps, observers are
/// evaluated and the state is added to the histogram. The path (if
/// requested) is recorded every `thinning` steps from t = 0.
/// Throws Diverged when a coordinate exceeds cfg.divergence_bound.
SimulationResult simulate(const ModelSpec& spec, const InitialSegment& initial, const SimConfig& cfg,
                          std::span<const Observable> observers = {});

/// Two copies driven by the same increments; the second carries the
/// feedback lambda~ (1 + X_i + X~_i)^(4 d0 + 4) (Y_i - Y~_i). The feedback is
/// integrated linearly implicitly so that large gains stay stable.
/// Requires an all-Kolmogorov model.
CoupledPath simulate_coupled(const ModelSpec& spec, const InitialSegment& phi, const InitialSegment& phi_tilde,
                             const CoupledConfig& ccfg, const SimConfig& cfg);

} // namespace sfk
