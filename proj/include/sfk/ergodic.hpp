#pragma once

#include "sfk/engine.hpp"
#include "sfk/model.hpp"
#include "sfk/stats.hpp"

#include <span>
#include <string>
#include <vector>

namespace sfk
{

/// Constant interior history: total/n on the simplex, 1 elsewhere.
InitialSegment default_initial(const ModelSpec& spec);

struct FaceRun
{
    std::vector<std::size_t> kept; ///< simulated coordinates (face plus affine)
    std::vector<ObservableStats> stats;
    OccupationHistogram histogram; ///< over `kept`
};

/// Simulates `spec` restricted to `face` (coordinates of spec; affine
/// coordinates are added automatically) and averages observables written in
/// the full coordinates. A face with nothing left to simulate is the Dirac
/// measure at 0: observables are evaluated once and reported with the batch
/// layout a simulation would have had, and zero variance.
FaceRun run_on_face(const ModelSpec& spec, std::span<const std::size_t> face, std::span<const Observable> observables,
                    const SimConfig& cfg, const InitialSegment& initial);

/// Throws InsufficientBatches when fewer than 10 batches were collected.
ObservableStats time_average(const ModelSpec& spec, std::span<const std::size_t> face, const Observable& observable,
                             const SimConfig& cfg);

/// Time average of f_i - C_ii/2 along the face trajectory. Throws
/// InvalidParameter when `target` lies in the face.
ObservableStats estimate_lambda(const ModelSpec& spec, std::span<const std::size_t> face, std::size_t target,
                                const SimConfig& cfg);

/// One JSON object per line: {observable, face, mean, ci, batches, seed, T, dt}.
std::string stats_jsonl(const std::string& observable, std::span<const std::size_t> face,
                        const ObservableStats& stats, const SimConfig& cfg);

} // namespace sfk
