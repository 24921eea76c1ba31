#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sfk
{

inline constexpr std::size_t kDefaultBatches = 30;
inline constexpr std::size_t kMinimumBatches = 10;

struct Batch
{
    std::size_t size = 0;
    double mean = 0.0;
};

/// Batch-means summary of one observable. Keeps its batches so that
/// replicates can be merged exactly.
struct ObservableStats
{
    double mean = 0.0;
    std::size_t batch_count = 0;
    std::size_t batch_size = 0; ///< smallest batch
    double batch_means_variance = 0.0;
    double ci_half_width = 0.0; ///< 95%, 1.96 sqrt(var / batch_count)
    std::vector<Batch> batches;

    bool empty() const noexcept { return batch_count == 0; }

    /// Summary of a batch list. Batches are put in a canonical order first,
    /// so the result does not depend on the order they were produced in.
    static ObservableStats from_batches(std::vector<Batch> batches);
};

/// Statistics of the concatenated data.
ObservableStats merge(const ObservableStats& a, const ObservableStats& b);

/// Splits a stream of known length into min(batches, length) contiguous
/// batches of (nearly) equal size.
class BatchMeansAccumulator
{
public:
    BatchMeansAccumulator(std::size_t expected, std::size_t batches = kDefaultBatches);

    void add(double value) noexcept;
    std::size_t count() const noexcept { return seen_; }
    ObservableStats finish() const;

private:
    std::size_t expected_;
    std::size_t batches_;
    std::size_t seen_ = 0;
    std::size_t current_ = 0;
    std::vector<double> sums_;
    std::vector<std::size_t> sizes_;
};

/// Per-coordinate counts over 64 log10 bins covering [1e-8, 1e8), a quarter
/// decade each, plus underflow (including 0) and overflow.
class OccupationHistogram
{
public:
    static constexpr std::size_t kBins = 64;
    static constexpr double kLogMin = -8.0;
    static constexpr double kLogMax = 8.0;
    static constexpr double kBinWidth = (kLogMax - kLogMin) / kBins;

    explicit OccupationHistogram(std::size_t dim = 0);

    std::size_t dim() const noexcept { return dim_; }
    std::uint64_t total() const noexcept { return total_; }

    void add(std::span<const double> x);
    /// Adds `count` samples of coordinate i to one bin; 0 is underflow,
    /// kBins + 1 overflow. Used to build histograms directly.
    void add_count(std::size_t i, std::size_t slot, std::uint64_t count);
    void merge(const OccupationHistogram& other);

    /// Slot of a value: 0 underflow, 1..kBins bins, kBins + 1 overflow.
    static std::size_t slot_of(double x) noexcept;
    std::span<const std::uint64_t> counts(std::size_t i) const;

private:
    std::size_t dim_;
    std::uint64_t total_ = 0;
    std::vector<std::uint64_t> counts_;
};

struct BandFrequency
{
    double R = 1.0; ///< R snapped to a bin edge
    std::vector<double> frequency;
};

/// Fraction of samples of each coordinate in [1/R, R]. R is snapped to the
/// nearest quarter decade. Throws EmptyHistogram, InvalidParameter for R <= 1.
BandFrequency frequency_in_band(const OccupationHistogram& hist, double R);

} // namespace sfk
