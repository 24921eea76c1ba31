#include "sfk/stats.hpp"

#include "sfk/error.hpp"

#include <algorithm>
#include <cmath>

namespace sfk
{

ObservableStats ObservableStats::from_batches(std::vector<Batch> batches)
{
    std::sort(batches.begin(), batches.end(), [](const Batch& a, const Batch& b) {
        return a.mean < b.mean || (a.mean == b.mean && a.size < b.size);
    });

    ObservableStats stats;
    stats.batch_count = batches.size();
    if (batches.empty())
        return stats;

    double weighted = 0.0;
    std::size_t samples = 0;
    double plain = 0.0;
    std::size_t smallest = batches.front().size;
    for (const auto& b : batches)
    {
        weighted += static_cast<double>(b.size) * b.mean;
        samples += b.size;
        plain += b.mean;
        smallest = std::min(smallest, b.size);
    }
    stats.mean = weighted / static_cast<double>(samples);
    stats.batch_size = smallest;

    const double k = static_cast<double>(batches.size());
    if (batches.size() > 1)
    {
        const double centre = plain / k;
        double ss = 0.0;
        for (const auto& b : batches)
            ss += (b.mean - centre) * (b.mean - centre);
        stats.batch_means_variance = ss / (k - 1.0);
    }
    stats.ci_half_width = 1.96 * std::sqrt(stats.batch_means_variance / k);
    stats.batches = std::move(batches);
    return stats;
}

ObservableStats merge(const ObservableStats& a, const ObservableStats& b)
{
    std::vector<Batch> all = a.batches;
    all.insert(all.end(), b.batches.begin(), b.batches.end());
    return ObservableStats::from_batches(std::move(all));
}

BatchMeansAccumulator::BatchMeansAccumulator(std::size_t expected, std::size_t batches)
    : expected_(expected), batches_(std::min(expected, batches)), sums_(batches_, 0.0), sizes_(batches_, 0)
{
}

void BatchMeansAccumulator::add(double value) noexcept
{
    if (batches_ == 0)
        return;
    // Sample s belongs to batch floor(s * k / expected).
    const std::size_t batch = std::min(batches_ - 1, seen_ * batches_ / expected_);
    sums_[batch] += value;
    ++sizes_[batch];
    ++seen_;
}

ObservableStats BatchMeansAccumulator::finish() const
{
    std::vector<Batch> batches;
    for (std::size_t b = 0; b < batches_; ++b)
        if (sizes_[b] > 0)
            batches.push_back({sizes_[b], sums_[b] / static_cast<double>(sizes_[b])});
    return ObservableStats::from_batches(std::move(batches));
}

OccupationHistogram::OccupationHistogram(std::size_t dim) : dim_(dim), counts_(dim * (kBins + 2), 0)
{
}

std::size_t OccupationHistogram::slot_of(double x) noexcept
{
    if (!(x >= 1e-8))
        return 0;
    if (x >= 1e8)
        return kBins + 1;
    const double pos = (std::log10(x) - kLogMin) / kBinWidth;
    return 1 + std::min<std::size_t>(kBins - 1, static_cast<std::size_t>(pos));
}

void OccupationHistogram::add(std::span<const double> x)
{
    if (x.size() != dim_)
        throw Error(ErrorCode::DimensionMismatch, "histogram sample has wrong dimension");
    for (std::size_t i = 0; i < dim_; ++i)
        ++counts_[i * (kBins + 2) + slot_of(x[i])];
    ++total_;
}

void OccupationHistogram::add_count(std::size_t i, std::size_t slot, std::uint64_t count)
{
    if (i >= dim_ || slot >= kBins + 2)
        throw Error(ErrorCode::OutOfRange, "histogram slot out of range");
    counts_[i * (kBins + 2) + slot] += count;
    // Totals follow the first coordinate so that constructed histograms
    // stay consistent with sampled ones.
    if (i == 0)
        total_ += count;
}

void OccupationHistogram::merge(const OccupationHistogram& other)
{
    if (other.dim_ != dim_)
        throw Error(ErrorCode::DimensionMismatch, "cannot merge histograms of different dimension");
    for (std::size_t k = 0; k < counts_.size(); ++k)
        counts_[k] += other.counts_[k];
    total_ += other.total_;
}

std::span<const std::uint64_t> OccupationHistogram::counts(std::size_t i) const
{
    if (i >= dim_)
        throw Error(ErrorCode::OutOfRange, "histogram coordinate out of range");
    return {counts_.data() + i * (kBins + 2), kBins + 2};
}

BandFrequency frequency_in_band(const OccupationHistogram& hist, double R)
{
    if (!(R > 1.0) || !std::isfinite(R))
        throw Error(ErrorCode::InvalidParameter, "band radius R must be > 1");
    if (hist.total() == 0)
        throw Error(ErrorCode::EmptyHistogram, "no samples recorded");

    const double steps = std::clamp(std::round(std::log10(R) / OccupationHistogram::kBinWidth), 1.0,
                                    static_cast<double>(OccupationHistogram::kBins / 2));
    const auto half = static_cast<std::size_t>(steps);
    const std::size_t centre = OccupationHistogram::kBins / 2;

    BandFrequency out;
    out.R = std::pow(10.0, steps * OccupationHistogram::kBinWidth);
    for (std::size_t i = 0; i < hist.dim(); ++i)
    {
        const auto counts = hist.counts(i);
        std::uint64_t inside = 0;
        std::uint64_t all = 0;
        for (std::size_t slot = 0; slot < counts.size(); ++slot)
        {
            all += counts[slot];
            // Bin slot covers [edge(slot-1), edge(slot)); band bins are centre-half .. centre+half-1.
            if (slot >= 1 + centre - half && slot <= centre + half)
                inside += counts[slot];
        }
        out.frequency.push_back(all == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(all));
    }
    return out;
}

} // namespace sfk
