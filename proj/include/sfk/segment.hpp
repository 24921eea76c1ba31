#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sfk
{

/// Scalar function of a state vector, e.g. the growth bound h(x).
using StateFunction = std::function<double(std::span<const double>)>;

/// Initial history: writes phi(s) into `out` for s in [-r, 0].
using InitialSegment = std::function<void(double s, std::span<double> out)>;

struct DelayAtom
{
    double offset = 0.0; ///< s_k in [-r, 0]
    double weight = 0.0; ///< w_k > 0
};

/// Atomic probability measure on [-r, 0]. Continuous delay kernels must be
/// discretized into quadrature atoms by the caller.
class DelayMeasure
{
public:
    /// Throws Error{InvalidParameter} unless weights are positive, sum to one
    /// within 1e-12 and offsets are non-positive. Atoms are sorted by offset.
    explicit DelayMeasure(std::vector<DelayAtom> atoms);

    static DelayMeasure point(double offset);

    std::span<const DelayAtom> atoms() const noexcept { return atoms_; }
    /// Largest |s_k|; the measure is supported on [-horizon, 0].
    double horizon() const noexcept;
    /// Integral of e^{-gamma s} mu(ds).
    double exp_moment(double gamma) const;

private:
    std::vector<DelayAtom> atoms_;
};

/// Read-only access to a segment sampled on a uniform grid: sample(k, i) is
/// coordinate i at time t - k*spacing, for k < depth().
class SegmentView
{
public:
    virtual ~SegmentView() = default;

    virtual std::size_t dim() const noexcept = 0;
    virtual double horizon() const noexcept = 0;
    virtual double spacing() const noexcept = 0;
    virtual std::size_t depth() const noexcept = 0;
    virtual double sample(std::size_t k, std::size_t i) const noexcept = 0;

    double now(std::size_t i) const noexcept { return sample(0, i); }
    void now(std::span<double> out) const noexcept;

    /// Linear interpolation between bracketing grid samples, exact at grid
    /// points. Throws OutOfRange for s outside [-r, 0], ColdBuffer when the
    /// history does not reach s.
    double at(double s, std::size_t i) const;
    void at(double s, std::span<double> out) const;

    /// Grid interval containing offset s: s = -(k + frac) * spacing.
    struct GridPosition
    {
        std::size_t k;
        double frac;
    };
    GridPosition locate(double s) const;
};

/// Ring of ceil(r/dt)+1 grid samples covering [t-r, t].
class SegmentBuffer final : public SegmentView
{
public:
    SegmentBuffer(std::size_t dim, double horizon, double spacing);

    /// Samples `initial` onto the grid and resets the clock to t = 0.
    void fill(const InitialSegment& initial);
    void fill_constant(std::span<const double> value);
    /// Appends the state at t + dt, dropping the oldest sample.
    void push(std::span<const double> value);

    bool warm() const noexcept { return warm_; }
    double t_now() const noexcept { return t_now_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::span<const double> head() const noexcept;

    std::size_t dim() const noexcept override { return dim_; }
    double horizon() const noexcept override { return horizon_; }
    double spacing() const noexcept override { return spacing_; }
    std::size_t depth() const noexcept override { return warm_ ? capacity_ : 0; }
    double sample(std::size_t k, std::size_t i) const noexcept override
    {
        const std::size_t slot = (head_ + capacity_ - k) % capacity_;
        return data_[slot * dim_ + i];
    }

private:
    std::size_t dim_;
    double horizon_;
    double spacing_;
    std::size_t capacity_;
    std::size_t head_ = 0;
    bool warm_ = false;
    double t_now_ = 0.0;
    std::vector<double> data_;
};

/// A view whose current state (k = 0) is replaced by `head`; used to
/// evaluate functionals at trial states inside a step.
class HeadOverrideView final : public SegmentView
{
public:
    HeadOverrideView(const SegmentView& base, std::span<const double> head) : base_(base), head_(head) {}

    std::size_t dim() const noexcept override { return base_.dim(); }
    double horizon() const noexcept override { return base_.horizon(); }
    double spacing() const noexcept override { return base_.spacing(); }
    std::size_t depth() const noexcept override { return base_.depth(); }
    double sample(std::size_t k, std::size_t i) const noexcept override
    {
        return k == 0 ? head_[i] : base_.sample(k, i);
    }

private:
    const SegmentView& base_;
    std::span<const double> head_;
};

/// Lifts a segment on a face into the full coordinate space: coordinate i of
/// the full space reads inner coordinate index_of[i], or 0 when pinned.
class EmbeddedView final : public SegmentView
{
public:
    static constexpr std::size_t kPinned = static_cast<std::size_t>(-1);

    EmbeddedView(const SegmentView& inner, std::span<const std::size_t> index_of)
        : inner_(inner), index_of_(index_of)
    {
    }

    std::size_t dim() const noexcept override { return index_of_.size(); }
    double horizon() const noexcept override { return inner_.horizon(); }
    double spacing() const noexcept override { return inner_.spacing(); }
    std::size_t depth() const noexcept override { return inner_.depth(); }
    double sample(std::size_t k, std::size_t i) const noexcept override
    {
        const std::size_t j = index_of_[i];
        return j == kPinned ? 0.0 : inner_.sample(k, j);
    }

private:
    const SegmentView& inner_;
    std::span<const std::size_t> index_of_;
};

std::vector<double> tap(const SegmentView& seg, double s);

/// sum_k w_k h(phi(s_k)).
double integrate_measure(const SegmentView& seg, const DelayMeasure& mu, const StateFunction& h);

enum class KernelRule
{
    /// Trapezoid rule on the grid.
    Trapezoid,
    /// Exact integration of e^{gamma(u-s)} against the piecewise-linear
    /// interpolant of h; exact for constant h.
    ExponentialFit,
};

/// sum_k w_k int_{s_k}^0 e^{gamma (u - s_k)} h(phi(u)) du.
double kernel_integral(const SegmentView& seg, const DelayMeasure& mu, double gamma, const StateFunction& h,
                       KernelRule rule = KernelRule::Trapezoid);

/// Largest Euclidean norm over the stored grid samples.
double sup_norm(const SegmentView& seg);

} // namespace sfk
