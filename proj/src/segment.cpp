#include "sfk/segment.hpp"

#include "sfk/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sfk
{

namespace
{

// Offsets within this many grid units of a node are treated as the node.
constexpr double kGridSnap = 1e-9;

std::size_t grid_capacity(double horizon, double spacing)
{
    if (horizon == 0.0)
        return 1;
    return static_cast<std::size_t>(std::ceil(horizon / spacing - kGridSnap)) + 1;
}

// x e^x - (e^x - 1), accurate for small x.
double exp_ramp_term(double x)
{
    if (std::abs(x) < 1e-2)
    {
        // sum_{n>=2} (n-1) x^n / n!
        const double x2 = x * x;
        return x2 * (0.5 + x * (1.0 / 3.0 + x * (1.0 / 8.0 + x * (1.0 / 30.0 + x * (1.0 / 144.0)))));
    }
    return x * std::exp(x) - std::expm1(x);
}

} // namespace

DelayMeasure::DelayMeasure(std::vector<DelayAtom> atoms) : atoms_(std::move(atoms))
{
    if (atoms_.empty())
        throw Error(ErrorCode::InvalidParameter, "delay measure needs at least one atom");
    double total = 0.0;
    for (const auto& atom : atoms_)
    {
        if (!std::isfinite(atom.offset) || !std::isfinite(atom.weight))
            throw Error(ErrorCode::NonFinite, "delay atom is not finite");
        if (atom.offset > 0.0)
            throw Error(ErrorCode::InvalidParameter, "delay atom offset must lie in [-r, 0]");
        if (!(atom.weight > 0.0))
            throw Error(ErrorCode::InvalidParameter, "delay atom weight must be positive");
        total += atom.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
    {
        std::ostringstream msg;
        msg.precision(17);
        msg << "delay atom weights sum to " << total << ", expected 1";
        throw Error(ErrorCode::InvalidParameter, msg.str());
    }
    std::stable_sort(atoms_.begin(), atoms_.end(),
                     [](const DelayAtom& a, const DelayAtom& b) { return a.offset < b.offset; });
}

DelayMeasure DelayMeasure::point(double offset)
{
    return DelayMeasure({DelayAtom{offset, 1.0}});
}

double DelayMeasure::horizon() const noexcept
{
    return -atoms_.front().offset;
}

double DelayMeasure::exp_moment(double gamma) const
{
    double acc = 0.0;
    for (const auto& atom : atoms_)
        acc += atom.weight * std::exp(-gamma * atom.offset);
    return acc;
}

void SegmentView::now(std::span<double> out) const noexcept
{
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = sample(0, i);
}

SegmentView::GridPosition SegmentView::locate(double s) const
{
    const double r = horizon();
    const double slack = kGridSnap * std::max(1.0, r);
    if (!(s <= slack && s >= -r - slack))
    {
        std::ostringstream msg;
        msg << "offset " << s << " outside [-" << r << ", 0]";
        throw Error(ErrorCode::OutOfRange, msg.str());
    }
    if (depth() == 0)
        throw Error(ErrorCode::ColdBuffer, "segment has no history");
    if (s >= 0.0)
        return {0, 0.0};

    const double pos = -s / spacing();
    const double nearest = std::round(pos);
    std::size_t k;
    double frac;
    if (std::abs(pos - nearest) <= kGridSnap)
    {
        k = static_cast<std::size_t>(nearest);
        frac = 0.0;
    }
    else
    {
        k = static_cast<std::size_t>(std::floor(pos));
        frac = pos - std::floor(pos);
    }
    if (k >= depth() || (frac > 0.0 && k + 1 >= depth()))
        throw Error(ErrorCode::ColdBuffer, "history does not reach the requested offset");
    return {k, frac};
}

double SegmentView::at(double s, std::size_t i) const
{
    const auto [k, frac] = locate(s);
    if (frac == 0.0)
        return sample(k, i);
    return (1.0 - frac) * sample(k, i) + frac * sample(k + 1, i);
}

void SegmentView::at(double s, std::span<double> out) const
{
    const auto [k, frac] = locate(s);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = frac == 0.0 ? sample(k, i) : (1.0 - frac) * sample(k, i) + frac * sample(k + 1, i);
}

SegmentBuffer::SegmentBuffer(std::size_t dim, double horizon, double spacing)
    : dim_(dim), horizon_(horizon), spacing_(spacing)
{
    if (!(horizon >= 0.0) || !std::isfinite(horizon))
        throw Error(ErrorCode::InvalidParameter, "delay horizon must be finite and non-negative");
    if (!(spacing > 0.0) || !std::isfinite(spacing))
        throw Error(ErrorCode::InvalidParameter, "grid spacing must be positive");
    capacity_ = grid_capacity(horizon, spacing);
    data_.assign(capacity_ * dim_, 0.0);
}

void SegmentBuffer::fill(const InitialSegment& initial)
{
    // Oldest sample first so that head_ ends on s = 0.
    for (std::size_t slot = 0; slot < capacity_; ++slot)
    {
        const std::size_t k = capacity_ - 1 - slot;
        const double s = std::max(-horizon_, -static_cast<double>(k) * spacing_);
        initial(s, std::span<double>(data_.data() + slot * dim_, dim_));
    }
    head_ = capacity_ - 1;
    warm_ = true;
    t_now_ = 0.0;
}

void SegmentBuffer::fill_constant(std::span<const double> value)
{
    if (value.size() != dim_)
        throw Error(ErrorCode::DimensionMismatch, "initial value has wrong dimension");
    fill([&](double, std::span<double> out) { std::copy(value.begin(), value.end(), out.begin()); });
}

void SegmentBuffer::push(std::span<const double> value)
{
    if (value.size() != dim_)
        throw Error(ErrorCode::DimensionMismatch, "pushed sample has wrong dimension");
    if (!warm_)
        throw Error(ErrorCode::ColdBuffer, "push before the initial segment was filled");
    head_ = (head_ + 1) % capacity_;
    std::copy(value.begin(), value.end(), data_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
    t_now_ += spacing_;
}

std::span<const double> SegmentBuffer::head() const noexcept
{
    return {data_.data() + head_ * dim_, dim_};
}

std::vector<double> tap(const SegmentView& seg, double s)
{
    std::vector<double> out(seg.dim());
    seg.at(s, out);
    return out;
}

double integrate_measure(const SegmentView& seg, const DelayMeasure& mu, const StateFunction& h)
{
    std::vector<double> x(seg.dim());
    double acc = 0.0;
    for (const auto& atom : mu.atoms())
    {
        seg.at(atom.offset, x);
        acc += atom.weight * h(x);
    }
    return acc;
}

double kernel_integral(const SegmentView& seg, const DelayMeasure& mu, double gamma, const StateFunction& h,
                       KernelRule rule)
{
    if (!(gamma > 0.0))
        throw Error(ErrorCode::InvalidParameter, "kernel decay rate must be positive");
    const double dt = seg.spacing();
    std::vector<double> x(seg.dim());

    // h at grid nodes 0..last, shared by all atoms.
    const std::size_t last = std::min<std::size_t>(
        seg.depth() == 0 ? 0 : seg.depth() - 1,
        static_cast<std::size_t>(std::ceil(mu.horizon() / dt + kGridSnap)));
    std::vector<double> h_grid(last + 1);
    for (std::size_t j = 0; j <= last; ++j)
    {
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = seg.sample(j, i);
        h_grid[j] = h(x);
    }

    // Contribution of [a, b] where the integrand is e^{gamma(u-s)} h(u),
    // h linear from ha (at a) to hb (at b).
    auto piece = [&](double a, double b, double ha, double hb, double s) {
        const double len = b - a;
        const double ea = std::exp(gamma * (a - s));
        if (rule == KernelRule::Trapezoid)
            return 0.5 * len * (ea * ha + std::exp(gamma * (b - s)) * hb);
        const double x = gamma * len;
        const double flat = ha * ea * std::expm1(x) / gamma;
        const double ramp = (hb - ha) / len * ea * exp_ramp_term(x) / (gamma * gamma);
        return flat + ramp;
    };

    double total = 0.0;
    for (const auto& atom : mu.atoms())
    {
        const double s = atom.offset;
        if (s >= 0.0)
            continue;
        const auto [k, frac] = seg.locate(s);
        double q = 0.0;
        // Full grid intervals [-(j+1)dt, -j dt], j < k.
        for (std::size_t j = 0; j < k; ++j)
        {
            const double b = -static_cast<double>(j) * dt;
            const double a = -static_cast<double>(j + 1) * dt;
            q += piece(a, b, h_grid[j + 1], h_grid[j], s);
        }
        if (frac > 0.0)
        {
            seg.at(s, x);
            const double hs = h(x);
            const double b = -static_cast<double>(k) * dt;
            q += piece(s, b, hs, h_grid[k], s);
        }
        total += atom.weight * q;
    }
    return total;
}

double sup_norm(const SegmentView& seg)
{
    if (seg.depth() == 0)
        throw Error(ErrorCode::ColdBuffer, "segment has no history");
    double best = 0.0;
    for (std::size_t k = 0; k < seg.depth(); ++k)
    {
        double sq = 0.0;
        for (std::size_t i = 0; i < seg.dim(); ++i)
            sq += seg.sample(k, i) * seg.sample(k, i);
        best = std::max(best, sq);
    }
    return std::sqrt(best);
}

} // namespace sfk
