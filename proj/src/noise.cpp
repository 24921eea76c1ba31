#include "sfk/noise.hpp"

#include "sfk/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace sfk
{

namespace
{

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Open interval (0,1) from 64 random bits, 53-bit resolution.
double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept
{
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept
{
    for (int round = 0; round < 10; ++round)
    {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

NormalGenerator::NormalGenerator(RngStream stream) noexcept : stream_(stream)
{
    const std::uint64_t k = splitmix64(stream.seed ^ splitmix64(stream.stream_id));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

void NormalGenerator::fill(std::uint64_t step, std::uint32_t lane, std::span<double> out) const noexcept
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const auto step_lo = static_cast<std::uint32_t>(step);
    const auto step_hi = static_cast<std::uint32_t>(step >> 32);
    for (std::size_t j = 0; 2 * j < out.size(); ++j)
    {
        const auto bits = philox4x32({static_cast<std::uint32_t>(j), lane, step_lo, step_hi}, key_);
        // Box-Muller: one block yields two variates.
        const double u1 = to_open_unit(bits[0], bits[1]);
        const double u2 = to_open_unit(bits[2], bits[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        out[2 * j] = radius * std::cos(two_pi * u2);
        if (2 * j + 1 < out.size())
            out[2 * j + 1] = radius * std::sin(two_pi * u2);
    }
}

void NoiseSpec::correlate(std::span<const double> dB, std::span<double> dE) const
{
    const auto n = gamma_.rows();
    for (Eigen::Index i = 0; i < n; ++i)
    {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < n; ++k)
            acc += gamma_(k, i) * dB[static_cast<std::size_t>(k)];
        dE[static_cast<std::size_t>(i)] = acc;
    }
}

NoiseSpec validate_noise(const Eigen::MatrixXd& gamma)
{
    if (gamma.rows() == 0 || gamma.rows() != gamma.cols())
        throw Error(ErrorCode::DimensionMismatch, "gamma must be a non-empty square matrix");
    if (!gamma.allFinite())
        throw Error(ErrorCode::NonFinite, "gamma has a NaN or infinite entry");

    NoiseSpec spec;
    spec.gamma_ = gamma;
    spec.sigma_ = gamma.transpose() * gamma;

    const auto n = gamma.rows();
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
    {
        double pivot = spec.sigma_(j, j);
        for (Eigen::Index k = 0; k < j; ++k)
            pivot -= lower(j, k) * lower(j, k);
        if (!(pivot > kCholeskyPivotTolerance))
        {
            std::ostringstream msg;
            msg << "Sigma = Gamma^T Gamma is not positive definite (Cholesky pivot " << j << " = " << pivot
                << ")";
            throw Error(ErrorCode::SingularCovariance, msg.str());
        }
        lower(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < n; ++i)
        {
            double acc = spec.sigma_(i, j);
            for (Eigen::Index k = 0; k < j; ++k)
                acc -= lower(i, k) * lower(j, k);
            lower(i, j) = acc / lower(j, j);
        }
    }
    spec.chol_ = std::move(lower);
    return spec;
}

std::vector<Eigen::VectorXd> sample_increments(const NoiseSpec& spec, double dt, RngStream stream,
                                               std::size_t count)
{
    if (!(dt >= 0.0))
        throw Error(ErrorCode::InvalidParameter, "dt must be non-negative");
    const NormalGenerator gen(stream);
    const std::size_t n = spec.dimension();
    const double scale = std::sqrt(dt);
    std::vector<double> z(n);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k)
    {
        gen.fill(k, 0, z);
        for (auto& v : z)
            v *= scale;
        Eigen::VectorXd dE(static_cast<Eigen::Index>(n));
        spec.correlate(z, std::span<double>(dE.data(), n));
        out.push_back(std::move(dE));
    }
    return out;
}

} // namespace sfk
