#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace sfk
{

/// Identifies one reproducible stream of random variates. Replicates of the
/// same experiment share `seed` and differ in `stream_id`.
struct RngStream
{
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
};

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Standard normal variates addressed by (step, lane, index) instead of by
/// call order, so any step of any replicate can be regenerated in isolation.
/// Lane 0 is reserved for the main Brownian increments; other lanes are used
/// for bridge refinements and auxiliary draws.
class NormalGenerator
{
public:
    explicit NormalGenerator(RngStream stream) noexcept;

    void fill(std::uint64_t step, std::uint32_t lane, std::span<double> out) const noexcept;

    RngStream stream() const noexcept { return stream_; }

private:
    RngStream stream_;
    std::array<std::uint32_t, 2> key_;
};

/// Driving noise E = Gamma^T B with covariance rate Sigma = Gamma^T Gamma.
/// Only constructible through validate_noise, so an instance always carries a
/// positive definite Sigma that is consistent with Gamma.
class NoiseSpec
{
public:
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(gamma_.rows()); }
    const Eigen::MatrixXd& gamma() const noexcept { return gamma_; }
    const Eigen::MatrixXd& sigma() const noexcept { return sigma_; }
    /// Lower Cholesky factor of Sigma.
    const Eigen::MatrixXd& cholesky() const noexcept { return chol_; }

    /// dE = Gamma^T dB.
    void correlate(std::span<const double> dB, std::span<double> dE) const;

private:
    friend NoiseSpec validate_noise(const Eigen::MatrixXd& gamma);
    NoiseSpec() = default;

    Eigen::MatrixXd gamma_;
    Eigen::MatrixXd sigma_;
    Eigen::MatrixXd chol_;
};

inline constexpr double kCholeskyPivotTolerance = 1e-10;

/// Builds Sigma = Gamma^T Gamma and checks it by Cholesky.
/// Throws Error{NonFinite} or Error{SingularCovariance}.
NoiseSpec validate_noise(const Eigen::MatrixXd& gamma);

/// `count` increments Gamma^T z sqrt(dt); increment k uses step index k of
/// the stream, the same addressing the engine uses.
std::vector<Eigen::VectorXd> sample_increments(const NoiseSpec& spec, double dt, RngStream stream,
                                               std::size_t count);

} // namespace sfk
