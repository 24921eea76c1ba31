#pragma once

#include "sfk/model.hpp"
#include "sfk/segment.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sfk
{

/// Lower-growth alternative: b1 h1(x) <= sum |f_i| + g_i^2 <= b2 [h1(x) + int h1 dmu1].
struct AltGrowth
{
    StateFunction h1;
    DelayMeasure mu1 = DelayMeasure::point(0.0);
    double b1 = 0.0;
    double b2 = 0.0;
};

struct LyapunovParams
{
    std::vector<double> c;
    double gamma_b = 0.0;
    double gamma_0 = 0.0;
    double gamma = 0.0;
    double A0 = 0.0;
    double A1 = 0.0;
    double A2 = 0.0;
    double M = 0.0;
    double p0 = 0.5;
    std::vector<double> rho;
    StateFunction h;
    DelayMeasure mu = DelayMeasure::point(0.0);
    std::optional<AltGrowth> alt_growth;
    KernelRule kernel_rule = KernelRule::ExponentialFit;
};

/// Problems with the parameter invariants (c_i > 0, A1 > A2 > 0,
/// 0 < gamma < gamma_b, p0 and |rho| within their bounds given sigma).
/// Empty when all hold.
std::vector<std::string> check_params(const LyapunovParams& params, const Eigen::MatrixXd& sigma);

/// FNV-1a of the numeric fields.
std::string params_digest(const LyapunovParams& params);

/// int mu(ds) int_s^0 e^{gamma(u - s)} h(phi(u)) du.
double kernel_term(const LyapunovParams& params, const SegmentView& seg);

/// (1 + c.x) prod x_i^rho_i exp(A2 kernel). Throws DomainError when some
/// x_i = 0 has rho_i < 0.
double eval_V(const LyapunovParams& params, const SegmentView& seg, std::span<const double> rho);
/// ln(1 + c.x) + sum rho_i ln x_i + A2 kernel.
double eval_U(const LyapunovParams& params, const SegmentView& seg, std::span<const double> rho);

/// A2 h(x) int e^{-gamma s} mu(ds) - A2 int h dmu - A2 gamma kernel.
double q0_kernel_terms(const LyapunovParams& params, const SegmentView& seg);

/// Kernel terms plus c.(b + x f)/(1 + c.x) - 1/2 sum c_i c_j C_ij x_i x_j / (1 + c.x)^2.
/// Throws NonFinite.
double eval_Q0(const ModelSpec& spec, const LyapunovParams& params, const SegmentView& seg);

/// eval_Q0 - sum_i rho*_i (f_i - C_ii / 2).
double eval_Q_rho_star(const ModelSpec& spec, const LyapunovParams& params, std::span<const double> rho_star,
                       const SegmentView& seg);

/// Random piecewise-linear segments: `knots` values per coordinate,
/// log-uniform in [lower, bound], spread evenly over [-r, 0].
class SegmentSampler
{
public:
    SegmentSampler(std::size_t dim, double r, double bound, std::uint64_t seed, std::size_t knots = 8,
                   double lower = 1e-4);

    /// Overwrites `buffer` (dim x horizon r) with the next sample.
    void next(SegmentBuffer& buffer);
    SegmentBuffer make_buffer() const;
    double bound() const noexcept { return bound_; }
    /// Copy with the same random state and `factor` times the upper bound.
    SegmentSampler widened(double factor) const
    {
        SegmentSampler out = *this;
        out.bound_ *= factor;
        return out;
    }

private:
    double uniform();

    std::size_t dim_;
    double r_;
    double bound_;
    double lower_;
    std::size_t knots_;
    std::uint64_t state_;
    std::vector<double> values_;
};

struct AuditReport
{
    std::string assumption;
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst_margin = 0.0; ///< min over samples of rhs - lhs
    bool vacuous = false;
    std::string params_digest;
    /// Assumption 2: smallest feasible K~ over the sample.
    std::optional<double> k_tilde;
    bool unbounded_trend = false;
    /// Assumption 4: largest operator norm of the inverse diffusion matrix.
    std::optional<double> inverse_norm;
    std::vector<std::string> notes;
};

/// Two-sided evaluation of the dissipativity inequality at N sampled segments.
AuditReport check_assumption_1_3(const ModelSpec& spec, const LyapunovParams& params, SegmentSampler& sampler,
                                 std::size_t N);

/// sum |f_i| + g_i^2 <= K~ [h(x) + int h dmu]; K~ is re-estimated on a
/// sampler ten times wider to flag growth faster than h.
AuditReport check_assumption_2(const ModelSpec& spec, const LyapunovParams& params, SegmentSampler& sampler,
                               std::size_t N);

struct LipschitzCandidate
{
    double D0 = 0.0;
    double d0 = 0.0;
    DelayMeasure mu = DelayMeasure::point(0.0);
};

/// Polynomial-Lipschitz bound for f_i, g_i and g_i^2 on sampled pairs, and
/// the largest norm of (g_i g_j sigma_ij)^{-1}. Throws SingularDiffusion.
AuditReport check_assumption_4(const ModelSpec& spec, const LipschitzCandidate& candidate, SegmentSampler& sampler,
                               std::size_t N);

/// JSON {assumption, samples, violations, worst_margin, params_digest, ...}.
std::string audit_json(const AuditReport& report);

/// Explicit parameters for competitive Lotka-Volterra with c = 1,
/// h(x) = 1 + |x| and mu the point mass at -r. Throws ConstraintInfeasible
/// when the negative delayed couplings are too strong for the bounds.
LyapunovParams suggest_params_lv(const LVCompetitive& lv);

} // namespace sfk
