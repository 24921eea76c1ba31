#include "sfk/lyapunov.hpp"

#include "sfk/digest.hpp"
#include "sfk/error.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sfk
{

namespace
{

std::vector<double> state_now(const SegmentView& seg)
{
    std::vector<double> x(seg.dim());
    seg.now(x);
    return x;
}

double norm(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x)
        s += v * v;
    return std::sqrt(s);
}

double c_dot(const LyapunovParams& params, std::span<const double> x)
{
    if (params.c.size() != x.size())
        throw Error(ErrorCode::DimensionMismatch, "c must have one entry per coordinate");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += params.c[i] * x[i];
    return s;
}

double h_checked(const LyapunovParams& params, std::span<const double> x)
{
    const double v = params.h(x);
    if (!(v >= 1.0))
        throw Error(ErrorCode::InvalidParameter, "h(x) >= 1 violated at a sampled state");
    return v;
}

Eigen::VectorXd per_capita_g(const ModelSpec& spec, const SegmentView& seg)
{
    Eigen::VectorXd g(static_cast<Eigen::Index>(spec.n));
    spec.diffusion(seg, std::span<double>(g.data(), spec.n));
    return g;
}

void append_double(std::string& out, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g;", v);
    out += buf;
}

} // namespace

std::vector<std::string> check_params(const LyapunovParams& params, const Eigen::MatrixXd& sigma)
{
    std::vector<std::string> problems;
    const auto n = params.c.size();
    for (double ci : params.c)
        if (!(ci > 0.0))
            problems.emplace_back("c_i > 0 violated");
    if (!(params.A2 > 0.0))
        problems.emplace_back("A2 > 0 violated");
    if (!(params.A1 > params.A2))
        problems.emplace_back("A1 > A2 violated");
    if (!(params.gamma > 0.0 && params.gamma < params.gamma_b))
        problems.emplace_back("0 < gamma < gamma_b violated");
    if (!(params.gamma_0 > 0.0))
        problems.emplace_back("gamma_0 > 0 violated");
    if (!(params.A0 > 0.0))
        problems.emplace_back("A0 > 0 violated");
    if (!(params.M > 0.0))
        problems.emplace_back("M > 0 violated");
    if (!params.h)
        problems.emplace_back("h is not set");

    const double sigma_star = sigma.size() ? sigma.maxCoeff() : 0.0;
    double rho_bound = std::min(params.gamma_b / 2.0, n ? 1.0 / static_cast<double>(n) : 1.0);
    double p_bound = 1.0;
    if (sigma_star > 0.0)
    {
        rho_bound = std::min(rho_bound, params.gamma_b / (4.0 * sigma_star));
        p_bound = std::min(p_bound, params.gamma_b / (8.0 * static_cast<double>(n) * sigma_star));
    }
    if (!params.rho.empty() && !(norm(params.rho) < rho_bound))
        problems.emplace_back("|rho| below min{gamma_b/2, 1/n, gamma_b/(4 sigma*)} violated");
    if (!(params.p0 > 0.0 && params.p0 < p_bound))
        problems.emplace_back("0 < p0 < min{1, gamma_b/(8 n sigma*)} violated");
    return problems;
}

std::string params_digest(const LyapunovParams& params)
{
    std::string bytes;
    for (double v : params.c)
        append_double(bytes, v);
    for (double v : {params.gamma_b, params.gamma_0, params.gamma, params.A0, params.A1, params.A2, params.M, params.p0})
        append_double(bytes, v);
    for (double v : params.rho)
        append_double(bytes, v);
    for (const auto& atom : params.mu.atoms())
    {
        append_double(bytes, atom.offset);
        append_double(bytes, atom.weight);
    }
    return fnv1a_hex(bytes);
}

double kernel_term(const LyapunovParams& params, const SegmentView& seg)
{
    return kernel_integral(seg, params.mu, params.gamma, params.h, params.kernel_rule);
}

double eval_U(const LyapunovParams& params, const SegmentView& seg, std::span<const double> rho)
{
    const auto x = state_now(seg);
    if (!rho.empty() && rho.size() != x.size())
        throw Error(ErrorCode::DimensionMismatch, "rho must have one entry per coordinate");
    double u = std::log1p(c_dot(params, x));
    for (std::size_t i = 0; i < rho.size(); ++i)
    {
        if (rho[i] == 0.0)
            continue;
        if (!(x[i] > 0.0))
        {
            if (rho[i] < 0.0)
                throw Error(ErrorCode::DomainError, "x_i = 0 with rho_i < 0");
            return -std::numeric_limits<double>::infinity();
        }
        u += rho[i] * std::log(x[i]);
    }
    if (params.A2 != 0.0)
        u += params.A2 * kernel_term(params, seg);
    return u;
}

double eval_V(const LyapunovParams& params, const SegmentView& seg, std::span<const double> rho)
{
    const auto x = state_now(seg);
    if (!rho.empty() && rho.size() != x.size())
        throw Error(ErrorCode::DimensionMismatch, "rho must have one entry per coordinate");
    double v = 1.0 + c_dot(params, x);
    for (std::size_t i = 0; i < rho.size(); ++i)
    {
        if (rho[i] == 0.0)
            continue;
        if (x[i] == 0.0 && rho[i] < 0.0)
            throw Error(ErrorCode::DomainError, "x_i = 0 with rho_i < 0");
        v *= std::pow(x[i], rho[i]);
    }
    if (params.A2 != 0.0)
        v *= std::exp(params.A2 * kernel_term(params, seg));
    return v;
}

double q0_kernel_terms(const LyapunovParams& params, const SegmentView& seg)
{
    if (params.A2 == 0.0)
        return 0.0;
    const auto x = state_now(seg);
    const double now = params.A2 * params.h(x) * params.mu.exp_moment(params.gamma);
    const double past = params.A2 * integrate_measure(seg, params.mu, params.h);
    const double decay = params.A2 * params.gamma * kernel_term(params, seg);
    return now - past - decay;
}

double eval_Q0(const ModelSpec& spec, const LyapunovParams& params, const SegmentView& seg)
{
    const auto x = state_now(seg);
    const double denom = 1.0 + c_dot(params, x);
    const Eigen::VectorXd drift = eval_drift(spec, seg);
    const Eigen::MatrixXd C = eval_noise_covariance(spec, seg);

    double first = 0.0;
    double quad = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i)
    {
        const auto I = static_cast<Eigen::Index>(i);
        first += params.c[i] * drift(I);
        for (std::size_t j = 0; j < spec.n; ++j)
            quad += params.c[i] * params.c[j] * C(I, static_cast<Eigen::Index>(j)) * x[i] * x[j];
    }
    const double q = q0_kernel_terms(params, seg) + first / denom - 0.5 * quad / (denom * denom);
    if (!std::isfinite(q))
        throw Error(ErrorCode::NonFinite, "Q0 is not finite");
    return q;
}

double eval_Q_rho_star(const ModelSpec& spec, const LyapunovParams& params, std::span<const double> rho_star,
                       const SegmentView& seg)
{
    if (rho_star.size() != spec.n)
        throw Error(ErrorCode::DimensionMismatch, "rho* must have one entry per coordinate");
    double q = eval_Q0(spec, params, seg);
    for (std::size_t i = 0; i < spec.n; ++i)
        if (rho_star[i] != 0.0)
            q -= rho_star[i] * invasion_integrand(spec, seg, i);
    return q;
}

SegmentSampler::SegmentSampler(std::size_t dim, double r, double bound, std::uint64_t seed, std::size_t knots,
                               double lower)
    : dim_(dim), r_(r), bound_(bound), lower_(lower), knots_(std::max<std::size_t>(knots, 2)), state_(seed),
      values_(dim * knots_)
{
    if (!(bound > lower && lower > 0.0))
        throw Error(ErrorCode::InvalidParameter, "sampler needs 0 < lower < bound");
}

double SegmentSampler::uniform()
{
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

SegmentBuffer SegmentSampler::make_buffer() const
{
    return SegmentBuffer(dim_, r_, r_ > 0.0 ? r_ / 64.0 : 1.0);
}

void SegmentSampler::next(SegmentBuffer& buffer)
{
    const double lo = std::log(lower_);
    const double hi = std::log(bound_);
    for (double& v : values_)
        v = std::exp(lo + (hi - lo) * uniform());
    const std::size_t knots = knots_;
    const std::size_t dim = dim_;
    const double r = r_;
    const auto& values = values_;
    buffer.fill([&](double s, std::span<double> out) {
        if (r <= 0.0)
        {
            for (std::size_t i = 0; i < dim; ++i)
                out[i] = values[i * knots + knots - 1];
            return;
        }
        const double pos = (s + r) / r * static_cast<double>(knots - 1);
        const auto k = std::min(knots - 2, static_cast<std::size_t>(std::max(0.0, pos)));
        const double w = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
        for (std::size_t i = 0; i < dim; ++i)
            out[i] = (1.0 - w) * values[i * knots + k] + w * values[i * knots + k + 1];
    });
}

AuditReport check_assumption_1_3(const ModelSpec& spec, const LyapunovParams& params, SegmentSampler& sampler,
                                 std::size_t N)
{
    AuditReport report;
    report.assumption = "1.1(3)";
    report.params_digest = params_digest(params);
    report.samples = N;
    report.vacuous = N == 0;
    if (report.vacuous)
    {
        report.notes.emplace_back("vacuous");
        return report;
    }
    report.worst_margin = std::numeric_limits<double>::infinity();

    auto buffer = sampler.make_buffer();
    for (std::size_t s = 0; s < N; ++s)
    {
        sampler.next(buffer);
        const auto x = state_now(buffer);
        const double denom = 1.0 + c_dot(params, x);
        const Eigen::VectorXd drift = eval_drift(spec, buffer);
        const Eigen::VectorXd f = eval_growth(spec, buffer);
        const Eigen::VectorXd g = per_capita_g(spec, buffer);
        const Eigen::MatrixXd C = eval_noise_covariance(spec, buffer);

        double first = 0.0;
        double quad = 0.0;
        double growth = 0.0;
        for (std::size_t i = 0; i < spec.n; ++i)
        {
            const auto I = static_cast<Eigen::Index>(i);
            first += params.c[i] * drift(I);
            growth += std::abs(f(I)) + g(I) * g(I);
            for (std::size_t j = 0; j < spec.n; ++j)
                quad += params.c[i] * params.c[j] * C(I, static_cast<Eigen::Index>(j)) * x[i] * x[j];
        }
        const double lhs = first / denom - 0.5 * quad / (denom * denom) + params.gamma_b * growth;
        const double rhs = (norm(x) < params.M ? params.A0 : 0.0) - params.gamma_0 -
                           params.A1 * h_checked(params, x) + params.A2 * integrate_measure(buffer, params.mu, params.h);
        const double margin = rhs - lhs;
        report.worst_margin = std::min(report.worst_margin, margin);
        if (margin < 0.0)
            ++report.violations;
    }
    return report;
}

namespace
{

double k_tilde_over(const ModelSpec& spec, const LyapunovParams& params, SegmentSampler& sampler, std::size_t N)
{
    double worst = 0.0;
    auto buffer = sampler.make_buffer();
    for (std::size_t s = 0; s < N; ++s)
    {
        sampler.next(buffer);
        const auto x = state_now(buffer);
        const Eigen::VectorXd f = eval_growth(spec, buffer);
        const Eigen::VectorXd g = per_capita_g(spec, buffer);
        const double lhs = f.cwiseAbs().sum() + g.squaredNorm();
        const double rhs = h_checked(params, x) + integrate_measure(buffer, params.mu, params.h);
        worst = std::max(worst, lhs / rhs);
    }
    return worst;
}

} // namespace

AuditReport check_assumption_2(const ModelSpec& spec, const LyapunovParams& params, SegmentSampler& sampler,
                               std::size_t N)
{
    AuditReport report;
    report.assumption = "1.2(a)";
    report.params_digest = params_digest(params);
    report.samples = N;
    report.vacuous = N == 0;
    if (report.vacuous)
    {
        report.notes.emplace_back("vacuous");
        return report;
    }

    SegmentSampler wide = sampler.widened(10.0);
    const double k = k_tilde_over(spec, params, sampler, N);
    const double k_wide = k_tilde_over(spec, params, wide, N);
    report.k_tilde = k;
    report.worst_margin = 0.0;
    if (k_wide > 1.5 * k + 1e-12)
    {
        report.unbounded_trend = true;
        report.notes.emplace_back("unbounded trend: K~ grows from " + std::to_string(k) + " to " +
                                  std::to_string(k_wide) + " on a ten times wider sampler");
    }
    return report;
}

AuditReport check_assumption_4(const ModelSpec& spec, const LipschitzCandidate& candidate, SegmentSampler& sampler,
                               std::size_t N)
{
    AuditReport report;
    report.assumption = "1.4";
    {
        std::string bytes;
        append_double(bytes, candidate.D0);
        append_double(bytes, candidate.d0);
        for (const auto& atom : candidate.mu.atoms())
        {
            append_double(bytes, atom.offset);
            append_double(bytes, atom.weight);
        }
        report.params_digest = fnv1a_hex(bytes);
    }
    report.samples = N;
    report.vacuous = N == 0;
    if (report.vacuous)
    {
        report.notes.emplace_back("vacuous");
        return report;
    }
    report.worst_margin = std::numeric_limits<double>::infinity();

    auto first = sampler.make_buffer();
    auto second = sampler.make_buffer();
    double inverse_norm = 0.0;
    for (std::size_t s = 0; s < N; ++s)
    {
        sampler.next(first);
        sampler.next(second);
        const auto x1 = state_now(first);
        const auto x2 = state_now(second);

        auto weight = [&](std::span<const double> a, std::span<const double> b) {
            double diff = 0.0;
            double size = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i)
            {
                diff += (a[i] - b[i]) * (a[i] - b[i]);
                size += (a[i] + b[i]) * (a[i] + b[i]);
            }
            return std::sqrt(diff) * std::pow(1.0 + std::sqrt(size), candidate.d0);
        };
        double bound = weight(x1, x2);
        for (const auto& atom : candidate.mu.atoms())
            bound += atom.weight * weight(tap(first, atom.offset), tap(second, atom.offset));
        bound *= candidate.D0;

        const Eigen::VectorXd f1 = eval_growth(spec, first);
        const Eigen::VectorXd f2 = eval_growth(spec, second);
        const Eigen::VectorXd g1 = per_capita_g(spec, first);
        const Eigen::VectorXd g2 = per_capita_g(spec, second);
        double worst_diff = 0.0;
        for (Eigen::Index i = 0; i < f1.size(); ++i)
            worst_diff = std::max({worst_diff, std::abs(f1(i) - f2(i)), std::abs(g1(i) - g2(i)),
                                   std::abs(g1(i) * g1(i) - g2(i) * g2(i))});
        const double margin = bound - worst_diff;
        report.worst_margin = std::min(report.worst_margin, margin);
        if (margin < -1e-12 * std::max(1.0, worst_diff))
            ++report.violations;

        const Eigen::MatrixXd C = eval_noise_covariance(spec, first);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
        const double smallest = eig.eigenvalues().minCoeff();
        if (!(smallest > 1e-14 * std::max(1.0, eig.eigenvalues().maxCoeff())))
            throw Error(ErrorCode::SingularDiffusion, "diffusion matrix is not invertible at a sampled segment");
        inverse_norm = std::max(inverse_norm, 1.0 / smallest);
    }
    report.inverse_norm = inverse_norm;
    return report;
}

std::string audit_json(const AuditReport& report)
{
    nlohmann::ordered_json j;
    j["assumption"] = report.assumption;
    j["samples"] = report.samples;
    j["violations"] = report.violations;
    j["worst_margin"] = report.vacuous ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(report.worst_margin);
    j["params_digest"] = report.params_digest;
    j["vacuous"] = report.vacuous;
    if (report.k_tilde)
    {
        j["k_tilde"] = *report.k_tilde;
        j["unbounded_trend"] = report.unbounded_trend;
    }
    if (report.inverse_norm)
        j["inverse_norm"] = *report.inverse_norm;
    j["notes"] = report.notes;
    return j.dump();
}

LyapunovParams suggest_params_lv(const LVCompetitive& lv)
{
    const ModelSpec spec = build(lv);
    const std::size_t n = spec.n;
    const double dn = static_cast<double>(n);
    const Eigen::MatrixXd& sigma = spec.noise->sigma();
    const Eigen::MatrixXd b_hat = lv.b_hat.size() == 0 ? Eigen::MatrixXd::Zero(lv.b.rows(), lv.b.cols()) : lv.b_hat;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const double lambda_min = eig.eigenvalues().minCoeff();
    const double lambda_max = eig.eigenvalues().maxCoeff();
    const double b_min = lv.b.diagonal().minCoeff();
    const double a_max = std::max(0.0, lv.a.maxCoeff());
    const double sum_a = lv.a.cwiseAbs().sum();
    const double sum_b = lv.b.sum();
    const double sum_b_hat = b_hat.cwiseAbs().sum();
    const double sum_all = sum_b + sum_b_hat;
    const Eigen::MatrixXd negative = (-b_hat).cwiseMax(0.0);
    const double negative_norm = negative.size() ? negative.operatorNorm() : 0.0;

    // x' Sigma x / (1 + sum x)^2 >= lambda_min / (4n) = 2 sigma_* once sqrt(n)|x| >= 1.
    const double sigma_lower = lambda_min / (8.0 * dn);
    const double M1 = 1.0 / std::sqrt(dn);
    // Drift ratio below -b1*(1 + |x|) + b2*|phi(-r)| beyond M2.
    const double b1 = b_min / (4.0 * std::sqrt(dn));
    const double b2 = negative_norm > 0.0 ? negative_norm : b1 / 10.0;
    if (!(b2 < b1))
        throw Error(ErrorCode::ConstraintInfeasible, "negative delayed couplings exceed the intra-specific bound b1*");
    const double M2 = std::max(M1, 1.0 + a_max / b1);

    double gamma_b = std::min(sigma_lower / dn, (b1 - b2) / sum_all);
    if (sum_a > 0.0)
        gamma_b = std::min(gamma_b, b1 / (2.0 * sum_a));
    gamma_b *= 0.5;

    LyapunovParams p;
    p.c.assign(n, 1.0);
    p.gamma_b = gamma_b;
    p.gamma = gamma_b / 2.0;
    p.gamma_0 = 0.5 * (b1 / 2.0 - gamma_b * sum_a);
    const double lo = b2 + gamma_b * sum_b_hat;
    const double hi = b1 - gamma_b * sum_b;
    if (!(p.gamma_0 > 0.0 && lo < hi))
        throw Error(ErrorCode::ConstraintInfeasible, "empty window for A1, A2");
    p.A2 = lo + (hi - lo) / 3.0;
    p.A1 = lo + 2.0 * (hi - lo) / 3.0;
    p.M = std::max(M1, M2) + 1.0;
    // Closed-form bound on sup_{|x| < M} of the quadratic and drift ratios.
    p.A0 = p.gamma_0 + p.A1 * (1.0 + p.M) + gamma_b * (sum_a + p.M * sum_b + dn) + p.M * sum_a + lambda_max + a_max;
    const double sigma_star = sigma.maxCoeff();
    p.p0 = 0.5 * std::min(1.0, gamma_b / (8.0 * dn * sigma_star));
    p.rho.assign(n, 0.0);
    p.h = [](std::span<const double> x) { return 1.0 + norm(x); };
    p.mu = DelayMeasure::point(-lv.r);

    const auto problems = check_params(p, sigma);
    if (!problems.empty())
        throw Error(ErrorCode::ConstraintInfeasible, problems.front());
    return p;
}

} // namespace sfk
