#include "sfk/engine.hpp"

#include "sfk/error.hpp"

#include "scratch.hpp"

#include <cmath>
#include <sstream>

namespace sfk
{

namespace
{

using detail::Scratch;

constexpr int kMaxHalvings = 20;

std::string at_step(std::uint64_t k, double dt)
{
    std::ostringstream out;
    out.precision(10);
    out << " at step " << k << " (t = " << static_cast<double>(k) * dt << ")";
    return out.str();
}

void check_initial(const ModelSpec& spec, const SegmentBuffer& buf, bool strict)
{
    for (std::size_t k = 0; k < buf.depth(); ++k)
    {
        for (std::size_t i = 0; i < spec.n; ++i)
        {
            const double x = buf.sample(k, i);
            if (!std::isfinite(x))
                throw Error(ErrorCode::NonFinite, "initial segment is not finite");
            const bool ok = spec.kolmogorov[i] && !strict ? x >= 0.0 : x > 0.0;
            if (!ok)
                throw Error(ErrorCode::InvalidParameter,
                            "initial segment must be positive in coordinate " + spec.coordinate_names[i]);
        }
    }
}

} // namespace

void validate(const SimConfig& cfg, double r)
{
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt))
        throw Error(ErrorCode::InvalidParameter, "dt must be positive");
    if (r > 0.0 && cfg.dt > r)
        throw Error(ErrorCode::InvalidParameter, "dt must not exceed the delay r");
    if (!(cfg.T >= 0.0) || !std::isfinite(cfg.T))
        throw Error(ErrorCode::InvalidParameter, "T must be finite and non-negative");
    const double burn = cfg.effective_burn_in();
    if (!(burn >= 0.0) || burn > cfg.T)
        throw Error(ErrorCode::InvalidParameter, "burn_in must lie in [0, T]");
    if (cfg.thinning < 1)
        throw Error(ErrorCode::InvalidParameter, "thinning must be >= 1");
    if (!(cfg.positivity_floor > 0.0))
        throw Error(ErrorCode::InvalidParameter, "positivity floor must be positive");
}

// Internals shared by step() and simulate_coupled().
struct StepKernel
{
    // Noise of the current segment: dN_i = sum_k L_ik dB_k and C_ii.
    static void noise(SimulationState& st, const ModelSpec& spec, const SegmentView& seg,
                      std::span<const double> dB, std::span<double> dN, std::span<double> variance)
    {
        const std::size_t n = spec.n;
        const std::size_t m = spec.noise_dimension();
        if (spec.loading)
        {
            spec.loading(seg, st.loading_);
            for (std::size_t i = 0; i < n; ++i)
            {
                double acc = 0.0;
                double var = 0.0;
                for (std::size_t k = 0; k < m; ++k)
                {
                    const double l = st.loading_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
                    acc += l * dB[k];
                    var += l * l;
                }
                dN[i] = acc;
                variance[i] = var;
            }
            return;
        }
        Scratch g(n);
        spec.diffusion(seg, g);
        const Eigen::MatrixXd& gamma = spec.noise->gamma();
        const Eigen::MatrixXd& sigma = spec.noise->sigma();
        for (std::size_t i = 0; i < n; ++i)
        {
            const auto row = static_cast<Eigen::Index>(spec.noise_rows[i]);
            double dE = 0.0;
            for (std::size_t k = 0; k < m; ++k)
                dE += gamma(static_cast<Eigen::Index>(k), row) * dB[k];
            dN[i] = g[i] * dE;
            variance[i] = g[i] * g[i] * sigma(row, row);
        }
    }

    // Euler proposal for affine coordinate i started from x over a substep h,
    // with the other coordinates frozen at the start of the step.
    static double affine_proposal(SimulationState& st, const ModelSpec& spec, std::size_t i, double x, double h,
                                  std::span<const double> dB)
    {
        const std::size_t n = spec.n;
        Scratch head(n), f(n), b(n), dN(n), var(n);
        st.buffer_.now(head);
        head[i] = x;
        const HeadOverrideView view(st.buffer_, head);
        spec.growth(view, f);
        spec.affine(view, b);
        noise(st, spec, view, dB, dN, var);
        return x + (b[i] + x * f[i]) * h + x * dN[i];
    }

    static double refine_affine(SimulationState& st, const ModelSpec& spec, std::size_t i, double x, double h,
                                std::span<const double> dB, int depth, std::uint32_t node,
                                const NormalGenerator* bridge)
    {
        const double proposal = depth == 0 ? -1.0 : affine_proposal(st, spec, i, x, h, dB);
        if (proposal > 0.0)
            return proposal;
        if (depth >= kMaxHalvings)
            throw Error(ErrorCode::StepUnderflow, "coordinate " + spec.coordinate_names[i] +
                                                      " stays non-positive after 20 halvings" +
                                                      at_step(st.step_index_, st.buffer_.spacing()));
        ++st.halvings_;
        const std::size_t m = dB.size();
        Scratch z(m, 0.0), first(m), second(m);
        if (bridge)
            bridge->fill(st.step_index_, node, z);
        // Brownian bridge: B(h/2) given B(h) = dB is dB/2 + sqrt(h)/2 z.
        const double spread = 0.5 * std::sqrt(h);
        for (std::size_t k = 0; k < m; ++k)
        {
            first[k] = 0.5 * dB[k] + spread * z[k];
            second[k] = dB[k] - first[k];
        }
        const double mid = refine_affine(st, spec, i, x, 0.5 * h, first, depth + 1, 2 * node, bridge);
        return refine_affine(st, spec, i, mid, 0.5 * h, second, depth + 1, 2 * node + 1, bridge);
    }

    // Log increment (f - C_ii/2) dt + dN of every coordinate at the current segment.
    static void log_increments(SimulationState& st, const ModelSpec& spec, double dt, std::span<const double> dB)
    {
        spec.growth(st.buffer_, st.growth_);
        noise(st, spec, st.buffer_, dB, st.noise_, st.variance_);
        for (std::size_t i = 0; i < spec.n; ++i)
            st.trial_[i] = (st.growth_[i] - 0.5 * st.variance_[i]) * dt + st.noise_[i];
    }

    static void commit(SimulationState& st, const ModelSpec& spec)
    {
        for (std::size_t i = 0; i < spec.n; ++i)
        {
            if (!std::isfinite(st.next_[i]))
                throw Error(ErrorCode::NonFinite, "coordinate " + spec.coordinate_names[i] + " is not finite" +
                                                      at_step(st.step_index_ + 1, st.buffer_.spacing()));
        }
        st.buffer_.push(st.next_);
        ++st.step_index_;
    }
};

SimulationState::SimulationState(const ModelSpec& spec, double dt)
    : buffer_(spec.n, spec.r, dt), growth_(spec.n), affine_(spec.n), next_(spec.n), trial_(spec.n),
      noise_(spec.n), variance_(spec.n),
      loading_(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.noise_dimension()))
{
}

void SimulationState::fill(const InitialSegment& initial)
{
    buffer_.fill(initial);
    step_index_ = 0;
}

void SimulationState::fill_constant(std::span<const double> value)
{
    buffer_.fill_constant(value);
    step_index_ = 0;
}

void step(SimulationState& st, const ModelSpec& spec, double dt, std::span<const double> dB,
          const NormalGenerator* bridge)
{
    if (dB.size() != spec.noise_dimension())
        throw Error(ErrorCode::DimensionMismatch, "Brownian increment has wrong dimension");
    if (!st.buffer_.warm())
        throw Error(ErrorCode::ColdBuffer, "step before the initial segment was filled");
    const std::size_t n = spec.n;
    if (n > 0)
    {
        StepKernel::log_increments(st, spec, dt, dB);
        if (spec.affine)
            spec.affine(st.buffer_, st.affine_);
    }
    for (std::size_t i = 0; i < n; ++i)
    {
        const double x = st.buffer_.now(i);
        if (spec.kolmogorov[i])
        {
            if (x == 0.0)
            {
                st.next_[i] = 0.0;
                continue;
            }
            double next = x * std::exp(st.trial_[i]);
            if (next < st.floor_)
            {
                next = st.floor_;
                ++st.floor_hits_;
            }
            st.next_[i] = next;
        }
        else
        {
            const double proposal = x + (st.affine_[i] + x * st.growth_[i]) * dt + x * st.noise_[i];
            st.next_[i] = proposal > 0.0 ? proposal : StepKernel::refine_affine(st, spec, i, x, dt, dB, 0, 1, bridge);
        }
    }
    if (spec.simplex_total && n > 0)
    {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sum += st.next_[i];
        if (sum > 0.0)
        {
            const double scale = *spec.simplex_total / sum;
            for (std::size_t i = 0; i < n; ++i)
                st.next_[i] *= scale;
        }
    }
    StepKernel::commit(st, spec);
}

SimulationResult simulate(const ModelSpec& spec, const InitialSegment& initial, const SimConfig& cfg,
                          std::span<const Observable> observers)
{
    validate(cfg, spec.r);
    SimulationState st(spec, cfg.dt);
    st.floor_ = cfg.positivity_floor;
    st.fill(initial);
    check_initial(spec, st.buffer_, false);

    const auto total_steps = static_cast<std::uint64_t>(std::llround(cfg.T / cfg.dt));
    const auto burn_steps = static_cast<std::uint64_t>(std::llround(cfg.effective_burn_in() / cfg.dt));
    const std::uint64_t samples = total_steps > burn_steps ? (total_steps - burn_steps) / cfg.thinning : 0;

    std::vector<BatchMeansAccumulator> accumulators;
    for (std::size_t k = 0; k < observers.size(); ++k)
        accumulators.emplace_back(samples);

    SimulationResult result;
    result.histogram = OccupationHistogram(spec.n);
    if (cfg.record_path)
    {
        result.path.emplace();
        result.path->n = spec.n;
    }
    auto record = [&](std::uint64_t k) {
        result.path->t.push_back(static_cast<double>(k) * cfg.dt);
        const auto head = st.buffer_.head();
        result.path->x.insert(result.path->x.end(), head.begin(), head.end());
    };
    if (cfg.record_path)
        record(0);

    const NormalGenerator gen(cfg.stream());
    const std::size_t m = spec.noise_dimension();
    const double scale = std::sqrt(cfg.dt);
    std::vector<double> dB(m);
    for (std::uint64_t k = 1; k <= total_steps; ++k)
    {
        gen.fill(k - 1, 0, dB);
        for (auto& v : dB)
            v *= scale;
        step(st, spec, cfg.dt, dB, &gen);

        const auto head = st.buffer_.head();
        for (std::size_t i = 0; i < spec.n; ++i)
        {
            if (std::abs(head[i]) > cfg.divergence_bound)
                throw Error(ErrorCode::Diverged,
                            "coordinate " + spec.coordinate_names[i] + " exceeded the bound" + at_step(k, cfg.dt));
        }
        if (k > burn_steps && (k - burn_steps) % cfg.thinning == 0)
        {
            for (std::size_t o = 0; o < observers.size(); ++o)
                accumulators[o].add(observers[o](st.buffer_));
            result.histogram.add(head);
            ++result.samples;
        }
        if (cfg.record_path && k % cfg.thinning == 0)
            record(k);
    }

    for (const auto& acc : accumulators)
        result.stats.push_back(acc.finish());
    result.steps = total_steps;
    result.floor_hits = st.floor_hits_;
    result.halvings = st.halvings_;
    return result;
}

CoupledPath simulate_coupled(const ModelSpec& spec, const InitialSegment& phi, const InitialSegment& phi_tilde,
                             const CoupledConfig& ccfg, const SimConfig& cfg)
{
    if (!spec.all_kolmogorov())
        throw Error(ErrorCode::InvalidParameter, "coupling requires every coordinate to be Kolmogorov");
    if (!(ccfg.lambda_tilde >= 0.0) || !(ccfg.d0 >= 0.0))
        throw Error(ErrorCode::InvalidParameter, "lambda_tilde and d0 must be non-negative");
    validate(cfg, spec.r);

    SimulationState first(spec, cfg.dt);
    SimulationState second(spec, cfg.dt);
    first.floor_ = second.floor_ = cfg.positivity_floor;
    first.fill(phi);
    second.fill(phi_tilde);
    check_initial(spec, first.buffer_, true);
    check_initial(spec, second.buffer_, true);

    const std::size_t n = spec.n;
    const double power = 4.0 * ccfg.d0 + 4.0;
    const double log_floor = std::log(cfg.positivity_floor);
    CoupledPath out;
    auto record = [&](std::uint64_t k) {
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            const double z = std::log(first.buffer_.now(i)) - std::log(second.buffer_.now(i));
            sq += z * z;
        }
        out.t.push_back(static_cast<double>(k) * cfg.dt);
        out.z.push_back(std::sqrt(sq));
    };
    record(0);

    const auto total_steps = static_cast<std::uint64_t>(std::llround(cfg.T / cfg.dt));
    const NormalGenerator gen(cfg.stream());
    const double scale = std::sqrt(cfg.dt);
    std::vector<double> dB(spec.noise_dimension());
    for (std::uint64_t k = 1; k <= total_steps; ++k)
    {
        gen.fill(k - 1, 0, dB);
        for (auto& v : dB)
            v *= scale;
        StepKernel::log_increments(first, spec, cfg.dt, dB);
        StepKernel::log_increments(second, spec, cfg.dt, dB);
        for (std::size_t i = 0; i < n; ++i)
        {
            const double x = first.buffer_.now(i);
            const double x_tilde = second.buffer_.now(i);
            const double y = std::log(x);
            const double z = y - std::log(x_tilde);
            const double weight = ccfg.lambda_tilde * std::pow(1.0 + x + x_tilde, power);
            double y_next = y + first.trial_[i];
            const double z_next = (z + (first.trial_[i] - second.trial_[i])) / (1.0 + weight * cfg.dt);
            double y_tilde_next = y_next - z_next;
            if (y_next < log_floor)
            {
                y_next = log_floor;
                ++first.floor_hits_;
            }
            if (y_tilde_next < log_floor)
            {
                y_tilde_next = log_floor;
                ++second.floor_hits_;
            }
            first.next_[i] = std::exp(y_next);
            second.next_[i] = std::exp(y_tilde_next);
            if (first.next_[i] > cfg.divergence_bound || second.next_[i] > cfg.divergence_bound)
                throw Error(ErrorCode::Diverged, "coupled pair exceeded the bound" + at_step(k, cfg.dt));
        }
        StepKernel::commit(first, spec);
        StepKernel::commit(second, spec);
        if (k % cfg.thinning == 0)
            record(k);
    }
    return out;
}

} // namespace sfk
