#include "sfk/ergodic.hpp"

#include "sfk/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

namespace sfk
{

namespace
{

std::uint64_t sample_count(const SimConfig& cfg)
{
    const auto total = static_cast<std::uint64_t>(std::llround(cfg.T / cfg.dt));
    const auto burn = static_cast<std::uint64_t>(std::llround(cfg.effective_burn_in() / cfg.dt));
    return total > burn ? (total - burn) / cfg.thinning : 0;
}

// The Dirac measure at 0: every sample of the observable takes the same value.
ObservableStats constant_stats(double value, std::uint64_t samples)
{
    BatchMeansAccumulator acc(samples);
    for (std::uint64_t s = 0; s < samples; ++s)
        acc.add(value);
    return acc.finish();
}

void require_batches(const ObservableStats& stats)
{
    if (stats.batch_count < kMinimumBatches)
        throw Error(ErrorCode::InsufficientBatches,
                    "only " + std::to_string(stats.batch_count) + " batches after burn-in; increase T or reduce thinning");
}

} // namespace

InitialSegment default_initial(const ModelSpec& spec)
{
    const double level = spec.simplex_total ? *spec.simplex_total / static_cast<double>(spec.n) : 1.0;
    return [level](double, std::span<double> out) { std::fill(out.begin(), out.end(), level); };
}

FaceRun run_on_face(const ModelSpec& spec, std::span<const std::size_t> face, std::span<const Observable> observables,
                    const SimConfig& cfg, const InitialSegment& initial)
{
    for (std::size_t i : face)
        if (i >= spec.n)
            throw Error(ErrorCode::OutOfRange, "face coordinate " + std::to_string(i) + " out of range");
    validate(cfg, spec.r);

    FaceRun run;
    run.kept = with_affine(spec, face);

    if (run.kept.empty())
    {
        SegmentBuffer zero(spec.n, spec.r, cfg.dt);
        const std::vector<double> origin(spec.n, 0.0);
        zero.fill_constant(origin);
        const auto samples = sample_count(cfg);
        for (const auto& obs : observables)
            run.stats.push_back(constant_stats(obs(zero), samples));
        return run;
    }

    const ModelSpec restricted = restrict_to_face(spec, run.kept);

    auto index_of = std::make_shared<std::vector<std::size_t>>(spec.n, EmbeddedView::kPinned);
    for (std::size_t k = 0; k < run.kept.size(); ++k)
        (*index_of)[run.kept[k]] = k;

    std::vector<Observable> lifted;
    lifted.reserve(observables.size());
    for (const auto& obs : observables)
        lifted.push_back([obs, index_of](const SegmentView& seg) {
            const EmbeddedView full(seg, *index_of);
            return obs(full);
        });

    const std::size_t n = spec.n;
    const auto kept = run.kept;
    const auto total = restricted.simplex_total;
    InitialSegment face_initial = [initial, kept, n, total](double s, std::span<double> out) {
        std::vector<double> full(n, 0.0);
        initial(s, full);
        double sum = 0.0;
        for (std::size_t k = 0; k < kept.size(); ++k)
        {
            out[k] = full[kept[k]];
            sum += out[k];
        }
        if (total && sum > 0.0)
            for (double& x : out)
                x *= *total / sum;
    };

    auto result = simulate(restricted, face_initial, cfg, lifted);
    run.stats = std::move(result.stats);
    run.histogram = std::move(result.histogram);
    return run;
}

ObservableStats time_average(const ModelSpec& spec, std::span<const std::size_t> face, const Observable& observable,
                             const SimConfig& cfg)
{
    const Observable obs[] = {observable};
    auto run = run_on_face(spec, face, obs, cfg, default_initial(spec));
    require_batches(run.stats.front());
    return std::move(run.stats.front());
}

ObservableStats estimate_lambda(const ModelSpec& spec, std::span<const std::size_t> face, std::size_t target,
                                const SimConfig& cfg)
{
    if (target >= spec.n)
        throw Error(ErrorCode::OutOfRange, "target coordinate out of range");
    if (std::find(face.begin(), face.end(), target) != face.end())
        throw Error(ErrorCode::InvalidParameter, "target coordinate lies in the face");
    if (!spec.kolmogorov[target])
        throw Error(ErrorCode::InvalidParameter, "invasion rates are defined for Kolmogorov coordinates only");

    const ModelSpec* model = &spec;
    return time_average(
        spec, face, [model, target](const SegmentView& seg) { return invasion_integrand(*model, seg, target); },
        cfg);
}

std::string stats_jsonl(const std::string& observable, std::span<const std::size_t> face,
                        const ObservableStats& stats, const SimConfig& cfg)
{
    nlohmann::json j;
    j["observable"] = observable;
    j["face"] = std::vector<std::size_t>(face.begin(), face.end());
    j["mean"] = stats.mean;
    j["ci"] = stats.ci_half_width;
    j["batches"] = stats.batch_count;
    j["seed"] = cfg.seed;
    j["T"] = cfg.T;
    j["dt"] = cfg.dt;
    return j.dump();
}

} // namespace sfk
