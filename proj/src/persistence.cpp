#include "sfk/persistence.hpp"

#include "parallel.hpp"
#include "sfk/ergodic.hpp"
#include "sfk/error.hpp"
#include "simplex.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace sfk
{

std::string_view to_string(Occupancy occupancy) noexcept
{
    switch (occupancy)
    {
    case Occupancy::Occupied:
        return "occupied";
    case Occupancy::Empty:
        return "empty";
    case Occupancy::Inconclusive:
        return "inconclusive";
    }
    return "?";
}

std::string_view to_string(Classification classification) noexcept
{
    switch (classification)
    {
    case Classification::Persistent:
        return "Persistent";
    case Classification::CriterionFails:
        return "CriterionFails";
    case Classification::Inconclusive:
        return "Inconclusive";
    }
    return "?";
}

namespace
{

using Mask = std::uint32_t;

std::vector<std::size_t> face_of(Mask mask, std::span<const std::size_t> kol)
{
    std::vector<std::size_t> face;
    for (std::size_t b = 0; b < kol.size(); ++b)
        if (mask & (Mask{1} << b))
            face.push_back(kol[b]);
    return face;
}

enum class Verdict
{
    Repelled,
    Attracting,
    Unclear,
};

// Does some coordinate of I \ J invade the measure on J?
Verdict invasion_verdict(const FaceMeasureEstimate& sub, std::span<const std::size_t> newcomers)
{
    bool all_negative = true;
    for (std::size_t i : newcomers)
    {
        const auto& l = sub.lambda[i];
        if (l.mean - l.ci > 0.0)
            return Verdict::Repelled;
        if (!(l.mean + l.ci < 0.0))
            all_negative = false;
    }
    return all_negative ? Verdict::Attracting : Verdict::Unclear;
}

struct FaceJob
{
    std::size_t face_index;
    std::size_t replicate;
};

} // namespace

std::vector<FaceMeasureEstimate> boundary_scan(const ModelSpec& spec, const SimConfig& cfg,
                                               const ScanOptions& options)
{
    const auto kol = kolmogorov_coordinates(spec);
    if (kol.empty())
        throw Error(ErrorCode::InvalidParameter, "model has no Kolmogorov coordinates");
    if (kol.size() > 16)
        throw Error(ErrorCode::InvalidParameter, "face lattice too large (more than 16 Kolmogorov coordinates)");
    const std::size_t replicates = std::max<std::size_t>(1, options.replicates);
    const InitialSegment initial = options.initial ? options.initial : default_initial(spec);

    // Proper sub-faces, by size then lexicographically. The simplex has no
    // empty face: its smallest faces are the vertices.
    const Mask full = (Mask{1} << kol.size()) - 1;
    std::vector<Mask> masks;
    for (Mask m = spec.simplex_total ? 1 : 0; m < full; ++m)
        masks.push_back(m);
    std::sort(masks.begin(), masks.end(), [&](Mask a, Mask b) {
        if (std::popcount(a) != std::popcount(b))
            return std::popcount(a) < std::popcount(b);
        return face_of(a, kol) < face_of(b, kol);
    });

    std::vector<FaceMeasureEstimate> faces(masks.size());
    std::map<Mask, std::size_t> position;

    std::size_t begin = 0;
    while (begin < masks.size())
    {
        std::size_t end = begin;
        while (end < masks.size() && std::popcount(masks[end]) == std::popcount(masks[begin]))
            ++end;

        std::vector<FaceJob> jobs;
        for (std::size_t f = begin; f < end; ++f)
        {
            const Mask mask = masks[f];
            auto& est = faces[f];
            est.face = face_of(mask, kol);
            est.lambda.assign(spec.n, {0.0, 0.0, true});
            est.means.assign(spec.n, {0.0, 0.0, true});
            position[mask] = f;

            bool unclear = false;
            bool empty = false;
            for (const auto& [sub_mask, s] : position)
            {
                if (sub_mask == mask || (sub_mask & ~mask) != 0 || !faces[s].in_measure_set())
                    continue;
                const auto verdict = invasion_verdict(faces[s], face_of(mask & ~sub_mask, kol));
                if (verdict == Verdict::Attracting && faces[s].occupancy == Occupancy::Occupied)
                    empty = true;
                else if (verdict != Verdict::Repelled)
                    unclear = true;
            }
            est.occupancy = empty ? Occupancy::Empty : unclear ? Occupancy::Inconclusive : Occupancy::Occupied;
            if (est.in_measure_set())
                for (std::size_t rep = 0; rep < replicates; ++rep)
                    jobs.push_back({f, rep});
        }

        std::vector<std::vector<ObservableStats>> results(jobs.size());
        std::vector<std::uint64_t> streams(jobs.size());
        std::vector<std::vector<std::size_t>> kept(jobs.size());
        detail::parallel_for(jobs.size(), options.workers, [&](std::size_t j) {
            const auto& est = faces[jobs[j].face_index];
            std::vector<Observable> observables;
            for (std::size_t i : kol)
                if (std::find(est.face.begin(), est.face.end(), i) == est.face.end())
                    observables.push_back(
                        [&spec, i](const SegmentView& seg) { return invasion_integrand(spec, seg, i); });
            for (std::size_t i : with_affine(spec, est.face))
                observables.push_back([i](const SegmentView& seg) { return seg.now(i); });

            SimConfig job_cfg = cfg;
            job_cfg.record_path = false;
            job_cfg.stream_id = detail::derive_stream(cfg.stream_id, masks[jobs[j].face_index], jobs[j].replicate);
            streams[j] = job_cfg.stream_id;
            auto run = run_on_face(spec, est.face, observables, job_cfg, initial);
            for (const auto& s : run.stats)
                if (s.batch_count < kMinimumBatches)
                    throw Error(ErrorCode::InsufficientBatches, "face run produced too few batches");
            kept[j] = std::move(run.kept);
            results[j] = std::move(run.stats);
        });

        for (std::size_t f = begin; f < end; ++f)
        {
            auto& est = faces[f];
            std::vector<std::size_t> mine;
            for (std::size_t j = 0; j < jobs.size(); ++j)
                if (jobs[j].face_index == f)
                    mine.push_back(j);
            if (mine.empty())
                continue;

            const bool exact = kept[mine.front()].empty();
            const std::size_t count = results[mine.front()].size();
            std::vector<ObservableStats> merged = results[mine.front()];
            for (std::size_t k = 1; k < mine.size(); ++k)
                for (std::size_t o = 0; o < count; ++o)
                    merged[o] = merge(merged[o], results[mine[k]][o]);
            for (std::size_t j : mine)
                est.stream_ids.push_back(streams[j]);

            if (mine.size() > 1)
                for (std::size_t o = 0; o < count; ++o)
                    for (std::size_t j : mine)
                    {
                        const auto& single = results[j][o];
                        if (std::abs(single.mean - merged[o].mean) > 3.0 * single.ci_half_width + 1e-12)
                            est.replicates_agree = false;
                    }

            std::size_t o = 0;
            for (std::size_t i : kol)
                if (std::find(est.face.begin(), est.face.end(), i) == est.face.end())
                {
                    est.lambda[i] = {merged[o].mean, merged[o].ci_half_width, exact};
                    ++o;
                }
            for (std::size_t i : kept[mine.front()])
            {
                est.means[i] = {merged[o].mean, merged[o].ci_half_width, false};
                ++o;
            }
        }
        begin = end;
    }
    return faces;
}

RhoStar solve_rho_lp(const std::vector<std::vector<double>>& table, std::span<const std::size_t> coords,
                     std::size_t n, double rho_min)
{
    const std::size_t k = coords.size();
    if (k == 0 || table.empty())
        throw Error(ErrorCode::InfeasibleLP, "no coordinates or no measures");
    if (!(rho_min >= 0.0) || static_cast<double>(k) * rho_min > 1.0)
        throw Error(ErrorCode::InfeasibleLP, "rho_min too large for the number of coordinates");

    double bound = 0.0;
    for (const auto& row : table)
    {
        if (row.size() != n)
            throw Error(ErrorCode::DimensionMismatch, "lambda vector has wrong length");
        for (std::size_t c : coords)
            bound = std::max(bound, std::abs(row[c]));
    }
    const double L = bound + 1.0;
    const double slack = 1.0 - static_cast<double>(k) * rho_min;
    const std::size_t last = coords[k - 1];

    // rho_c = rho_min + u_c for all but the last coordinate, which takes the
    // remainder; kappa = t - L keeps every variable non-negative and the
    // origin feasible.
    const std::size_t nv = k; // u_0 .. u_{k-2}, t
    std::vector<double> c(nv, 0.0);
    c[nv - 1] = 1.0;
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (const auto& row : table)
    {
        std::vector<double> a(nv, 0.0);
        double rhs = slack * row[last] + L;
        for (std::size_t q = 0; q < k; ++q)
        {
            rhs += rho_min * row[coords[q]];
            if (q + 1 < k)
                a[q] = -(row[coords[q]] - row[last]);
        }
        a[nv - 1] = 1.0;
        A.push_back(std::move(a));
        b.push_back(std::max(0.0, rhs));
    }
    if (k > 1)
    {
        std::vector<double> a(nv, 1.0);
        a[nv - 1] = 0.0;
        A.push_back(std::move(a));
        b.push_back(slack);
    }

    const auto sol = detail::maximize(c, A, b);

    RhoStar out;
    out.rho.assign(n, 0.0);
    double assigned = 0.0;
    for (std::size_t q = 0; q + 1 < k; ++q)
    {
        out.rho[coords[q]] = rho_min + std::max(0.0, sol.x[q]);
        assigned += out.rho[coords[q]];
    }
    out.rho[last] = 1.0 - assigned;

    // Report the attained value of the objective at the returned rho.
    double kappa = std::numeric_limits<double>::infinity();
    for (const auto& row : table)
    {
        double dot = 0.0;
        for (std::size_t cidx : coords)
            dot += out.rho[cidx] * row[cidx];
        kappa = std::min(kappa, dot);
    }
    out.kappa_lp = kappa;
    out.kappa_star = kappa / 2.0;
    return out;
}

namespace
{

enum class Endpoint
{
    Mean,
    Lower,
    Upper,
};

std::vector<std::vector<double>> lambda_table(std::span<const FaceMeasureEstimate> faces, Endpoint end)
{
    std::vector<std::vector<double>> table;
    for (const auto& f : faces)
    {
        if (!f.in_measure_set())
            continue;
        std::vector<double> row;
        for (const auto& l : f.lambda)
            row.push_back(end == Endpoint::Mean ? l.mean : end == Endpoint::Lower ? l.mean - l.ci : l.mean + l.ci);
        table.push_back(std::move(row));
    }
    return table;
}

} // namespace

RhoStar find_rho_star(std::span<const FaceMeasureEstimate> faces, const ModelSpec& spec)
{
    const auto kol = kolmogorov_coordinates(spec);
    return solve_rho_lp(lambda_table(faces, Endpoint::Mean), kol, spec.n);
}

PersistenceReport classify(const ModelSpec& spec, const SimConfig& cfg, const ScanOptions& options)
{
    PersistenceReport report;
    report.model = spec.name;
    report.faces = boundary_scan(spec, cfg, options);

    const auto kol = kolmogorov_coordinates(spec);
    const auto centre = solve_rho_lp(lambda_table(report.faces, Endpoint::Mean), kol, spec.n);
    const auto lower = solve_rho_lp(lambda_table(report.faces, Endpoint::Lower), kol, spec.n);
    const auto upper = solve_rho_lp(lambda_table(report.faces, Endpoint::Upper), kol, spec.n);
    report.rho_star = centre.rho;
    report.kappa_star = centre.kappa_star;
    report.kappa_lower = lower.kappa_star;
    report.kappa_upper = upper.kappa_star;

    bool tentative = false;
    for (const auto& f : report.faces)
    {
        if (f.occupancy == Occupancy::Inconclusive)
        {
            tentative = true;
            std::string label;
            for (std::size_t i : f.face)
                label += (label.empty() ? "" : ",") + std::to_string(i + 1);
            report.diagnostics.push_back("face {" + label + "} has an inconclusive internal criterion");
        }
        if (!f.replicates_agree)
            report.diagnostics.push_back("replicate estimates disagree by more than 3 CI on a face");
    }

    if (tentative)
        report.classification = Classification::Inconclusive;
    else if (report.kappa_lower > 0.0)
        report.classification = Classification::Persistent;
    else if (report.kappa_upper < 0.0)
        report.classification = Classification::CriterionFails;
    else
        report.classification = Classification::Inconclusive;

    char line[160];
    std::snprintf(line, sizeof line, "kappa_star in [%.6g, %.6g] over CI endpoints; rho_min = %g", report.kappa_lower,
                  report.kappa_upper, kRhoMin);
    report.diagnostics.emplace_back(line);
    return report;
}

std::string report_json(const PersistenceReport& report, const SimConfig& cfg, const std::string& config_digest)
{
    nlohmann::ordered_json j;
    j["model"] = report.model;
    j["classification"] = std::string(to_string(report.classification));
    j["kappa_star"] = report.kappa_star;
    j["kappa_lower"] = report.kappa_lower;
    j["kappa_upper"] = report.kappa_upper;
    j["rho_star"] = report.rho_star;
    auto faces = nlohmann::ordered_json::array();
    std::vector<std::uint64_t> streams;
    for (const auto& f : report.faces)
    {
        nlohmann::ordered_json face;
        std::vector<std::size_t> I;
        for (std::size_t i : f.face)
            I.push_back(i + 1);
        face["I"] = I;
        face["occupied"] = f.occupancy == Occupancy::Occupied;
        face["occupancy"] = std::string(to_string(f.occupancy));
        auto lambda = nlohmann::ordered_json::array();
        if (f.in_measure_set())
            for (std::size_t i = 0; i < f.lambda.size(); ++i)
                lambda.push_back({{"i", i + 1}, {"mean", f.lambda[i].mean}, {"ci", f.lambda[i].ci}});
        face["lambda"] = lambda;
        faces.push_back(face);
        streams.insert(streams.end(), f.stream_ids.begin(), f.stream_ids.end());
    }
    j["faces"] = faces;
    j["seeds"] = {{"seed", cfg.seed}, {"stream_ids", streams}};
    j["diagnostics"] = report.diagnostics;
    j["config_digest"] = config_digest;
    return j.dump(2);
}

namespace
{

std::string index_name(std::size_t i)
{
    return std::to_string(i + 1);
}

ThresholdEntry lambda_entry(std::size_t target, std::vector<std::size_t> face, std::optional<double> value,
                            const std::string& measure, const std::string& target_name)
{
    return {"lambda_" + target_name + "(" + measure + ")", ThresholdKind::Lambda, std::move(face), target, value};
}

ThresholdEntry mean_entry(std::size_t target, std::vector<std::size_t> face, std::optional<double> value,
                          const std::string& measure, const std::string& target_name)
{
    return {"mean_" + target_name + "(" + measure + ")", ThresholdKind::Mean, std::move(face), target, value};
}

std::pair<double, double> solve2(double a11, double a12, double a21, double a22, double r1, double r2)
{
    const double det = a11 * a22 - a12 * a21;
    const double scale = std::max({std::abs(a11 * a22), std::abs(a12 * a21), 1e-300});
    if (!(std::abs(det) > 1e-12 * scale))
        throw Error(ErrorCode::SingularSystem, "2x2 system for the face means is singular");
    return {(r1 * a22 - a12 * r2) / det, (a11 * r2 - r1 * a21) / det};
}

std::vector<ThresholdEntry> lv_thresholds(const LVCompetitive& lv, const Eigen::MatrixXd& sigma)
{
    const std::size_t n = static_cast<std::size_t>(lv.a.size());
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i)
        names.push_back(index_name(i));
    const Eigen::MatrixXd b_hat = lv.b_hat.size() == 0 ? Eigen::MatrixXd::Zero(lv.b.rows(), lv.b.cols()) : lv.b_hat;

    std::vector<ThresholdEntry> out;
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto I = static_cast<Eigen::Index>(i);
        out.push_back(lambda_entry(i, {}, lv.a(I) - sigma(I, I) / 2.0, "delta*", names[i]));
    }
    for (std::size_t j = 0; j < n; ++j)
    {
        const auto J = static_cast<Eigen::Index>(j);
        const double rate = lv.a(J) - sigma(J, J) / 2.0;
        if (!(rate > 0.0))
            continue;
        const double m = rate / (lv.b(J, J) + b_hat(J, J));
        const std::string measure = "pi_" + names[j];
        out.push_back(mean_entry(j, {j}, m, measure, names[j]));
        for (std::size_t i = 0; i < n; ++i)
        {
            if (i == j)
                continue;
            const auto I = static_cast<Eigen::Index>(i);
            out.push_back(
                lambda_entry(i, {j}, lv.a(I) - sigma(I, I) / 2.0 - m * (lv.b(I, J) + b_hat(I, J)), measure, names[i]));
        }
    }
    return out;
}

std::vector<ThresholdEntry> predator_prey_thresholds(const PredatorPrey3& pp, const Eigen::MatrixXd& s)
{
    const auto& a = pp.a;
    const auto& b = pp.b;
    const Eigen::Matrix3d bh = pp.b_hat;

    std::vector<ThresholdEntry> out;
    out.push_back(lambda_entry(0, {}, a(0) - s(0, 0) / 2.0, "delta*", "1"));
    out.push_back(lambda_entry(1, {}, -a(1) - s(1, 1) / 2.0, "delta*", "2"));
    out.push_back(lambda_entry(2, {}, -a(2) - s(2, 2) / 2.0, "delta*", "3"));

    const double rate1 = a(0) - s(0, 0) / 2.0;
    if (!(rate1 > 0.0))
        return out;
    const double m1 = rate1 / (b(0, 0) + bh(0, 0));
    out.push_back(mean_entry(0, {0}, m1, "pi_1", "1"));
    const double l2_1 = -a(1) - s(1, 1) / 2.0 + m1 * (b(1, 0) - bh(1, 0));
    const double l3_1 = -a(2) - s(2, 2) / 2.0 + m1 * (b(2, 0) - bh(2, 0));
    out.push_back(lambda_entry(1, {0}, l2_1, "pi_1", "2"));
    out.push_back(lambda_entry(2, {0}, l3_1, "pi_1", "3"));

    if (l2_1 > 0.0)
    {
        const auto [A1, A2] = solve2(b(0, 0) + bh(0, 0), b(0, 1) + bh(0, 1), -(b(1, 0) - bh(1, 0)),
                                     b(1, 1) + bh(1, 1), rate1, -a(1) - s(1, 1) / 2.0);
        out.push_back(mean_entry(0, {0, 1}, A1, "pi_12", "1"));
        out.push_back(mean_entry(1, {0, 1}, A2, "pi_12", "2"));
        out.push_back(lambda_entry(2, {0, 1},
                                   -a(2) - s(2, 2) / 2.0 + (b(2, 0) - bh(2, 0)) * A1 - (b(2, 1) + bh(2, 1)) * A2,
                                   "pi_12", "3"));
    }
    if (l3_1 > 0.0)
    {
        const auto [A1, A3] = solve2(b(0, 0) + bh(0, 0), b(0, 2) + bh(0, 2), -(b(2, 0) - bh(2, 0)),
                                     b(2, 2) + bh(2, 2), rate1, -a(2) - s(2, 2) / 2.0);
        out.push_back(mean_entry(0, {0, 2}, A1, "pi_13", "1"));
        out.push_back(mean_entry(2, {0, 2}, A3, "pi_13", "3"));
        out.push_back(lambda_entry(1, {0, 2},
                                   -a(1) - s(1, 1) / 2.0 + (b(1, 0) - bh(1, 0)) * A1 - (b(1, 2) + bh(1, 2)) * A3,
                                   "pi_13", "2"));
    }
    return out;
}

std::vector<ThresholdEntry> replicator_thresholds(const Replicator& rep, const ModelSpec& spec)
{
    const std::size_t n = spec.n;
    std::vector<ThresholdEntry> out;
    // At vertex j the delayed state is X e_j as well.
    SegmentBuffer vertex(n, spec.r, spec.r > 0.0 ? spec.r : 1.0);
    for (std::size_t j = 0; j < n; ++j)
    {
        std::vector<double> x(n, 0.0);
        x[j] = rep.total;
        vertex.fill_constant(x);
        const Eigen::VectorXd f = eval_growth(spec, vertex);
        for (std::size_t i = 0; i < n; ++i)
        {
            if (i == j)
                continue;
            const double si = rep.sigma(static_cast<Eigen::Index>(i));
            const double sj = rep.sigma(static_cast<Eigen::Index>(j));
            out.push_back(lambda_entry(i, {j}, f(static_cast<Eigen::Index>(i)) - (si * si + sj * sj) / 2.0,
                                       "delta_" + index_name(j), index_name(i)));
        }
    }
    if (n >= 3)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k)
                for (std::size_t i = 0; i < n; ++i)
                    if (i != j && i != k)
                        out.push_back(lambda_entry(i, {j, k}, std::nullopt,
                                                   "pi_" + index_name(j) + index_name(k), index_name(i)));
    return out;
}

} // namespace

std::vector<ThresholdEntry> analytic_threshold(const CatalogModel& catalog)
{
    const ModelSpec spec = build(catalog);
    const Eigen::MatrixXd& sigma = spec.noise->sigma();
    return std::visit(
        [&](const auto& model) -> std::vector<ThresholdEntry> {
            using T = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<T, LVCompetitive>)
                return lv_thresholds(model, sigma);
            else if constexpr (std::is_same_v<T, PredatorPrey3>)
                return predator_prey_thresholds(model, sigma);
            else if constexpr (std::is_same_v<T, Replicator>)
                return replicator_thresholds(model, spec);
            else if constexpr (std::is_same_v<T, SIR>)
            {
                const bool linear = !model.incidence_s;
                std::vector<ThresholdEntry> out;
                out.push_back(mean_entry(0, {}, model.a / model.b1, "pi", "S"));
                std::optional<double> value;
                if (linear)
                    value = -model.b2 - sigma(1, 1) / 2.0 + model.a * (model.c1 + model.c2) / model.b1;
                out.push_back(lambda_entry(1, {}, value, "pi", "I"));
                return out;
            }
            else
            {
                std::vector<ThresholdEntry> out;
                out.push_back(mean_entry(0, {}, 1.0 / (1.0 - model.a), "pi_0", "S"));
                const std::size_t species = spec.n - 1;
                for (std::size_t i = 1; i <= species; ++i)
                    out.push_back(lambda_entry(i, {}, std::nullopt, "pi_0", index_name(i - 1)));
                if (species >= 2)
                    for (std::size_t j = 1; j <= species; ++j)
                        for (std::size_t i = 1; i <= species; ++i)
                            if (i != j)
                                out.push_back(lambda_entry(i, {j}, std::nullopt, "pi_0" + index_name(j - 1),
                                                           index_name(i - 1)));
                return out;
            }
        },
        catalog);
}

std::vector<ThresholdComparison> compare_thresholds(const CatalogModel& catalog, const SimConfig& cfg,
                                                    std::size_t workers)
{
    const ModelSpec spec = build(catalog);
    std::vector<ThresholdComparison> rows;
    for (auto& entry : analytic_threshold(catalog))
        if (entry.kind == ThresholdKind::Lambda)
            rows.push_back({std::move(entry), {}, std::numeric_limits<double>::quiet_NaN(), false});

    detail::parallel_for(rows.size(), workers, [&](std::size_t k) {
        auto& row = rows[k];
        SimConfig job = cfg;
        job.record_path = false;
        job.stream_id = detail::derive_stream(cfg.stream_id, 1000 + k, 0);
        row.estimate = estimate_lambda(spec, row.entry.face, row.entry.target, job);
        if (row.entry.value)
        {
            row.abs_err = std::abs(row.estimate.mean - *row.entry.value);
            row.pass = row.abs_err <= std::max(3.0 * row.estimate.ci_half_width, 0.03);
        }
    });
    return rows;
}

std::string thresholds_csv(std::span<const ThresholdComparison> rows)
{
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string out = "entry,analytic,estimate,ci,abs_err,pass\n";
    for (const auto& row : rows)
    {
        out += row.entry.name + ",";
        if (row.entry.value)
            out += num(*row.entry.value) + "," + num(row.estimate.mean) + "," + num(row.estimate.ci_half_width) + "," +
                   num(row.abs_err) + "," + (row.pass ? "true" : "false");
        else
            out += "simulation-only," + num(row.estimate.mean) + "," + num(row.estimate.ci_half_width) + ",,n/a";
        out += "\n";
    }
    return out;
}

EmpiricalPersistence empirical_persistence_check(const ModelSpec& spec, const SimConfig& cfg, double epsilon,
                                                 const InitialSegment& initial)
{
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw Error(ErrorCode::InvalidParameter, "epsilon must lie in (0, 1)");
    SimConfig run_cfg = cfg;
    run_cfg.record_path = false;
    const auto result = simulate(spec, initial ? initial : default_initial(spec), run_cfg);

    EmpiricalPersistence out;
    constexpr std::size_t steps = OccupationHistogram::kBins / 2;
    for (std::size_t half = 1; half <= steps; ++half)
    {
        const auto band = frequency_in_band(result.histogram, std::pow(10.0, 0.25 * static_cast<double>(half)));
        out.R = band.R;
        out.frequency = band.frequency;
        out.achieved = std::all_of(band.frequency.begin(), band.frequency.end(),
                                   [epsilon](double f) { return f >= 1.0 - epsilon; });
        if (out.achieved)
            break;
    }
    return out;
}

} // namespace sfk
