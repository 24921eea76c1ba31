#include "sfk/model.hpp"

#include "sfk/error.hpp"

#include "scratch.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sfk
{

namespace
{

using detail::Scratch;

[[noreturn]] void invalid(const std::string& what)
{
    throw Error(ErrorCode::InvalidParameter, what);
}

std::string entry(const char* name, Eigen::Index i, Eigen::Index j)
{
    std::ostringstream out;
    out << name << "_" << i + 1 << j + 1;
    return out.str();
}

void require_square(const Eigen::MatrixXd& m, Eigen::Index n, const char* name)
{
    if (m.rows() != n || m.cols() != n)
    {
        std::ostringstream msg;
        msg << name << " must be " << n << "x" << n << ", got " << m.rows() << "x" << m.cols();
        throw Error(ErrorCode::DimensionMismatch, msg.str());
    }
    if (!m.allFinite())
        throw Error(ErrorCode::NonFinite, std::string(name) + " has a non-finite entry");
}

// b_ii > 0, b_ij >= 0 off the diagonal, b_hat_ij > -b_ii.
void check_competition(const Eigen::MatrixXd& b, const Eigen::MatrixXd& b_hat)
{
    const Eigen::Index n = b.rows();
    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (!(b(i, i) > 0.0))
            invalid("b_ii > 0 violated for " + entry("b", i, i));
        for (Eigen::Index j = 0; j < n; ++j)
        {
            if (i != j && !(b(i, j) >= 0.0))
                invalid("b_ij >= 0 violated for " + entry("b", i, j));
            if (!(b_hat(i, j) > -b(i, i)))
                invalid("b_hat_ij > -b_ii violated for " + entry("b_hat", i, j));
        }
    }
}

std::shared_ptr<const NoiseSpec> make_noise(const Eigen::MatrixXd& gamma, std::size_t n)
{
    if (static_cast<std::size_t>(gamma.rows()) != n || gamma.rows() != gamma.cols())
    {
        std::ostringstream msg;
        msg << "gamma must be " << n << "x" << n << ", got " << gamma.rows() << "x" << gamma.cols();
        throw Error(ErrorCode::DimensionMismatch, msg.str());
    }
    return std::make_shared<const NoiseSpec>(validate_noise(gamma));
}

void check_delay(double r)
{
    if (!std::isfinite(r) || r < 0.0)
        invalid("delay r must be finite and non-negative");
}

ModelSpec skeleton(std::string name, std::size_t n, double r)
{
    ModelSpec spec;
    spec.name = std::move(name);
    spec.n = n;
    spec.kolmogorov.assign(n, true);
    spec.r = r;
    spec.root_n = n;
    spec.root_index.resize(n);
    spec.noise_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        spec.root_index[i] = i;
        spec.noise_rows[i] = i;
    }
    spec.delay_measures.emplace("delay", DelayMeasure::point(-r));
    spec.diffusion = [](const SegmentView&, std::span<double> out) { std::fill(out.begin(), out.end(), 1.0); };
    return spec;
}

ModelSpec build_lv(const LVCompetitive& lv)
{
    const Eigen::Index n = lv.a.size();
    if (n == 0)
        invalid("LVCompetitive needs at least one species");
    require_square(lv.b, n, "b");
    require_square(lv.b_hat, n, "b_hat");
    check_delay(lv.r);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(lv.a(i) > 0.0))
            invalid("a_i > 0 violated for a_" + std::to_string(i + 1));
    check_competition(lv.b, lv.b_hat);

    ModelSpec spec = skeleton("LVCompetitive", static_cast<std::size_t>(n), lv.r);
    for (Eigen::Index i = 0; i < n; ++i)
        spec.coordinate_names.push_back("X_" + std::to_string(i + 1));
    spec.noise = make_noise(lv.gamma, spec.n);

    auto p = std::make_shared<const LVCompetitive>(lv);
    spec.growth = [p](const SegmentView& seg, std::span<double> out) {
        const std::size_t n = out.size();
        Scratch now(n), past(n);
        seg.now(now);
        seg.at(-p->r, past);
        for (std::size_t i = 0; i < n; ++i)
        {
            double f = p->a(static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < n; ++j)
            {
                const auto ii = static_cast<Eigen::Index>(i);
                const auto jj = static_cast<Eigen::Index>(j);
                f -= p->b(ii, jj) * now[j] + p->b_hat(ii, jj) * past[j];
            }
            out[i] = f;
        }
    };
    return spec;
}

ModelSpec build_predator_prey(const PredatorPrey3& pp)
{
    if (!pp.a.allFinite() || !pp.b.allFinite() || !pp.b_hat.allFinite())
        throw Error(ErrorCode::NonFinite, "predator-prey parameters must be finite");
    check_delay(pp.r);
    for (Eigen::Index i = 0; i < 3; ++i)
        if (!(pp.a(i) > 0.0))
            invalid("a_i > 0 violated for a_" + std::to_string(i + 1));
    check_competition(pp.b, pp.b_hat);

    ModelSpec spec = skeleton("PredatorPrey3", 3, pp.r);
    spec.coordinate_names = {"X_1", "X_2", "X_3"};
    spec.noise = make_noise(pp.gamma, 3);

    // Prey grows at +a_1 and is eaten; predators die at -a_i and convert prey at +b_i1.
    Eigen::Matrix3d signed_b = -pp.b;
    signed_b(1, 0) = pp.b(1, 0);
    signed_b(2, 0) = pp.b(2, 0);
    const Eigen::Vector3d base(pp.a(0), -pp.a(1), -pp.a(2));
    const Eigen::Matrix3d b_hat = pp.b_hat;
    const double r = pp.r;
    spec.growth = [signed_b, base, b_hat, r](const SegmentView& seg, std::span<double> out) {
        double now[3];
        double past[3];
        seg.now(now);
        seg.at(-r, past);
        for (int i = 0; i < 3; ++i)
        {
            double f = base(i);
            for (int j = 0; j < 3; ++j)
                f += signed_b(i, j) * now[j] - b_hat(i, j) * past[j];
            out[static_cast<std::size_t>(i)] = f;
        }
    };
    return spec;
}

ModelSpec build_replicator(const Replicator& rep)
{
    const Eigen::Index n = rep.sigma.size();
    if (n < 2)
        invalid("Replicator needs at least two strategies");
    if (!(rep.total > 0.0) || !std::isfinite(rep.total))
        invalid("total X > 0 violated");
    check_delay(rep.r);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(rep.sigma(i) >= 0.0) || !std::isfinite(rep.sigma(i)))
            invalid("sigma_i >= 0 violated for sigma_" + std::to_string(i + 1));

    std::vector<PayoffFunction> payoffs = rep.payoffs;
    if (payoffs.empty())
    {
        require_square(rep.payoff, n, "payoff");
        Eigen::VectorXd offset = rep.payoff_offset.size() == 0 ? Eigen::VectorXd::Zero(n) : rep.payoff_offset;
        if (offset.size() != n)
            throw Error(ErrorCode::DimensionMismatch, "payoff_offset must have one entry per strategy");
        const Eigen::MatrixXd matrix = rep.payoff;
        const double total = rep.total;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            payoffs.push_back([matrix, offset, total, i](std::span<const double> y) {
                double acc = 0.0;
                for (Eigen::Index j = 0; j < matrix.cols(); ++j)
                    acc += matrix(i, j) * y[static_cast<std::size_t>(j)];
                return offset(i) + acc / total;
            });
        }
    }
    else if (static_cast<Eigen::Index>(payoffs.size()) != n)
        throw Error(ErrorCode::DimensionMismatch, "one payoff function per strategy required");

    ModelSpec spec = skeleton("Replicator", static_cast<std::size_t>(n), rep.r);
    for (Eigen::Index i = 0; i < n; ++i)
        spec.coordinate_names.push_back("x_" + std::to_string(i + 1));
    spec.noise = make_noise(Eigen::MatrixXd::Identity(n, n), spec.n);
    spec.simplex_total = rep.total;

    auto shared = std::make_shared<const std::vector<PayoffFunction>>(std::move(payoffs));
    const double total = rep.total;
    const double r = rep.r;
    spec.growth = [shared, total, r](const SegmentView& seg, std::span<double> out) {
        const std::size_t n = out.size();
        Scratch now(n), past(n), fitness(n);
        seg.now(now);
        seg.at(-r, past);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            fitness[i] = (*shared)[i](past);
            mean += now[i] * fitness[i];
        }
        mean /= total;
        for (std::size_t i = 0; i < n; ++i)
            out[i] = fitness[i] - mean;
    };
    const Eigen::VectorXd sigma = rep.sigma;
    spec.diffusion = [sigma, total](const SegmentView& seg, std::span<double> out) {
        // Per-capita noise magnitude sqrt(C_ii).
        const std::size_t n = out.size();
        for (std::size_t i = 0; i < n; ++i)
        {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k)
            {
                const double l = (i == k ? sigma(static_cast<Eigen::Index>(i)) : 0.0) -
                                 sigma(static_cast<Eigen::Index>(k)) * seg.now(k) / total;
                acc += l * l;
            }
            out[i] = std::sqrt(acc);
        }
    };
    spec.loading = [sigma, total](const SegmentView& seg, Eigen::Ref<Eigen::MatrixXd> out) {
        const Eigen::Index n = out.rows();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < n; ++k)
                out(i, k) = (i == k ? sigma(i) : 0.0) - sigma(k) * seg.now(static_cast<std::size_t>(k)) / total;
    };
    return spec;
}

ModelSpec build_sir(const SIR& sir)
{
    check_delay(sir.r);
    if (!(sir.a > 0.0))
        invalid("a > 0 violated");
    if (!(sir.b1 > 0.0))
        invalid("b1 > 0 violated");
    if (!(sir.b2 > 0.0))
        invalid("b2 > 0 violated");
    IncidenceFunction to_s = sir.incidence_s;
    IncidenceFunction to_i = sir.incidence_i;
    if (static_cast<bool>(to_s) != static_cast<bool>(to_i))
        invalid("general incidence needs both incidence functions");
    if (!to_s)
    {
        if (!(sir.c1 > 0.0))
            invalid("c1 > 0 violated");
        if (!(sir.c2 > 0.0))
            invalid("c2 > 0 violated");
        const double c1 = sir.c1;
        const double c2 = sir.c2;
        to_s = [c1, c2](double s0, double sr, double, double) { return c1 * s0 + c2 * sr; };
        to_i = to_s;
    }

    ModelSpec spec = skeleton("SIR", 2, sir.r);
    spec.coordinate_names = {"S", "I"};
    spec.kolmogorov[0] = false;
    spec.noise = make_noise(sir.gamma, 2);

    const double a = sir.a;
    const double b1 = sir.b1;
    const double b2 = sir.b2;
    const double r = sir.r;
    spec.affine = [a, to_s, r](const SegmentView& seg, std::span<double> out) {
        const double i0 = seg.now(1);
        out[0] = a - i0 * to_s(seg.now(0), seg.at(-r, 0), i0, seg.at(-r, 1));
        out[1] = 0.0;
    };
    spec.growth = [b1, b2, to_i, r](const SegmentView& seg, std::span<double> out) {
        out[0] = -b1;
        out[1] = -b2 + to_i(seg.now(0), seg.at(-r, 0), seg.now(1), seg.at(-r, 1));
    };
    return spec;
}

ModelSpec build_chemostat(const Chemostat& chem)
{
    check_delay(chem.r);
    if (!(chem.a >= 0.0 && chem.a < 1.0))
        invalid("0 <= a < 1 violated");
    std::vector<UptakeFunction> uptake = chem.uptake;
    if (uptake.empty())
    {
        if (chem.m.size() == 0 || chem.m.size() != chem.k.size())
            throw Error(ErrorCode::DimensionMismatch, "Monod uptake needs matching m and k vectors");
        for (Eigen::Index i = 0; i < chem.m.size(); ++i)
        {
            if (!(chem.m(i) > 0.0) || !std::isfinite(chem.m(i)))
                invalid("m_i > 0 violated for m_" + std::to_string(i + 1));
            if (!(chem.k(i) > 0.0) || !std::isfinite(chem.k(i)))
                invalid("k_i > 0 violated for k_" + std::to_string(i + 1));
            const double m = chem.m(i);
            const double k = chem.k(i);
            uptake.push_back([m, k](double s) { return m * s / (k + s); });
        }
    }
    for (std::size_t i = 0; i < uptake.size(); ++i)
        if (uptake[i](0.0) != 0.0)
            invalid("p_i(0) = 0 violated for p_" + std::to_string(i + 1));

    const std::size_t species = uptake.size();
    ModelSpec spec = skeleton("Chemostat", species + 1, chem.r);
    spec.coordinate_names.push_back("S");
    for (std::size_t i = 0; i < species; ++i)
        spec.coordinate_names.push_back("x_" + std::to_string(i + 1));
    spec.kolmogorov[0] = false;
    spec.noise = make_noise(chem.gamma, species + 1);

    auto shared = std::make_shared<const std::vector<UptakeFunction>>(std::move(uptake));
    const double a = chem.a;
    const double r = chem.r;
    spec.affine = [shared, a, r](const SegmentView& seg, std::span<double> out) {
        const double s = seg.now(0);
        double consumed = 0.0;
        for (std::size_t i = 0; i < shared->size(); ++i)
            consumed += seg.now(i + 1) * (*shared)[i](s);
        out[0] = 1.0 + a * seg.at(-r, 0) - consumed;
        std::fill(out.begin() + 1, out.end(), 0.0);
    };
    spec.growth = [shared, r](const SegmentView& seg, std::span<double> out) {
        const double s_past = seg.at(-r, 0);
        out[0] = -1.0;
        for (std::size_t i = 0; i < shared->size(); ++i)
            out[i + 1] = (*shared)[i](s_past) - 1.0;
    };
    return spec;
}

void check_dimension(const ModelSpec& spec, const SegmentView& seg)
{
    if (seg.dim() != spec.n)
    {
        std::ostringstream msg;
        msg << "segment has dimension " << seg.dim() << ", model " << spec.name << " has " << spec.n;
        throw Error(ErrorCode::DimensionMismatch, msg.str());
    }
}

void check_finite(const Eigen::VectorXd& v, const char* what)
{
    if (!v.allFinite())
        throw Error(ErrorCode::NonFinite, std::string(what) + " is not finite");
}

} // namespace

bool ModelSpec::all_kolmogorov() const noexcept
{
    return std::all_of(kolmogorov.begin(), kolmogorov.end(), [](bool k) { return k; });
}

std::string catalog_name(const CatalogModel& catalog)
{
    static constexpr const char* names[] = {"LVCompetitive", "PredatorPrey3", "Replicator", "SIR", "Chemostat"};
    return names[catalog.index()];
}

ModelSpec build(const CatalogModel& catalog)
{
    return std::visit(
        [](const auto& model) -> ModelSpec {
            using T = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<T, LVCompetitive>)
                return build_lv(model);
            else if constexpr (std::is_same_v<T, PredatorPrey3>)
                return build_predator_prey(model);
            else if constexpr (std::is_same_v<T, Replicator>)
                return build_replicator(model);
            else if constexpr (std::is_same_v<T, SIR>)
                return build_sir(model);
            else
                return build_chemostat(model);
        },
        catalog);
}

ModelSpec restrict_to_face(const ModelSpec& spec, std::span<const std::size_t> keep)
{
    std::vector<std::size_t> kept(keep.begin(), keep.end());
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    if (!kept.empty() && kept.back() >= spec.n)
        throw Error(ErrorCode::OutOfRange, "face index exceeds the model dimension");

    auto index_of = std::make_shared<std::vector<std::size_t>>(spec.n, EmbeddedView::kPinned);
    for (std::size_t k = 0; k < kept.size(); ++k)
        (*index_of)[kept[k]] = k;
    for (std::size_t i = 0; i < spec.n; ++i)
    {
        if ((*index_of)[i] == EmbeddedView::kPinned && !spec.kolmogorov[i])
            throw Error(ErrorCode::NonExtinguishable,
                        "coordinate " + spec.coordinate_names[i] + " is affine and cannot be pinned to 0");
    }
    if (kept.size() == spec.n)
        return spec;

    auto parent = std::make_shared<const ModelSpec>(spec);
    auto rows = std::make_shared<const std::vector<std::size_t>>(kept);
    auto lift = [parent, index_of, rows](const VectorFunctional& fn) -> VectorFunctional {
        if (!fn)
            return {};
        return [parent, index_of, rows, fn](const SegmentView& seg, std::span<double> out) {
            const EmbeddedView full(seg, *index_of);
            Scratch values(parent->n);
            fn(full, values);
            for (std::size_t k = 0; k < rows->size(); ++k)
                out[k] = values[(*rows)[k]];
        };
    };

    ModelSpec face;
    face.name = spec.name;
    face.n = kept.size();
    face.r = spec.r;
    face.noise = spec.noise;
    face.delay_measures = spec.delay_measures;
    face.simplex_total = spec.simplex_total;
    face.root_n = spec.root_n;
    for (std::size_t i : kept)
    {
        face.coordinate_names.push_back(spec.coordinate_names[i]);
        face.kolmogorov.push_back(spec.kolmogorov[i]);
        face.noise_rows.push_back(spec.noise_rows[i]);
        face.root_index.push_back(spec.root_index[i]);
    }
    const bool any_affine = std::any_of(kept.begin(), kept.end(), [&](std::size_t i) { return !spec.kolmogorov[i]; });
    if (any_affine)
        face.affine = lift(spec.affine);
    face.growth = lift(spec.growth);
    face.diffusion = lift(spec.diffusion);
    if (spec.loading)
    {
        const LoadingFunctional fn = spec.loading;
        face.loading = [parent, index_of, rows, fn](const SegmentView& seg, Eigen::Ref<Eigen::MatrixXd> out) {
            const EmbeddedView full(seg, *index_of);
            Eigen::MatrixXd values(static_cast<Eigen::Index>(parent->n), out.cols());
            fn(full, values);
            for (std::size_t k = 0; k < rows->size(); ++k)
                out.row(static_cast<Eigen::Index>(k)) = values.row(static_cast<Eigen::Index>((*rows)[k]));
        };
    }
    return face;
}

std::vector<std::size_t> with_affine(const ModelSpec& spec, std::span<const std::size_t> species)
{
    std::vector<std::size_t> out(species.begin(), species.end());
    for (std::size_t i = 0; i < spec.n; ++i)
        if (!spec.kolmogorov[i])
            out.push_back(i);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::size_t> kolmogorov_coordinates(const ModelSpec& spec)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < spec.n; ++i)
        if (spec.kolmogorov[i])
            out.push_back(i);
    return out;
}

Eigen::VectorXd eval_growth(const ModelSpec& spec, const SegmentView& seg)
{
    check_dimension(spec, seg);
    Eigen::VectorXd f(static_cast<Eigen::Index>(spec.n));
    spec.growth(seg, std::span<double>(f.data(), spec.n));
    check_finite(f, "growth rate");
    return f;
}

Eigen::VectorXd eval_drift(const ModelSpec& spec, const SegmentView& seg)
{
    Eigen::VectorXd drift = eval_growth(spec, seg);
    for (std::size_t i = 0; i < spec.n; ++i)
        drift(static_cast<Eigen::Index>(i)) *= seg.now(i);
    if (spec.affine)
    {
        Eigen::VectorXd b(static_cast<Eigen::Index>(spec.n));
        spec.affine(seg, std::span<double>(b.data(), spec.n));
        drift += b;
    }
    check_finite(drift, "drift");
    return drift;
}

Eigen::VectorXd eval_diffusion(const ModelSpec& spec, const SegmentView& seg)
{
    check_dimension(spec, seg);
    Eigen::VectorXd g(static_cast<Eigen::Index>(spec.n));
    spec.diffusion(seg, std::span<double>(g.data(), spec.n));
    for (std::size_t i = 0; i < spec.n; ++i)
        g(static_cast<Eigen::Index>(i)) *= seg.now(i);
    check_finite(g, "diffusion");
    return g;
}

void eval_loading(const ModelSpec& spec, const SegmentView& seg, Eigen::Ref<Eigen::MatrixXd> out)
{
    if (spec.loading)
    {
        spec.loading(seg, out);
        return;
    }
    Scratch g(spec.n);
    spec.diffusion(seg, g);
    const Eigen::MatrixXd& gamma = spec.noise->gamma();
    for (std::size_t i = 0; i < spec.n; ++i)
    {
        const auto row = static_cast<Eigen::Index>(spec.noise_rows[i]);
        out.row(static_cast<Eigen::Index>(i)) = g[i] * gamma.col(row).transpose();
    }
}

Eigen::MatrixXd eval_noise_covariance(const ModelSpec& spec, const SegmentView& seg)
{
    check_dimension(spec, seg);
    Eigen::MatrixXd loading(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.noise_dimension()));
    eval_loading(spec, seg, loading);
    return loading * loading.transpose();
}

double invasion_integrand(const ModelSpec& spec, const SegmentView& seg, std::size_t i)
{
    check_dimension(spec, seg);
    Scratch f(spec.n);
    spec.growth(seg, f);
    double variance;
    if (spec.loading)
    {
        Eigen::MatrixXd loading(static_cast<Eigen::Index>(spec.n),
                                static_cast<Eigen::Index>(spec.noise_dimension()));
        spec.loading(seg, loading);
        variance = loading.row(static_cast<Eigen::Index>(i)).squaredNorm();
    }
    else
    {
        Scratch g(spec.n);
        spec.diffusion(seg, g);
        const auto row = static_cast<Eigen::Index>(spec.noise_rows[i]);
        variance = g[i] * g[i] * spec.noise->sigma()(row, row);
    }
    return f[i] - 0.5 * variance;
}

} // namespace sfk
