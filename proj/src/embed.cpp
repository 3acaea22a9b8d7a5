#include "dnsembed/embed.hpp"

#include "dnsembed/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace dnsembed {

WalkMatrix walk_matrix(const Matrix& adjacency, int order, double neg_samples)
{
    if (order < 1)
        throw Error(ErrorKind::Config, "walk order K must be >= 1");
    if (!(neg_samples > 0.0))
        throw Error(ErrorKind::Config, "negative sample count b must be > 0");
    if (adjacency.rows() != adjacency.cols())
        throw Error(ErrorKind::Consistency, "adjacency matrix is not square");

    const Vector degree = adjacency.rowwise().sum();
    for (Eigen::Index i = 0; i < degree.size(); ++i)
        if (!(degree(i) > 0.0))
            throw Error(ErrorKind::Degenerate,
                        "node " + std::to_string(i) + " has zero degree; drop isolated nodes first");

    const double volume = degree.sum();
    const Vector inv_degree = degree.cwiseInverse();
    const Matrix transition = inv_degree.asDiagonal() * adjacency;

    Matrix power = transition;
    Matrix sum = transition;
    for (int k = 2; k <= order; ++k) {
        power = power * transition;
        sum += power;
    }

    WalkMatrix out;
    out.order = order;
    out.neg_samples = neg_samples;
    out.volume = volume;
    const double scale = volume / (neg_samples * order);
    out.m = (scale * sum) * inv_degree.asDiagonal();
    out.m = out.m.unaryExpr([](double v) { return std::log(std::max(v, 1.0)); });
    return out;
}

std::vector<Eigen::Index> connected_nodes(const Matrix& adjacency)
{
    std::vector<Eigen::Index> keep;
    const Vector degree = adjacency.rowwise().sum();
    for (Eigen::Index i = 0; i < degree.size(); ++i)
        if (degree(i) > 0.0)
            keep.push_back(i);
    return keep;
}

SvdResult truncated_svd(const Matrix& m, int d)
{
    const auto n = std::min(m.rows(), m.cols());
    if (d < 1 || d > n)
        throw Error(ErrorKind::Config,
                    "embedding dimension " + std::to_string(d) + " outside [1, " + std::to_string(n) + "]");
    if (!m.allFinite())
        throw Error(ErrorKind::Numeric, "matrix to factorize has non-finite entries");

    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw Error(ErrorKind::Numeric, "SVD did not converge");

    SvdResult out;
    out.u = svd.matrixU().leftCols(d);
    out.v = svd.matrixV().leftCols(d);
    out.sigma = svd.singularValues().head(d);
    for (int k = 0; k < d; ++k) {
        Eigen::Index arg = 0;
        out.u.col(k).cwiseAbs().maxCoeff(&arg);
        if (out.u(arg, k) < 0.0) {
            out.u.col(k) *= -1.0;
            out.v.col(k) *= -1.0;
        }
    }
    return out;
}

EmbeddingModel unsupervised_embed(const WalkMatrix& m, int d)
{
    const auto svd = truncated_svd(m.m, d);
    const Vector root = svd.sigma.cwiseSqrt();
    EmbeddingModel model;
    model.x = svd.u * root.asDiagonal();
    model.y = svd.v * root.asDiagonal();
    return model;
}

// ---------------------------------------------------------------------------

ConstraintMatrix build_constraints(const EntityCatalog& catalog)
{
    const auto n = static_cast<Eigen::Index>(catalog.size());
    if (catalog.train_mask.size() != catalog.size())
        throw Error(ErrorKind::Consistency, "catalog has no train/test split");

    std::vector<int> label(catalog.size(), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!catalog.train_mask[i])
            continue;
        const auto l = catalog.label(i);
        if (!l)
            throw Error(ErrorKind::Consistency,
                        "training entity '" + catalog.name(i) + "' has no label");
        label[i] = *l;
    }

    // Benign domains pair with normal IPs and malicious with poor, so a single
    // label comparison covers both same-type and cross-type pairs.
    ConstraintMatrix out;
    out.c.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i == j)
                out.c(i, j) = 0.0;
            else if (label[i] < 0 || label[j] < 0)
                out.c(i, j) = 0.5;
            else
                out.c(i, j) = label[i] == label[j] ? 1.0 : 0.0;
        }
    }
    return out;
}

Matrix laplacian(const ConstraintMatrix& c)
{
    Matrix lap = -c.c;
    lap.diagonal() += c.c.rowwise().sum();
    return lap;
}

double regularization_loss(const Matrix& x, const ConstraintMatrix& c)
{
    const auto n = x.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (c.c(i, j) != 0.0)
                total += c.c(i, j) * (x.row(i) - x.row(j)).squaredNorm();
    return 0.5 * total;
}

double regularization_trace(const Matrix& x, const Matrix& lap)
{
    return (x.transpose() * lap * x).trace();
}

double sigmoid(double z)
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double auxiliary_loss(const Matrix& x, const Vector& clf_w, double clf_b,
                      std::span<const double> labels, std::span<const double> mask)
{
    const Vector logits = (x * clf_w).array() + clf_b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (mask[i] == 0.0)
            continue;
        const double r = std::clamp(sigmoid(logits(i)), kProbabilityClamp, 1.0 - kProbabilityClamp);
        loss -= mask[i] * (labels[i] * std::log(r) + (1.0 - labels[i]) * std::log(1.0 - r));
    }
    return loss;
}

Supervision supervision_from(const EntityCatalog& catalog)
{
    Supervision s;
    s.labels.assign(catalog.size(), 0.0);
    s.mask.assign(catalog.size(), 0.0);
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto l = catalog.label(i);
        if (l)
            s.labels[i] = *l;
        if (catalog.is_train(i) && l)
            s.mask[i] = 1.0;
    }
    return s;
}

ObjectiveTerms objective_terms(const EmbeddingModel& model, const Objective& obj)
{
    ObjectiveTerms t;
    t.factorization = (obj.walk.m - model.x * model.y.transpose()).squaredNorm();
    if (obj.alpha != 0.0)
        t.auxiliary = auxiliary_loss(model.x, model.clf_w, model.clf_b, obj.supervision.labels,
                                     obj.supervision.mask);
    if (obj.beta != 0.0)
        t.regularization = regularization_trace(model.x, obj.lap);
    t.total = t.factorization + obj.alpha * t.auxiliary + obj.beta * t.regularization;
    return t;
}

double total_objective(const EmbeddingModel& model, const Objective& obj)
{
    return objective_terms(model, obj).total;
}

Gradients gradients(const EmbeddingModel& model, const Objective& obj)
{
    const Matrix residual = model.x * model.y.transpose() - obj.walk.m;
    Gradients g;
    g.dx = 2.0 * residual * model.y;
    g.dy = 2.0 * residual.transpose() * model.x;
    g.dw = Vector::Zero(model.x.cols());
    g.db = 0.0;

    if (obj.beta != 0.0)
        g.dx.noalias() += (2.0 * obj.beta) * (obj.lap * model.x);

    if (obj.alpha != 0.0) {
        const Vector logits = (model.x * model.clf_w).array() + model.clf_b;
        Vector err(model.x.rows());
        for (Eigen::Index i = 0; i < err.size(); ++i)
            err(i) = obj.supervision.mask[i] * (sigmoid(logits(i)) - obj.supervision.labels[i]);
        g.dx.noalias() += obj.alpha * err * model.clf_w.transpose();
        g.dw = obj.alpha * (model.x.transpose() * err);
        g.db = obj.alpha * err.sum();
    }
    return g;
}

void TrainConfig::validate() const
{
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, what); };
    if (dim < 1) fail("dim must be >= 1");
    if (order < 1) fail("order must be >= 1");
    if (!(neg_samples > 0.0)) fail("neg_samples must be > 0");
    if (!(alpha >= 0.0)) fail("alpha must be >= 0");
    if (!(beta >= 0.0)) fail("beta must be >= 0");
    if (!(learning_rate >= 0.0)) fail("learning rate must be >= 0");
    if (iterations < 1) fail("iterations must be >= 1");
}

EmbeddingModel xavier_init(Eigen::Index n, int d, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto fill = [&](Matrix& m, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = dist(rng);
    };
    EmbeddingModel model;
    const double bound = std::sqrt(6.0 / static_cast<double>(n + d));
    model.x.resize(n, d);
    model.y.resize(n, d);
    fill(model.x, bound);
    fill(model.y, bound);
    Matrix w(d, 1);
    fill(w, std::sqrt(6.0 / (d + 1.0)));
    model.clf_w = w.col(0);
    model.clf_b = 0.0;
    model.has_classifier = true;
    return model;
}

FitResult semi_fit(const WalkMatrix& walk, const ConstraintMatrix& constraints,
                   const Supervision& supervision, const TrainConfig& cfg)
{
    cfg.validate();
    const auto n = walk.m.rows();
    if (cfg.dim > n)
        throw Error(ErrorKind::Config, "dim exceeds the number of nodes");
    if (constraints.c.rows() != n || static_cast<Eigen::Index>(supervision.labels.size()) != n ||
        static_cast<Eigen::Index>(supervision.mask.size()) != n)
        throw Error(ErrorKind::Consistency, "objective inputs disagree on the node count");

    const Matrix lap = laplacian(constraints);
    const Objective obj{walk, constraints, lap, supervision, cfg.alpha, cfg.beta};

    FitResult out;
    out.model = xavier_init(n, cfg.dim, cfg.seed);
    out.trace.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
    out.trace.push_back(total_objective(out.model, obj));

    // Descend on the per-node average of the objective so one learning rate
    // works across graph sizes.
    const double step = cfg.learning_rate / static_cast<double>(n);
    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto g = gradients(out.model, obj);
        out.model.x -= step * g.dx;
        out.model.y -= step * g.dy;
        out.model.clf_w -= step * g.dw;
        out.model.clf_b -= step * g.db;
        const double value = total_objective(out.model, obj);
        if (!std::isfinite(value))
            throw Error(ErrorKind::Numeric,
                        "objective diverged at iteration " + std::to_string(it));
        out.trace.push_back(value);
    }
    return out;
}

std::vector<double> predict_with_auxiliary(const EmbeddingModel& model,
                                           std::span<const std::size_t> rows)
{
    if (!model.has_classifier || model.clf_w.size() != model.x.cols())
        throw Error(ErrorKind::State, "model has no auxiliary classifier");
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) {
        if (static_cast<Eigen::Index>(r) >= model.x.rows())
            throw Error(ErrorKind::Lookup, "row " + std::to_string(r) + " outside the model");
        out.push_back(sigmoid(model.x.row(static_cast<Eigen::Index>(r)).dot(model.clf_w) + model.clf_b));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {
std::string format_value(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}
} // namespace

Matrix quantize_for_export(const Matrix& x)
{
    return x.unaryExpr([](double v) { return std::strtod(format_value(v).c_str(), nullptr); });
}

void write_embeddings(std::ostream& out, const EntityCatalog& catalog, const Matrix& x,
                      std::size_t row_offset)
{
    if (row_offset + static_cast<std::size_t>(x.rows()) > catalog.size())
        throw Error(ErrorKind::Consistency, "embedding rows exceed the catalog");
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto row = row_offset + static_cast<std::size_t>(i);
        out << catalog.name(row) << '\t' << (catalog.type(row) == EntityType::Domain ? 'D' : 'I') << '\t';
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            if (k)
                out << ' ';
            out << format_value(x(i, k));
        }
        out << '\n';
    }
}

EmbeddingTable read_embeddings(std::istream& in)
{
    EmbeddingTable table;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#')
            continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || t2 != t1 + 2 || (line[t1 + 1] != 'D' && line[t1 + 1] != 'I'))
            throw Error(ErrorKind::Format, "embedding line " + std::to_string(lineno) + " is malformed");
        table.names.push_back(line.substr(0, t1));
        table.types.push_back(line[t1 + 1] == 'D' ? EntityType::Domain : EntityType::Ip);
        std::istringstream values(line.substr(t2 + 1));
        std::vector<double> row;
        double v;
        while (values >> v)
            row.push_back(v);
        if (!values.eof() || row.empty() || (!rows.empty() && row.size() != rows.front().size()))
            throw Error(ErrorKind::Format, "embedding line " + std::to_string(lineno) + " has bad values");
        rows.push_back(std::move(row));
    }
    const auto d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    table.x.resize(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Eigen::Index k = 0; k < d; ++k)
            table.x(static_cast<Eigen::Index>(i), k) = rows[i][k];
    return table;
}

void write_loss_trace(std::ostream& out, std::span<const double> trace)
{
    out << "iteration,objective\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", trace[i]);
        out << i << ',' << buf << '\n';
    }
}

} // namespace dnsembed
