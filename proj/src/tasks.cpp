#include "dnsembed/tasks.hpp"

#include "dnsembed/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace dnsembed {

const char* to_string(Task task)
{
    return task == Task::MDD ? "MDD" : "IRE";
}

const char* to_string(TaskMode mode)
{
    return mode == TaskMode::Downstream ? "downstream" : "auxiliary";
}

Classifier lr_train(const Matrix& features, std::span<const int> labels, const LrConfig& cfg,
                    Task task)
{
    if (static_cast<Eigen::Index>(labels.size()) != features.rows())
        throw Error(ErrorKind::Input, "feature/label count mismatch");
    const auto positives = std::count(labels.begin(), labels.end(), 1);
    if (positives == 0 || positives == static_cast<long>(labels.size()))
        throw Error(ErrorKind::Degenerate,
                    std::string(to_string(task)) + ": training labels contain a single class");

    Classifier clf;
    clf.trained_on = task;
    clf.weights = Vector::Zero(features.cols());
    clf.bias = 0.0;

    const auto n = features.rows();
    Vector target(n);
    for (Eigen::Index i = 0; i < n; ++i)
        target(i) = labels[i];

    const double scale = 1.0 / static_cast<double>(n);
    for (int it = 0; it < cfg.iterations; ++it) {
        Vector err = (features * clf.weights).array() + clf.bias;
        for (Eigen::Index i = 0; i < n; ++i)
            err(i) = sigmoid(err(i)) - target(i);
        clf.weights -= cfg.learning_rate * scale * (features.transpose() * err);
        clf.bias -= cfg.learning_rate * scale * err.sum();
    }
    return clf;
}

double lr_loss(const Classifier& clf, const Matrix& features, std::span<const int> labels)
{
    const auto scores = lr_score(clf, features);
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double r = std::clamp(scores[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
        loss -= labels[i] ? std::log(r) : std::log(1.0 - r);
    }
    return loss / static_cast<double>(scores.size());
}

std::vector<double> lr_score(const Classifier& clf, const Matrix& features)
{
    if (features.cols() != clf.weights.size())
        throw Error(ErrorKind::Input, "feature dimension " + std::to_string(features.cols()) +
                                          " does not match classifier dimension " +
                                          std::to_string(clf.weights.size()));
    const Vector logits = (features * clf.weights).array() + clf.bias;
    std::vector<double> out(static_cast<std::size_t>(logits.size()));
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        out[i] = sigmoid(logits(i));
    return out;
}

EvalReport roc_auc(std::span<const double> scores, std::span<const int> labels)
{
    if (scores.size() != labels.size())
        throw Error(ErrorKind::Input, "score/label count mismatch");
    const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const auto neg = static_cast<double>(labels.size()) - pos;
    if (pos == 0 || neg == 0)
        throw Error(ErrorKind::Degenerate, "AUC is undefined when only one class is present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    EvalReport report;
    report.roc.push_back({0.0, 0.0});
    double tp = 0, fp = 0, area = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        double dtp = 0, dfp = 0;
        for (; k < order.size() && scores[order[k]] == s; ++k)
            (labels[order[k]] == 1 ? dtp : dfp) += 1;
        area += dfp * (2.0 * tp + dtp) / 2.0;
        tp += dtp;
        fp += dfp;
        report.roc.push_back({fp / neg, tp / pos});
    }
    report.auc = area / (pos * neg);
    report.scores.assign(scores.begin(), scores.end());
    report.labels.assign(labels.begin(), labels.end());
    report.predictions.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        report.predictions[i] = scores[i] > 0.5 ? 1 : 0;
    return report;
}

std::vector<Neighbor> nearest_neighbors(const Matrix& x, std::span<const std::string> names,
                                        std::string_view query, std::size_t k)
{
    if (k < 1)
        throw Error(ErrorKind::Config, "k must be >= 1");
    if (static_cast<Eigen::Index>(names.size()) != x.rows())
        throw Error(ErrorKind::Consistency, "name count does not match embedding rows");
    const auto it = std::find(names.begin(), names.end(), query);
    if (it == names.end())
        throw Error(ErrorKind::Lookup, "unknown entity '" + std::string(query) + "'");
    const auto q = static_cast<Eigen::Index>(it - names.begin());

    std::vector<Neighbor> all;
    all.reserve(names.size());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (i != q)
            all.push_back({static_cast<std::size_t>(i), names[i], (x.row(i) - x.row(q)).norm()});
    std::stable_sort(all.begin(), all.end(),
                     [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
    all.resize(std::min(k, all.size()));
    return all;
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, const EntityCatalog& catalog,
                                        std::string_view query, std::size_t k)
{
    std::vector<std::string> names;
    names.reserve(catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i)
        names.push_back(catalog.name(i));
    return nearest_neighbors(model.x, names, query, k);
}

std::vector<std::size_t> task_rows(const EntityCatalog& catalog, Task task)
{
    const std::size_t begin = task == Task::MDD ? 0 : catalog.n_domains();
    const std::size_t end = task == Task::MDD ? catalog.n_domains() : catalog.size();
    std::vector<std::size_t> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    return rows;
}

EvalReport run_task(const EntityCatalog& catalog, const EmbeddingModel& model, Task task,
                    TaskMode mode, const LrConfig& lr, std::optional<std::size_t> row_offset)
{
    if (catalog.train_mask.size() != catalog.size())
        throw Error(ErrorKind::Consistency, "catalog has no train/test split");

    const auto rows = task_rows(catalog, task);
    const std::size_t block_start = rows.empty() ? 0 : rows.front();
    const std::size_t offset = row_offset.value_or(block_start);
    if (offset + rows.size() > static_cast<std::size_t>(model.x.rows()))
        throw Error(ErrorKind::Consistency,
                    std::string(to_string(task)) + ": model rows do not cover the task's entities");
    auto model_row = [&](std::size_t catalog_row) {
        return static_cast<Eigen::Index>(offset + (catalog_row - block_start));
    };

    std::vector<std::size_t> train, test;
    for (auto r : rows)
        (catalog.is_train(r) ? train : test).push_back(r);

    std::vector<int> test_labels;
    for (auto r : test) {
        const auto l = catalog.label(r);
        if (!l)
            throw Error(ErrorKind::Consistency, "test entity '" + catalog.name(r) + "' has no label");
        test_labels.push_back(*l);
    }

    std::vector<double> scores;
    if (mode == TaskMode::Downstream) {
        Matrix features(static_cast<Eigen::Index>(train.size()), model.x.cols());
        std::vector<int> labels;
        for (std::size_t i = 0; i < train.size(); ++i) {
            features.row(static_cast<Eigen::Index>(i)) = model.x.row(model_row(train[i]));
            const auto l = catalog.label(train[i]);
            if (!l)
                throw Error(ErrorKind::Consistency,
                            "training entity '" + catalog.name(train[i]) + "' has no label");
            labels.push_back(*l);
        }
        Classifier clf;
        try {
            clf = lr_train(features, labels, lr, task);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(to_string(task)) + ": " + e.what());
        }
        Matrix test_features(static_cast<Eigen::Index>(test.size()), model.x.cols());
        for (std::size_t i = 0; i < test.size(); ++i)
            test_features.row(static_cast<Eigen::Index>(i)) = model.x.row(model_row(test[i]));
        scores = lr_score(clf, test_features);
    } else {
        std::vector<std::size_t> model_rows;
        for (auto r : test)
            model_rows.push_back(static_cast<std::size_t>(model_row(r)));
        scores = predict_with_auxiliary(model, model_rows);
    }

    EvalReport report;
    try {
        report = roc_auc(scores, test_labels);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(to_string(task)) + ": " + e.what());
    }
    report.task = task;
    report.mode = mode;
    report.rows = std::move(test);
    report.n_train = train.size();
    return report;
}

namespace {
std::string shortest(double v) // round-trips exactly
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}
} // namespace

void write_roc_csv(std::ostream& out, const EvalReport& report)
{
    out << "fpr,tpr\n";
    for (const auto& p : report.roc)
        out << shortest(p.fpr) << ',' << shortest(p.tpr) << '\n';
}

void write_predictions(std::ostream& out, const EntityCatalog& catalog, const EvalReport& report)
{
    for (std::size_t i = 0; i < report.rows.size(); ++i)
        out << catalog.name(report.rows[i]) << '\t' << shortest(report.scores[i]) << '\t'
            << report.labels[i] << '\t' << report.predictions[i] << '\n';
}

} // namespace dnsembed
