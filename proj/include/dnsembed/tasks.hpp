#pragma once

// Downstream classification (MDD / IRE), ROC/AUC evaluation and
// nearest-neighbour queries over learned embeddings.

#include "dnsembed/embed.hpp"
#include "dnsembed/graph.hpp"
#include "dnsembed/ingest.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dnsembed {

enum class Task { MDD, IRE };
enum class TaskMode { Downstream, Auxiliary };

const char* to_string(Task task);
const char* to_string(TaskMode mode);

struct Classifier {
    Vector weights;
    double bias = 0.0;
    Task trained_on = Task::MDD;
};

struct LrConfig {
    double learning_rate = 0.1;
    int iterations = 500;
};

/// Logistic regression by full-batch gradient descent on the mean
/// cross-entropy, starting from zero weights.
Classifier lr_train(const Matrix& features, std::span<const int> labels, const LrConfig& cfg,
                    Task task = Task::MDD);

/// Mean cross-entropy of the classifier on a labelled set.
double lr_loss(const Classifier& clf, const Matrix& features, std::span<const int> labels);

std::vector<double> lr_score(const Classifier& clf, const Matrix& features);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct EvalReport {
    Task task = Task::MDD;
    TaskMode mode = TaskMode::Downstream;
    std::vector<RocPoint> roc;
    double auc = 0.0;
    std::vector<std::size_t> rows; // catalog rows of the test entities
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<int> predictions; // score > 0.5
    std::size_t n_train = 0;
};

/// ROC with tied scores advanced together, AUC by the trapezoid rule.
/// Throws Degenerate when only one class is present.
EvalReport roc_auc(std::span<const double> scores, std::span<const int> labels);

struct Neighbor {
    std::size_t row = 0;
    std::string name;
    double distance = 0.0;
};

/// k closest entities (both types, excluding the query) by Euclidean distance
/// between embedding rows; ties keep catalog order. `names[i]` labels row i.
std::vector<Neighbor> nearest_neighbors(const Matrix& x, std::span<const std::string> names,
                                        std::string_view query, std::size_t k);
std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, const EntityCatalog& catalog,
                                        std::string_view query, std::size_t k);

/// Catalog rows belonging to a task's entity block.
std::vector<std::size_t> task_rows(const EntityCatalog& catalog, Task task);

/// Trains (downstream) or reuses (auxiliary) a classifier and evaluates it on
/// the task's test entities. `row_offset` is the model row of the task's first
/// entity; by default the joint layout (domains first, then IPs) is assumed.
EvalReport run_task(const EntityCatalog& catalog, const EmbeddingModel& model, Task task,
                    TaskMode mode, const LrConfig& lr = {},
                    std::optional<std::size_t> row_offset = std::nullopt);

void write_roc_csv(std::ostream& out, const EvalReport& report);
void write_predictions(std::ostream& out, const EntityCatalog& catalog, const EvalReport& report);

} // namespace dnsembed
