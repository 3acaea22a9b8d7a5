#pragma once

// Random-walk matrix factorization embeddings and the semi-supervised
// objective (factorization + auxiliary classifier + constraint regularizer).

#include "dnsembed/graph.hpp"
#include "dnsembed/ingest.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace dnsembed {

/// Truncated-log proximity matrix of a K-step random walk.
struct WalkMatrix {
    Matrix m;
    int order = 1;             // K
    double neg_samples = 1.0;  // b
    double volume = 0.0;       // w, sum of all degrees
};

/// M = log(max(m0, 1)) with m0 = (w / b) * (1/K sum_k (D^-1 A)^k) * D^-1.
/// Throws Degenerate naming the first zero-degree node.
WalkMatrix walk_matrix(const Matrix& adjacency, int order, double neg_samples);
inline WalkMatrix walk_matrix(const HeteroGraph& g, int order, double neg_samples)
{
    return walk_matrix(g.adjacency, order, neg_samples);
}

/// Indices of nodes with positive degree.
std::vector<Eigen::Index> connected_nodes(const Matrix& adjacency);

struct SvdResult {
    Matrix u;      // n x d, orthonormal columns
    Vector sigma;  // d, non-increasing
    Matrix v;      // n x d
};

/// Top-d singular triplets. Each u column is flipped so its largest-magnitude
/// entry is non-negative; v follows u.
SvdResult truncated_svd(const Matrix& m, int d);

struct EmbeddingModel {
    Matrix x;  // rows are entity embeddings
    Matrix y;  // context factors
    Vector clf_w;
    double clf_b = 0.0;
    bool has_classifier = false;

    int dim() const { return static_cast<int>(x.cols()); }
};

/// X = U sqrt(S), Y = V sqrt(S).
EmbeddingModel unsupervised_embed(const WalkMatrix& m, int d);

// ---------------------------------------------------------------------------
// Semi-supervised objective

/// Entries in {0, 0.5, 1}: must-link 1, cannot-link 0, any pair touching a
/// test entity 0.5, zero diagonal.
struct ConstraintMatrix {
    Matrix c;
};

ConstraintMatrix build_constraints(const EntityCatalog& catalog);

/// L = diag(row sums of C) - C.
Matrix laplacian(const ConstraintMatrix& c);

/// (1/2) sum_ij C_ij |X_i - X_j|^2, evaluated pairwise.
double regularization_loss(const Matrix& x, const ConstraintMatrix& c);

/// tr(X^T L X); equal to regularization_loss.
double regularization_trace(const Matrix& x, const Matrix& lap);

inline constexpr double kProbabilityClamp = 1e-12;

double sigmoid(double z);

/// Masked cross-entropy of sigma(X_i w + b) against labels.
double auxiliary_loss(const Matrix& x, const Vector& clf_w, double clf_b,
                      std::span<const double> labels, std::span<const double> mask);

/// Labels / mask vectors for the auxiliary classifier: mask 1 on labelled
/// training entities.
struct Supervision {
    std::vector<double> labels;
    std::vector<double> mask;
};

Supervision supervision_from(const EntityCatalog& catalog);

/// Everything the objective needs besides the model itself.
struct Objective {
    const WalkMatrix& walk;
    const ConstraintMatrix& constraints;
    const Matrix& lap;
    const Supervision& supervision;
    double alpha = 0.0;
    double beta = 0.0;
};

struct ObjectiveTerms {
    double factorization = 0.0;
    double auxiliary = 0.0;
    double regularization = 0.0;
    double total = 0.0;
};

ObjectiveTerms objective_terms(const EmbeddingModel& model, const Objective& obj);

/// |M - X Y^T|_F^2 + alpha * auxiliary + beta * regularization.
double total_objective(const EmbeddingModel& model, const Objective& obj);

struct Gradients {
    Matrix dx;
    Matrix dy;
    Vector dw;
    double db = 0.0;
};

Gradients gradients(const EmbeddingModel& model, const Objective& obj);

struct TrainConfig {
    int dim = 128;
    int order = 5;
    double neg_samples = 1.0;
    double alpha = 60.0;
    double beta = 1.0;
    double learning_rate = 0.5;
    int iterations = 100;
    std::uint64_t seed = 1;

    void validate() const;
};

struct FitResult {
    EmbeddingModel model;
    std::vector<double> trace; // objective before step 0, then after each step
};

/// Xavier-uniform initialization followed by full-batch gradient descent.
/// Throws Numeric when the objective stops being finite.
FitResult semi_fit(const WalkMatrix& walk, const ConstraintMatrix& constraints,
                   const Supervision& supervision, const TrainConfig& cfg);

EmbeddingModel xavier_init(Eigen::Index n, int d, std::uint64_t seed);

/// sigma(X_i w + b) for each requested row.
std::vector<double> predict_with_auxiliary(const EmbeddingModel& model,
                                           std::span<const std::size_t> rows);

// ---------------------------------------------------------------------------
// Export

/// "<entity>\t<D|I>\t<d floats>" with 9 significant digits.
void write_embeddings(std::ostream& out, const EntityCatalog& catalog, const Matrix& x,
                      std::size_t row_offset = 0);

struct EmbeddingTable {
    std::vector<std::string> names;
    std::vector<EntityType> types;
    Matrix x;
};

EmbeddingTable read_embeddings(std::istream& in);

/// Rounds every entry to the 9-significant-digit export precision.
Matrix quantize_for_export(const Matrix& x);

void write_loss_trace(std::ostream& out, std::span<const double> trace);

} // namespace dnsembed
