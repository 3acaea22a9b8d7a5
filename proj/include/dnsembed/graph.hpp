#pragma once

// Heterogeneous domain/IP graphs built from an aggregated, pruned query log.

#include "dnsembed/ingest.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <utility>

namespace dnsembed {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Query counts between domain i (row) and IP j (column).
struct BipartiteCounts {
    CountMatrix counts;
};

enum class GraphKind { Passive, Enhanced, DomainOnly, IpOnly };

const char* to_string(GraphKind kind);

struct HeteroGraph {
    Matrix adjacency;
    GraphKind kind = GraphKind::Passive;

    Eigen::Index size() const { return adjacency.rows(); }
};

/// Jaccard one-mode projections. s_dh / s_di are N x N over domains,
/// s_ih / s_id are M x M over IPs.
struct SimilarityPack {
    Matrix s_dh; // shared querying hosts
    Matrix s_di; // shared resolved IPs
    Matrix s_ih; // shared hosts receiving the IP
    Matrix s_id; // shared domains resolving to the IP
};

BipartiteCounts build_bipartite(const QueryLog& log, const EntityCatalog& catalog);

/// Divides by the largest count. Throws Degenerate on an all-zero matrix.
Matrix normalize_bipartite(const BipartiteCounts& b);

/// [[0, B], [B^T, 0]] with square zero blocks.
HeteroGraph build_passive_graph(const Matrix& b_hat);

/// Jaccard over per-entity sets given as a 0/1 incidence matrix (one row per
/// entity). Two empty sets have similarity 0.
Matrix jaccard_rows(const Matrix& incidence);

std::pair<Matrix, Matrix> domain_similarities(const QueryLog& log, const EntityCatalog& catalog);
std::pair<Matrix, Matrix> ip_similarities(const QueryLog& log, const EntityCatalog& catalog);
SimilarityPack similarities(const QueryLog& log, const EntityCatalog& catalog);

/// [[(S_DH + S_DI)/2, B], [B^T, (S_IH + S_ID)/2]].
HeteroGraph build_enhanced_graph(const Matrix& b_hat, const SimilarityPack& sims);

/// Standalone domain-similarity or IP-similarity graph.
HeteroGraph ablation_graph(const SimilarityPack& sims, GraphKind which);

/// Writes every non-zero entry as "<i>\t<j>\t<weight>", both directions.
void write_edge_list(std::ostream& out, const HeteroGraph& g);

} // namespace dnsembed
