#include "dnsembed/graph.hpp"

#include "dnsembed/error.hpp"

#include <iomanip>
#include <ostream>

namespace dnsembed {

const char* to_string(GraphKind kind)
{
    switch (kind) {
    case GraphKind::Passive: return "passive";
    case GraphKind::Enhanced: return "enhanced";
    case GraphKind::DomainOnly: return "domain_only";
    case GraphKind::IpOnly: return "ip_only";
    }
    return "unknown";
}

namespace {

struct ResolvedRecord {
    Eigen::Index domain;
    Eigen::Index ip;
    Eigen::Index host;
};

std::vector<ResolvedRecord> resolve(const QueryLog& log, const EntityCatalog& catalog,
                                    bool need_hosts)
{
    const CatalogIndex index(catalog);
    const auto n = static_cast<Eigen::Index>(catalog.n_domains());
    std::vector<ResolvedRecord> out;
    out.reserve(log.records.size());
    for (const auto& r : log.records) {
        auto d = index.domain(r.domain);
        auto q = index.ip(r.ip);
        if (!d || !q)
            throw Error(ErrorKind::Consistency,
                        "record (" + r.domain + ", " + r.ip + ") references an entity missing from the catalog");
        Eigen::Index h = -1;
        if (need_hosts) {
            auto hi = index.host(r.host);
            if (!hi)
                throw Error(ErrorKind::Consistency, "host '" + r.host + "' missing from the catalog");
            h = static_cast<Eigen::Index>(*hi);
        }
        out.push_back({static_cast<Eigen::Index>(*d), static_cast<Eigen::Index>(*q) - n, h});
    }
    return out;
}

} // namespace

BipartiteCounts build_bipartite(const QueryLog& log, const EntityCatalog& catalog)
{
    BipartiteCounts b;
    b.counts = CountMatrix::Zero(static_cast<Eigen::Index>(catalog.n_domains()),
                                 static_cast<Eigen::Index>(catalog.n_ips()));
    for (const auto& r : resolve(log, catalog, false))
        ++b.counts(r.domain, r.ip);
    return b;
}

Matrix normalize_bipartite(const BipartiteCounts& b)
{
    const std::int64_t max = b.counts.size() == 0 ? 0 : b.counts.maxCoeff();
    if (max <= 0)
        throw Error(ErrorKind::Degenerate, "bipartite count matrix has no positive entry");
    return b.counts.cast<double>() / static_cast<double>(max);
}

HeteroGraph build_passive_graph(const Matrix& b_hat)
{
    const auto n = b_hat.rows();
    const auto m = b_hat.cols();
    HeteroGraph g;
    g.kind = GraphKind::Passive;
    g.adjacency = Matrix::Zero(n + m, n + m);
    g.adjacency.topRightCorner(n, m) = b_hat;
    g.adjacency.bottomLeftCorner(m, n) = b_hat.transpose();
    return g;
}

Matrix jaccard_rows(const Matrix& incidence)
{
    // Intersections are exact small integers in double precision.
    const Matrix inter = incidence * incidence.transpose();
    const Vector sizes = incidence.rowwise().sum();
    const auto n = incidence.rows();
    Matrix out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double uni = sizes(i) + sizes(j) - inter(i, j);
            out(i, j) = uni > 0.0 ? inter(i, j) / uni : 0.0;
        }
    }
    return out;
}

std::pair<Matrix, Matrix> domain_similarities(const QueryLog& log, const EntityCatalog& catalog)
{
    const auto n = static_cast<Eigen::Index>(catalog.n_domains());
    const auto m = static_cast<Eigen::Index>(catalog.n_ips());
    const auto h = static_cast<Eigen::Index>(catalog.hosts.size());
    Matrix hosts = Matrix::Zero(n, h);
    Matrix ips = Matrix::Zero(n, m);
    for (const auto& r : resolve(log, catalog, true)) {
        hosts(r.domain, r.host) = 1.0;
        ips(r.domain, r.ip) = 1.0;
    }
    return {jaccard_rows(hosts), jaccard_rows(ips)};
}

std::pair<Matrix, Matrix> ip_similarities(const QueryLog& log, const EntityCatalog& catalog)
{
    const auto n = static_cast<Eigen::Index>(catalog.n_domains());
    const auto m = static_cast<Eigen::Index>(catalog.n_ips());
    const auto h = static_cast<Eigen::Index>(catalog.hosts.size());
    Matrix hosts = Matrix::Zero(m, h);
    Matrix domains = Matrix::Zero(m, n);
    for (const auto& r : resolve(log, catalog, true)) {
        hosts(r.ip, r.host) = 1.0;
        domains(r.ip, r.domain) = 1.0;
    }
    return {jaccard_rows(hosts), jaccard_rows(domains)};
}

SimilarityPack similarities(const QueryLog& log, const EntityCatalog& catalog)
{
    SimilarityPack s;
    std::tie(s.s_dh, s.s_di) = domain_similarities(log, catalog);
    std::tie(s.s_ih, s.s_id) = ip_similarities(log, catalog);
    return s;
}

HeteroGraph build_enhanced_graph(const Matrix& b_hat, const SimilarityPack& sims)
{
    const auto n = b_hat.rows();
    const auto m = b_hat.cols();
    if (sims.s_dh.rows() != n || sims.s_dh.cols() != n || sims.s_di.rows() != n ||
        sims.s_di.cols() != n || sims.s_ih.rows() != m || sims.s_ih.cols() != m ||
        sims.s_id.rows() != m || sims.s_id.cols() != m)
        throw Error(ErrorKind::Consistency, "similarity matrices do not match the bipartite shape");

    HeteroGraph g = build_passive_graph(b_hat);
    g.kind = GraphKind::Enhanced;
    g.adjacency.topLeftCorner(n, n) = (sims.s_dh + sims.s_di) / 2.0;
    g.adjacency.bottomRightCorner(m, m) = (sims.s_ih + sims.s_id) / 2.0;
    return g;
}

HeteroGraph ablation_graph(const SimilarityPack& sims, GraphKind which)
{
    HeteroGraph g;
    g.kind = which;
    if (which == GraphKind::DomainOnly)
        g.adjacency = (sims.s_dh + sims.s_di) / 2.0;
    else if (which == GraphKind::IpOnly)
        g.adjacency = (sims.s_ih + sims.s_id) / 2.0;
    else
        throw Error(ErrorKind::Config, "ablation graph must be domain_only or ip_only");
    return g;
}

void write_edge_list(std::ostream& out, const HeteroGraph& g)
{
    const auto& a = g.adjacency;
    out << std::setprecision(9);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0.0)
                out << i << '\t' << j << '\t' << a(i, j) << '\n';
}

} // namespace dnsembed
