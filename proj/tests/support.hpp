#pragma once

// Small random generators shared by the unit and acceptance tests.

#include "dnsembed/graph.hpp"
#include "dnsembed/ingest.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace testing {

struct Rng {
    std::mt19937_64 engine;

    explicit Rng(std::uint64_t seed) : engine(seed) {}

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine); }
    double uniform(double lo = 0.0, double hi = 1.0)
    {
        return std::uniform_real_distribution<double>(lo, hi)(engine);
    }
    bool chance(double p) { return uniform() < p; }
};

inline std::string domain_name(int i) { return "d" + std::to_string(i) + ".com"; }
inline std::string prefix_name(int j) { return "10.0." + std::to_string(j) + ".0/24"; }
inline std::string host_name(int k) { return "h" + std::to_string(k); }

/// Aggregated-style log over fixed name pools. Every domain and prefix gets at
/// least one record so a catalog can index all of them.
inline dnsembed::QueryLog random_log(Rng& rng, int n_domains, int n_ips, int n_hosts, int extra)
{
    dnsembed::QueryLog log;
    auto add = [&](int d, int p) {
        log.records.push_back({rng.integer(0, 1000), host_name(rng.integer(0, n_hosts - 1)),
                               domain_name(d), prefix_name(p)});
    };
    for (int d = 0; d < n_domains; ++d)
        add(d, rng.integer(0, n_ips - 1));
    for (int p = 0; p < n_ips; ++p)
        add(rng.integer(0, n_domains - 1), p);
    for (int e = 0; e < extra; ++e)
        add(rng.integer(0, n_domains - 1), rng.integer(0, n_ips - 1));
    std::shuffle(log.records.begin(), log.records.end(), rng.engine);
    return log;
}

/// Catalog with domains / prefixes / hosts in index order and random labels.
inline dnsembed::EntityCatalog catalog_for(Rng& rng, int n_domains, int n_ips, int n_hosts)
{
    dnsembed::EntityCatalog cat;
    for (int d = 0; d < n_domains; ++d) {
        cat.domains.push_back(domain_name(d));
        cat.domain_labels.push_back(rng.integer(0, 1));
    }
    for (int p = 0; p < n_ips; ++p) {
        cat.ips.push_back(prefix_name(p));
        cat.ip_labels.push_back(rng.integer(0, 1));
    }
    for (int h = 0; h < n_hosts; ++h)
        cat.hosts.push_back(host_name(h));
    cat.first_seen.assign(cat.size(), 0);
    return cat;
}

inline dnsembed::Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0)
{
    dnsembed::Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = rng.uniform(lo, hi);
    return m;
}

/// Symmetric non-negative adjacency with every node connected (a ring plus
/// random extra edges), zero diagonal.
inline dnsembed::Matrix random_graph(Rng& rng, int n, double density = 0.4)
{
    dnsembed::Matrix a = dnsembed::Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        if (j != i)
            a(i, j) = a(j, i) = rng.uniform(0.1, 1.0);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.chance(density))
                a(i, j) = a(j, i) = rng.uniform(0.0, 1.0);
    return a;
}

} // namespace testing
