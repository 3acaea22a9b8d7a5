#include "dnsembed/synth.hpp"

#include "dnsembed/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

namespace dnsembed {

void SynthConfig::validate() const
{
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, "synth: " + what); };
    if (n_benign_domains < 2 || n_malicious_domains < 2) fail("need >= 2 domains per class");
    if (n_normal_ips < 2 || n_poor_ips < 2) fail("need >= 2 IP prefixes per class");
    if (n_infected_hosts < 2 || n_hosts - n_infected_hosts < 2) fail("need >= 2 hosts per class");
    if (n_normal_ips + n_poor_ips > 65536) fail("at most 65536 prefixes");
    if (!(intra_affinity > 0.0 && intra_affinity <= 1.0)) fail("intra_affinity must lie in (0,1]");
    if (!(noise >= 0.0 && noise < 1.0)) fail("noise must lie in [0,1)");
    if (!(intra_affinity > noise)) fail("intra_affinity must exceed noise");
    if (queries_per_host < 1) fail("queries_per_host must be >= 1");
    if (home_prefixes < 1) fail("home_prefixes must be >= 1");
    if (!(hosting_spread >= 0.0)) fail("hosting_spread must be >= 0");
    if (!(popularity_skew >= 0.0)) fail("popularity_skew must be >= 0");
    if (malware_families < 1 || malware_families > n_malicious_domains ||
        2 * malware_families > n_infected_hosts)
        fail("malware_families must lie in [1, min(malicious domains, infected hosts / 2)]");
    if (duration < 2 || start_time < 0) fail("bad time window");

    // Each domain is seeded by two hosts of its own class.
    const int clean = n_hosts - n_infected_hosts;
    const int benign_load = (2 * n_benign_domains + clean - 1) / clean;
    // smallest family pool seeds the largest family's domains
    const int family_hosts = n_infected_hosts / std::max(malware_families, 1);
    const int family_domains = (n_malicious_domains + malware_families - 1) / std::max(malware_families, 1);
    const int malicious_load = (2 * family_domains + family_hosts - 1) / std::max(family_hosts, 1);
    if (benign_load > queries_per_host || malicious_load > queries_per_host)
        fail("queries_per_host too small to give every domain two querying hosts");
}

namespace {

std::string domain_name(int k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "d%04d.com", k);
    return buf;
}

std::string host_name(int k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "h%03d", k);
    return buf;
}

std::uint32_t prefix_network(int j)
{
    return (10u << 24) | (static_cast<std::uint32_t>(j / 256) << 16) |
           (static_cast<std::uint32_t>(j % 256) << 8);
}

/// Birth times spread evenly across a class with a random order inside it.
std::vector<double> stratified_births(int count, double horizon, std::mt19937_64& rng)
{
    std::vector<int> rank(count);
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> births(count);
    for (int k = 0; k < count; ++k)
        births[k] = horizon * (rank[k] + unit(rng)) / count;
    return births;
}

} // namespace

SynthData generate(const SynthConfig& cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };

    const int nb = cfg.n_benign_domains, nm = cfg.n_malicious_domains;
    const int nn = cfg.n_normal_ips, np = cfg.n_poor_ips;
    const int n_domains = nb + nm, n_prefixes = nn + np;
    auto malicious = [&](int d) { return d >= nb; };
    auto poor = [&](int p) { return p >= nn; };

    // Home prefixes: round-robin over a shuffled class block so that every
    // prefix is home to at least one domain when there are enough slots.
    std::vector<std::vector<int>> homes(n_domains);
    const double stray_home = std::min(1.0, cfg.hosting_spread * cfg.noise);
    auto assign_homes = [&](int d_begin, int d_end, int p_begin, int p_end) {
        std::vector<int> block(p_end - p_begin);
        std::iota(block.begin(), block.end(), p_begin);
        std::shuffle(block.begin(), block.end(), rng);
        std::size_t cursor = 0;
        for (int d = d_begin; d < d_end; ++d)
            for (int t = 0; t < cfg.home_prefixes; ++t) {
                const int slot = block[cursor++ % block.size()];
                homes[d].push_back(unit(rng) < stray_home ? pick(n_prefixes) : slot);
            }
    };
    assign_homes(0, nb, 0, nn);
    assign_homes(nb, n_domains, nn, n_prefixes);

    const double horizon = 0.5 * static_cast<double>(cfg.duration);
    std::vector<double> domain_birth(n_domains), prefix_birth(n_prefixes);
    {
        auto b = stratified_births(nb, horizon, rng);
        auto m = stratified_births(nm, horizon, rng);
        std::copy(b.begin(), b.end(), domain_birth.begin());
        std::copy(m.begin(), m.end(), domain_birth.begin() + nb);
        auto n = stratified_births(nn, horizon, rng);
        auto p = stratified_births(np, horizon, rng);
        std::copy(n.begin(), n.end(), prefix_birth.begin());
        std::copy(p.begin(), p.end(), prefix_birth.begin() + nn);
    }

    std::vector<int> host_ids(cfg.n_hosts);
    std::iota(host_ids.begin(), host_ids.end(), 0);
    std::shuffle(host_ids.begin(), host_ids.end(), rng);
    std::vector<bool> infected(cfg.n_hosts, false);
    std::vector<int> infected_hosts(host_ids.begin(), host_ids.begin() + cfg.n_infected_hosts);
    std::vector<int> clean_hosts(host_ids.begin() + cfg.n_infected_hosts, host_ids.end());
    for (int h : infected_hosts)
        infected[h] = true;

    // Two seeding queries per domain from distinct hosts of its class.
    std::vector<std::vector<int>> forced(cfg.n_hosts);
    for (int d = 0; d < nb; ++d) {
        const auto sz = static_cast<int>(clean_hosts.size());
        forced[clean_hosts[(2 * d) % sz]].push_back(d);
        forced[clean_hosts[(2 * d + 1) % sz]].push_back(d);
    }

    // Popularity rank is a random permutation of each class.
    auto zipf = [&](int count) {
        std::vector<int> rank(count);
        std::iota(rank.begin(), rank.end(), 1);
        std::shuffle(rank.begin(), rank.end(), rng);
        std::vector<double> weight(count);
        for (int k = 0; k < count; ++k)
            weight[k] = std::pow(static_cast<double>(rank[k]), -cfg.popularity_skew);
        return std::discrete_distribution<int>(weight.begin(), weight.end());
    };
    auto benign_pop = zipf(nb);
    auto malicious_pop = zipf(nm);

    // Malware families: malicious domain k and the i-th infected host belong to
    // family k % F and i % F; each family gets its own popularity law.
    const int families = cfg.malware_families;
    std::vector<std::vector<int>> family_domains(families);
    for (int k = 0; k < nm; ++k)
        family_domains[k % families].push_back(nb + k);
    std::vector<int> host_family(cfg.n_hosts, -1);
    for (std::size_t i = 0; i < infected_hosts.size(); ++i)
        host_family[infected_hosts[i]] = static_cast<int>(i % families);
    std::vector<std::discrete_distribution<int>> family_pop;
    for (const auto& members : family_domains)
        family_pop.push_back(zipf(static_cast<int>(members.size())));
    for (int f = 0; f < families; ++f) {
        std::vector<int> pool;
        for (std::size_t i = f; i < infected_hosts.size(); i += families)
            pool.push_back(infected_hosts[i]);
        const auto sz = static_cast<int>(pool.size());
        for (std::size_t k = 0; k < family_domains[f].size(); ++k) {
            forced[pool[(2 * k) % sz]].push_back(family_domains[f][k]);
            forced[pool[(2 * k + 1) % sz]].push_back(family_domains[f][k]);
        }
    }

    struct Draft {
        double time;
        int host;
        int domain;
        int prefix;
        int sub;
        int octet;
    };
    std::vector<Draft> drafts;
    drafts.reserve(static_cast<std::size_t>(cfg.n_hosts) * cfg.queries_per_host);
    const double span = static_cast<double>(cfg.duration);

    for (int h = 0; h < cfg.n_hosts; ++h) {
        for (int q = 0; q < cfg.queries_per_host; ++q) {
            int d;
            if (q < static_cast<int>(forced[h].size())) {
                d = forced[h][q];
            } else {
                const bool own_class = unit(rng) < cfg.intra_affinity;
                const bool want_malicious = infected[h] ? own_class : !own_class;
                if (!want_malicious)
                    d = benign_pop(rng);
                else if (infected[h]) {
                    const int f = host_family[h];
                    d = family_domains[f][family_pop[f](rng)];
                } else
                    d = nb + malicious_pop(rng);
            }
            const int p = unit(rng) < cfg.noise
                              ? pick(n_prefixes)
                              : homes[d][pick(static_cast<int>(homes[d].size()))];
            const double earliest = std::max(domain_birth[d], prefix_birth[p]);
            const double t = earliest + unit(rng) * (span - earliest);
            drafts.push_back({t, h, d, p, pick(3), 1 + pick(254)});
        }
    }
    std::stable_sort(drafts.begin(), drafts.end(),
                     [](const Draft& a, const Draft& b) { return a.time < b.time; });

    SynthData out;
    out.suffixes = SuffixList({"com"});
    out.prefixes = PrefixTable(24);
    for (int p = 0; p < n_prefixes; ++p)
        out.prefixes.add(Cidr{prefix_network(p), 24});
    for (int d = 0; d < n_domains; ++d)
        out.domain_labels[domain_name(d)] = malicious(d) ? 1 : 0;

    std::vector<bool> prefix_seen(n_prefixes, false);
    std::vector<bool> domain_seen(n_domains, false);
    std::vector<std::int64_t> domain_first(n_domains, 0), prefix_first(n_prefixes, 0);
    std::vector<int> domain_order, prefix_order;
    for (const auto& dr : drafts) {
        const auto ts = cfg.start_time + static_cast<std::int64_t>(dr.time);
        const std::string ip = format_ipv4(prefix_network(dr.prefix) | static_cast<std::uint32_t>(dr.octet));
        out.log.records.push_back(
            {ts, host_name(dr.host), "w" + std::to_string(dr.sub) + "." + domain_name(dr.domain), ip});
        out.ip_labels[ip] = poor(dr.prefix) ? 1 : 0;
        if (!domain_seen[dr.domain]) {
            domain_seen[dr.domain] = true;
            domain_first[dr.domain] = ts;
            domain_order.push_back(dr.domain);
        }
        if (!prefix_seen[dr.prefix]) {
            prefix_seen[dr.prefix] = true;
            prefix_first[dr.prefix] = ts;
            prefix_order.push_back(dr.prefix);
        }
    }

    auto& cat = out.catalog;
    for (int d : domain_order) {
        cat.domains.push_back(domain_name(d));
        cat.domain_labels.push_back(malicious(d) ? 1 : 0);
        cat.first_seen.push_back(domain_first[d]);
    }
    for (int p : prefix_order) {
        cat.ips.push_back(Cidr{prefix_network(p), 24}.to_string());
        cat.ip_labels.push_back(poor(p) ? 1 : 0);
        cat.first_seen.push_back(prefix_first[p]);
    }
    std::vector<bool> host_seen(cfg.n_hosts, false);
    for (const auto& dr : drafts)
        if (!host_seen[dr.host]) {
            host_seen[dr.host] = true;
            cat.hosts.push_back(host_name(dr.host));
        }
    return out;
}

void write_synth(const SynthData& data, const std::string& dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorKind::Io, "cannot create '" + dir + "': " + ec.message());

    auto open = [&](const char* name) {
        std::ofstream f(fs::path(dir) / name);
        if (!f)
            throw Error(ErrorKind::Io, "cannot write '" + (fs::path(dir) / name).string() + "'");
        return f;
    };
    {
        auto f = open("log.tsv");
        f << "# timestamp\thost\tdomain\tip\n";
        write_passive_log(f, data.log);
    }
    {
        auto f = open("domain_labels.tsv");
        write_labels(f, data.domain_labels);
    }
    {
        auto f = open("ip_labels.tsv");
        write_labels(f, data.ip_labels);
    }
    {
        auto f = open("suffixes.txt");
        f << "com\n";
    }
    {
        auto f = open("prefixes.txt");
        for (const auto& c : data.prefixes.entries())
            f << c.to_string() << '\n';
    }
    open("popular.txt");
}

} // namespace dnsembed
