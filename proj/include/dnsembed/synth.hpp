#pragma once

// Synthetic passive DNS logs with planted benign/malicious structure.
//
// Infected hosts mostly query malicious domains, clean hosts mostly benign
// ones. Every domain owns a few "home" prefixes inside its own reputation
// block and resolves there unless a noise draw sends the query to a uniformly
// chosen prefix. Entities are born at class-interleaved times so the temporal
// split leaves both classes in the test set.

#include "dnsembed/ingest.hpp"

#include <cstdint>
#include <string>

namespace dnsembed {

struct SynthConfig {
    int n_benign_domains = 160;
    int n_malicious_domains = 40;
    int n_normal_ips = 90;
    int n_poor_ips = 30;
    int n_hosts = 300;
    int n_infected_hosts = 60;
    double intra_affinity = 0.9;  // P(query stays in the host's own class)
    double noise = 0.1;           // P(resolution leaves the domain's home prefixes)
    int queries_per_host = 50;
    int home_prefixes = 2;        // home prefixes per domain
    double hosting_spread = 3.0;  // a home prefix is drawn from all prefixes w.p. min(1, spread * noise)
    double popularity_skew = 0.0; // Zipf exponent of domain popularity within a class
    int malware_families = 20;    // infected hosts query only their family's domains
    std::uint64_t seed = 1;
    std::int64_t start_time = 1551398400;
    std::int64_t duration = 86400;

    /// Also checks that every domain can be seeded with two distinct hosts.
    void validate() const;
};

struct SynthData {
    QueryLog log;            // raw FQDNs and host addresses, time ordered
    SuffixList suffixes;
    PrefixTable prefixes;
    LabelMap domain_labels;  // keyed by e2LD
    LabelMap ip_labels;      // keyed by raw IP
    EntityCatalog catalog;   // aggregated entities that occur in the log, all labelled
};

SynthData generate(const SynthConfig& cfg);

/// Writes log.tsv, domain_labels.tsv, ip_labels.tsv, suffixes.txt,
/// prefixes.txt and an empty popular.txt into `dir`.
void write_synth(const SynthData& data, const std::string& dir);

} // namespace dnsembed
