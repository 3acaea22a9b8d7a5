#pragma once

// Passive DNS ingestion: log parsing, e2LD / BGP-prefix aggregation,
// pruning, label derivation and the temporal train/test split.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dnsembed {

struct QueryRecord {
    std::int64_t timestamp = 0;
    std::string host;
    std::string domain;
    std::string ip;

    bool operator==(const QueryRecord&) const = default;
};

struct QueryLog {
    std::vector<QueryRecord> records;
    std::size_t skipped = 0; // malformed lines dropped by the parser
};

enum class Field { Timestamp, Host, Domain, Ip };

/// Column layout of a passive log. `position[f]` is the zero-based column
/// holding field `f`; other columns are ignored.
struct FieldOrder {
    char delimiter = '\t';
    std::array<std::size_t, 4> position{0, 1, 2, 3};

    /// Parses descriptors like "timestamp,host,domain,ip" or
    /// "ts,_,host,domain,ip" ("_" marks an ignored column).
    static FieldOrder parse(std::string_view descriptor, char delimiter = '\t');

    std::size_t min_columns() const;
};

/// Reads a passive log. Lines starting with '#' and blank lines are ignored.
/// Throws Format when more than half of the data lines are malformed.
QueryLog parse_passive_log(std::istream& in, const FieldOrder& order = {});
QueryLog load_passive_log(const std::string& path, const FieldOrder& order = {});
void write_passive_log(std::ostream& out, const QueryLog& log);

/// Lowercases and strips one trailing dot.
std::string normalize_domain(std::string_view name);

// ---------------------------------------------------------------------------
// Public suffixes

class SuffixList {
public:
    SuffixList() = default;
    explicit SuffixList(std::unordered_set<std::string> suffixes);

    static SuffixList load(std::istream& in);
    static SuffixList load(const std::string& path);

    bool contains(std::string_view suffix) const;
    std::size_t size() const { return suffixes_.size(); }

private:
    std::unordered_set<std::string> suffixes_;
};

/// Registrable domain: longest matching public suffix plus one label. When no
/// listed suffix matches, the last label acts as the suffix.
std::string extract_e2ld(std::string_view fqdn, const SuffixList& suffixes);

// ---------------------------------------------------------------------------
// IPv4 prefixes

std::optional<std::uint32_t> parse_ipv4(std::string_view text);
std::string format_ipv4(std::uint32_t address);

struct Cidr {
    std::uint32_t network = 0;
    int length = 32;

    static Cidr parse(std::string_view text);
    static std::optional<Cidr> try_parse(std::string_view text);
    bool contains(std::uint32_t address) const;
    std::string to_string() const;

    auto operator<=>(const Cidr&) const = default;
};

std::uint32_t mask_of(int length);

class PrefixTable {
public:
    explicit PrefixTable(int fallback_mask = 24);

    /// Adds a prefix; host bits are cleared. Masks outside [8,32] throw Config.
    void add(Cidr prefix);

    std::optional<Cidr> longest_match(std::uint32_t address) const;
    int fallback_mask() const { return fallback_mask_; }
    std::vector<Cidr> entries() const;
    bool empty() const { return count_ == 0; }

    static PrefixTable load(std::istream& in, int fallback_mask = 24);
    static PrefixTable load(const std::string& path, int fallback_mask = 24);

private:
    int fallback_mask_;
    std::size_t count_ = 0;
    std::array<std::unordered_set<std::uint32_t>, 33> by_length_;
};

/// Longest-prefix match of `ip`, or the address masked to the fallback length.
/// Input already in "a.b.c.d/len" form is returned in canonical form.
std::string extract_prefix(std::string_view ip, const PrefixTable& table);

/// Rewrites every record to e2LD / prefix granularity. Record count is kept.
QueryLog aggregate(const QueryLog& log, const SuffixList& suffixes, const PrefixTable& table);

// ---------------------------------------------------------------------------
// Labels

using LabelMap = std::map<std::string, int>;

/// Lines "<entity>\t<0|1>"; '#' comments allowed.
LabelMap load_labels(std::istream& in);
LabelMap load_labels(const std::string& path);
void write_labels(std::ostream& out, const LabelMap& labels);

/// One entry per line; used for the popular-domain list.
std::set<std::string> load_name_list(std::istream& in);
std::set<std::string> load_name_list(const std::string& path);

/// Strict-majority reputation of each prefix from its member IPs. Prefixes
/// with an exact 50/50 split get no label.
LabelMap derive_prefix_labels(const LabelMap& ip_labels, const PrefixTable& table);

// ---------------------------------------------------------------------------
// Entity catalog

enum class EntityType { Domain, Ip };

/// Domains occupy rows [0, N), IPs rows [N, N+M).
struct EntityCatalog {
    std::vector<std::string> domains;
    std::vector<std::string> ips;
    std::vector<std::string> hosts;
    std::vector<std::optional<int>> domain_labels;
    std::vector<std::optional<int>> ip_labels;
    std::vector<bool> train_mask;          // N+M, empty until split
    std::vector<std::int64_t> first_seen;  // N+M

    std::size_t n_domains() const { return domains.size(); }
    std::size_t n_ips() const { return ips.size(); }
    std::size_t size() const { return domains.size() + ips.size(); }

    EntityType type(std::size_t row) const;
    const std::string& name(std::size_t row) const;
    std::optional<int> label(std::size_t row) const;
    bool is_train(std::size_t row) const;
};

/// Name -> row lookup over a catalog. Rows follow the catalog convention.
class CatalogIndex {
public:
    explicit CatalogIndex(const EntityCatalog& catalog);

    std::optional<std::size_t> domain(std::string_view name) const;
    std::optional<std::size_t> ip(std::string_view name) const; // returns N + j
    std::optional<std::size_t> host(std::string_view name) const;
    std::optional<std::size_t> entity(std::string_view name) const;

private:
    std::unordered_map<std::string, std::size_t> domains_;
    std::unordered_map<std::string, std::size_t> ips_;
    std::unordered_map<std::string, std::size_t> hosts_;
};

struct PrunedData {
    QueryLog log;
    EntityCatalog catalog;
};

/// Drops popular, over-shared (> 50% of hosts), rare (< 2 hosts) and
/// unlabeled domains plus unlabeled IPs, then indexes what remains in order of
/// first appearance. Host counts come from the full aggregated log.
PrunedData prune_and_label(const QueryLog& log, const LabelMap& domain_labels,
                           const LabelMap& ip_labels, const std::set<std::string>& popular);

/// Marks the earliest ceil(fraction * count) domains and, independently, IPs
/// as training entities. Ties in first_seen keep catalog order.
EntityCatalog temporal_split(const EntityCatalog& catalog, double fraction);

} // namespace dnsembed
