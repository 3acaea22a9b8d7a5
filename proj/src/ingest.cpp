#include "dnsembed/ingest.hpp"

#include "dnsembed/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dnsembed {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char delimiter)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    return in;
}

bool skippable(std::string_view line)
{
    line = trim(line);
    return line.empty() || line.front() == '#';
}

template <typename T>
std::optional<T> parse_number(std::string_view text)
{
    T value{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        return std::nullopt;
    return value;
}

} // namespace

// ---------------------------------------------------------------------------

FieldOrder FieldOrder::parse(std::string_view descriptor, char delimiter)
{
    FieldOrder order;
    order.delimiter = delimiter;
    std::array<bool, 4> seen{};
    const auto names = split(descriptor, ',');
    for (std::size_t col = 0; col < names.size(); ++col) {
        std::string name(trim(names[col]));
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        int field = -1;
        if (name == "timestamp" || name == "ts" || name == "time")
            field = static_cast<int>(Field::Timestamp);
        else if (name == "host")
            field = static_cast<int>(Field::Host);
        else if (name == "domain" || name == "qname")
            field = static_cast<int>(Field::Domain);
        else if (name == "ip" || name == "answer")
            field = static_cast<int>(Field::Ip);
        else if (name == "_" || name.empty())
            continue;
        else
            throw Error(ErrorKind::Config, "unknown field '" + name + "' in field order");
        if (seen[field])
            throw Error(ErrorKind::Config, "field '" + name + "' listed twice in field order");
        seen[field] = true;
        order.position[field] = col;
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
        throw Error(ErrorKind::Config,
                    "field order must name timestamp, host, domain and ip: '" +
                        std::string(descriptor) + "'");
    return order;
}

std::size_t FieldOrder::min_columns() const
{
    return *std::max_element(position.begin(), position.end()) + 1;
}

std::string normalize_domain(std::string_view name)
{
    name = trim(name);
    if (!name.empty() && name.back() == '.')
        name.remove_suffix(1);
    std::string out(name);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

QueryLog parse_passive_log(std::istream& in, const FieldOrder& order)
{
    if (!in)
        throw Error(ErrorKind::Io, "passive log stream is not readable");

    QueryLog log;
    std::size_t data_lines = 0;
    const std::size_t needed = order.min_columns();
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (skippable(line))
            continue;
        ++data_lines;

        const auto fields = split(line, order.delimiter);
        if (fields.size() < needed) {
            ++log.skipped;
            continue;
        }
        const auto ts = parse_number<std::int64_t>(
            trim(fields[order.position[static_cast<int>(Field::Timestamp)]]));
        QueryRecord rec;
        rec.host = std::string(trim(fields[order.position[static_cast<int>(Field::Host)]]));
        rec.domain = normalize_domain(fields[order.position[static_cast<int>(Field::Domain)]]);
        rec.ip = std::string(trim(fields[order.position[static_cast<int>(Field::Ip)]]));
        const bool ip_ok = parse_ipv4(rec.ip).has_value() || Cidr::try_parse(rec.ip).has_value();
        if (!ts || *ts < 0 || rec.host.empty() || rec.domain.empty() || !ip_ok) {
            ++log.skipped;
            continue;
        }
        rec.timestamp = *ts;
        log.records.push_back(std::move(rec));
    }
    if (in.bad())
        throw Error(ErrorKind::Io, "read error in passive log");
    if (data_lines > 0 && 2 * log.skipped > data_lines)
        throw Error(ErrorKind::Format,
                    std::to_string(log.skipped) + " of " + std::to_string(data_lines) +
                        " passive log lines are malformed; check the field order");
    return log;
}

QueryLog load_passive_log(const std::string& path, const FieldOrder& order)
{
    auto in = open_input(path);
    return parse_passive_log(in, order);
}

void write_passive_log(std::ostream& out, const QueryLog& log)
{
    for (const auto& r : log.records)
        out << r.timestamp << '\t' << r.host << '\t' << r.domain << '\t' << r.ip << '\n';
}

// ---------------------------------------------------------------------------

SuffixList::SuffixList(std::unordered_set<std::string> suffixes)
    : suffixes_(std::move(suffixes))
{
    if (suffixes_.empty())
        throw Error(ErrorKind::Config, "suffix list is empty");
}

SuffixList SuffixList::load(std::istream& in)
{
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto s = trim(line);
        if (s.empty() || s.front() == '#' || s.starts_with("//"))
            continue;
        // wildcard and exception rules are not supported; keep the plain part
        if (s.front() == '!')
            continue;
        if (s.starts_with("*."))
            s.remove_prefix(2);
        out.insert(normalize_domain(s));
    }
    return SuffixList(std::move(out));
}

SuffixList SuffixList::load(const std::string& path)
{
    auto in = open_input(path);
    return load(in);
}

bool SuffixList::contains(std::string_view suffix) const
{
    return suffixes_.contains(std::string(suffix));
}

std::string extract_e2ld(std::string_view fqdn, const SuffixList& suffixes)
{
    // Candidate suffixes, longest first: the whole name, then after each dot.
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 0; i < fqdn.size(); ++i)
        if (fqdn[i] == '.')
            starts.push_back(i + 1);

    std::size_t match = starts.size(); // index into starts
    for (std::size_t k = 0; k < starts.size(); ++k) {
        if (suffixes.contains(fqdn.substr(starts[k]))) {
            match = k;
            break;
        }
    }
    if (match == starts.size())
        match = starts.size() - 1; // implicit rule: the last label is a suffix
    if (match == 0)
        return std::string(fqdn);
    return std::string(fqdn.substr(starts[match - 1]));
}

// ---------------------------------------------------------------------------

std::optional<std::uint32_t> parse_ipv4(std::string_view text)
{
    const auto parts = split(text, '.');
    if (parts.size() != 4)
        return std::nullopt;
    std::uint32_t addr = 0;
    for (auto part : parts) {
        if (part.empty() || part.size() > 3)
            return std::nullopt;
        const auto octet = parse_number<unsigned>(part);
        if (!octet || *octet > 255)
            return std::nullopt;
        addr = (addr << 8) | *octet;
    }
    return addr;
}

std::string format_ipv4(std::uint32_t a)
{
    return std::to_string(a >> 24) + '.' + std::to_string((a >> 16) & 0xff) + '.' +
           std::to_string((a >> 8) & 0xff) + '.' + std::to_string(a & 0xff);
}

std::uint32_t mask_of(int length)
{
    return length <= 0 ? 0u : (length >= 32 ? 0xffffffffu : ~((1u << (32 - length)) - 1));
}

std::optional<Cidr> Cidr::try_parse(std::string_view text)
{
    text = trim(text);
    const auto slash = text.find('/');
    if (slash == std::string_view::npos)
        return std::nullopt;
    const auto addr = parse_ipv4(text.substr(0, slash));
    const auto len = parse_number<int>(text.substr(slash + 1));
    if (!addr || !len || *len < 0 || *len > 32)
        return std::nullopt;
    return Cidr{*addr & mask_of(*len), *len};
}

Cidr Cidr::parse(std::string_view text)
{
    auto c = try_parse(text);
    if (!c)
        throw Error(ErrorKind::Input, "invalid CIDR prefix '" + std::string(text) + "'");
    return *c;
}

bool Cidr::contains(std::uint32_t address) const
{
    return (address & mask_of(length)) == network;
}

std::string Cidr::to_string() const
{
    return format_ipv4(network) + '/' + std::to_string(length);
}

PrefixTable::PrefixTable(int fallback_mask)
    : fallback_mask_(fallback_mask)
{
    if (fallback_mask < 8 || fallback_mask > 32)
        throw Error(ErrorKind::Config,
                    "fallback mask must be in [8,32], got " + std::to_string(fallback_mask));
}

void PrefixTable::add(Cidr prefix)
{
    if (prefix.length < 8 || prefix.length > 32)
        throw Error(ErrorKind::Config, "prefix length must be in [8,32]: " + prefix.to_string());
    prefix.network &= mask_of(prefix.length);
    if (by_length_[prefix.length].insert(prefix.network).second)
        ++count_;
}

std::optional<Cidr> PrefixTable::longest_match(std::uint32_t address) const
{
    for (int len = 32; len >= 8; --len) {
        const auto& bucket = by_length_[len];
        if (bucket.empty())
            continue;
        const auto net = address & mask_of(len);
        if (bucket.contains(net))
            return Cidr{net, len};
    }
    return std::nullopt;
}

std::vector<Cidr> PrefixTable::entries() const
{
    std::vector<Cidr> out;
    out.reserve(count_);
    for (int len = 8; len <= 32; ++len)
        for (auto net : by_length_[len])
            out.push_back(Cidr{net, len});
    std::sort(out.begin(), out.end());
    return out;
}

PrefixTable PrefixTable::load(std::istream& in, int fallback_mask)
{
    PrefixTable table(fallback_mask);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skippable(line))
            continue;
        auto c = Cidr::try_parse(line);
        if (!c)
            throw Error(ErrorKind::Format,
                        "prefix table line " + std::to_string(lineno) + ": bad CIDR '" + line + "'");
        table.add(*c);
    }
    return table;
}

PrefixTable PrefixTable::load(const std::string& path, int fallback_mask)
{
    auto in = open_input(path);
    return load(in, fallback_mask);
}

std::string extract_prefix(std::string_view ip, const PrefixTable& table)
{
    if (ip.find('/') != std::string_view::npos)
        return Cidr::parse(ip).to_string();
    const auto addr = parse_ipv4(ip);
    if (!addr)
        throw Error(ErrorKind::Input, "invalid IPv4 address '" + std::string(ip) + "'");
    if (auto hit = table.longest_match(*addr))
        return hit->to_string();
    const int len = table.fallback_mask();
    return Cidr{*addr & mask_of(len), len}.to_string();
}

QueryLog aggregate(const QueryLog& log, const SuffixList& suffixes, const PrefixTable& table)
{
    QueryLog out;
    out.skipped = log.skipped;
    out.records.reserve(log.records.size());
    std::unordered_map<std::string, std::string> domain_cache;
    std::unordered_map<std::string, std::string> ip_cache;
    for (const auto& r : log.records) {
        auto d = domain_cache.find(r.domain);
        if (d == domain_cache.end())
            d = domain_cache.emplace(r.domain, extract_e2ld(r.domain, suffixes)).first;
        auto p = ip_cache.find(r.ip);
        if (p == ip_cache.end())
            p = ip_cache.emplace(r.ip, extract_prefix(r.ip, table)).first;
        out.records.push_back(QueryRecord{r.timestamp, r.host, d->second, p->second});
    }
    return out;
}

// ---------------------------------------------------------------------------

LabelMap load_labels(std::istream& in)
{
    LabelMap labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skippable(line))
            continue;
        auto s = trim(line);
        const auto cut = s.find_first_of("\t ");
        const auto value = cut == std::string_view::npos ? std::string_view{} : trim(s.substr(cut));
        if (cut == std::string_view::npos || (value != "0" && value != "1"))
            throw Error(ErrorKind::Format,
                        "label line " + std::to_string(lineno) + ": expected '<entity>\\t<0|1>'");
        auto name = std::string(s.substr(0, cut));
        if (name.find('/') == std::string::npos && !parse_ipv4(name))
            name = normalize_domain(name);
        labels[name] = value == "1" ? 1 : 0;
    }
    return labels;
}

LabelMap load_labels(const std::string& path)
{
    auto in = open_input(path);
    return load_labels(in);
}

void write_labels(std::ostream& out, const LabelMap& labels)
{
    for (const auto& [name, label] : labels)
        out << name << '\t' << label << '\n';
}

std::set<std::string> load_name_list(std::istream& in)
{
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line))
        if (!skippable(line))
            out.insert(normalize_domain(line));
    return out;
}

std::set<std::string> load_name_list(const std::string& path)
{
    auto in = open_input(path);
    return load_name_list(in);
}

LabelMap derive_prefix_labels(const LabelMap& ip_labels, const PrefixTable& table)
{
    std::map<std::string, std::array<std::size_t, 2>> votes;
    for (const auto& [ip, label] : ip_labels)
        ++votes[extract_prefix(ip, table)][label != 0 ? 1 : 0];

    LabelMap out;
    for (const auto& [prefix, v] : votes) {
        if (v[1] > v[0])
            out[prefix] = 1;
        else if (v[0] > v[1])
            out[prefix] = 0;
    }
    return out;
}

// ---------------------------------------------------------------------------

EntityType EntityCatalog::type(std::size_t row) const
{
    return row < domains.size() ? EntityType::Domain : EntityType::Ip;
}

const std::string& EntityCatalog::name(std::size_t row) const
{
    return row < domains.size() ? domains.at(row) : ips.at(row - domains.size());
}

std::optional<int> EntityCatalog::label(std::size_t row) const
{
    return row < domains.size() ? domain_labels.at(row) : ip_labels.at(row - domains.size());
}

bool EntityCatalog::is_train(std::size_t row) const
{
    return !train_mask.empty() && train_mask.at(row);
}

CatalogIndex::CatalogIndex(const EntityCatalog& catalog)
{
    for (std::size_t i = 0; i < catalog.domains.size(); ++i)
        domains_.emplace(catalog.domains[i], i);
    for (std::size_t j = 0; j < catalog.ips.size(); ++j)
        ips_.emplace(catalog.ips[j], catalog.domains.size() + j);
    for (std::size_t h = 0; h < catalog.hosts.size(); ++h)
        hosts_.emplace(catalog.hosts[h], h);
}

namespace {
std::optional<std::size_t> find_in(const std::unordered_map<std::string, std::size_t>& map,
                                   std::string_view name)
{
    auto it = map.find(std::string(name));
    if (it == map.end())
        return std::nullopt;
    return it->second;
}
} // namespace

std::optional<std::size_t> CatalogIndex::domain(std::string_view name) const { return find_in(domains_, name); }
std::optional<std::size_t> CatalogIndex::ip(std::string_view name) const { return find_in(ips_, name); }
std::optional<std::size_t> CatalogIndex::host(std::string_view name) const { return find_in(hosts_, name); }

std::optional<std::size_t> CatalogIndex::entity(std::string_view name) const
{
    if (auto d = domain(name))
        return d;
    return ip(name);
}

PrunedData prune_and_label(const QueryLog& log, const LabelMap& domain_labels,
                           const LabelMap& ip_labels, const std::set<std::string>& popular)
{
    std::vector<std::string> hosts;
    std::unordered_set<std::string> host_seen;
    std::unordered_map<std::string, std::unordered_set<std::string>> domain_hosts;
    for (const auto& r : log.records) {
        if (host_seen.insert(r.host).second)
            hosts.push_back(r.host);
        domain_hosts[r.domain].insert(r.host);
    }
    const std::size_t total_hosts = hosts.size();

    auto keep_domain = [&](const std::string& d) {
        if (popular.contains(d) || !domain_labels.contains(d))
            return false;
        const std::size_t n = domain_hosts.at(d).size();
        return n >= 2 && 2 * n <= total_hosts;
    };
    std::unordered_map<std::string, bool> domain_ok;
    for (const auto& [d, _] : domain_hosts)
        domain_ok[d] = keep_domain(d);

    PrunedData out;
    out.log.skipped = log.skipped;
    auto& cat = out.catalog;
    cat.hosts = std::move(hosts);
    std::unordered_map<std::string, std::size_t> d_index, i_index;
    std::vector<std::int64_t> d_first, i_first;

    for (const auto& r : log.records) {
        if (!domain_ok.at(r.domain) || !ip_labels.contains(r.ip))
            continue;
        out.log.records.push_back(r);
        auto [dit, dnew] = d_index.emplace(r.domain, cat.domains.size());
        if (dnew) {
            cat.domains.push_back(r.domain);
            cat.domain_labels.push_back(domain_labels.at(r.domain));
            d_first.push_back(r.timestamp);
        } else {
            d_first[dit->second] = std::min(d_first[dit->second], r.timestamp);
        }
        auto [iit, inew] = i_index.emplace(r.ip, cat.ips.size());
        if (inew) {
            cat.ips.push_back(r.ip);
            cat.ip_labels.push_back(ip_labels.at(r.ip));
            i_first.push_back(r.timestamp);
        } else {
            i_first[iit->second] = std::min(i_first[iit->second], r.timestamp);
        }
    }
    if (cat.domains.empty() || cat.ips.empty())
        throw Error(ErrorKind::EmptyCatalog,
                    "pruning left " + std::to_string(cat.domains.size()) + " domains and " +
                        std::to_string(cat.ips.size()) + " IPs");
    cat.first_seen = std::move(d_first);
    cat.first_seen.insert(cat.first_seen.end(), i_first.begin(), i_first.end());
    return out;
}

EntityCatalog temporal_split(const EntityCatalog& catalog, double fraction)
{
    if (!(fraction > 0.0 && fraction < 1.0))
        throw Error(ErrorKind::Config, "split fraction must lie in (0,1)");
    if (catalog.first_seen.size() != catalog.size())
        throw Error(ErrorKind::Consistency, "first_seen is not populated for every entity");

    EntityCatalog out = catalog;
    out.train_mask.assign(catalog.size(), false);

    auto split_block = [&](std::size_t offset, std::size_t count) {
        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), offset);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return catalog.first_seen[a] < catalog.first_seen[b];
        });
        // guard against 0.9 * 10 landing a hair above 9
        const auto n_train = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(count) - 1e-9));
        for (std::size_t k = 0; k < std::min(n_train, count); ++k)
            out.train_mask[order[k]] = true;
    };
    split_block(0, catalog.n_domains());
    split_block(catalog.n_domains(), catalog.n_ips());
    return out;
}

} // namespace dnsembed
