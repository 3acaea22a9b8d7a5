#include "dnsembed/pipeline.hpp"

#include "dnsembed/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

namespace dnsembed {

namespace fs = std::filesystem;

const char* to_string(Method method)
{
    switch (method) {
    case Method::JdeU: return "jde_u";
    case Method::JdeS: return "jde_s";
    case Method::PDw: return "p_dw";
    case Method::DDw: return "d_dw";
    case Method::IDw: return "i_dw";
    }
    return "unknown";
}

Method parse_method(std::string_view text)
{
    for (auto m : {Method::JdeU, Method::JdeS, Method::PDw, Method::DDw, Method::IDw})
        if (text == to_string(m))
            return m;
    throw Error(ErrorKind::Config, "unknown method '" + std::string(text) +
                                       "' (expected jde_u, jde_s, p_dw, d_dw or i_dw)");
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string trim_copy(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_value(const std::string& key, const std::string& value)
{
    std::istringstream in(value);
    T out{};
    in >> out;
    if (in.fail() || !(in >> std::ws).eof())
        throw Error(ErrorKind::Config, "bad value '" + value + "' for '" + key + "'");
    return out;
}

std::string shortest(double v) // round-trips exactly
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

void apply_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value)
{
    auto& t = cfg.train;
    if (key == "log") cfg.log_path = value;
    else if (key == "domain_labels") cfg.domain_labels_path = value;
    else if (key == "ip_labels") cfg.ip_labels_path = value;
    else if (key == "suffixes") cfg.suffixes_path = value;
    else if (key == "prefixes") cfg.prefixes_path = value;
    else if (key == "popular") cfg.popular_path = value;
    else if (key == "out") cfg.out_dir = value;
    else if (key == "field_order") cfg.field_order = value;
    else if (key == "fallback_mask") cfg.fallback_mask = parse_value<int>(key, value);
    else if (key == "method") cfg.method = parse_method(value);
    else if (key == "dim") t.dim = parse_value<int>(key, value);
    else if (key == "order") t.order = parse_value<int>(key, value);
    else if (key == "neg_samples") t.neg_samples = parse_value<double>(key, value);
    else if (key == "alpha") t.alpha = parse_value<double>(key, value);
    else if (key == "beta") t.beta = parse_value<double>(key, value);
    else if (key == "lr") t.learning_rate = parse_value<double>(key, value);
    else if (key == "iters") t.iterations = parse_value<int>(key, value);
    else if (key == "seed") t.seed = parse_value<std::uint64_t>(key, value);
    else if (key == "split") cfg.split = parse_value<double>(key, value);
    else if (key == "clf_lr") cfg.lr.learning_rate = parse_value<double>(key, value);
    else if (key == "clf_iters") cfg.lr.iterations = parse_value<int>(key, value);
    else throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
}

void apply_config_text(PipelineConfig& cfg, const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim_copy(line.substr(0, line.find('#')));
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::Config, "config line " + std::to_string(lineno) + ": expected key = value");
        apply_config_value(cfg, trim_copy(body.substr(0, eq)), trim_copy(body.substr(eq + 1)));
    }
}

void apply_config_file(PipelineConfig& cfg, const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Config, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
}

void PipelineConfig::validate() const
{
    train.validate();
    if (!(split > 0.0 && split < 1.0))
        throw Error(ErrorKind::Config, "split must lie in (0,1)");
    if (lr.iterations < 0 || !(lr.learning_rate > 0.0))
        throw Error(ErrorKind::Config, "classifier learning rate must be > 0 and iterations >= 0");
    FieldOrder::parse(field_order);
    PrefixTable check(fallback_mask);

    auto require = [](const std::string& path, const char* what) {
        if (path.empty())
            throw Error(ErrorKind::Config, std::string(what) + " path is not set");
        if (!fs::is_regular_file(path))
            throw Error(ErrorKind::Config, std::string(what) + " file '" + path + "' does not exist");
    };
    require(log_path, "log");
    require(domain_labels_path, "domain label");
    require(ip_labels_path, "ip label");
    require(suffixes_path, "suffix list");
    require(prefixes_path, "prefix table");
    if (!popular_path.empty())
        require(popular_path, "popular domain");
}

PipelineConfig PipelineConfig::for_synth_dir(const std::string& dir)
{
    PipelineConfig cfg;
    const fs::path d(dir);
    cfg.log_path = (d / "log.tsv").string();
    cfg.domain_labels_path = (d / "domain_labels.tsv").string();
    cfg.ip_labels_path = (d / "ip_labels.tsv").string();
    cfg.suffixes_path = (d / "suffixes.txt").string();
    cfg.prefixes_path = (d / "prefixes.txt").string();
    cfg.popular_path = (d / "popular.txt").string();
    return cfg;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

/// Runs `fn`, prefixing any error message with the stage name.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(stage) + ": " + e.what());
    }
}

} // namespace

IngestResult run_ingest(const PipelineConfig& cfg)
{
    return in_stage("ingest", [&] {
        const auto raw = load_passive_log(cfg.log_path, FieldOrder::parse(cfg.field_order));
        const auto suffixes = SuffixList::load(cfg.suffixes_path);
        const auto table = PrefixTable::load(cfg.prefixes_path, cfg.fallback_mask);
        const auto domain_labels = load_labels(cfg.domain_labels_path);
        const auto prefix_labels = derive_prefix_labels(load_labels(cfg.ip_labels_path), table);
        const auto popular = cfg.popular_path.empty() ? std::set<std::string>{}
                                                      : load_name_list(cfg.popular_path);

        auto pruned = prune_and_label(aggregate(raw, suffixes, table), domain_labels, prefix_labels, popular);
        IngestResult out;
        out.raw_records = raw.records.size();
        out.skipped_lines = raw.skipped;
        out.log = std::move(pruned.log);
        out.catalog = temporal_split(pruned.catalog, cfg.split);
        return out;
    });
}

GraphBlock build_method_graph(const IngestResult& data, Method method)
{
    return in_stage("graph", [&] {
        GraphBlock block;
        switch (method) {
        case Method::PDw:
            block.graph = build_passive_graph(normalize_bipartite(build_bipartite(data.log, data.catalog)));
            break;
        case Method::JdeU:
        case Method::JdeS:
            block.graph = build_enhanced_graph(normalize_bipartite(build_bipartite(data.log, data.catalog)),
                                               similarities(data.log, data.catalog));
            break;
        case Method::DDw: {
            SimilarityPack s;
            std::tie(s.s_dh, s.s_di) = domain_similarities(data.log, data.catalog);
            block.graph = ablation_graph(s, GraphKind::DomainOnly);
            break;
        }
        case Method::IDw: {
            SimilarityPack s;
            std::tie(s.s_ih, s.s_id) = ip_similarities(data.log, data.catalog);
            block.graph = ablation_graph(s, GraphKind::IpOnly);
            block.row_offset = data.catalog.n_domains();
            break;
        }
        }
        return block;
    });
}

namespace {

/// Removes catalog rows and every record touching them.
void drop_entities(IngestResult& data, const std::vector<std::size_t>& rows)
{
    auto& cat = data.catalog;
    std::vector<bool> drop(cat.size(), false);
    std::unordered_set<std::string> dropped_names;
    for (auto r : rows) {
        drop[r] = true;
        dropped_names.insert(cat.name(r));
    }

    EntityCatalog out;
    out.hosts = cat.hosts;
    for (std::size_t r = 0; r < cat.size(); ++r) {
        if (drop[r])
            continue;
        if (cat.type(r) == EntityType::Domain) {
            out.domains.push_back(cat.domains[r]);
            out.domain_labels.push_back(cat.domain_labels[r]);
        }
    }
    for (std::size_t r = cat.n_domains(); r < cat.size(); ++r) {
        if (drop[r])
            continue;
        out.ips.push_back(cat.name(r));
        out.ip_labels.push_back(cat.label(r));
    }
    for (std::size_t r = 0; r < cat.size(); ++r) {
        if (drop[r])
            continue;
        out.first_seen.push_back(cat.first_seen[r]);
        if (!cat.train_mask.empty())
            out.train_mask.push_back(cat.train_mask[r]);
    }
    cat = std::move(out);

    std::erase_if(data.log.records, [&](const QueryRecord& rec) {
        return dropped_names.contains(rec.domain) || dropped_names.contains(rec.ip);
    });
}

} // namespace

EmbedResult run_embed(IngestResult& data, const PipelineConfig& cfg)
{
    GraphBlock block = build_method_graph(data, cfg.method);
    return in_stage("embed", [&] {
        for (;;) {
            const auto keep = connected_nodes(block.graph.adjacency);
            if (static_cast<Eigen::Index>(keep.size()) == block.graph.size())
                break;
            std::vector<bool> kept(static_cast<std::size_t>(block.graph.size()), false);
            for (auto k : keep)
                kept[static_cast<std::size_t>(k)] = true;
            std::vector<std::size_t> isolated;
            for (std::size_t i = 0; i < kept.size(); ++i)
                if (!kept[i])
                    isolated.push_back(block.row_offset + i);
            std::cerr << "warning: dropping " << isolated.size() << " isolated node(s):";
            for (auto r : isolated)
                std::cerr << ' ' << data.catalog.name(r);
            std::cerr << '\n';
            drop_entities(data, isolated);
            block = build_method_graph(data, cfg.method);
        }

        EmbedResult out;
        out.row_offset = block.row_offset;
        const auto n = static_cast<int>(block.graph.size());
        out.effective_dim = std::min(cfg.train.dim, n);
        if (out.effective_dim < cfg.train.dim)
            std::cerr << "warning: " << to_string(cfg.method) << " graph has " << n
                      << " nodes; embedding dimension reduced from " << cfg.train.dim << " to "
                      << out.effective_dim << '\n';

        const auto walk = walk_matrix(block.graph, cfg.train.order, cfg.train.neg_samples);
        if (cfg.method == Method::JdeS) {
            TrainConfig train = cfg.train;
            train.dim = out.effective_dim;
            auto fit = semi_fit(walk, build_constraints(data.catalog), supervision_from(data.catalog), train);
            out.model = std::move(fit.model);
            out.trace = std::move(fit.trace);
        } else {
            out.model = unsupervised_embed(walk, out.effective_dim);
        }
        // Evaluate exactly what gets exported.
        out.model.x = quantize_for_export(out.model.x);
        return out;
    });
}

std::vector<Task> method_tasks(Method method)
{
    switch (method) {
    case Method::DDw: return {Task::MDD};
    case Method::IDw: return {Task::IRE};
    default: return {Task::MDD, Task::IRE};
    }
}

std::vector<EvalReport> run_evaluate(const IngestResult& data, const EmbedResult& embedding,
                                     const PipelineConfig& cfg)
{
    return in_stage("evaluate", [&] {
        const auto mode = cfg.method == Method::JdeS ? TaskMode::Auxiliary : TaskMode::Downstream;
        std::vector<EvalReport> reports;
        for (auto task : method_tasks(cfg.method)) {
            const std::size_t block_start = task == Task::MDD ? 0 : data.catalog.n_domains();
            if (block_start < embedding.row_offset)
                throw Error(ErrorKind::Consistency, "embedding does not cover the task's entities");
            reports.push_back(run_task(data.catalog, embedding.model, task, mode, cfg.lr,
                                       block_start - embedding.row_offset));
        }
        return reports;
    });
}

// ---------------------------------------------------------------------------
// Files

std::string config_banner(const PipelineConfig& cfg, int effective_dim)
{
    const auto& t = cfg.train;
    std::ostringstream s;
    s << "# method=" << to_string(cfg.method) << " seed=" << t.seed << " dim=" << effective_dim
      << " order=" << t.order << " neg_samples=" << shortest(t.neg_samples)
      << " alpha=" << shortest(t.alpha) << " beta=" << shortest(t.beta)
      << " lr=" << shortest(t.learning_rate) << " iters=" << t.iterations
      << " split=" << shortest(cfg.split) << " clf_lr=" << shortest(cfg.lr.learning_rate)
      << " clf_iters=" << cfg.lr.iterations;
    return s.str();
}

namespace {

std::ofstream open_output(const fs::path& path)
{
    std::ofstream f(path);
    if (!f)
        throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    return f;
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorKind::Io, "cannot create '" + dir + "': " + ec.message());
}

std::string task_suffix(Task task)
{
    return task == Task::MDD ? "mdd" : "ire";
}

} // namespace

void write_embed_outputs(const std::string& dir, const IngestResult& data,
                         const EmbedResult& embedding, const PipelineConfig& cfg)
{
    ensure_dir(dir);
    const auto banner = config_banner(cfg, embedding.effective_dim);
    {
        auto f = open_output(fs::path(dir) / "embeddings.tsv");
        f << banner << '\n';
        write_embeddings(f, data.catalog, embedding.model.x, embedding.row_offset);
    }
    if (embedding.model.has_classifier) {
        auto f = open_output(fs::path(dir) / "classifier.txt");
        f << banner << '\n' << "bias " << shortest(embedding.model.clf_b) << '\n' << "weights";
        for (Eigen::Index k = 0; k < embedding.model.clf_w.size(); ++k)
            f << ' ' << shortest(embedding.model.clf_w(k));
        f << '\n';
    }
    if (!embedding.trace.empty()) {
        auto f = open_output(fs::path(dir) / "loss_trace.csv");
        f << banner << '\n';
        write_loss_trace(f, embedding.trace);
    }
}

std::string metrics_json(const std::vector<EvalReport>& reports, const PipelineConfig& cfg,
                         int effective_dim)
{
    using nlohmann::ordered_json;
    const auto& t = cfg.train;
    ordered_json j;
    j["method"] = to_string(cfg.method);
    j["seed"] = t.seed;
    j["hyperparameters"] = {
        {"dim", effective_dim},      {"order", t.order},          {"neg_samples", t.neg_samples},
        {"alpha", t.alpha},          {"beta", t.beta},            {"lr", t.learning_rate},
        {"iters", t.iterations},     {"split", cfg.split},        {"clf_lr", cfg.lr.learning_rate},
        {"clf_iters", cfg.lr.iterations}};
    j["reports"] = ordered_json::array();
    for (const auto& r : reports)
        j["reports"].push_back({{"task", to_string(r.task)},
                                {"mode", to_string(r.mode)},
                                {"auc", r.auc},
                                {"n_train", r.n_train},
                                {"n_test", r.rows.size()}});
    return j.dump(2) + "\n";
}

void write_eval_outputs(const std::string& dir, const IngestResult& data,
                        const std::vector<EvalReport>& reports, const PipelineConfig& cfg,
                        int effective_dim)
{
    ensure_dir(dir);
    const auto banner = config_banner(cfg, effective_dim);
    for (const auto& r : reports) {
        {
            auto f = open_output(fs::path(dir) / ("roc_" + task_suffix(r.task) + ".csv"));
            f << banner << '\n';
            write_roc_csv(f, r);
        }
        {
            auto f = open_output(fs::path(dir) / ("predictions_" + task_suffix(r.task) + ".tsv"));
            f << banner << '\n';
            write_predictions(f, data.catalog, r);
        }
    }
    auto f = open_output(fs::path(dir) / "metrics.json");
    f << metrics_json(reports, cfg, effective_dim);
}

EmbedResult load_embed_outputs(const std::string& dir, const IngestResult& data,
                               const PipelineConfig& cfg)
{
    std::ifstream in(fs::path(dir) / "embeddings.tsv");
    if (!in)
        throw Error(ErrorKind::Io, "cannot read embeddings from '" + dir + "'");
    const auto table = read_embeddings(in);
    const auto& cat = data.catalog;

    const bool has_domain = std::count(table.types.begin(), table.types.end(), EntityType::Domain) > 0;
    const bool has_ip = std::count(table.types.begin(), table.types.end(), EntityType::Ip) > 0;
    EmbedResult out;
    std::size_t begin = 0, end = cat.size();
    if (has_domain && !has_ip)
        end = cat.n_domains();
    else if (has_ip && !has_domain)
        begin = cat.n_domains();
    out.row_offset = begin;

    std::unordered_map<std::string, Eigen::Index> by_name;
    for (std::size_t i = 0; i < table.names.size(); ++i)
        by_name.emplace(table.names[i], static_cast<Eigen::Index>(i));
    out.model.x.resize(static_cast<Eigen::Index>(end - begin), table.x.cols());
    for (std::size_t r = begin; r < end; ++r) {
        auto it = by_name.find(cat.name(r));
        if (it == by_name.end())
            throw Error(ErrorKind::Consistency, "no embedding for entity '" + cat.name(r) + "'");
        out.model.x.row(static_cast<Eigen::Index>(r - begin)) = table.x.row(it->second);
    }
    out.effective_dim = static_cast<int>(table.x.cols());

    if (cfg.method == Method::JdeS) {
        std::ifstream cf(fs::path(dir) / "classifier.txt");
        if (!cf)
            throw Error(ErrorKind::Io, "cannot read classifier.txt from '" + dir + "'");
        std::string line;
        std::vector<double> weights;
        bool have_bias = false;
        while (std::getline(cf, line)) {
            if (line.empty() || line.front() == '#')
                continue;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key == "bias") {
                ls >> out.model.clf_b;
                have_bias = !ls.fail();
            } else if (key == "weights") {
                double v;
                while (ls >> v)
                    weights.push_back(v);
            }
        }
        if (!have_bias || static_cast<Eigen::Index>(weights.size()) != out.model.x.cols())
            throw Error(ErrorKind::Format, "classifier.txt is malformed");
        out.model.clf_w = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
        out.model.has_classifier = true;
    }
    return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg)
{
    cfg.validate();
    auto data = run_ingest(cfg);
    const auto embedding = run_embed(data, cfg);
    write_embed_outputs(cfg.out_dir, data, embedding, cfg);
    PipelineResult out;
    out.reports = run_evaluate(data, embedding, cfg);
    out.effective_dim = embedding.effective_dim;
    write_eval_outputs(cfg.out_dir, data, out.reports, cfg, out.effective_dim);
    return out;
}

} // namespace dnsembed
