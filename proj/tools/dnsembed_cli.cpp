// dnsembed: passive DNS graph embedding for malicious domain detection and
// IP reputation evaluation.

#include "dnsembed/error.hpp"
#include "dnsembed/pipeline.hpp"
#include "dnsembed/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

using namespace dnsembed;
namespace fs = std::filesystem;

namespace {

/// Pipeline options shared by every stage subcommand. Values are kept as
/// strings so that only flags actually given override the config file.
struct PipelineFlags {
    std::string config_file;
    std::string data_dir;
    std::map<std::string, std::string> values;

    void attach(CLI::App* app)
    {
        app->add_option("--config", config_file, "key = value config file");
        app->add_option("--data-dir", data_dir, "directory written by synth-gen (sets every input path)");
        static const std::vector<std::pair<std::string, std::string>> flags = {
            {"--log", "log"},
            {"--domain-labels", "domain_labels"},
            {"--ip-labels", "ip_labels"},
            {"--suffixes", "suffixes"},
            {"--prefixes", "prefixes"},
            {"--popular", "popular"},
            {"--field-order", "field_order"},
            {"--fallback-mask", "fallback_mask"},
            {"--method", "method"},
            {"--dim", "dim"},
            {"--order", "order"},
            {"--neg-samples", "neg_samples"},
            {"--alpha", "alpha"},
            {"--beta", "beta"},
            {"--lr", "lr"},
            {"--iters", "iters"},
            {"--split", "split"},
            {"--seed", "seed"},
            {"--out", "out"},
            {"--clf-lr", "clf_lr"},
            {"--clf-iters", "clf_iters"},
        };
        for (const auto& [flag, key] : flags) {
            auto k = key;
            app->add_option_function<std::string>(
                flag, [this, k](const std::string& v) { values[k] = v; }, "sets '" + key + "'");
        }
    }

    PipelineConfig resolve() const
    {
        PipelineConfig cfg = data_dir.empty() ? PipelineConfig{} : PipelineConfig::for_synth_dir(data_dir);
        if (!config_file.empty())
            apply_config_file(cfg, config_file);
        for (const auto& [k, v] : values)
            apply_config_value(cfg, k, v);
        return cfg;
    }
};

void print_reports(const std::vector<EvalReport>& reports, Method method)
{
    for (const auto& r : reports)
        std::printf("%s %s (%s): auc=%.6f n_train=%zu n_test=%zu\n", to_string(method),
                    to_string(r.task), to_string(r.mode), r.auc, r.n_train, r.rows.size());
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorKind::Io, "cannot create '" + dir + "'");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Heterogeneous graph embedding of passive DNS logs"};
    app.require_subcommand(1);

    PipelineFlags flags;
    auto* run = app.add_subcommand("run", "ingest, build graph, embed and evaluate");
    auto* ingest = app.add_subcommand("ingest-only", "write the pruned catalog and aggregated log");
    auto* graph = app.add_subcommand("graph-export", "write the method's graph as an edge list");
    auto* embed = app.add_subcommand("embed-only", "write embeddings (and classifier / loss trace)");
    auto* evaluate = app.add_subcommand("evaluate", "score exported embeddings on MDD / IRE");
    for (auto* sub : {run, ingest, graph, embed, evaluate})
        flags.attach(sub);

    std::string embeddings_dir;
    evaluate->add_option("--embeddings-dir", embeddings_dir,
                         "directory holding embed-only output (defaults to --out)");

    auto* synth = app.add_subcommand("synth-gen", "generate a synthetic passive DNS dataset");
    SynthConfig synth_cfg;
    std::string synth_out = "synth";
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--seed", synth_cfg.seed);
    synth->add_option("--benign-domains", synth_cfg.n_benign_domains);
    synth->add_option("--malicious-domains", synth_cfg.n_malicious_domains);
    synth->add_option("--normal-ips", synth_cfg.n_normal_ips);
    synth->add_option("--poor-ips", synth_cfg.n_poor_ips);
    synth->add_option("--hosts", synth_cfg.n_hosts);
    synth->add_option("--infected-hosts", synth_cfg.n_infected_hosts);
    synth->add_option("--affinity", synth_cfg.intra_affinity);
    synth->add_option("--noise", synth_cfg.noise);
    synth->add_option("--queries-per-host", synth_cfg.queries_per_host);
    synth->add_option("--home-prefixes", synth_cfg.home_prefixes);
    synth->add_option("--hosting-spread", synth_cfg.hosting_spread);
    synth->add_option("--popularity-skew", synth_cfg.popularity_skew);
    synth->add_option("--families", synth_cfg.malware_families);

    auto* neighbors = app.add_subcommand("neighbors", "closest entities in embedding space");
    std::string query;
    std::size_t k = 5;
    std::string embeddings_file = "out/embeddings.tsv";
    neighbors->add_option("entity", query, "domain or prefix to query")->required();
    neighbors->add_option("-k", k, "number of neighbours");
    neighbors->add_option("--embeddings", embeddings_file, "embedding file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth) {
            const auto data = generate(synth_cfg);
            write_synth(data, synth_out);
            std::printf("wrote %zu records to %s\n", data.log.records.size(), synth_out.c_str());
        } else if (*neighbors) {
            std::ifstream in(embeddings_file);
            if (!in)
                throw Error(ErrorKind::Io, "cannot read '" + embeddings_file + "'");
            const auto table = read_embeddings(in);
            for (const auto& n : nearest_neighbors(table.x, table.names, query, k))
                std::printf("%s\t%c\t%.6f\n", n.name.c_str(),
                            table.types[n.row] == EntityType::Domain ? 'D' : 'I', n.distance);
        } else if (*run) {
            const auto cfg = flags.resolve();
            print_reports(run_pipeline(cfg).reports, cfg.method);
        } else {
            const auto cfg = flags.resolve();
            cfg.validate();
            auto data = run_ingest(cfg);
            ensure_dir(cfg.out_dir);
            if (*ingest) {
                std::ofstream cat(fs::path(cfg.out_dir) / "catalog.tsv");
                for (std::size_t r = 0; r < data.catalog.size(); ++r) {
                    const auto label = data.catalog.label(r);
                    cat << data.catalog.name(r) << '\t'
                        << (data.catalog.type(r) == EntityType::Domain ? 'D' : 'I') << '\t'
                        << (label ? std::to_string(*label) : "-") << '\t' << data.catalog.first_seen[r]
                        << '\t' << (data.catalog.is_train(r) ? "train" : "test") << '\n';
                }
                std::ofstream log(fs::path(cfg.out_dir) / "aggregated_log.tsv");
                write_passive_log(log, data.log);
                std::printf("%zu records read, %zu lines skipped, %zu kept; %zu domains, %zu ips, %zu hosts\n",
                            data.raw_records, data.skipped_lines, data.log.records.size(),
                            data.catalog.n_domains(), data.catalog.n_ips(), data.catalog.hosts.size());
            } else if (*graph) {
                const auto block = build_method_graph(data, cfg.method);
                std::ofstream edges(fs::path(cfg.out_dir) / "edges.tsv");
                write_edge_list(edges, block.graph);
                std::ofstream nodes(fs::path(cfg.out_dir) / "nodes.tsv");
                for (Eigen::Index i = 0; i < block.graph.size(); ++i)
                    nodes << i << '\t' << data.catalog.name(block.row_offset + static_cast<std::size_t>(i)) << '\n';
                std::printf("%s graph: %ld nodes\n", to_string(block.graph.kind),
                            static_cast<long>(block.graph.size()));
            } else if (*embed) {
                const auto embedding = run_embed(data, cfg);
                write_embed_outputs(cfg.out_dir, data, embedding, cfg);
                std::printf("wrote %ld x %d embeddings to %s\n", static_cast<long>(embedding.model.x.rows()),
                            embedding.effective_dim, cfg.out_dir.c_str());
            } else if (*evaluate) {
                const auto source = embeddings_dir.empty() ? cfg.out_dir : embeddings_dir;
                const auto embedding = load_embed_outputs(source, data, cfg);
                const auto reports = run_evaluate(data, embedding, cfg);
                write_eval_outputs(cfg.out_dir, data, reports, cfg, embedding.effective_dim);
                print_reports(reports, cfg.method);
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
