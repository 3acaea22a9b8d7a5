#pragma once

// End-to-end orchestration: ingest -> graph -> embed -> evaluate, plus the
// report files written by every stage.

#include "dnsembed/embed.hpp"
#include "dnsembed/graph.hpp"
#include "dnsembed/ingest.hpp"
#include "dnsembed/tasks.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dnsembed {

enum class Method { JdeU, JdeS, PDw, DDw, IDw };

const char* to_string(Method method);
Method parse_method(std::string_view text);

struct PipelineConfig {
    std::string log_path;
    std::string domain_labels_path;
    std::string ip_labels_path;
    std::string suffixes_path;
    std::string prefixes_path;
    std::string popular_path; // optional; empty means no popular list
    std::string out_dir = "out";
    std::string field_order = "timestamp,host,domain,ip";
    int fallback_mask = 24;

    Method method = Method::JdeU;
    TrainConfig train;
    double split = 0.9;
    LrConfig lr;

    /// Checks values and that every input file exists.
    void validate() const;

    /// Points every input path at the files written by write_synth.
    static PipelineConfig for_synth_dir(const std::string& dir);
};

/// Applies "key = value" lines ('#' comments). Unknown keys throw Config.
void apply_config_text(PipelineConfig& cfg, const std::string& text);
void apply_config_file(PipelineConfig& cfg, const std::string& path);
void apply_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

struct IngestResult {
    QueryLog log;          // aggregated and pruned
    EntityCatalog catalog; // split applied
    std::size_t raw_records = 0;
    std::size_t skipped_lines = 0;
};

IngestResult run_ingest(const PipelineConfig& cfg);

/// Which catalog rows a method's graph covers.
struct GraphBlock {
    HeteroGraph graph;
    std::size_t row_offset = 0; // catalog row of graph node 0
};

GraphBlock build_method_graph(const IngestResult& data, Method method);

/// Embedding plus everything needed to evaluate it.
struct EmbedResult {
    EmbeddingModel model;  // x quantized to export precision
    std::size_t row_offset = 0;
    int effective_dim = 0;
    std::vector<double> trace; // jde_s only
};

/// Builds the method's graph and embeds it. Isolated nodes are dropped from
/// the catalog with a warning first (the catalog in `data` is updated).
EmbedResult run_embed(IngestResult& data, const PipelineConfig& cfg);

/// Tasks a method is evaluated on.
std::vector<Task> method_tasks(Method method);

std::vector<EvalReport> run_evaluate(const IngestResult& data, const EmbedResult& embedding,
                                     const PipelineConfig& cfg);

/// File writers. Every file carries the method, seed and hyperparameters.
std::string config_banner(const PipelineConfig& cfg, int effective_dim);
void write_embed_outputs(const std::string& dir, const IngestResult& data,
                         const EmbedResult& embedding, const PipelineConfig& cfg);
void write_eval_outputs(const std::string& dir, const IngestResult& data,
                        const std::vector<EvalReport>& reports, const PipelineConfig& cfg,
                        int effective_dim);
std::string metrics_json(const std::vector<EvalReport>& reports, const PipelineConfig& cfg,
                         int effective_dim);

/// Reads embed outputs back and lines them up with the catalog.
EmbedResult load_embed_outputs(const std::string& dir, const IngestResult& data,
                               const PipelineConfig& cfg);

struct PipelineResult {
    std::vector<EvalReport> reports;
    int effective_dim = 0;
};

PipelineResult run_pipeline(const PipelineConfig& cfg);

} // namespace dnsembed
