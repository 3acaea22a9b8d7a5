// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

#include "dnsembed/embed.hpp"
#include "dnsembed/error.hpp"
#include "dnsembed/graph.hpp"
#include "dnsembed/pipeline.hpp"
#include "dnsembed/synth.hpp"
#include "dnsembed/tasks.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace dnsembed;
namespace fs = std::filesystem;

namespace {

/// Collects failures of one criterion; the first few are reported.
struct Outcome {
    std::vector<std::string> failures;
    std::string summary;

    void expect(bool ok, const std::string& what)
    {
        if (!ok)
            failures.push_back(what);
    }
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. identities, block structure, Jaccard oracle

double set_jaccard(const std::set<std::string>& a, const std::set<std::string>& b)
{
    if (a.empty() && b.empty())
        return 0.0;
    std::size_t common = 0;
    for (const auto& x : a)
        common += b.count(x);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

void criterion_identities(Outcome& out)
{
    testing::Rng rng(101);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const int n = rng.integer(2, 30), d = rng.integer(1, 8);
        const Matrix x = testing::random_matrix(rng, n, d, -3.0, 3.0);
        ConstraintMatrix c{Matrix::Zero(n, n)};
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                c.c(i, j) = c.c(j, i) = 0.5 * rng.integer(0, 2);
        const double pair = regularization_loss(x, c);
        const double trace = regularization_trace(x, laplacian(c));
        const double rel = std::abs(pair - trace) / std::max(std::abs(pair), 1e-300);
        worst = std::max(worst, pair == 0.0 ? std::abs(trace) : rel);
    }
    out.expect(worst <= 1e-8, "trace identity relative error " + fmt(worst));

    for (int t = 0; t < 50; ++t) {
        const int nd = rng.integer(2, 10), ni = rng.integer(2, 10), nh = rng.integer(2, 8);
        const auto log = testing::random_log(rng, nd, ni, nh, rng.integer(0, 40));
        const auto cat = testing::catalog_for(rng, nd, ni, nh);
        const auto sims = similarities(log, cat);
        const Matrix b_hat = normalize_bipartite(build_bipartite(log, cat));

        std::map<std::string, std::set<std::string>> dh, di, ih, id;
        for (const auto& r : log.records) {
            dh[r.domain].insert(r.host);
            di[r.domain].insert(r.ip);
            ih[r.ip].insert(r.host);
            id[r.ip].insert(r.domain);
        }
        bool jaccard_ok = true;
        for (int a = 0; a < nd; ++a)
            for (int b = 0; b < nd; ++b) {
                const auto &na = cat.domains[a], &nb = cat.domains[b];
                jaccard_ok &= sims.s_dh(a, b) == set_jaccard(dh[na], dh[nb]);
                jaccard_ok &= sims.s_di(a, b) == set_jaccard(di[na], di[nb]);
            }
        for (int a = 0; a < ni; ++a)
            for (int b = 0; b < ni; ++b) {
                const auto &na = cat.ips[a], &nb = cat.ips[b];
                jaccard_ok &= sims.s_ih(a, b) == set_jaccard(ih[na], ih[nb]);
                jaccard_ok &= sims.s_id(a, b) == set_jaccard(id[na], id[nb]);
            }
        out.expect(jaccard_ok, "jaccard oracle mismatch on log " + std::to_string(t));

        const auto p = build_passive_graph(b_hat).adjacency;
        const bool passive_ok = p.rows() == nd + ni && p == p.transpose() &&
                                p.topLeftCorner(nd, nd).isZero(0.0) &&
                                p.bottomRightCorner(ni, ni).isZero(0.0) &&
                                p.topRightCorner(nd, ni) == b_hat;
        out.expect(passive_ok, "passive graph block layout on log " + std::to_string(t));

        const auto s = build_enhanced_graph(b_hat, sims).adjacency;
        const Matrix sd = (sims.s_dh + sims.s_di) / 2.0, si = (sims.s_ih + sims.s_id) / 2.0;
        const bool enhanced_ok = s == s.transpose() && s.topLeftCorner(nd, nd) == sd &&
                                 s.bottomRightCorner(ni, ni) == si && s.topRightCorner(nd, ni) == b_hat &&
                                 s.bottomLeftCorner(ni, nd) == b_hat.transpose() && s.minCoeff() >= 0.0 &&
                                 s.maxCoeff() <= 1.0;
        out.expect(enhanced_ok, "enhanced graph block layout on log " + std::to_string(t));
    }
    out.summary = "worst trace-identity error " + fmt(worst);
}

// ---------------------------------------------------------------------------
// 2. walk matrix vs a plain nested-vector implementation

using Dense = std::vector<std::vector<double>>;

Dense dense_product(const Dense& a, const Dense& b)
{
    const std::size_t n = a.size();
    Dense c(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j)
                c[i][j] += a[i][k] * b[k][j];
    return c;
}

Dense oracle_walk(const Dense& a, int order, double b)
{
    const std::size_t n = a.size();
    std::vector<double> deg(n, 0.0);
    double vol = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            deg[i] += a[i][j];
        vol += deg[i];
    }
    Dense p(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            p[i][j] = a[i][j] / deg[i];
    // sum of P^1 .. P^K, each power computed from scratch
    Dense sum(n, std::vector<double>(n, 0.0));
    for (int k = 1; k <= order; ++k) {
        Dense power = p;
        for (int e = 1; e < k; ++e)
            power = dense_product(power, p);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                sum[i][j] += power[i][j];
    }
    Dense m(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double m0 = vol / b * (sum[i][j] / order) / deg[j];
            m[i][j] = std::log(std::max(m0, 1.0));
        }
    return m;
}

double max_gap(const Matrix& got, const Dense& want)
{
    double gap = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i)
        for (std::size_t j = 0; j < want.size(); ++j)
            gap = std::max(gap, std::abs(got(i, j) - want[i][j]));
    return gap;
}

void criterion_walk(Outcome& out)
{
    const Matrix pair{{0, 1}, {1, 0}};
    const auto k1 = walk_matrix(pair, 1, 1.0).m, k2 = walk_matrix(pair, 2, 1.0).m;
    const double ln2 = std::log(2.0);
    out.expect(std::abs(k1(0, 0)) <= 1e-10 && std::abs(k1(1, 1)) <= 1e-10 && std::abs(k1(0, 1) - ln2) <= 1e-10 &&
                   std::abs(k1(1, 0) - ln2) <= 1e-10,
               "2-node K=1 case");
    out.expect(k2.cwiseAbs().maxCoeff() <= 1e-10, "2-node K=2 case");

    testing::Rng rng(202);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int n = rng.integer(2, 15), order = rng.integer(1, 5);
        const double b = rng.chance(0.5) ? 1.0 : rng.uniform(0.5, 5.0);
        const Matrix a = testing::random_graph(rng, n, rng.uniform(0.1, 0.8));
        Dense plain(n, std::vector<double>(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                plain[i][j] = a(i, j);
        const double gap = max_gap(walk_matrix(a, order, b).m, oracle_walk(plain, order, b));
        worst = std::max(worst, gap);
        out.expect(gap <= 1e-10, "graph " + std::to_string(t) + " differs by " + fmt(gap));
    }
    out.summary = "worst absolute gap " + fmt(worst);
}

// ---------------------------------------------------------------------------
// 3. SVD optimality

void criterion_svd(Outcome& out)
{
    testing::Rng rng(303);
    double worst_ratio = 0.0, worst_full = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int n = rng.integer(3, 20), d = rng.integer(1, std::max(1, n / 2));
        const auto walk = walk_matrix(testing::random_graph(rng, n, rng.uniform(0.1, 0.8)), rng.integer(1, 5), 1.0);
        const Matrix& m = walk.m;
        const auto model = unsupervised_embed(walk, d);
        const double svd_res = (m - model.x * model.y.transpose()).norm();

        // random pairs scaled to the same overall magnitude as the matrix
        const double scale = std::sqrt(m.norm() / std::max(1.0, std::sqrt(double(n) * d)));
        double best_random = std::numeric_limits<double>::infinity();
        for (int r = 0; r < 100; ++r) {
            const Matrix x = testing::random_matrix(rng, n, d) * scale;
            const Matrix y = testing::random_matrix(rng, n, d) * scale;
            best_random = std::min(best_random, (m - x * y.transpose()).norm());
        }
        out.expect(svd_res <= best_random, "matrix " + std::to_string(t) + ": svd residual " + fmt(svd_res) +
                                               " above random " + fmt(best_random));
        worst_ratio = std::max(worst_ratio, svd_res / best_random);

        const auto full = unsupervised_embed(walk, n);
        const double full_res = (m - full.x * full.y.transpose()).norm();
        const double rel = m.norm() > 0 ? full_res / m.norm() : full_res;
        out.expect(rel <= 1e-8, "matrix " + std::to_string(t) + ": full-rank residual " + fmt(rel));
        worst_full = std::max(worst_full, rel);
    }
    out.summary = "max svd/random residual ratio " + fmt(worst_ratio) + ", max full-rank residual " + fmt(worst_full);
}

// ---------------------------------------------------------------------------
// 4. gradients vs central differences

void criterion_gradients(Outcome& out)
{
    testing::Rng rng(404);
    const double h = 1e-5;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int n = rng.integer(3, 12), d = rng.integer(1, 4);
        WalkMatrix walk;
        walk.m = testing::random_matrix(rng, n, n, 0.0, 2.0);
        ConstraintMatrix c{Matrix::Zero(n, n)};
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                c.c(i, j) = c.c(j, i) = 0.5 * rng.integer(0, 2);
        const Matrix lap = laplacian(c);
        Supervision sup;
        for (int i = 0; i < n; ++i) {
            sup.labels.push_back(rng.integer(0, 1));
            sup.mask.push_back(rng.integer(0, 1));
        }
        EmbeddingModel model;
        model.x = testing::random_matrix(rng, n, d);
        model.y = testing::random_matrix(rng, n, d);
        model.clf_w = testing::random_matrix(rng, d, 1);
        model.clf_b = rng.uniform(-0.5, 0.5);
        model.has_classifier = true;

        const double alpha = t % 4 == 0 ? 0.0 : rng.uniform(0.1, 5.0);
        const double beta = t % 4 == 1 ? 0.0 : rng.uniform(0.1, 5.0);
        const Objective obj{walk, c, lap, sup, alpha, beta};
        const auto g = gradients(model, obj);

        bool ok = true;
        auto check = [&](double analytic, double& param) {
            const double keep = param;
            param = keep + h;
            const double up = total_objective(model, obj);
            param = keep - h;
            const double down = total_objective(model, obj);
            param = keep;
            const double numeric = (up - down) / (2 * h);
            const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, rel);
            ok &= rel <= 1e-4;
        };
        for (Eigen::Index i = 0; i < model.x.size(); ++i)
            check(g.dx.data()[i], model.x.data()[i]);
        for (Eigen::Index i = 0; i < model.y.size(); ++i)
            check(g.dy.data()[i], model.y.data()[i]);
        for (Eigen::Index i = 0; i < model.clf_w.size(); ++i)
            check(g.dw(i), model.clf_w(i));
        check(g.db, model.clf_b);
        out.expect(ok, "instance " + std::to_string(t) + " (alpha " + fmt(alpha) + ", beta " + fmt(beta) + ")");
    }
    out.summary = "worst relative error " + fmt(worst);
}

// ---------------------------------------------------------------------------
// 5. training sanity

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("dnsembed_acceptance_" + name);
    fs::remove_all(dir);
    return dir;
}

void criterion_training(Outcome& out)
{
    const auto data_dir = scratch("train_data");
    write_synth(generate(SynthConfig{}), data_dir.string());
    auto cfg = PipelineConfig::for_synth_dir(data_dir.string());
    cfg.method = Method::JdeS;
    auto data = run_ingest(cfg);
    const auto embedding = run_embed(data, cfg);
    const double first = embedding.trace.front(), last = embedding.trace.back();
    out.expect(last < first, "jde_s objective went from " + fmt(first) + " to " + fmt(last));
    fs::remove_all(data_dir);

    testing::Rng rng(505);
    const int n = 10, d = 3;
    const auto walk = walk_matrix(testing::random_graph(rng, n, 0.4), 3, 1.0);
    const ConstraintMatrix none{Matrix::Zero(n, n)};
    const Supervision sup{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    TrainConfig tc;
    tc.dim = d;
    tc.alpha = 0.0;
    tc.beta = 0.0;
    tc.iterations = 2000;
    const auto fit = semi_fit(walk, none, sup, tc);
    const auto svd = unsupervised_embed(walk, d);
    const double got = (walk.m - fit.model.x * fit.model.y.transpose()).squaredNorm();
    const double opt = (walk.m - svd.x * svd.y.transpose()).squaredNorm();
    out.expect(got <= 1.1 * opt, "10-node fit residual " + fmt(got) + " vs optimum " + fmt(opt));
    out.summary = "jde_s objective " + fmt(first) + " -> " + fmt(last) + "; 10-node residual " + fmt(got) +
                  " vs svd " + fmt(opt);
}

// ---------------------------------------------------------------------------
// 6. AUC oracle

double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y)
{
    double wins = 0.0, pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        pos += y[i] == 1;
        neg += y[i] == 0;
        if (y[i] != 1)
            continue;
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[j] == 0)
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
    return wins / (pos * neg);
}

void criterion_auc(Outcome& out)
{
    auto auc_of = [](std::vector<double> s, std::vector<int> y) { return roc_auc(s, y).auc; };
    out.expect(auc_of({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0, "perfect ranking");
    out.expect(auc_of({0.9, 0.1}, {0, 1}) == 0.0, "inverted ranking");
    out.expect(auc_of({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5, "all ties");

    testing::Rng rng(606);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int n = rng.integer(2, 200);
        std::vector<double> s(n);
        std::vector<int> y(n);
        const bool coarse = rng.chance(0.5); // coarse scores produce many ties
        for (int i = 0; i < n; ++i) {
            y[i] = rng.integer(0, 1);
            s[i] = coarse ? rng.integer(0, 10) / 10.0 : rng.uniform();
        }
        y[0] = 0;
        y[1] = 1;
        const double gap = std::abs(roc_auc(s, y).auc - pair_count_auc(s, y));
        worst = std::max(worst, gap);
        out.expect(gap <= 1e-12, "set " + std::to_string(t) + " differs by " + fmt(gap));
    }
    out.summary = "worst gap " + fmt(worst);
}

// ---------------------------------------------------------------------------
// 7/8. synthetic end-to-end experiment

const std::vector<Method> kMethods{Method::JdeS, Method::JdeU, Method::PDw, Method::DDw, Method::IDw};
const std::vector<std::string> kOutputFiles{"metrics.json", "roc_mdd.csv", "roc_ire.csv", "predictions_mdd.tsv",
                                            "predictions_ire.tsv"};

/// Runs every method on seeds 1..10 under `root`; returns mean AUC per
/// method and task.
std::map<std::pair<Method, Task>, double> run_experiment(const fs::path& root)
{
    std::map<std::pair<Method, Task>, double> mean;
    const int seeds = 10;
    for (int seed = 1; seed <= seeds; ++seed) {
        SynthConfig synth;
        synth.seed = static_cast<std::uint64_t>(seed);
        const auto data_dir = root / ("seed" + std::to_string(seed)) / "data";
        write_synth(generate(synth), data_dir.string());
        for (auto method : kMethods) {
            auto cfg = PipelineConfig::for_synth_dir(data_dir.string());
            cfg.method = method;
            cfg.out_dir = (root / ("seed" + std::to_string(seed)) / to_string(method)).string();
            for (const auto& report : run_pipeline(cfg).reports)
                mean[{method, report.task}] += report.auc / seeds;
        }
    }
    return mean;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path g_first_run;

void criterion_experiment(Outcome& out)
{
    g_first_run = scratch("experiment_a");
    auto mean = run_experiment(g_first_run);
    auto at = [&](Method m, Task t) { return mean.at({m, t}); };

    for (auto task : {Task::MDD, Task::IRE}) {
        const std::string name = to_string(task);
        const double s = at(Method::JdeS, task), u = at(Method::JdeU, task), p = at(Method::PDw, task);
        out.expect(s - u >= 0.01, name + ": jde_s " + fmt(s) + " not 0.01 above jde_u " + fmt(u));
        out.expect(u - p >= 0.01, name + ": jde_u " + fmt(u) + " not 0.01 above p_dw " + fmt(p));
    }
    out.expect(at(Method::JdeU, Task::MDD) >= at(Method::DDw, Task::MDD), "MDD: jde_u below d_dw");
    out.expect(at(Method::JdeU, Task::IRE) >= at(Method::IDw, Task::IRE), "IRE: jde_u below i_dw");
    out.expect(at(Method::JdeU, Task::MDD) >= 0.85, "jde_u MDD below 0.85");

    std::ostringstream s;
    s << "mean AUC MDD/IRE:";
    for (auto m : kMethods) {
        s << ' ' << to_string(m) << '=';
        s << (mean.count({m, Task::MDD}) ? fmt(at(m, Task::MDD)) : "-") << '/';
        s << (mean.count({m, Task::IRE}) ? fmt(at(m, Task::IRE)) : "-");
    }
    out.summary = s.str();
}

void criterion_determinism(Outcome& out)
{
    if (g_first_run.empty() || !fs::exists(g_first_run)) {
        out.expect(false, "first experiment run missing");
        return;
    }
    const auto second = scratch("experiment_b");
    run_experiment(second);
    std::size_t compared = 0;
    for (int seed = 1; seed <= 10; ++seed)
        for (auto method : kMethods)
            for (const auto& file : kOutputFiles) {
                const auto rel = fs::path("seed" + std::to_string(seed)) / to_string(method) / file;
                const bool a = fs::exists(g_first_run / rel), b = fs::exists(second / rel);
                out.expect(a == b, rel.string() + " present in only one run");
                if (a && b) {
                    ++compared;
                    out.expect(slurp(g_first_run / rel) == slurp(second / rel), rel.string() + " differs");
                }
            }
    out.summary = std::to_string(compared) + " files compared";
    fs::remove_all(second);
    fs::remove_all(g_first_run);
}

struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<void(Outcome&)> run;
};

} // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {1, "math identities, graph blocks, jaccard oracle", 10, criterion_identities},
        {2, "walk matrix oracle", 5, criterion_walk},
        {3, "svd optimality", 30, criterion_svd},
        {4, "gradient check", 30, criterion_gradients},
        {5, "training sanity", 60, criterion_training},
        {6, "auc oracle", 60, criterion_auc},
        {7, "synthetic end-to-end ordering", 300, criterion_experiment},
        {8, "determinism", 300, criterion_determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Outcome out;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.expect(secs <= c.budget_s, "took " + fmt(secs) + " s, budget " + fmt(c.budget_s) + " s");

        const bool ok = out.failures.empty();
        failed += !ok;
        std::cout << "criterion " << c.id << " [" << (ok ? "PASS" : "FAIL") << "] " << c.title << " ("
                  << fmt(secs) << " s)";
        if (!out.summary.empty())
            std::cout << ": " << out.summary;
        std::cout << '\n';
        for (std::size_t i = 0; i < out.failures.size() && i < 5; ++i)
            std::cout << "    " << out.failures[i] << '\n';
        if (out.failures.size() > 5)
            std::cout << "    ... " << out.failures.size() - 5 << " more\n";
        std::cout.flush();
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
    return failed ? 1 : 0;
}
