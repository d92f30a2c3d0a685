#include "stwf/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "stwf/audit.hpp"
#include "stwf/data.hpp"
#include "stwf/response.hpp"
#include "stwf/serialize.hpp"
#include "stwf/train.hpp"
#include "stwf/welfare.hpp"

namespace fs = std::filesystem;

namespace stwf::cli {

namespace {

// ---------------------------------------------------------------------------
// Formatting and files

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

fs::path output_dir(const std::string& dir) {
    fs::path p(dir);
    if (const char* root = std::getenv("STWF_OUTPUT_ROOT"); root && *root && p.is_relative()) {
        p = fs::path(root) / p;
    }
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) {
        throw RuntimeFailure("cannot create output directory " + p.string() + ": " + ec.message());
    }
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw RuntimeFailure("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw RuntimeFailure("failed writing " + path.string());
    }
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        double v = 0.0;
        auto res = std::from_chars(part.data(), part.data() + part.size(), v);
        if (res.ec != std::errc() || res.ptr != part.data() + part.size()) {
            throw ValidationError("cannot parse value '" + part + "'");
        }
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Worker pool: runs tasks 0..n-1, results are stored by index so output order
// never depends on scheduling.

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(jobs), n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) task(i);
        });
    }
    for (auto& t : pool) t.join();
}

int default_jobs() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
    std::string dataset = "synthetic";  // synthetic | csv
    std::string data_path;
    std::string schema_path;
    Index n = 10000;
    double train_fraction = 0.8;
    std::optional<bool> normalize;  // default: csv yes, synthetic no
    std::string algo = "stwf";
    TrainConfig train;
    std::string components = "imp,sf";
    std::string optimizer = "adam";
    std::string response = "closed";
    int order = 1;
    std::optional<double> cost_scale;  // default: synthetic 5, csv 1
    std::string response_model;
    std::string labeler;
    std::uint64_t seed = 0;
    int seeds = 1;
    bool cv = false;
    int cv_seeds = 7;
    std::string out = "results";
    int jobs = default_jobs();

    std::vector<std::uint64_t> seed_list() const {
        std::vector<std::uint64_t> s;
        for (int i = 0; i < seeds; ++i) s.push_back(seed + static_cast<std::uint64_t>(i));
        return s;
    }

    void finalize() {
        require(dataset == "synthetic" || dataset == "csv", "dataset must be 'synthetic' or 'csv'");
        if (dataset == "csv") {
            require(!data_path.empty() && !schema_path.empty(), "csv datasets need --data and --schema");
        }
        require(seeds >= 1, "--seeds must be at least 1");
        require(n >= 2, "--n must be at least 2");
        require(train_fraction > 0.0 && train_fraction < 1.0, "--train-fraction must be in (0, 1)");
        train.components = SwfComponents::parse(components);
        train.optimizer = optimizer_from_string(optimizer);
        algo_from_string(algo);
        response_kind_from_string(response);
        require(order == 1 || order == 2, "--order must be 1 or 2");
        if (response == "learned") {
            require(!response_model.empty(), "learned responses need --response-model");
        }
        require(jobs >= 1, "--jobs must be at least 1");
        train.validate();
    }

    Json to_json() const {
        Json j;
        j["dataset"] = dataset;
        if (dataset == "csv") {
            j["data"] = data_path;
            j["schema"] = schema_path;
        } else {
            j["n"] = n;
        }
        j["train_fraction"] = train_fraction;
        j["normalize"] = normalize.value_or(dataset == "csv");
        j["algo"] = algo;
        j["train"] = stwf::to_json(train);
        j["response"] = {{"kind", response},
                         {"order", order},
                         {"cost_scale", cost_scale.value_or(dataset == "csv" ? 1.0 : 5.0)}};
        if (!response_model.empty()) j["response"]["model"] = response_model;
        j["labeler"] = labeler.empty() ? (dataset == "csv" ? "learned" : "ground-truth") : labeler;
        j["seed"] = seed;
        j["seeds"] = seeds;
        j["cv"] = cv;
        if (cv) j["cv_seeds"] = cv_seeds;
        return j;
    }
};

void add_data_options(CLI::App* app, ExperimentConfig& cfg) {
    app->add_option("--dataset", cfg.dataset, "synthetic or csv");
    app->add_option("--data", cfg.data_path, "CSV file (csv datasets)");
    app->add_option("--schema", cfg.schema_path, "schema JSON (csv datasets)");
    app->add_option("--n", cfg.n, "synthetic population size");
    app->add_option("--train-fraction", cfg.train_fraction, "share of rows used for training");
    app->add_option("--normalize", cfg.normalize, "z-score continuous features");
    app->add_option("--labeler", cfg.labeler, "labeler JSON (default: ground truth or trained per seed)");
    app->add_option("--seed", cfg.seed, "first seed");
    app->add_option("--seeds", cfg.seeds, "number of consecutive seeds");
    app->add_option("--out", cfg.out, "output directory");
    app->add_option("--jobs", cfg.jobs, "parallel workers");
}

void add_response_options(CLI::App* app, ExperimentConfig& cfg) {
    app->add_option("--response", cfg.response, "closed, numeric or learned");
    app->add_option("--order", cfg.order, "information level K (1 or 2)");
    app->add_option("--cost-scale", cfg.cost_scale, "quadratic cost scale a");
    app->add_option("--response-model", cfg.response_model, "learned response JSON");
}

void add_train_options(CLI::App* app, ExperimentConfig& cfg) {
    app->add_option("--algo", cfg.algo, "stwf, erm, safe, ei or be")
        ->check(CLI::IsMember({"stwf", "erm", "safe", "ei", "be"}));
    app->add_option("--lambda1", cfg.train.lambda1, "social welfare weight");
    app->add_option("--lambda2", cfg.train.lambda2, "agent welfare weight");
    app->add_option("--components", cfg.components, "imp, sf or imp,sf");
    app->add_option("--epochs", cfg.train.epochs);
    app->add_option("--batch-size", cfg.train.batch_size);
    app->add_option("--lr", cfg.train.learning_rate, "learning rate");
    app->add_option("--optimizer", cfg.optimizer, "adam or sgd");
    app->add_option("--temperature", cfg.train.temperature, "fairness surrogate temperature");
    app->add_option("--baseline-lambda", cfg.train.baseline_lambda, "SAFE / EI / BE regulariser strength");
    app->add_option("--validation-fraction", cfg.train.validation_fraction);
    app->add_flag("--cv", cfg.cv, "select lr / lambda1 / lambda2 by grid search first");
    app->add_option("--cv-seeds", cfg.cv_seeds, "seeds per grid point");
}

// ---------------------------------------------------------------------------
// Per-seed pipeline

struct Prepared {
    Dataset train;
    Dataset test;
    LabelingModel h;
    ResponseModel resp;
};

CsvSchema schema_for(const ExperimentConfig& cfg) { return load_schema(cfg.schema_path); }

Prepared prepare(const ExperimentConfig& cfg, std::uint64_t seed) {
    Prepared p;
    SplitOptions so;
    so.seed = seed;
    so.train_fraction = cfg.train_fraction;
    if (cfg.dataset == "synthetic") {
        SyntheticSpec spec = SyntheticSpec::preset(seed);
        spec.n = cfg.n;
        so.normalize = cfg.normalize.value_or(false);
        std::tie(p.train, p.test) = split(gen_synthetic(spec), so);
        p.h = cfg.labeler.empty() ? spec.labeler() : load_labeler(cfg.labeler);
    } else {
        so.normalize = cfg.normalize.value_or(true);
        std::tie(p.train, p.test) = split(load_csv(cfg.data_path, schema_for(cfg)), so);
        if (cfg.labeler.empty()) {
            LabelerTrainConfig lc;
            lc.seed = seed;
            p.h = train_labeler(p.train.features(), p.train.labels(), MlpSpec{}, lc).model;
        } else {
            p.h = load_labeler(cfg.labeler);
        }
    }
    if (p.h.dim() != p.train.dim()) {
        throw DimensionError("labeler expects " + std::to_string(p.h.dim()) + " features, data has " +
                             std::to_string(p.train.dim()));
    }
    p.resp.kind = response_kind_from_string(cfg.response);
    p.resp.order = cfg.order;
    p.resp.cost.scale = cfg.cost_scale.value_or(cfg.dataset == "csv" ? 1.0 : 5.0);
    p.resp.cost.mask = p.train.improvable_mask();
    p.resp.numeric.seed = seed;
    if (p.resp.kind == ResponseKind::Learned) {
        p.resp.learned = std::make_shared<LearnedResponse>(load_learned_response(cfg.response_model));
        require(p.resp.learned->dim() == p.train.dim(), "learned response dimension does not match the data");
    }
    return p;
}

struct RunRow {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::uint64_t seed = 0;
    WelfareReport welfare;
    FairnessReport fairness;
    bool ok = true;
    std::string error;
    Policy policy;
    TrainTrace trace;
};

RunRow run_seed(const ExperimentConfig& cfg, const TrainConfig& train_cfg, std::uint64_t seed) {
    RunRow row;
    row.lambda1 = train_cfg.lambda1;
    row.lambda2 = train_cfg.lambda2;
    row.seed = seed;
    const Prepared p = prepare(cfg, seed);
    TrainConfig tc = train_cfg;
    tc.seed = seed;
    TrainResult r = train_policy(p.train, p.h, p.resp, algo_from_string(cfg.algo), tc);
    const Matrix moved = apply_response_batch(p.resp, r.policy, p.test.features());
    row.welfare = welfare_report(r.policy, p.test, p.h, moved);
    if (p.test.has_groups()) {
        row.fairness = fairness_report(r.policy, p.test, moved);
    } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.fairness.ei_gap = row.fairness.be_gap = row.fairness.dp_gap = row.fairness.eo_gap = nan;
    }
    row.policy = std::move(r.policy);
    row.trace = std::move(r.trace);
    return row;
}

const char* kRowHeader = "lambda1,lambda2,seed,dw,imp,sf,aw,swf,total,ei_gap,be_gap,dp_gap,eo_gap";

std::array<double, 10> metrics(const RunRow& r) {
    return {r.welfare.dw,      r.welfare.imp,      r.welfare.sf,       r.welfare.aw,       r.welfare.swf,
            r.welfare.total,   r.fairness.ei_gap,  r.fairness.be_gap,  r.fairness.dp_gap,  r.fairness.eo_gap};
}

std::string row_line(const RunRow& r) {
    std::string s = num(r.lambda1) + "," + num(r.lambda2) + "," + std::to_string(r.seed);
    if (!r.ok) {
        for (int k = 0; k < 10; ++k) s += ",nan";
        return s;
    }
    for (double v : metrics(r)) s += "," + num(v);
    return s;
}

struct Aggregate {
    std::array<double, 10> mean{};
    std::array<double, 10> std{};
    int count = 0;
};

// Mean and sample standard deviation over successful rows, ignoring NaN cells.
Aggregate aggregate(const std::vector<const RunRow*>& rows) {
    Aggregate a;
    for (std::size_t k = 0; k < 10; ++k) {
        std::vector<double> vals;
        for (const RunRow* r : rows) {
            if (r->ok && !std::isnan(metrics(*r)[k])) vals.push_back(metrics(*r)[k]);
        }
        double sum = 0.0;
        for (double v : vals) sum += v;
        const double m = vals.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) ss += (v - m) * (v - m);
        a.mean[k] = m;
        a.std[k] = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1))
                                   : std::numeric_limits<double>::quiet_NaN();
    }
    for (const RunRow* r : rows) a.count += r->ok ? 1 : 0;
    return a;
}

std::string aggregate_line(double l1, double l2, const Aggregate& a) {
    std::string s = num(l1) + "," + num(l2) + ",mean±std";
    for (std::size_t k = 0; k < 10; ++k) s += "," + num(a.mean[k]) + "±" + num(a.std[k]);
    return s;
}

std::string config_comment(const Json& config) { return "# config: " + config.dump() + "\n"; }

std::vector<RunRow> run_all(const ExperimentConfig& cfg, const std::vector<TrainConfig>& configs,
                            std::ostream& err) {
    const auto seeds = cfg.seed_list();
    std::vector<RunRow> rows(configs.size() * seeds.size());
    std::mutex log_mutex;
    parallel_for(rows.size(), cfg.jobs, [&](std::size_t i) {
        const TrainConfig& tc = configs[i / seeds.size()];
        const std::uint64_t seed = seeds[i % seeds.size()];
        try {
            rows[i] = run_seed(cfg, tc, seed);
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            rows[i].lambda1 = tc.lambda1;
            rows[i].lambda2 = tc.lambda2;
            rows[i].seed = seed;
            rows[i].ok = false;
            rows[i].error = e.what();
            std::lock_guard<std::mutex> lock(log_mutex);
            err << "run lambda1=" << num(tc.lambda1) << " lambda2=" << num(tc.lambda2) << " seed=" << seed
                << " failed: " << e.what() << '\n';
        }
    });
    return rows;
}

// Validation errors inside workers must surface as exit 1, so they are
// checked up front on the first seed before fanning out.
void preflight(const ExperimentConfig& cfg) { prepare(cfg, cfg.seed); }

TrainConfig maybe_cross_validate(const ExperimentConfig& cfg, Json& selection, std::ostream& out) {
    if (!cfg.cv) {
        return cfg.train;
    }
    const Prepared p = prepare(cfg, cfg.seed);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < cfg.cv_seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
    TrainConfig base = cfg.train;
    base.trace = false;
    const CvResult cv = cross_validate(p.train, p.h, p.resp, algo_from_string(cfg.algo), base, CvGrid{}, seeds);
    TrainConfig chosen = cfg.train;
    chosen.learning_rate = cv.best.learning_rate;
    chosen.lambda1 = cv.best.lambda1;
    chosen.lambda2 = cv.best.lambda2;
    selection = {{"learning_rate", chosen.learning_rate}, {"lambda1", chosen.lambda1}, {"lambda2", chosen.lambda2},
                 {"candidates", cv.candidates.size()}};
    out << "cross-validation selected lr=" << num(chosen.learning_rate) << " lambda1=" << num(chosen.lambda1)
        << " lambda2=" << num(chosen.lambda2) << " (" << cv.candidates.size() << " candidates)\n";
    return chosen;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen_synthetic(const ExperimentConfig& cfg, std::ostream& out) {
    SyntheticSpec spec = SyntheticSpec::preset(cfg.seed);
    spec.n = cfg.n;
    const Dataset data = gen_synthetic(spec);
    const fs::path dir = output_dir(cfg.out);
    Json config = {{"command", "gen-synthetic"}, {"n", cfg.n}, {"seed", cfg.seed}};
    write_csv(data, (dir / "synthetic.csv").string(), "config: " + config.dump());
    write_text(dir / "synthetic.schema.json", schema_to_json(default_schema(data)) + "\n");
    Json h = to_json(spec.labeler());
    h["config"] = config;
    save_json((dir / "labeler.json").string(), h);
    out << "wrote " << data.size() << " samples (" << data.groups().sum() << " in group 1) to "
        << (dir / "synthetic.csv").string() << '\n';
    return 0;
}

int cmd_train_h(const ExperimentConfig& cfg, const MlpSpec& arch, const LabelerTrainConfig& lcfg_in,
                std::ostream& out) {
    ExperimentConfig c = cfg;
    c.labeler.clear();
    Prepared p;
    SplitOptions so;
    so.seed = cfg.seed;
    so.train_fraction = cfg.train_fraction;
    Dataset full;
    if (cfg.dataset == "synthetic") {
        SyntheticSpec spec = SyntheticSpec::preset(cfg.seed);
        spec.n = cfg.n;
        full = gen_synthetic(spec);
        so.normalize = cfg.normalize.value_or(false);
    } else {
        full = load_csv(cfg.data_path, schema_for(cfg));
        so.normalize = cfg.normalize.value_or(true);
    }
    auto [train, test] = split(full, so);
    LabelerTrainConfig lcfg = lcfg_in;
    lcfg.seed = cfg.seed;
    const LabelerFit fit = train_labeler(train.features(), train.labels(), arch, lcfg);
    auto accuracy = [&](const Dataset& d) {
        const Vector q = fit.model.eval_batch(d.features());
        Index ok = 0;
        for (Index i = 0; i < d.size(); ++i) ok += decide(q[i]) == d.labels()[i];
        return static_cast<double>(ok) / static_cast<double>(d.size());
    };
    const fs::path dir = output_dir(cfg.out);
    Json config = cfg.to_json();
    config["command"] = "train-h";
    config["labeler_train"] = {{"hidden", arch.hidden},
                               {"activation", to_string(arch.activation)},
                               {"epochs", lcfg.epochs},
                               {"batch_size", lcfg.batch_size},
                               {"learning_rate", lcfg.learning_rate}};
    Json j = to_json(fit.model);
    j["config"] = config;
    j["train_accuracy"] = accuracy(train);
    j["test_accuracy"] = accuracy(test);
    j["final_loss"] = fit.epoch_loss.empty() ? 0.0 : fit.epoch_loss.back();
    save_json((dir / "labeler.json").string(), j);
    out << "labeler train accuracy " << num(accuracy(train)) << ", test accuracy " << num(accuracy(test)) << '\n';
    return 0;
}

int cmd_learn_response(const ExperimentConfig& cfg, int n_policies, int n_unseen, Index samples,
                       const ResponseArch& arch, const ResponseTrainConfig& rcfg_in, std::ostream& out) {
    require(n_policies >= 1 && n_unseen >= 1, "need at least one training and one unseen policy");
    ExperimentConfig c = cfg;
    c.response = "closed";
    c.response_model.clear();
    const Prepared p = prepare(c, cfg.seed);
    const Index take = std::min(samples, p.train.size());
    std::vector<Index> idx(static_cast<std::size_t>(take));
    for (Index i = 0; i < take; ++i) idx[static_cast<std::size_t>(i)] = i;
    const Matrix xs = p.train.subset(idx).features();
    auto policies = random_linear_policies(static_cast<std::size_t>(n_policies + n_unseen), p.train.dim(), cfg.seed);
    for (auto& pol : policies) pol.set_domain(p.train.domain());
    const std::vector<Policy> seen(policies.begin(), policies.begin() + n_policies);
    const std::vector<Policy> unseen(policies.begin() + n_policies, policies.end());
    const ResponseRows rows = build_response_dataset(xs, seen, cfg.order, p.resp);
    const ResponseRows test_rows = build_response_dataset(xs, unseen, cfg.order, p.resp);
    ResponseTrainConfig rcfg = rcfg_in;
    rcfg.seed = cfg.seed;
    const LearnedResponseFit fit = train_learned_response(rows, arch, rcfg);
    const ResponseErrorStats unseen_stats = evaluate_learned_response(fit.model, test_rows);

    const fs::path dir = output_dir(cfg.out);
    Json config = cfg.to_json();
    config["command"] = "learn-response";
    config["policies"] = n_policies;
    config["unseen_policies"] = n_unseen;
    config["samples"] = take;
    config["response_train"] = {{"hidden", arch.hidden},         {"activation", to_string(arch.activation)},
                                {"epochs", rcfg.epochs},         {"batch_size", rcfg.batch_size},
                                {"learning_rate", rcfg.learning_rate}, {"holdout", rcfg.holdout_fraction}};
    Json j = to_json(fit.model);
    j["config"] = config;
    auto stats = [](const ResponseErrorStats& s) {
        return Json{{"median_relative_error", s.median_relative_error},
                    {"max_abs_error", s.max_abs_error},
                    {"mse", s.mse},
                    {"moving_rows", s.moving_rows}};
    };
    j["train_error"] = stats(fit.train);
    j["heldout_error"] = stats(fit.heldout);
    j["unseen_policy_error"] = stats(unseen_stats);
    save_json((dir / "response.json").string(), j);
    write_response_csv(rows, (dir / "response_rows.csv").string());
    out << "learned response: median relative error " << num(unseen_stats.median_relative_error)
        << " on " << n_unseen << " unseen policies\n";
    return 0;
}

int cmd_train(ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
    preflight(cfg);
    Json selection;
    const TrainConfig chosen = maybe_cross_validate(cfg, selection, out);
    const std::vector<RunRow> rows = run_all(cfg, {chosen}, err);

    const fs::path dir = output_dir(cfg.out);
    Json config = cfg.to_json();
    config["command"] = "train";
    if (cfg.cv) {
        config["cv_selection"] = selection;
        config["train"] = to_json(chosen);
    }
    std::string csv = config_comment(config) + kRowHeader + "\n";
    std::vector<const RunRow*> ptrs;
    for (const RunRow& r : rows) {
        csv += row_line(r) + "\n";
        if (!r.ok) csv += "# error seed=" + std::to_string(r.seed) + ": " + r.error + "\n";
        ptrs.push_back(&r);
        if (r.ok) {
            Json pj = to_json(r.policy);
            pj["config"] = config;
            pj["seed"] = r.seed;
            save_json((dir / ("policy_seed" + std::to_string(r.seed) + ".json")).string(), pj);
            if (chosen.trace) {
                write_text(dir / ("trace_seed" + std::to_string(r.seed) + ".csv"),
                           config_comment(config) + r.trace.to_csv());
            }
        }
    }
    const Aggregate agg = aggregate(ptrs);
    csv += aggregate_line(chosen.lambda1, chosen.lambda2, agg) + "\n";
    write_text(dir / "results.csv", csv);

    Json summary;
    summary["config"] = config;
    const char* names[] = {"dw", "imp", "sf", "aw", "swf", "total", "ei_gap", "be_gap", "dp_gap", "eo_gap"};
    for (std::size_t k = 0; k < 10; ++k) {
        summary["mean"][names[k]] = std::isnan(agg.mean[k]) ? Json(nullptr) : Json(agg.mean[k]);
        summary["std"][names[k]] = std::isnan(agg.std[k]) ? Json(nullptr) : Json(agg.std[k]);
    }
    summary["runs"] = rows.size();
    summary["failed"] = rows.size() - static_cast<std::size_t>(agg.count);
    save_json((dir / "summary.json").string(), summary);

    out << cfg.algo << " over " << rows.size() << " seed(s):";
    for (std::size_t k = 0; k < 6; ++k) out << ' ' << names[k] << '=' << num(agg.mean[k]) << "±" << num(agg.std[k]);
    out << '\n';
    return agg.count == static_cast<int>(rows.size()) ? 0 : 2;
}

int cmd_sweep(ExperimentConfig cfg, const std::string& axis, const std::string& values_text, std::ostream& out,
              std::ostream& err) {
    require(axis == "lambda1" || axis == "lambda2", "--axis must be lambda1 or lambda2");
    const std::vector<double> values = parse_values(values_text);
    require(!values.empty(), "--values must list at least one value");
    preflight(cfg);
    std::vector<TrainConfig> configs;
    for (double v : values) {
        TrainConfig tc = cfg.train;
        tc.trace = false;
        (axis == "lambda1" ? tc.lambda1 : tc.lambda2) = v;
        tc.validate();
        configs.push_back(tc);
    }
    const std::vector<RunRow> rows = run_all(cfg, configs, err);
    const std::size_t per_value = cfg.seed_list().size();

    Json config = cfg.to_json();
    config["command"] = "sweep";
    config["axis"] = axis;
    config["values"] = values;
    std::string csv = config_comment(config) + kRowHeader + "\n";
    for (const RunRow& r : rows) {
        csv += row_line(r) + "\n";
        if (!r.ok) {
            csv += "# error lambda1=" + num(r.lambda1) + " lambda2=" + num(r.lambda2) +
                   " seed=" + std::to_string(r.seed) + ": " + r.error + "\n";
        }
    }
    int failed = 0;
    for (std::size_t v = 0; v < values.size(); ++v) {
        std::vector<const RunRow*> group;
        for (std::size_t s = 0; s < per_value; ++s) group.push_back(&rows[v * per_value + s]);
        const Aggregate a = aggregate(group);
        failed += static_cast<int>(per_value) - a.count;
        csv += aggregate_line(configs[v].lambda1, configs[v].lambda2, a) + "\n";
        out << axis << '=' << num(values[v]) << ": swf=" << num(a.mean[4]) << " aw=" << num(a.mean[3])
            << " total=" << num(a.mean[5]) << '\n';
    }
    const fs::path dir = output_dir(cfg.out);
    write_text(dir / "sweep.csv", csv);
    out << "wrote " << rows.size() << " rows to " << (dir / "sweep.csv").string() << '\n';
    return failed == 0 ? 0 : 2;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& policy_path, std::ostream& out) {
    require(!policy_path.empty(), "evaluate needs --policy");
    Policy policy = load_policy(policy_path);
    const Prepared p = prepare(cfg, cfg.seed);
    if (policy.dim() != p.test.dim()) {
        throw DimensionError("policy expects " + std::to_string(policy.dim()) + " features, data has " +
                             std::to_string(p.test.dim()));
    }
    if (!policy.domain().bounded()) {
        policy.set_domain(p.test.domain());
    }
    const Matrix moved = apply_response_batch(p.resp, policy, p.test.features());
    RunRow row;
    row.seed = cfg.seed;
    row.welfare = welfare_report(policy, p.test, p.h, moved);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.fairness.ei_gap = row.fairness.be_gap = row.fairness.dp_gap = row.fairness.eo_gap = nan;
    if (p.test.has_groups()) {
        row.fairness = fairness_report(policy, p.test, moved);
    }
    const fs::path dir = output_dir(cfg.out);
    Json config = cfg.to_json();
    config["command"] = "evaluate";
    config["policy"] = policy_path;
    Json w = to_json(row.welfare);
    w["config"] = config;
    Json f = to_json(row.fairness);
    f["config"] = config;
    save_json((dir / "welfare.json").string(), w);
    save_json((dir / "fairness.json").string(), f);
    write_text(dir / "report.csv", config_comment(config) + kRowHeader + "\n" + row_line(row) + "\n");
    out << "dw=" << num(row.welfare.dw) << " imp=" << num(row.welfare.imp) << " sf=" << num(row.welfare.sf)
        << " aw=" << num(row.welfare.aw) << " total=" << num(row.welfare.total) << '\n';
    return 0;
}

struct AuditOptions {
    std::string check = "builtin";
    std::string policy;
    std::string policy_b;
    std::string labeler;
    int order = 1;
    double lo = 0.0;
    double hi = 1.0;
    int count = 11;
    double tol = 1e-9;
    std::string out = "results";
};

std::vector<AuditReport> builtin_audits() {
    std::vector<AuditReport> reports;
    const GridSpec unit = GridSpec::uniform(1, 0.0, 1.0, 21);
    Vector c(3);
    c << 0.0, 4.0, -4.0;
    const LabelingModel hiring = LabelingModel::closed_quadratic(1, c);
    Vector w(1);
    w << 1.0;
    const Policy rising = Policy::linear_raw(w, 0.0);
    const Policy quad = Policy::polynomial(1, 2, c);

    auto named = [&](AuditReport r, const std::string& id) {
        r.condition = id;
        reports.push_back(std::move(r));
    };
    named(check_taylor_exactness(rising, 1, unit, 1e-9), "taylor-exactness:linear,K=1");
    named(check_taylor_exactness(quad, 1, unit, 1e-9), "taylor-exactness:quadratic,K=1");
    named(check_taylor_exactness(quad, 2, unit, 1e-9), "taylor-exactness:quadratic,K=2");
    named(check_safety_alignment(hiring, rising, 1, unit, GridSpec::uniform(1, 0.55, 1.0, 10), 1e-12),
          "safety-alignment:quadratic-h,linear-f");
    Vector lin(2);
    lin << 0.0, 1.0;
    named(check_safety_alignment(LabelingModel::closed_polynomial(1, 1, lin), rising, 1, unit, 1e-12),
          "safety-alignment:f=h-linear");
    SmoothFunction fa{1, 2, [](const Vector& x) { return std::exp(x[0]) - x[0] - 1.0; },
                      [](const Vector& x) { return Vector::Constant(1, std::exp(x[0]) - 1.0); },
                      [](const Vector& x) { return Matrix::Constant(1, 1, std::exp(x[0])); }};
    SmoothFunction fb{1, 2, [](const Vector& x) { return 0.5 * x[0] * x[0] + 0.5; },
                      [](const Vector& x) { return Vector::Constant(1, x[0]); },
                      [](const Vector&) { return Matrix::Constant(1, 1, 1.0); }};
    named(check_offset_equivalence(fa, fb, 2, GridSpec::point(Vector::Zero(1)), GridSpec::uniform(1, -1.0, 1.0, 21),
                                   1e-12),
          "offset-equivalence:exp-vs-quadratic,K=2");
    return reports;
}

int cmd_audit(const AuditOptions& opt, std::ostream& out) {
    std::vector<AuditReport> reports;
    if (opt.check == "builtin") {
        reports = builtin_audits();
    } else {
        require(!opt.policy.empty(), "audit --check " + opt.check + " needs --policy");
        const Policy f = load_policy(opt.policy);
        const GridSpec grid = GridSpec::uniform(f.dim(), opt.lo, opt.hi, opt.count);
        if (opt.check == "taylor") {
            reports.push_back(check_taylor_exactness(f, opt.order, grid, opt.tol));
        } else if (opt.check == "safety") {
            require(!opt.labeler.empty(), "audit --check safety needs --labeler");
            reports.push_back(check_safety_alignment(load_labeler(opt.labeler), f, opt.order, grid, opt.tol));
        } else if (opt.check == "offset") {
            require(!opt.policy_b.empty(), "audit --check offset needs --policy-b");
            reports.push_back(check_offset_equivalence(f, load_policy(opt.policy_b), opt.order, grid, opt.tol));
        } else {
            throw ValidationError("unknown audit check '" + opt.check + "'");
        }
    }
    Json all = Json::array();
    for (const AuditReport& r : reports) {
        out << (r.pass ? "PASS " : "FAIL ") << r.condition << " worst=" << num(r.worst);
        if (r.offset) out << " C=" << num(*r.offset);
        if (r.realizable) out << " realizable=" << (*r.realizable ? "yes" : "no");
        out << '\n';
        all.push_back(to_json(r));
    }
    const fs::path dir = output_dir(opt.out);
    Json doc = {{"config",
                 {{"command", "audit"}, {"check", opt.check}, {"order", opt.order}, {"lo", opt.lo}, {"hi", opt.hi},
                  {"count", opt.count}, {"tol", opt.tol}}},
                {"reports", all}};
    save_json((dir / "audit.json").string(), doc);
    return 0;
}

int cmd_reproduce(const std::string& which, const std::string& out_dir, std::ostream& out) {
    const ExampleReport r = reproduce_example(which);
    if (which == "ex2") {
        const ExampleAgent& a = r.agents.front();
        out << "x*=" << num(a.x_star) << " h(x*)=" << num(a.h_after) << " h(x)=" << num(a.h_before)
            << " IMP=" << num(r.imp) << " SF=" << num(r.sf) << " AW=" << num(r.aw) << '\n';
    } else {
        out << "IMP-maximising line: slope=" << num(r.best_slope) << " intercept=" << num(r.best_intercept)
            << " IMP=" << num(r.imp) << " SF=" << num(r.sf) << '\n';
        out << "least-squares line: slope=" << num(r.ls_slope) << " intercept=" << num(r.ls_intercept) << '\n';
        out << "f=1: AW=" << num(r.constant_aw) << '\n';
    }
    for (const auto& line : r.checks) out << line << '\n';
    const fs::path dir = output_dir(out_dir);
    Json j = to_json(r);
    j["config"] = {{"command", "reproduce-example"}, {"example", which}};
    save_json((dir / ("example_" + which + ".json")).string(), j);
    if (!r.pass) {
        throw RuntimeFailure("example " + which + " did not reproduce");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Config files: a flat JSON object whose keys are long flag names. Its
// entries are spliced in before the command-line flags, and every option
// keeps its last value, so flags win.

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::optional<std::string> path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ValidationError("--config needs a file name");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (!path) return rest;
    const Json j = load_json(*path);
    require(j.is_object(), "config file must hold a JSON object");
    std::vector<std::string> injected;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string flag = "--" + it.key();
        const Json& v = it.value();
        if (v.is_boolean()) {
            if (v.get<bool>()) injected.push_back(flag);
        } else if (v.is_array()) {
            std::string joined;
            for (const Json& e : v) {
                if (!joined.empty()) joined += ",";
                joined += e.is_string() ? e.get<std::string>() : e.dump();
            }
            injected.push_back(flag);
            injected.push_back(joined);
        } else if (v.is_string()) {
            injected.push_back(flag);
            injected.push_back(v.get<std::string>());
        } else {
            injected.push_back(flag);
            injected.push_back(v.dump());
        }
    }
    if (rest.empty()) return injected;
    std::vector<std::string> merged{rest.front()};
    merged.insert(merged.end(), injected.begin(), injected.end());
    merged.insert(merged.end(), rest.begin() + 1, rest.end());
    return merged;
}

}  // namespace

int run_command(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Welfare-aware strategic classification experiments", "stwf"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough(false);

    ExperimentConfig cfg;

    auto* gen = app.add_subcommand("gen-synthetic", "generate the synthetic population");
    gen->add_option("--n", cfg.n, "population size");
    gen->add_option("--seed", cfg.seed);
    gen->add_option("--out", cfg.out);

    MlpSpec h_arch;
    LabelerTrainConfig h_cfg;
    std::string h_activation = "relu";
    auto* th = app.add_subcommand("train-h", "fit an MLP labeler");
    add_data_options(th, cfg);
    th->add_option("--hidden", h_arch.hidden, "hidden widths")->delimiter(',')->expected(2);
    th->add_option("--activation", h_activation, "relu or softplus");
    th->add_option("--epochs", h_cfg.epochs);
    th->add_option("--batch-size", h_cfg.batch_size);
    th->add_option("--lr", h_cfg.learning_rate);

    int n_policies = 20;
    int n_unseen = 5;
    Index n_samples = 500;
    ResponseArch r_arch;
    ResponseTrainConfig r_cfg;
    auto* lr = app.add_subcommand("learn-response", "fit a response regressor on simulated agents");
    add_data_options(lr, cfg);
    add_response_options(lr, cfg);
    lr->add_option("--policies", n_policies, "training policies");
    lr->add_option("--unseen", n_unseen, "held-out policies");
    lr->add_option("--samples", n_samples, "agents per policy");
    lr->add_option("--hidden", r_arch.hidden)->delimiter(',')->expected(2);
    lr->add_option("--epochs", r_cfg.epochs);
    lr->add_option("--batch-size", r_cfg.batch_size);
    lr->add_option("--lr", r_cfg.learning_rate);

    auto* tr = app.add_subcommand("train", "train a policy over one or more seeds");
    add_data_options(tr, cfg);
    add_response_options(tr, cfg);
    add_train_options(tr, cfg);
    bool no_trace = false;
    tr->add_flag("--no-trace", no_trace, "skip per-epoch validation traces");

    std::string policy_path;
    auto* ev = app.add_subcommand("evaluate", "welfare and fairness of a saved policy");
    add_data_options(ev, cfg);
    add_response_options(ev, cfg);
    ev->add_option("--policy", policy_path, "policy JSON")->required();

    std::string axis = "lambda1";
    std::string values = "0,0.5,1,1.5,2";
    auto* sw = app.add_subcommand("sweep", "vary lambda1 or lambda2 over seeds");
    add_data_options(sw, cfg);
    add_response_options(sw, cfg);
    add_train_options(sw, cfg);
    sw->add_option("--axis", axis, "lambda1 or lambda2")->check(CLI::IsMember({"lambda1", "lambda2"}));
    sw->add_option("--values", values, "comma-separated values");

    AuditOptions aopt;
    auto* au = app.add_subcommand("audit", "grid checks of the alignment conditions");
    au->add_option("--check", aopt.check, "builtin, taylor, safety or offset")
        ->check(CLI::IsMember({"builtin", "taylor", "safety", "offset"}));
    au->add_option("--policy", aopt.policy);
    au->add_option("--policy-b", aopt.policy_b);
    au->add_option("--labeler", aopt.labeler);
    au->add_option("--order", aopt.order);
    au->add_option("--lo", aopt.lo);
    au->add_option("--hi", aopt.hi);
    au->add_option("--count", aopt.count);
    au->add_option("--tol", aopt.tol);
    au->add_option("--out", aopt.out);

    std::string example;
    std::string example_out = "results";
    auto* rx = app.add_subcommand("reproduce-example", "recompute the worked examples");
    rx->add_option("example", example, "ex1 or ex2")->required()->check(CLI::IsMember({"ex1", "ex2"}));
    rx->add_option("--out", example_out);

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::vector<const char*> argv{"stwf"};
        for (const auto& a : args) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::CallForHelp& e) {
            out << app.help();
            return 0;
        } catch (const CLI::CallForAllHelp& e) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        } catch (const CLI::ParseError& e) {
            err << "error: " << e.what() << "\n\n" << app.help();
            return 1;
        }

        if (gen->parsed()) return cmd_gen_synthetic(cfg, out);
        if (rx->parsed()) return cmd_reproduce(example, example_out, out);
        if (au->parsed()) return cmd_audit(aopt, out);
        if (no_trace) cfg.train.trace = false;
        cfg.finalize();
        if (th->parsed()) {
            h_arch.activation = activation_from_string(h_activation);
            return cmd_train_h(cfg, h_arch, h_cfg, out);
        }
        if (lr->parsed()) return cmd_learn_response(cfg, n_policies, n_unseen, n_samples, r_arch, r_cfg, out);
        if (tr->parsed()) return cmd_train(cfg, out, err);
        if (ev->parsed()) return cmd_evaluate(cfg, policy_path, out);
        if (sw->parsed()) return cmd_sweep(cfg, axis, values, out, err);
        err << app.help();
        return 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return 2;
    }
}

int run_command(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_command(args, std::cout, std::cerr);
}

}  // namespace stwf::cli
