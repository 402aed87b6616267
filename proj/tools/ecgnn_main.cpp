#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecgnn/checkpoint.hpp"
#include "ecgnn/datagen.hpp"
#include "ecgnn/errors.hpp"
#include "ecgnn/gradcheck_suite.hpp"
#include "ecgnn/model.hpp"
#include "ecgnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecgnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> from_config) {
    if (flag) return *flag;
    if (from_config) return *from_config;
    if (const char* env = std::getenv("ECGNN_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

// "nc=3:8,nv=8:16,nq=4:10"
GenSizes parse_sizes(const std::string& text, std::size_t dim) {
    GenSizes s;
    s.d = dim;
    if (text.empty()) return s;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(pos, comma - pos);
        const std::size_t eq = part.find('=');
        const std::size_t colon = part.find(':');
        if (eq == std::string::npos || colon == std::string::npos || colon < eq) {
            throw ConfigError("bad --sizes entry '" + part + "' (expected name=lo:hi)");
        }
        const std::string name = part.substr(0, eq);
        const std::size_t lo = std::stoull(part.substr(eq + 1, colon - eq - 1));
        const std::size_t hi = std::stoull(part.substr(colon + 1));
        if (lo < 1 || hi < lo) throw ConfigError("bad --sizes range in '" + part + "'");
        if (name == "nc") {
            s.nc_lo = lo;
            s.nc_hi = hi;
        } else if (name == "nv") {
            s.nv_lo = lo;
            s.nv_hi = hi;
        } else if (name == "nq") {
            s.nq_lo = lo;
            s.nq_hi = hi;
        } else {
            throw ConfigError("bad --sizes name '" + name + "' (expected nc|nv|nq)");
        }
        pos = comma + 1;
    }
    return s;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    try {
        json j;
        is >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config file: " + std::string(e.what()));
    }
}

void apply_ablation(ModelConfig& cfg, const std::vector<std::string>& ablate) {
    for (const std::string& a : ablate) {
        if (a == "cap") cfg.use_caption = false;
        else if (a == "vid") cfg.use_video = false;
        else if (a == "cmr") cfg.use_cmr = false;
        else if (a == "qmmf") cfg.use_qmmf = false;
        else if (a == "qguide") cfg.question_guided = false;
        else throw ConfigError("unknown --ablate value '" + a + "' (expected vid|cap|cmr|qmmf|qguide)");
    }
}

struct TrainArgs {
    std::string data, test_data, config_path, ckpt_out = "model.ecgc";
    std::size_t epochs = 30;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr;
    std::optional<std::size_t> batch;
    std::optional<std::size_t> dim;
    std::optional<std::size_t> n_r;
    std::optional<double> clip;
    std::vector<std::string> ablate;
    std::size_t threads = 1;
};

int cmd_train(const TrainArgs& a) {
    const json cf = load_config_file(a.config_path);
    Dataset train = load_dataset(a.data);
    std::optional<Dataset> test;
    if (!a.test_data.empty()) test = load_dataset(a.test_data);

    ModelConfig cfg;
    if (cf.contains("model")) {
        cfg = config_from_json(cf.at("model").dump());
    }
    cfg.task = train.task;
    cfg.d_c = train.d_c;
    cfg.d_v = train.d_v;
    cfg.d_q = train.d_q;
    if (train.n_classes) cfg.n_classes = train.n_classes;
    if (train.n_candidates) cfg.n_candidates = train.n_candidates;
    if (a.dim) cfg.d = *a.dim;
    else if (cf.contains("dim")) cfg.d = cf.at("dim").get<std::size_t>();
    if (a.n_r) cfg.n_r = *a.n_r;
    std::optional<std::uint64_t> cf_seed;
    if (cf.contains("seed")) cf_seed = cf.at("seed").get<std::uint64_t>();
    cfg.seed = resolve_seed(a.seed, cf_seed);
    apply_ablation(cfg, a.ablate);

    Adam::Options aopt;
    aopt.lr = a.lr ? *a.lr : cf.value("lr", 1e-4);
    aopt.clip_norm = a.clip ? *a.clip : cf.value("clip_norm", 0.0);
    TrainOptions topt;
    topt.batch_size = a.batch ? *a.batch : cf.value("batch_size", 64ull);
    topt.threads = a.threads;
    topt.shuffle_seed = cfg.seed;

    Model model(cfg);
    Adam adam(model, aopt);
    std::printf("params=%zu lr=%g batch=%zu epochs=%zu seed=%llu\n", model.param_count(), aopt.lr,
                topt.batch_size, a.epochs, static_cast<unsigned long long>(cfg.seed));

    save_checkpoint(a.ckpt_out, model);  // initialization is the first last-good state
    for (std::size_t e = 1; e <= a.epochs; ++e) {
        EpochStats stats;
        try {
            stats = train_epoch(model, train, adam, topt, e);
        } catch (const NumericError& err) {
            std::fprintf(stderr, "error: %s (last-good checkpoint kept at %s)\n", err.what(), a.ckpt_out.c_str());
            return kExitNumerical;
        }
        Metrics m = evaluate(model, test ? *test : train, topt.threads);
        std::printf("epoch=%zu loss=%.12g metric=%.12g\n", e, stats.mean_loss, m.value);
        std::fflush(stdout);
        save_checkpoint(a.ckpt_out, model);
    }
    return kExitOk;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt, std::size_t threads) {
    auto model = load_checkpoint(ckpt);
    Dataset data = load_dataset(data_dir);
    const ModelConfig& cfg = model->config();
    if (cfg.task != data.task) {
        throw ConfigError("checkpoint task '" + task_name(cfg.task) + "' vs dataset task '" + task_name(data.task) +
                          "'");
    }
    if (cfg.d_c != data.d_c || cfg.d_v != data.d_v || cfg.d_q != data.d_q) {
        throw ConfigError("checkpoint dims (" + std::to_string(cfg.d_c) + "," + std::to_string(cfg.d_v) + "," +
                          std::to_string(cfg.d_q) + ") vs dataset dims (" + std::to_string(data.d_c) + "," +
                          std::to_string(data.d_v) + "," + std::to_string(data.d_q) + ")");
    }
    Metrics m = evaluate(*model, data, threads);
    std::printf("task=%s samples=%zu %s=%.12g\n", task_name(data.task).c_str(), m.n,
                m.is_accuracy ? "accuracy" : "mse", m.value);
    return kExitOk;
}

int cmd_gen(const std::string& task_str, const std::string& out, std::uint64_t seed, std::size_t samples,
            std::size_t test_samples, const std::string& sizes_str, std::size_t dim, std::size_t classes,
            std::size_t candidates, double noise, double background, bool shuffle_labels, bool force) {
    const Task task = task_from_string(task_str);
    if (fs::exists(out) && !fs::is_empty(out) && !force) {
        throw ConfigError("output directory '" + out + "' is not empty (use --force)");
    }
    GenOptions opt;
    opt.seed = seed;
    opt.sizes = parse_sizes(sizes_str, dim);
    opt.n_classes = classes;
    opt.n_candidates = candidates;
    opt.noise = noise;
    opt.background = background;
    opt.shuffle_labels = shuffle_labels;

    auto emit = [&](const std::string& split, std::size_t n) {
        opt.n_samples = n;
        Dataset d = generate(task, opt, split);
        const std::string dir = (fs::path(out) / split).string();
        write_dataset(dir, d, opt);
        std::printf("split=%s dir=%s samples=%zu task=%s", split.c_str(), dir.c_str(), d.samples.size(),
                    task_name(task).c_str());
        if (task == Task::word) {
            std::printf(" classes=%zu oracle_accuracy=%.4f", d.n_classes, word_oracle_accuracy(d, opt));
        } else if (task == Task::choice) {
            std::printf(" candidates=%zu oracle_accuracy=%.4f", d.n_candidates, choice_oracle_accuracy(d, opt));
        } else {
            std::printf(" mean_predictor_mse=%.4f", count_mean_predictor_mse(d));
        }
        std::printf(" label_chi2=%.3f\n", label_chi_square(d));
    };
    emit("train", samples);
    if (test_samples > 0) emit("test", test_samples);
    return kExitOk;
}

int cmd_dump_attention(const std::string& data_dir, const std::string& ckpt, std::size_t sample_idx,
                       const std::string& out) {
    auto model = load_checkpoint(ckpt);
    Dataset data = load_dataset(data_dir);
    if (sample_idx >= data.samples.size()) {
        throw InputError("sample index " + std::to_string(sample_idx) + " out of range (dataset has " +
                         std::to_string(data.samples.size()) + ")");
    }
    ForwardDiag diag;
    Tape tape;
    model->forward(tape, data.samples[sample_idx], &diag);

    // for the choice task, export the ground-truth candidate's pass
    const std::size_t pass = model->config().task == Task::choice
                                 ? static_cast<std::size_t>(data.samples[sample_idx].answer)
                                 : 0;
    json doc;
    doc["sample"] = sample_idx;
    doc["task"] = task_name(model->config().task);
    if (!diag.fusion.empty()) {
        const FusionTrace& trace = diag.fusion.at(pass);
        doc["n_r"] = trace.steps.size();
        json steps = json::array();
        for (const FusionStepTrace& st : trace.steps) {
            json step;
            for (std::size_t m = 0; m < trace.modality_names.size(); ++m) {
                std::vector<double> att(st.att[m].data(), st.att[m].data() + st.att[m].size());
                step["att_" + trace.modality_names[m].substr(0, 1)] = att;
            }
            step["alpha"] = std::vector<double>(st.alpha.data(), st.alpha.data() + st.alpha.size());
            steps.push_back(std::move(step));
        }
        doc["steps"] = std::move(steps);
    }
    const std::size_t per_pass = diag.final_att.size() / (diag.fusion.empty() ? 1 : diag.fusion.size());
    json fin = json::object();
    for (std::size_t i = pass * per_pass; i < (pass + 1) * per_pass && i < diag.final_att.size(); ++i) {
        const auto& [name, w] = diag.final_att[i];
        fin["att_" + name.substr(0, 1)] = std::vector<double>(w.data(), w.data() + w.size());
    }
    doc["final_attention"] = std::move(fin);

    std::ofstream os(out);
    if (!os) throw ConfigError("cannot open '" + out + "' for writing");
    os << doc.dump(2) << "\n";
    std::printf("wrote %s\n", out.c_str());
    return kExitOk;
}

int cmd_gradcheck(const std::string& config_path, std::optional<std::uint64_t> seed_flag, bool full,
                  std::size_t points, const std::string& inject_fault) {
    const json cf = load_config_file(config_path);
    std::optional<std::uint64_t> cf_seed;
    if (cf.contains("seed")) cf_seed = cf.at("seed").get<std::uint64_t>();
    const std::uint64_t seed = resolve_seed(seed_flag, cf_seed);
    const double prim_tol = 1e-6;
    SuiteResult suite = run_primitive_suite(seed, points, inject_fault);
    print_suite(std::cout, suite, prim_tol);
    bool ok = suite.ok(prim_tol);
    if (!ok) {
        const SuiteCase* w = suite.worst();
        std::printf("FAIL worst op=%s rel_err=%g (tol %g)\n", w->name.c_str(), w->report.worst_rel_err, prim_tol);
    }
    if (full) {
        const double model_tol = 1e-3;
        GradCheckReport rep = run_model_check(seed, 20);
        std::printf("op=model params=%zu worst_rel_err=%g worst_param=%s status=%s\n", rep.checked,
                    rep.worst_rel_err, rep.worst.param.c_str(), rep.within(model_tol) ? "ok" : "FAIL");
        ok = ok && rep.within(model_tol);
    }
    std::printf("gradcheck=%s\n", ok ? "pass" : "fail");
    return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EC-GNN multi-modal question answering: data generation, training, evaluation, diagnostics"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic planted-signal dataset");
    std::string g_task, g_out, g_sizes;
    std::uint64_t g_seed_flag = 0;
    bool g_seed_set = false;
    std::size_t g_samples = 512, g_test = 0, g_dim = 32, g_classes = 4, g_cand = 5;
    double g_noise = 0.1, g_background = 1.0;
    bool g_shuffle = false, g_force = false;
    bool g_test_set = false;
    gen->add_option("--task", g_task, "word|count|choice")->required();
    gen->add_option("--out", g_out, "output directory")->required();
    gen->add_option("--seed", g_seed_flag)->each([&](const std::string&) { g_seed_set = true; });
    gen->add_option("--samples", g_samples, "training split size");
    gen->add_option("--test-samples", g_test, "test split size (default samples/4)")
        ->each([&](const std::string&) { g_test_set = true; });
    gen->add_option("--sizes", g_sizes, "sequence length ranges, e.g. nc=3:8,nv=8:16,nq=4:10");
    gen->add_option("--dim", g_dim, "feature width");
    gen->add_option("--classes", g_classes, "answer-set size C (word task)");
    gen->add_option("--candidates", g_cand, "candidate count K (choice task)");
    gen->add_option("--noise", g_noise, "planted-signal noise stddev");
    gen->add_option("--background", g_background, "distractor-row noise stddev");
    gen->add_flag("--shuffle-labels", g_shuffle, "decouple labels from content (control datasets)");
    gen->add_flag("--force", g_force, "write into a non-empty directory");

    // train
    auto* train = app.add_subcommand("train", "Train a model on a generated dataset");
    TrainArgs t;
    std::uint64_t t_seed_flag = 0;
    bool t_seed_set = false;
    double t_lr = 0;
    bool t_lr_set = false;
    std::size_t t_batch = 0, t_dim = 0, t_nr = 0;
    double t_clip = 0;
    bool t_clip_set = false;
    train->add_option("--data", t.data, "training dataset directory")->required();
    train->add_option("--test-data", t.test_data, "held-out dataset for the per-epoch metric");
    train->add_option("--config", t.config_path, "JSON config file (flags override)");
    train->add_option("--epochs", t.epochs);
    train->add_option("--ckpt-out", t.ckpt_out, "checkpoint path (written every epoch)");
    train->add_option("--seed", t_seed_flag)->each([&](const std::string&) { t_seed_set = true; });
    train->add_option("--lr", t_lr)->each([&](const std::string&) { t_lr_set = true; });
    train->add_option("--batch", t_batch, "gradient-accumulation batch size");
    train->add_option("--dim", t_dim, "contextual width d");
    train->add_option("--nr", t_nr, "fusion reasoning steps");
    train->add_option("--clip", t_clip, "global-norm gradient clip")->each([&](const std::string&) { t_clip_set = true; });
    train->add_option("--ablate", t.ablate, "vid|cap|cmr|qmmf|qguide (repeatable)");
    train->add_option("--threads", t.threads, "worker threads per batch");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    std::string e_data, e_ckpt;
    std::size_t e_threads = 1;
    eval_cmd->add_option("--data", e_data)->required();
    eval_cmd->add_option("--ckpt", e_ckpt)->required();
    eval_cmd->add_option("--threads", e_threads);

    // dump-attention
    auto* dump = app.add_subcommand("dump-attention", "Export fusion attention weights for one sample");
    std::string d_data, d_ckpt, d_out;
    std::size_t d_sample = 0;
    dump->add_option("--data", d_data)->required();
    dump->add_option("--ckpt", d_ckpt)->required();
    dump->add_option("--sample", d_sample)->required();
    dump->add_option("--out", d_out)->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference verification of gradients");
    std::string gc_config;
    std::uint64_t gc_seed = 0;
    bool gc_seed_set = false;
    bool gc_full = false;
    std::size_t gc_points = 100;
    std::string gc_fault;
    gc->add_option("--config", gc_config, "JSON config file (seed source)");
    gc->add_option("--seed", gc_seed)->each([&](const std::string&) { gc_seed_set = true; });
    gc->add_flag("--full", gc_full, "also check 20 sampled whole-model parameters");
    gc->add_option("--points", gc_points, "coordinates checked per primitive");
    gc->add_option("--inject-fault", gc_fault)->group("");  // test hook, hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            const std::uint64_t seed = resolve_seed(g_seed_set ? std::optional<std::uint64_t>(g_seed_flag)
                                                               : std::nullopt,
                                                    std::nullopt);
            const std::size_t test_n = g_test_set ? g_test : g_samples / 4;
            return cmd_gen(g_task, g_out, seed, g_samples, test_n, g_sizes, g_dim, g_classes, g_cand, g_noise,
                           g_background, g_shuffle, g_force);
        }
        if (train->parsed()) {
            if (t_seed_set) t.seed = t_seed_flag;
            if (t_lr_set) t.lr = t_lr;
            if (t_batch) t.batch = t_batch;
            if (t_dim) t.dim = t_dim;
            if (t_nr) t.n_r = t_nr;
            if (t_clip_set) t.clip = t_clip;
            return cmd_train(t);
        }
        if (eval_cmd->parsed()) return cmd_eval(e_data, e_ckpt, e_threads);
        if (dump->parsed()) return cmd_dump_attention(d_data, d_ckpt, d_sample, d_out);
        if (gc->parsed()) {
            return cmd_gradcheck(gc_config, gc_seed_set ? std::optional<std::uint64_t>(gc_seed) : std::nullopt,
                                 gc_full, gc_points, gc_fault);
        }
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
