// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] is the CLI binary (used by the determinism criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "ecgnn/checkpoint.hpp"
#include "ecgnn/cross_modal.hpp"
#include "ecgnn/datagen.hpp"
#include "ecgnn/errors.hpp"
#include "ecgnn/gradcheck_suite.hpp"
#include "ecgnn/graph_reasoning.hpp"
#include "ecgnn/model.hpp"
#include "ecgnn/tensor_io.hpp"
#include "ecgnn/train.hpp"

using namespace ecgnn;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor randn(Rng& rng, std::size_t r, std::size_t c, double s = 1.0) {
    Tensor t = Tensor::zeros(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.normal(0.0, s);
    return t;
}

bool simplex_row(const double* v, std::size_t n, double tol) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] < 0.0) return false;
        s += v[i];
    }
    return std::fabs(s - 1.0) <= tol;
}

bool all_rows_simplex(const Tensor& m, double tol) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (!simplex_row(m.data() + i * m.cols(), m.cols(), tol)) return false;
    }
    return true;
}

GenOptions desk_gen(std::uint64_t seed, std::size_t n) {
    GenOptions opt;
    opt.seed = seed;
    opt.n_samples = n;
    opt.sizes = GenSizes{3, 8, 8, 16, 4, 10, 32};
    opt.n_classes = 4;
    return opt;
}

ModelConfig desk_cfg(Task task, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.d_c = cfg.d_v = cfg.d_q = 32;
    cfg.d = 32;
    cfg.task = task;
    cfg.n_classes = 4;
    cfg.n_candidates = 5;
    cfg.seed = seed;
    return cfg;
}

struct TrainResult {
    double metric = 0.0;       // final test metric
    double best_metric = 0.0;  // max over epochs
    std::size_t epochs = 0;
    double seconds = 0.0;
};

TrainResult train_model(Model& model, const Dataset& train, const Dataset& test, std::size_t max_epochs, double lr,
                        const std::function<bool(double)>& stop = {}, std::size_t batch_size = 32) {
    Adam::Options aopt;
    aopt.lr = lr;
    Adam adam(model, aopt);
    TrainOptions topt;
    topt.batch_size = batch_size;
    topt.threads = 2;
    topt.shuffle_seed = model.config().seed;

    TrainResult res;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t e = 1; e <= max_epochs; ++e) {
        train_epoch(model, train, adam, topt, e);
        Metrics m = evaluate(model, test, topt.threads);
        res.metric = m.value;
        res.best_metric = std::max(res.best_metric, m.value);
        res.epochs = e;
        if (stop && stop(m.value)) break;
    }
    res.seconds = seconds_since(t0);
    return res;
}

std::string run_cli(const std::string& cmd, int* exit_code = nullptr) {
    std::string out;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return out;
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, got);
    const int rc = pclose(pipe);
    if (exit_code) *exit_code = WEXITSTATUS(rc);
    return out;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

bool trees_identical(const fs::path& a, const fs::path& b) {
    std::size_t n = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) return false;
        ++n;
    }
    return n > 0;
}

std::vector<double> parse_losses(const std::string& log) {
    std::vector<double> out;
    std::istringstream is(log);
    std::string line;
    while (std::getline(is, line)) {
        const auto pos = line.find("loss=");
        if (pos == std::string::npos) continue;
        out.push_back(std::stod(line.substr(pos + 5)));
    }
    return out;
}

// ------------------------------------------------------------- criteria

void criterion_1_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteResult suite = run_primitive_suite(202, 100);
    GradCheckReport model_rep = run_model_check(202, 20);
    const double secs = seconds_since(t0);
    const bool pass = suite.ok(1e-6) && model_rep.within(1e-3) && secs <= 120.0;
    std::ostringstream os;
    os << "gradient correctness: primitives worst " << suite.worst()->report.worst_rel_err
       << " (tol 1e-6), model worst " << model_rep.worst_rel_err << " (tol 1e-3), " << secs << " s";
    report(1, pass, os.str());
}

void criterion_2_simplex() {
    bool ok = true;
    std::size_t forwards = 0;
    for (std::size_t block = 0; block < 20 && ok; ++block) {
        ModelConfig cfg = desk_cfg(Task::word, 1000 + block);
        Model model(cfg);
        Dataset data = gen_word_task(desk_gen(2000 + block, 50), "acc2");
        for (const Sample& s : data.samples) {
            ForwardDiag diag;
            Tape tape;
            model.forward(tape, s, &diag);
            ++forwards;
            for (const Tensor& g : diag.adjacencies) ok = ok && all_rows_simplex(g, 1e-9);
            for (const Tensor& w : diag.cam_weights) ok = ok && all_rows_simplex(w, 1e-9);
            for (const FusionTrace& tr : diag.fusion) {
                for (const FusionStepTrace& st : tr.steps) {
                    for (const Tensor& a : st.att) ok = ok && all_rows_simplex(a, 1e-9);
                    ok = ok && all_rows_simplex(st.alpha, 1e-9);
                }
            }
            for (const auto& [name, w] : diag.final_att) ok = ok && all_rows_simplex(w, 1e-9);
            if (!ok) break;
        }
    }
    std::ostringstream os;
    os << "simplex invariants over " << forwards << " random forwards (tol 1e-9)";
    report(2, ok, os.str());
}

void criterion_3_permutations() {
    Rng rng(555);
    const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
    auto permute_rows = [&](const Tensor& x) {
        Tensor y = Tensor::zeros(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(perm[i], j);
        return y;
    };
    bool ok = true;
    double worst = 0.0;
    for (std::size_t trial = 0; trial < 1000 && ok; ++trial) {
        GraphLayerParams gp("g", 8, rng);
        Tensor x = randn(rng, 6, 8);
        Tape t;
        const Tensor& base = graph_reason(t.leaf(x), gp).val();
        const Tensor& fromp = graph_reason(t.leaf(permute_rows(x)), gp).val();
        const double dev_g = max_abs_diff(fromp, permute_rows(base));

        Tensor q = randn(rng, 4, 8), k = randn(rng, 6, 8), v = randn(rng, 6, 8);
        const Tensor& cam_base = cam(t.leaf(q), t.leaf(k), t.leaf(v)).attended.val();
        const Tensor& cam_perm = cam(t.leaf(q), t.leaf(permute_rows(k)), t.leaf(permute_rows(v))).attended.val();
        const double dev_c = max_abs_diff(cam_base, cam_perm);

        worst = std::max({worst, dev_g, dev_c});
        ok = worst <= 1e-9;
    }
    std::ostringstream os;
    os << "permutation properties over 1000 six-node trials, worst deviation " << worst << " (tol 1e-9)";
    report(3, ok, os.str());
}

void criterion_4_paper_shape() {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg;
    cfg.d_c = 512;
    cfg.d_a = 2048;
    cfg.d_m = 4096;
    cfg.d_v = 4096;
    cfg.d_q = 300;
    cfg.d = 512;
    cfg.n_r = 3;
    cfg.layers = 3;
    cfg.task = Task::word;
    cfg.n_classes = 4;
    cfg.seed = 99;
    std::size_t width = 0;
    bool pass = false;
    try {
        Model model(cfg);
        Rng rng(99);
        Sample s;
        s.f_c = randn(rng, 4, 512, 0.1);
        s.f_a = randn(rng, 5, 2048, 0.1);
        s.f_m = randn(rng, 5, 4096, 0.1);
        s.f_q = randn(rng, 6, 300, 0.1);
        s.answer = 2;
        Tape tape;
        ForwardOutput out = model.forward(tape, s);
        width = out.s_a.val().cols();
        pass = (width == 1536) && std::isfinite(out.loss_value);
    } catch (const std::exception& e) {
        report(4, false, std::string("paper-config forward threw: ") + e.what());
        return;
    }
    std::ostringstream os;
    os << "paper configuration forward: s_a width " << width << " (want 1536), " << seconds_since(t0) << " s";
    report(4, pass, os.str());
}

void criterion_5_word_learning() {
    GenOptions opt = desk_gen(7, 2048);
    Dataset train = gen_word_task(opt, "train");
    GenOptions tg = opt;
    tg.n_samples = 512;
    Dataset test = gen_word_task(tg, "test");

    Model full(desk_cfg(Task::word, 7));
    TrainResult fr = train_model(full, train, test, 30, 2e-3, [](double acc) { return acc >= 0.90; });

    ModelConfig ab_cfg = desk_cfg(Task::word, 7);
    ab_cfg.use_caption = false;
    Model ablated(ab_cfg);
    TrainResult ar = train_model(ablated, train, test, 5, 2e-3);

    const bool pass = fr.metric >= 0.90 && fr.seconds <= 600.0 && ar.best_metric <= 0.35;
    std::ostringstream os;
    os << "word task: full " << fr.metric << " in " << fr.epochs << " epochs / " << fr.seconds
       << " s (want >= 0.90 within 30 epochs / 600 s); caption-ablated best " << ar.best_metric
       << " (want <= 0.35)";
    report(5, pass, os.str());
}

void criterion_6_count_learning() {
    GenOptions opt = desk_gen(11, 2048);
    Dataset train = gen_count_task(opt, "train");
    GenOptions tg = opt;
    tg.n_samples = 512;
    Dataset test = gen_count_task(tg, "test");
    const double baseline = count_mean_predictor_mse(test);

    Model model(desk_cfg(Task::number, 11));
    TrainResult res =
        train_model(model, train, test, 30, 2e-3, [baseline](double mse) { return mse <= 0.5 * baseline; });
    const bool pass = res.metric <= 0.5 * baseline;
    std::ostringstream os;
    os << "count task: test MSE " << res.metric << " after " << res.epochs << " epochs vs mean-predictor baseline "
       << baseline << " (want <= 50%)";
    report(6, pass, os.str());
}

void criterion_7_choice_learning() {
    GenOptions opt = desk_gen(13, 2048);
    Dataset train = gen_choice_task(opt, "train");
    GenOptions tg = opt;
    tg.n_samples = 512;
    Dataset test = gen_choice_task(tg, "test");

    Model model(desk_cfg(Task::choice, 13));
    TrainResult res = train_model(model, train, test, 30, 2e-3, [](double acc) { return acc >= 0.80; });

    GenOptions shuffled = desk_gen(17, 1024);
    shuffled.shuffle_labels = true;
    Dataset strain = gen_choice_task(shuffled, "train");
    GenOptions stg = shuffled;
    stg.n_samples = 512;
    Dataset stest = gen_choice_task(stg, "test");
    Model control(desk_cfg(Task::choice, 17));
    TrainResult cres = train_model(control, strain, stest, 2, 2e-3);

    const bool pass = res.metric >= 0.80 && std::fabs(cres.metric - 0.20) <= 0.06;
    std::ostringstream os;
    os << "choice task: full " << res.metric << " after " << res.epochs
       << " epochs (want >= 0.80); shuffled control " << cres.metric << " (want 0.20 +- 0.06)";
    report(7, pass, os.str());
}

void criterion_8_ablation_ordering() {
    bool pass = true;
    std::ostringstream os;
    os << "ablation ordering (best test accuracy at plateau):";
    for (std::uint64_t seed : {101ull, 102ull, 103ull}) {
        GenOptions opt = desk_gen(seed, 2048);
        Dataset train = gen_word_task(opt, "train");
        GenOptions tg = opt;
        tg.n_samples = 512;
        Dataset test = gen_word_task(tg, "test");

        Model full(desk_cfg(Task::word, seed));
        const double a_full = train_model(full, train, test, 18, 2e-3).best_metric;

        ModelConfig nc = desk_cfg(Task::word, seed);
        nc.use_cmr = false;
        Model nocmr(nc);
        const double a_nocmr = train_model(nocmr, train, test, 14, 2e-3).best_metric;

        ModelConfig na = desk_cfg(Task::word, seed);
        na.use_caption = false;
        Model nocap(na);
        const double a_nocap = train_model(nocap, train, test, 4, 2e-3).best_metric;

        const bool seed_ok = a_full >= a_nocmr && a_nocmr >= a_nocap && (a_full - a_nocap) >= 0.3;
        pass = pass && seed_ok;
        os << " seed " << seed << ": full " << a_full << " >= no-cmr " << a_nocmr << " >= no-cap " << a_nocap
           << (seed_ok ? ";" : " VIOLATED;");
    }
    report(8, pass, os.str());
}

void criterion_9_determinism(const std::string& cli) {
    const fs::path root = fs::temp_directory_path() / "ecgnn_accept";
    fs::remove_all(root);
    fs::create_directories(root);
    bool pass = true;
    std::ostringstream os;

    const std::string gen_cmd = " gen --task word --seed 5 --samples 64 --test-samples 16 --out ";
    run_cli(cli + gen_cmd + (root / "d1").string());
    run_cli(cli + gen_cmd + (root / "d2").string());
    const bool data_ok = trees_identical(root / "d1", root / "d2");
    pass = pass && data_ok;
    os << "datasets " << (data_ok ? "identical" : "DIFFER");

    const std::string train_cmd = " train --data " + (root / "d1" / "train").string() + " --test-data " +
                                  (root / "d1" / "test").string() + " --epochs 3 --lr 1e-3 --seed 9 --ckpt-out ";
    const std::string log1 = run_cli(cli + train_cmd + (root / "m1.ecgc").string());
    const std::string log2 = run_cli(cli + train_cmd + (root / "m2.ecgc").string());
    const std::vector<double> l1 = parse_losses(log1), l2 = parse_losses(log2);
    bool loss_ok = l1.size() == 3 && l1.size() == l2.size();
    for (std::size_t i = 0; loss_ok && i < l1.size(); ++i) loss_ok = std::fabs(l1[i] - l2[i]) <= 1e-12;
    const bool ckpt_ok = !slurp(root / "m1.ecgc").empty() && slurp(root / "m1.ecgc") == slurp(root / "m2.ecgc");
    pass = pass && loss_ok && ckpt_ok;
    os << ", loss traces " << (loss_ok ? "identical" : "DIFFER") << ", checkpoints "
       << (ckpt_ok ? "identical" : "DIFFER");

    const std::string dump_cmd = " dump-attention --data " + (root / "d1" / "test").string() + " --ckpt " +
                                 (root / "m1.ecgc").string() + " --sample 2 --out ";
    run_cli(cli + dump_cmd + (root / "a1.json").string());
    run_cli(cli + dump_cmd + (root / "a2.json").string());
    const bool dump_ok = !slurp(root / "a1.json").empty() && slurp(root / "a1.json") == slurp(root / "a2.json");
    pass = pass && dump_ok;
    os << ", attention dumps " << (dump_ok ? "identical" : "DIFFER");

    report(9, pass, os.str());
}

void criterion_10_formats() {
    const fs::path root = fs::temp_directory_path() / "ecgnn_accept";
    fs::create_directories(root);
    bool pass = true;
    std::ostringstream os;

    Rng rng(33);
    Tensor t = randn(rng, 9, 14);
    const fs::path fp = root / "t.ecgf";
    write_tensor(fp.string(), t, 1);
    Tensor back = read_tensor(fp.string());
    bool f32_ok = back.same_shape(t) && fs::file_size(fp) == 12 + 2 * 4 + 4 * t.size();
    for (std::size_t i = 0; f32_ok && i < t.size(); ++i) {
        f32_ok = std::fabs(back.at(i) - t.at(i)) <= std::fabs(t.at(i)) * std::pow(2.0, -20) + 1e-300;
    }
    pass = pass && f32_ok;
    os << "feature file round-trip " << (f32_ok ? "ok" : "FAIL");

    Model model(desk_cfg(Task::word, 3));
    const fs::path cp = root / "m.ecgc";
    save_checkpoint(cp.string(), model);
    auto loaded = load_checkpoint(cp.string());
    bool ck_ok = loaded->params().size() == model.params().size();
    for (std::size_t i = 0; ck_ok && i < model.params().size(); ++i) {
        ck_ok = max_abs_diff(loaded->params()[i]->value, model.params()[i]->value) == 0.0;
    }
    pass = pass && ck_ok;
    os << ", checkpoint round-trip " << (ck_ok ? "bit-exact" : "FAIL");

    int rejected = 0;
    {
        std::fstream f(fp, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("NOPE", 4);
    }
    try {
        read_tensor(fp.string());
    } catch (const FormatError&) {
        ++rejected;
    }
    write_tensor(fp.string(), t, 1);
    fs::resize_file(fp, fs::file_size(fp) - 5);
    try {
        read_tensor(fp.string());
    } catch (const FormatError&) {
        ++rejected;
    }
    write_tensor(fp.string(), t, 1);
    {
        std::fstream f(fp, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(12);
        const std::uint32_t huge = 0x7fffffffu;
        f.write(reinterpret_cast<const char*>(&huge), 4);
    }
    try {
        read_tensor(fp.string());
    } catch (const FormatError&) {
        ++rejected;
    }
    {
        std::fstream f(cp, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("NOPE", 4);
    }
    try {
        load_checkpoint(cp.string());
    } catch (const FormatError&) {
        ++rejected;
    }
    pass = pass && rejected == 4;
    os << ", corrupted files rejected " << rejected << "/4";
    report(10, pass, os.str());
}

void criterion_11_overfit() {
    bool pass = true;
    std::ostringstream os;
    os << "overfit one sample:";
    for (Task task : {Task::word, Task::number, Task::choice}) {
        GenOptions opt = desk_gen(43, 1);
        Dataset data = generate(task, opt, "one");
        Model model(desk_cfg(task, 43));
        Adam::Options aopt;
        aopt.lr = 1e-2;
        Adam adam(model, aopt);
        TrainOptions topt;
        topt.batch_size = 1;
        double loss = 1e300;
        std::size_t steps = 0;
        for (std::size_t s = 1; s <= 200 && loss >= 0.01; ++s) {
            loss = train_epoch(model, data, adam, topt, s).mean_loss;
            steps = s;
        }
        pass = pass && loss < 0.01;
        os << " " << task_name(task) << " loss " << loss << " @" << steps << " steps;";
    }
    report(11, pass, os.str());
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    const auto t0 = std::chrono::steady_clock::now();

    criterion_1_gradients();
    criterion_2_simplex();
    criterion_3_permutations();
    criterion_4_paper_shape();
    criterion_5_word_learning();
    criterion_6_count_learning();
    criterion_7_choice_learning();
    criterion_8_ablation_ordering();
    if (cli.empty()) {
        report(9, false, "determinism: CLI binary path not supplied (argv[1])");
    } else {
        criterion_9_determinism(cli);
    }
    criterion_10_formats();
    criterion_11_overfit();

    std::printf("acceptance: %s (%d failing) in %.1f s\n", g_failures == 0 ? "PASS" : "FAIL", g_failures,
                seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
