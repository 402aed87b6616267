#include "ecgnn/gradcheck_suite.hpp"

#include <cmath>
#include <ostream>

#include "ecgnn/datagen.hpp"
#include "ecgnn/encoders.hpp"
#include "ecgnn/rng.hpp"

namespace ecgnn {

bool SuiteResult::ok(double tol) const {
    for (const auto& c : cases) {
        if (!c.report.within(tol)) return false;
    }
    return true;
}

const SuiteCase* SuiteResult::worst() const {
    const SuiteCase* w = nullptr;
    for (const auto& c : cases) {
        if (!w || c.report.worst_rel_err > w->report.worst_rel_err) w = &c;
    }
    return w;
}

namespace {

Tensor randn(Rng& rng, std::size_t r, std::size_t c, double s = 1.0) {
    Tensor t = Tensor::zeros(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.normal(0.0, s);
    return t;
}

// entries in +-[0.5, 2.0]: keeps relu/hinge kinks away from finite-difference steps
Tensor rand_off_zero(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double mag = rng.uniform(0.5, 2.0);
        t.at(i) = (rng.next_u64() & 1) ? mag : -mag;
    }
    return t;
}

struct CaseBuilder {
    std::uint64_t seed;
    std::size_t points;
    SuiteResult out;

    // weight leaf makes d(loss)/d(output) generic instead of all-ones
    void run(const std::string& name, const std::vector<Param*>& params,
             const std::function<Var(Tape&)>& build) {
        auto f = [&]() {
            Tape tape;
            Var y = build(tape);
            Tape& t = *y.tape;
            Rng wr(seed ^ 0x77);
            Var w = t.leaf(randn(wr, y.val().rows(), y.val().cols()));
            Var loss = sum(mul(y, w));
            t.backward(loss);
            return loss.val().at(0);
        };
        GradCheckOptions opt;
        opt.max_coords = points;
        opt.seed = seed;
        out.cases.push_back(SuiteCase{name, grad_check(f, params, opt)});
    }
};

// relu with a deliberately wrong derivative; exercised by the fault hook
Var broken_relu(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.at(i) = xv.at(i) > 0.0 ? xv.at(i) : 0.0;
    const auto xi = x.id;
    return t.emit(
        std::move(y), {xi},
        [xi](Tape& tp, const Tensor& g) {
            const Tensor& xx = tp.value(xi);
            Tensor gx(g.shape());
            for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) = xx.at(i) > 0.0 ? -g.at(i) : 0.0;  // sign flipped
            tp.accum(xi, gx);
        },
        {});
}

}  // namespace

SuiteResult run_primitive_suite(std::uint64_t seed, std::size_t points, const std::string& fault) {
    Rng rng(seed ^ 0x5eedULL);
    CaseBuilder cb{seed, points, {}};

    {
        Param a("a", randn(rng, 6, 9)), b("b", randn(rng, 9, 7));
        cb.run("matmul", {&a, &b}, [&](Tape& t) { return matmul(t.use(a), t.use(b)); });
    }
    {
        Param a("a", randn(rng, 6, 9)), b("b", randn(rng, 12, 9));
        cb.run("matmul_nt", {&a, &b}, [&](Tape& t) { return matmul_nt(t.use(a), t.use(b)); });
    }
    {
        Param a("a", randn(rng, 8, 13));
        cb.run("transpose", {&a}, [&](Tape& t) { return transpose(t.use(a)); });
    }
    {
        Param a("a", randn(rng, 8, 13));
        cb.run("reshape", {&a}, [&](Tape& t) { return reshape(t.use(a), Shape{13, 8}); });
    }
    {
        Param a("a", randn(rng, 10, 11)), b("b", randn(rng, 10, 11));
        cb.run("add", {&a, &b}, [&](Tape& t) { return add(t.use(a), t.use(b)); });
        cb.run("sub", {&a, &b}, [&](Tape& t) { return sub(t.use(a), t.use(b)); });
        cb.run("mul", {&a, &b}, [&](Tape& t) { return mul(t.use(a), t.use(b)); });
    }
    {
        Param a("a", randn(rng, 12, 9)), v("v", randn(rng, 1, 9));
        cb.run("add_rowvec", {&a, &v}, [&](Tape& t) { return add_rowvec(t.use(a), t.use(v)); });
    }
    {
        Param a("a", randn(rng, 10, 11));
        cb.run("scale", {&a}, [&](Tape& t) { return scale(t.use(a), -1.7); });
        cb.run("add_scalar", {&a}, [&](Tape& t) { return add_scalar(t.use(a), 0.37); });
    }
    {
        Param s("s", Tensor::scalar(1.3)), a("a", randn(rng, 10, 10));
        cb.run("smul", {&s, &a}, [&](Tape& t) { return smul(t.use(s), t.use(a)); });
    }
    {
        Param a("a", randn(rng, 10, 11));
        cb.run("element", {&a}, [&](Tape& t) { return element(t.use(a), 3, 4); });
    }
    {
        Param a("a", randn(rng, 6, 5)), b("b", randn(rng, 6, 7)), c("c", randn(rng, 6, 3));
        cb.run("concat_cols", {&a, &b, &c},
               [&](Tape& t) { return concat_cols({t.use(a), t.use(b), t.use(c)}); });
    }
    {
        Param a("a", randn(rng, 4, 8)), b("b", randn(rng, 6, 8)), c("c", randn(rng, 3, 8));
        cb.run("concat_rows", {&a, &b, &c},
               [&](Tape& t) { return concat_rows({t.use(a), t.use(b), t.use(c)}); });
    }
    {
        Param a("a", randn(rng, 12, 9));
        cb.run("slice_rows", {&a}, [&](Tape& t) { return slice_rows(t.use(a), 3, 9); });
    }
    {
        Param a("a", randn(rng, 10, 11));
        cb.run("softmax_rows", {&a}, [&](Tape& t) { return softmax_rows(t.use(a)); });
    }
    {
        Param a("a", randn(rng, 9, 12)), g("g", randn(rng, 1, 12, 0.3)), b("b", randn(rng, 1, 12));
        for (std::size_t i = 0; i < g.size(); ++i) g.value.at(i) += 1.0;
        cb.run("layer_norm", {&a, &g, &b},
               [&](Tape& t) { return layer_norm_rows(t.use(a), t.use(g), t.use(b), 1e-5); });
    }
    {
        Param a("a", rand_off_zero(rng, 10, 11));
        if (fault == "relu") {
            cb.run("relu", {&a}, [&](Tape& t) { return broken_relu(t.use(a)); });
        } else {
            cb.run("relu", {&a}, [&](Tape& t) { return relu(t.use(a)); });
        }
    }
    {
        Param a("a", randn(rng, 10, 11));
        cb.run("tanh", {&a}, [&](Tape& t) { return tanh_(t.use(a)); });
        cb.run("sigmoid", {&a}, [&](Tape& t) { return sigmoid(t.use(a)); });
    }
    {
        Param a("a", randn(rng, 10, 11));
        cb.run("sum", {&a}, [&](Tape& t) { return sum(t.use(a)); });
        cb.run("mean_rows", {&a}, [&](Tape& t) { return mean_rows(t.use(a)); });
    }
    {
        Param x("x", randn(rng, 5, 9)), w("w", randn(rng, 6, 9)), b("b", randn(rng, 1, 6));
        cb.run("affine", {&x, &w, &b}, [&](Tape& t) { return affine(t.use(x), w, b); });
    }
    {
        Param l("l", randn(rng, 1, 128));
        cb.run("softmax_xent", {&l}, [&](Tape& t) { return softmax_xent(t.use(l), 4); });
    }
    {
        // gather into an embedding table
        Rng er = rng.fork(17);
        EmbeddingTable emb("emb", 15, 9, er);
        std::vector<std::size_t> ids = {3, 1, 3, 7, 0, 11};
        cb.run("embed", {&emb.table}, [&](Tape& t) { return embed(t, emb, ids); });
    }
    return cb.out;
}

GradCheckReport run_model_check(std::uint64_t seed, std::size_t n_params) {
    GenOptions gopt;
    gopt.seed = seed;
    gopt.n_samples = 1;
    gopt.sizes = GenSizes{2, 4, 4, 6, 3, 5, 16};
    gopt.n_classes = 3;
    Dataset data = gen_word_task(gopt, "gradcheck");

    ModelConfig cfg;
    cfg.d_c = cfg.d_v = cfg.d_q = gopt.sizes.d;
    cfg.d = 16;
    cfg.task = Task::word;
    cfg.n_classes = 3;
    cfg.seed = seed;
    Model model(cfg);

    auto f = [&]() {
        Tape tape;
        ForwardOutput out = model.forward(tape, data.samples[0]);
        tape.backward(out.loss);
        return out.loss_value;
    };

    // strongest-gradient coordinate of each sampled parameter tensor
    model.reset_grads();
    f();
    const auto& params = model.params();
    std::vector<std::size_t> order(params.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng(seed).fork(0x9a7a).shuffle(order);

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t k = 0; k < order.size() && coords.size() < n_params; ++k) {
        const Param& p = *params[order[k]];
        std::size_t best = 0;
        for (std::size_t i = 1; i < p.size(); ++i) {
            if (std::fabs(p.grad.at(i)) > std::fabs(p.grad.at(best))) best = i;
        }
        if (std::fabs(p.grad.at(best)) < 1e-12) continue;  // dead coordinate, not informative
        coords.emplace_back(order[k], best);
    }
    return grad_check_coords(f, params, coords);
}

void print_suite(std::ostream& os, const SuiteResult& result, double tol) {
    for (const auto& c : result.cases) {
        os << "op=" << c.name << " points=" << c.report.checked << " worst_rel_err=" << c.report.worst_rel_err
           << " status=" << (c.report.within(tol) ? "ok" : "FAIL") << "\n";
    }
}

}  // namespace ecgnn
