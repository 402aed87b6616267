#include "ecgnn/ops.hpp"

#include <cmath>
#include <cstring>

#include "ecgnn/errors.hpp"

namespace ecgnn {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
    if (a.tape != b.tape) throw ContractError(std::string(op) + ": operands from different tapes");
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected matrix, got shape " + shape_str(t.shape()));
}

}  // namespace

ActKind act_from_string(const std::string& name) {
    if (name == "relu") return ActKind::relu;
    if (name == "tanh") return ActKind::tanh;
    if (name == "sigmoid") return ActKind::sigmoid;
    throw ConfigError("unknown activation kind '" + name + "' (expected relu|tanh|sigmoid)");
}

// ---------------------------------------------------------------- kernels

Tensor k_matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c = Tensor::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double* crow = c.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor k_matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()) + "^T");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor c = Tensor::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double* crow = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = s;
        }
    }
    return c;
}

Tensor k_matmul_tn(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_tn");
    require_matrix(b, "matmul_tn");
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: inner dimensions disagree, " + shape_str(a.shape()) + "^T vs " +
                         shape_str(b.shape()));
    }
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    Tensor c = Tensor::zeros(m, n);
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a.data() + p * m;
        const double* brow = b.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor k_softmax_rows(const Tensor& x) {
    require_matrix(x, "softmax_rows");
    const std::size_t m = x.rows(), n = x.cols();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < m; ++i) {
        const double* xi = x.data() + i * n;
        double* yi = y.data() + i * n;
        double mx = xi[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            z += yi[j];
        }
        for (std::size_t j = 0; j < n; ++j) yi[j] /= z;
    }
    return y;
}

Tensor k_transpose(const Tensor& x) {
    require_matrix(x, "transpose");
    const std::size_t m = x.rows(), n = x.cols();
    Tensor y = Tensor::zeros(n, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) y(j, i) = x(i, j);
    return y;
}

// ------------------------------------------------------------- primitives

Var matmul(Var a, Var b) {
    require_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    Tensor c = k_matmul(t.value(a.id), t.value(b.id));
    const auto ai = a.id, bi = b.id;
    return t.emit(
        std::move(c), {ai, bi},
        [ai, bi](Tape& tp, const Tensor& g) {
            tp.accum(ai, k_matmul_nt(g, tp.value(bi)));
            tp.accum(bi, k_matmul_tn(tp.value(ai), g));
        },
        [ai, bi](const Tape& tp) { return k_matmul(tp.value(ai), tp.value(bi)); });
}

Var matmul_nt(Var a, Var b) {
    require_same_tape(a, b, "matmul_nt");
    Tape& t = *a.tape;
    Tensor c = k_matmul_nt(t.value(a.id), t.value(b.id));
    const auto ai = a.id, bi = b.id;
    return t.emit(
        std::move(c), {ai, bi},
        [ai, bi](Tape& tp, const Tensor& g) {
            tp.accum(ai, k_matmul(g, tp.value(bi)));
            tp.accum(bi, k_matmul_tn(g, tp.value(ai)));
        },
        [ai, bi](const Tape& tp) { return k_matmul_nt(tp.value(ai), tp.value(bi)); });
}

Var transpose(Var x) {
    Tape& t = *x.tape;
    Tensor y = k_transpose(t.value(x.id));
    const auto xi = x.id;
    return t.emit(
        std::move(y), {xi}, [xi](Tape& tp, const Tensor& g) { tp.accum(xi, k_transpose(g)); },
        [xi](const Tape& tp) { return k_transpose(tp.value(xi)); });
}

Var reshape(Var x, Shape shape) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    if (shape_numel(shape) != xv.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(xv.shape()) + " as " + shape_str(shape));
    }
    Tensor y(shape, std::vector<double>(xv.data(), xv.data() + xv.size()));
    const auto xi = x.id;
    const Shape out = shape;
    return t.emit(
        std::move(y), {xi},
        [xi](Tape& tp, const Tensor& g) {
            const Tensor& xval = tp.value(xi);
            tp.accum(xi, Tensor(xval.shape(), std::vector<double>(g.data(), g.data() + g.size())));
        },
        [xi, out](const Tape& tp) {
            const Tensor& xval = tp.value(xi);
            return Tensor(out, std::vector<double>(xval.data(), xval.data() + xval.size()));
        });
}

namespace {

Var elementwise2(Var a, Var b, const char* name, double (*fwd)(double, double),
                 void (*bwd)(Tape&, std::int32_t, std::int32_t, const Tensor& g)) {
    require_same_tape(a, b, name);
    Tape& t = *a.tape;
    const Tensor& av = t.value(a.id);
    const Tensor& bv = t.value(b.id);
    if (!av.same_shape(bv)) {
        throw ShapeError(std::string(name) + ": shapes " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    }
    Tensor y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.at(i) = fwd(av.at(i), bv.at(i));
    const auto ai = a.id, bi = b.id;
    return t.emit(
        std::move(y), {ai, bi}, [ai, bi, bwd](Tape& tp, const Tensor& g) { bwd(tp, ai, bi, g); },
        [ai, bi, fwd](const Tape& tp) {
            const Tensor& ax = tp.value(ai);
            const Tensor& bx = tp.value(bi);
            Tensor y2(ax.shape());
            for (std::size_t i = 0; i < y2.size(); ++i) y2.at(i) = fwd(ax.at(i), bx.at(i));
            return y2;
        });
}

}  // namespace

Var add(Var a, Var b) {
    return elementwise2(
        a, b, "add", [](double x, double y) { return x + y; },
        [](Tape& tp, std::int32_t ai, std::int32_t bi, const Tensor& g) {
            tp.accum(ai, g);
            tp.accum(bi, g);
        });
}

Var sub(Var a, Var b) {
    return elementwise2(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](Tape& tp, std::int32_t ai, std::int32_t bi, const Tensor& g) {
            tp.accum(ai, g);
            Tensor ng(g.shape());
            for (std::size_t i = 0; i < g.size(); ++i) ng.at(i) = -g.at(i);
            tp.accum(bi, ng);
        });
}

Var mul(Var a, Var b) {
    return elementwise2(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](Tape& tp, std::int32_t ai, std::int32_t bi, const Tensor& g) {
            const Tensor& av = tp.value(ai);
            const Tensor& bv = tp.value(bi);
            Tensor ga(g.shape()), gb(g.shape());
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga.at(i) = g.at(i) * bv.at(i);
                gb.at(i) = g.at(i) * av.at(i);
            }
            tp.accum(ai, ga);
            tp.accum(bi, gb);
        });
}

Var add_rowvec(Var x, Var v) {
    require_same_tape(x, v, "add_rowvec");
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const Tensor& vv = t.value(v.id);
    require_matrix(xv, "add_rowvec");
    if (vv.rows() != 1 || vv.cols() != xv.cols()) {
        throw ShapeError("add_rowvec: shapes " + shape_str(xv.shape()) + " vs " + shape_str(vv.shape()));
    }
    const std::size_t m = xv.rows(), n = xv.cols();
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) y(i, j) = xv(i, j) + vv.at(j);
    const auto xi = x.id, vi = v.id;
    return t.emit(
        std::move(y), {xi, vi},
        [xi, vi](Tape& tp, const Tensor& g) {
            tp.accum(xi, g);
            Tensor gv = Tensor::zeros(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gv.at(j) += g(i, j);
            tp.accum(vi, gv);
        },
        [xi, vi](const Tape& tp) {
            const Tensor& xx = tp.value(xi);
            const Tensor& vx = tp.value(vi);
            Tensor y2(xx.shape());
            for (std::size_t i = 0; i < xx.rows(); ++i)
                for (std::size_t j = 0; j < xx.cols(); ++j) y2(i, j) = xx(i, j) + vx.at(j);
            return y2;
        });
}

Var scale(Var x, double c) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.at(i) = c * xv.at(i);
    const auto xi = x.id;
    return t.emit(
        std::move(y), {xi},
        [xi, c](Tape& tp, const Tensor& g) {
            Tensor gx(g.shape());
            for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) = c * g.at(i);
            tp.accum(xi, gx);
        },
        [xi, c](const Tape& tp) {
            const Tensor& xx = tp.value(xi);
            Tensor y2(xx.shape());
            for (std::size_t i = 0; i < y2.size(); ++i) y2.at(i) = c * xx.at(i);
            return y2;
        });
}

Var add_scalar(Var x, double c) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.at(i) = xv.at(i) + c;
    const auto xi = x.id;
    return t.emit(
        std::move(y), {xi}, [xi](Tape& tp, const Tensor& g) { tp.accum(xi, g); },
        [xi, c](const Tape& tp) {
            const Tensor& xx = tp.value(xi);
            Tensor y2(xx.shape());
            for (std::size_t i = 0; i < y2.size(); ++i) y2.at(i) = xx.at(i) + c;
            return y2;
        });
}

Var smul(Var s, Var x) {
    require_same_tape(s, x, "smul");
    Tape& t = *x.tape;
    const Tensor& sv = t.value(s.id);
    const Tensor& xv = t.value(x.id);
    if (sv.size() != 1) throw ShapeError("smul: scale must be 1x1, got " + shape_str(sv.shape()));
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.at(i) = sv.at(0) * xv.at(i);
    const auto si = s.id, xi = x.id;
    return t.emit(
        std::move(y), {si, xi},
        [si, xi](Tape& tp, const Tensor& g) {
            const Tensor& sx = tp.value(si);
            const Tensor& xx = tp.value(xi);
            double ds = 0.0;
            Tensor gx(g.shape());
            for (std::size_t i = 0; i < g.size(); ++i) {
                ds += g.at(i) * xx.at(i);
                gx.at(i) = g.at(i) * sx.at(0);
            }
            tp.accum(si, Tensor::scalar(ds));
            tp.accum(xi, gx);
        },
        [si, xi](const Tape& tp) {
            const Tensor& sx = tp.value(si);
            const Tensor& xx = tp.value(xi);
            Tensor y2(xx.shape());
            for (std::size_t i = 0; i < y2.size(); ++i) y2.at(i) = sx.at(0) * xx.at(i);
            return y2;
        });
}

Var element(Var x, std::size_t r, std::size_t c) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    require_matrix(xv, "element");
    if (r >= xv.rows() || c >= xv.cols()) {
        throw ShapeError("element: index (" + std::to_string(r) + "," + std::to_string(c) + ") out of shape " +
                         shape_str(xv.shape()));
    }
    const auto xi = x.id;
    return t.emit(
        Tensor::scalar(xv(r, c)), {xi},
        [xi, r, c](Tape& tp, const Tensor& g) {
            Tensor gx(tp.value(xi).shape());
            gx(r, c) = g.at(0);
            tp.accum(xi, gx);
        },
        [xi, r, c](const Tape& tp) { return Tensor::scalar(tp.value(xi)(r, c)); });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    if (parts.size() == 1) return parts[0];
    Tape& t = *parts[0].tape;
    const std::size_t m = t.value(parts[0].id).rows();
    std::size_t n = 0;
    std::vector<std::int32_t> ids;
    for (Var p : parts) {
        require_same_tape(parts[0], p, "concat_cols");
        const Tensor& pv = t.value(p.id);
        require_matrix(pv, "concat_cols");
        if (pv.rows() != m) {
            throw ShapeError("concat_cols: row counts disagree, " + shape_str(t.value(parts[0].id).shape()) +
                             " vs " + shape_str(pv.shape()));
        }
        n += pv.cols();
        ids.push_back(p.id);
    }
    auto assemble = [m, n](const Tape& tp, const std::vector<std::int32_t>& src) {
        Tensor y = Tensor::zeros(m, n);
        std::size_t off = 0;
        for (std::int32_t id : src) {
            const Tensor& pv = tp.value(id);
            for (std::size_t i = 0; i < m; ++i)
                std::memcpy(y.data() + i * n + off, pv.data() + i * pv.cols(), pv.cols() * sizeof(double));
            off += pv.cols();
        }
        return y;
    };
    Tensor y = assemble(t, ids);
    return t.emit(
        std::move(y), ids,
        [ids, m, n](Tape& tp, const Tensor& g) {
            std::size_t off = 0;
            for (std::int32_t id : ids) {
                const std::size_t w = tp.value(id).cols();
                Tensor gp = Tensor::zeros(m, w);
                for (std::size_t i = 0; i < m; ++i)
                    std::memcpy(gp.data() + i * w, g.data() + i * n + off, w * sizeof(double));
                tp.accum(id, gp);
                off += w;
            }
        },
        [ids, assemble](const Tape& tp) { return assemble(tp, ids); });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    if (parts.size() == 1) return parts[0];
    Tape& t = *parts[0].tape;
    const std::size_t n = t.value(parts[0].id).cols();
    std::size_t m = 0;
    std::vector<std::int32_t> ids;
    for (Var p : parts) {
        require_same_tape(parts[0], p, "concat_rows");
        const Tensor& pv = t.value(p.id);
        require_matrix(pv, "concat_rows");
        if (pv.cols() != n) {
            throw ShapeError("concat_rows: column counts disagree, " + shape_str(t.value(parts[0].id).shape()) +
                             " vs " + shape_str(pv.shape()));
        }
        m += pv.rows();
        ids.push_back(p.id);
    }
    auto assemble = [m, n](const Tape& tp, const std::vector<std::int32_t>& src) {
        Tensor y = Tensor::zeros(m, n);
        std::size_t off = 0;
        for (std::int32_t id : src) {
            const Tensor& pv = tp.value(id);
            std::memcpy(y.data() + off * n, pv.data(), pv.size() * sizeof(double));
            off += pv.rows();
        }
        return y;
    };
    Tensor y = assemble(t, ids);
    return t.emit(
        std::move(y), ids,
        [ids, n](Tape& tp, const Tensor& g) {
            std::size_t off = 0;
            for (std::int32_t id : ids) {
                const std::size_t h = tp.value(id).rows();
                Tensor gp = Tensor::zeros(h, n);
                std::memcpy(gp.data(), g.data() + off * n, h * n * sizeof(double));
                tp.accum(id, gp);
                off += h;
            }
        },
        [ids, assemble](const Tape& tp) { return assemble(tp, ids); });
}

Var slice_rows(Var x, std::size_t r0, std::size_t r1) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    require_matrix(xv, "slice_rows");
    if (r0 >= r1 || r1 > xv.rows()) {
        throw ShapeError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) + ") out of " +
                         shape_str(xv.shape()));
    }
    const std::size_t n = xv.cols();
    auto take = [r0, r1, n](const Tensor& src) {
        Tensor y = Tensor::zeros(r1 - r0, n);
        std::memcpy(y.data(), src.data() + r0 * n, (r1 - r0) * n * sizeof(double));
        return y;
    };
    Tensor y = take(xv);
    const auto xi = x.id;
    return t.emit(
        std::move(y), {xi},
        [xi, r0, n](Tape& tp, const Tensor& g) {
            Tensor gx(tp.value(xi).shape());
            std::memcpy(gx.data() + r0 * n, g.data(), g.size() * sizeof(double));
            tp.accum(xi, gx);
        },
        [xi, take](const Tape& tp) { return take(tp.value(xi)); });
}

Var softmax_rows(Var x) {
    Tape& t = *x.tape;
    Tensor y = k_softmax_rows(t.value(x.id));
    const auto xi = x.id;
    const auto yi = static_cast<std::int32_t>(t.node_count());  // id this emit will get
    return t.emit(
        std::move(y), {xi},
        [xi, yi](Tape& tp, const Tensor& g) {
            const Tensor& yv = tp.value(yi);
            Tensor gx(g.shape());
            for (std::size_t i = 0; i < yv.rows(); ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < yv.cols(); ++j) dot += g(i, j) * yv(i, j);
                for (std::size_t j = 0; j < yv.cols(); ++j) gx(i, j) = yv(i, j) * (g(i, j) - dot);
            }
            tp.accum(xi, gx);
        },
        [xi](const Tape& tp) { return k_softmax_rows(tp.value(xi)); });
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
    require_same_tape(x, gain, "layer_norm");
    require_same_tape(x, bias, "layer_norm");
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const Tensor& gv = t.value(gain.id);
    const Tensor& bv = t.value(bias.id);
    require_matrix(xv, "layer_norm");
    const std::size_t m = xv.rows(), d = xv.cols();
    if (gv.size() != d || bv.size() != d) {
        throw ShapeError("layer_norm: gain/bias of shapes " + shape_str(gv.shape()) + "/" + shape_str(bv.shape()) +
                         " vs feature width " + std::to_string(d));
    }
    auto run = [m, d, eps](const Tensor& xx, const Tensor& gg, const Tensor& bb) {
        Tensor y(xx.shape());
        for (std::size_t i = 0; i < m; ++i) {
            const double* xi_ = xx.data() + i * d;
            double* yi_ = y.data() + i * d;
            double mean = 0.0;
            for (std::size_t j = 0; j < d; ++j) mean += xi_[j];
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) var += (xi_[j] - mean) * (xi_[j] - mean);
            var /= static_cast<double>(d);  // biased estimate
            const double inv = 1.0 / std::sqrt(var + eps);
            for (std::size_t j = 0; j < d; ++j) yi_[j] = gg.at(j) * (xi_[j] - mean) * inv + bb.at(j);
        }
        return y;
    };
    Tensor y = run(xv, gv, bv);
    const auto xi = x.id, gi = gain.id, bi = bias.id;
    return t.emit(
        std::move(y), {xi, gi, bi},
        [xi, gi, bi, m, d, eps](Tape& tp, const Tensor& g) {
            const Tensor& xx = tp.value(xi);
            const Tensor& gg = tp.value(gi);
            Tensor gx(xx.shape());
            Tensor ggain(tp.value(gi).shape());
            Tensor gbias(tp.value(bi).shape());
            const double dn = static_cast<double>(d);
            for (std::size_t i = 0; i < m; ++i) {
                const double* xr = xx.data() + i * d;
                const double* gr = g.data() + i * d;
                double mean = 0.0;
                for (std::size_t j = 0; j < d; ++j) mean += xr[j];
                mean /= dn;
                double var = 0.0;
                for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
                var /= dn;
                const double inv = 1.0 / std::sqrt(var + eps);
                // dxhat_j = g_j * gain_j ; reduce the two coupling sums
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double xhat = (xr[j] - mean) * inv;
                    const double dxhat = gr[j] * gg.at(j);
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    ggain.at(j) += gr[j] * xhat;
                    gbias.at(j) += gr[j];
                }
                for (std::size_t j = 0; j < d; ++j) {
                    const double xhat = (xr[j] - mean) * inv;
                    const double dxhat = gr[j] * gg.at(j);
                    gx(i, j) = inv * (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn);
                }
            }
            tp.accum(xi, gx);
            tp.accum(gi, ggain);
            tp.accum(bi, gbias);
        },
        [xi, gi, bi, run](const Tape& tp) { return run(tp.value(xi), tp.value(gi), tp.value(bi)); });
}

namespace {

Var unary(Var x, double (*fwd)(double), double (*dydx)(double x, double y)) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.at(i) = fwd(xv.at(i));
    const auto xi = x.id;
    const auto yi = static_cast<std::int32_t>(t.node_count());
    return t.emit(
        std::move(y), {xi},
        [xi, yi, dydx](Tape& tp, const Tensor& g) {
            const Tensor& xx = tp.value(xi);
            const Tensor& yy = tp.value(yi);
            Tensor gx(g.shape());
            for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) = g.at(i) * dydx(xx.at(i), yy.at(i));
            tp.accum(xi, gx);
        },
        [xi, fwd](const Tape& tp) {
            const Tensor& xx = tp.value(xi);
            Tensor y2(xx.shape());
            for (std::size_t i = 0; i < y2.size(); ++i) y2.at(i) = fwd(xx.at(i));
            return y2;
        });
}

}  // namespace

Var relu(Var x) {
    // subgradient at 0 is 0
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh_(Var x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
    return unary(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Var activation(ActKind kind, Var x) {
    switch (kind) {
        case ActKind::relu: return relu(x);
        case ActKind::tanh: return tanh_(x);
        case ActKind::sigmoid: return sigmoid(x);
    }
    throw ConfigError("activation: unknown kind");
}

Var sum(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const auto xi = x.id;
    return t.emit(
        Tensor::scalar(xv.sum()), {xi},
        [xi](Tape& tp, const Tensor& g) {
            Tensor gx(tp.value(xi).shape());
            gx.fill(g.at(0));
            tp.accum(xi, gx);
        },
        [xi](const Tape& tp) { return Tensor::scalar(tp.value(xi).sum()); });
}

Var mean_rows(Var x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    require_matrix(xv, "mean_rows");
    const std::size_t m = xv.rows(), n = xv.cols();
    auto run = [m, n](const Tensor& xx) {
        Tensor y = Tensor::zeros(1, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) y.at(j) += xx(i, j);
        for (std::size_t j = 0; j < n; ++j) y.at(j) /= static_cast<double>(m);
        return y;
    };
    Tensor y = run(xv);
    const auto xi = x.id;
    return t.emit(
        std::move(y), {xi},
        [xi, m, n](Tape& tp, const Tensor& g) {
            Tensor gx = Tensor::zeros(m, n);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gx(i, j) = g.at(j) / static_cast<double>(m);
            tp.accum(xi, gx);
        },
        [xi, run](const Tape& tp) { return run(tp.value(xi)); });
}

Var linear(Var x, Param& w, Param& b) {
    Tape& t = *x.tape;
    Var wv = t.use(w);
    Var bv = t.use(b);
    return add_rowvec(matmul_nt(x, wv), bv);
}

Var affine(Var x, Param& w, Param& b) { return linear(x, w, b); }

Var softmax_xent(Var logits, std::size_t target) {
    Tape& t = *logits.tape;
    const Tensor& lv = t.value(logits.id);
    if (lv.rows() != 1) throw ShapeError("softmax_xent: logits must be a 1xC row, got " + shape_str(lv.shape()));
    if (target >= lv.cols()) {
        throw InputError("softmax_xent: target " + std::to_string(target) + " out of range C=" +
                         std::to_string(lv.cols()));
    }
    auto loss_of = [target](const Tensor& l) {
        const std::size_t n = l.cols();
        double mx = l.at(0);
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, l.at(j));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(l.at(j) - mx);
        return Tensor::scalar(std::log(z) - (l.at(target) - mx));
    };
    Tensor loss = loss_of(lv);
    const auto li = logits.id;
    return t.emit(
        std::move(loss), {li},
        [li, target](Tape& tp, const Tensor& g) {
            Tensor probs = k_softmax_rows(tp.value(li));
            probs.at(target) -= 1.0;
            for (std::size_t i = 0; i < probs.size(); ++i) probs.at(i) *= g.at(0);
            tp.accum(li, probs);
        },
        [li, loss_of](const Tape& tp) { return loss_of(tp.value(li)); });
}

}  // namespace ecgnn
