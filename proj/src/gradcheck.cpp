#include "ecgnn/gradcheck.hpp"

#include <cmath>

#include "ecgnn/rng.hpp"

namespace ecgnn {

bool GradCheckReport::within(double tol) const {
    for (const auto& e : entries) {
        if (e.non_finite || e.rel_err > tol) return false;
    }
    return true;
}

GradCheckReport grad_check_coords(const std::function<double()>& f, const std::vector<Param*>& params,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& coords,
                                  double step_base) {
    GradCheckReport report;
    for (Param* p : params) p->reset_grad();
    f();  // analytic gradients into Param::grad

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Param* p : params) analytic.push_back(p->grad);

    for (auto [pi, ci] : coords) {
        Param& p = *params[pi];
        const double x0 = p.value.at(ci);
        const double h = step_base * (1.0 + std::fabs(x0));

        p.value.at(ci) = x0 + h;
        const double fp = f();
        p.value.at(ci) = x0 - h;
        const double fm = f();
        p.value.at(ci) = x0;

        GradCheckEntry e;
        e.param = p.name;
        e.coord = ci;
        e.analytic = analytic[pi].at(ci);
        e.numeric = (fp - fm) / (2.0 * h);
        e.non_finite = !std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(e.analytic);
        const double denom = std::max(1e-8, std::fabs(e.analytic) + std::fabs(e.numeric));
        e.rel_err = e.non_finite ? INFINITY : std::fabs(e.analytic - e.numeric) / denom;

        if (report.entries.empty() || e.rel_err > report.worst_rel_err || e.non_finite) {
            report.worst_rel_err = e.rel_err;
            report.worst = e;
        }
        report.entries.push_back(std::move(e));
    }
    report.checked = report.entries.size();

    // restore the analytic gradients (the f() calls above overwrote them)
    for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi]->grad = analytic[pi];
    return report;
}

GradCheckReport grad_check(const std::function<double()>& f, const std::vector<Param*>& params,
                           const GradCheckOptions& opt) {
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    std::size_t total = 0;
    for (const Param* p : params) total += p->size();
    if (opt.max_coords == 0 || opt.max_coords >= total) {
        for (std::size_t pi = 0; pi < params.size(); ++pi)
            for (std::size_t ci = 0; ci < params[pi]->size(); ++ci) coords.emplace_back(pi, ci);
    } else {
        Rng rng(opt.seed ^ 0x67ad9cfULL);
        for (std::size_t k = 0; k < opt.max_coords; ++k) {
            std::size_t flat = static_cast<std::size_t>(rng.below(total));
            std::size_t pi = 0;
            while (flat >= params[pi]->size()) {
                flat -= params[pi]->size();
                ++pi;
            }
            coords.emplace_back(pi, flat);
        }
    }
    return grad_check_coords(f, params, coords, opt.step_base);
}

}  // namespace ecgnn
