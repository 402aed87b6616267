#pragma once

#include <iosfwd>

#include "ecgnn/gradcheck.hpp"
#include "ecgnn/model.hpp"

namespace ecgnn {

struct SuiteCase {
    std::string name;
    GradCheckReport report;
};

struct SuiteResult {
    std::vector<SuiteCase> cases;

    bool ok(double tol) const;
    const SuiteCase* worst() const;
};

// Central-difference verification of every differentiable primitive, each
// on random inputs with `points` sampled coordinates. A `fault` name (test
// hook) swaps in a deliberately broken backward for that primitive.
SuiteResult run_primitive_suite(std::uint64_t seed, std::size_t points = 100, const std::string& fault = "");

// Whole-model check: full forward loss on one random synthetic sample,
// checking the strongest-gradient coordinate of n_params randomly sampled
// parameter tensors.
GradCheckReport run_model_check(std::uint64_t seed, std::size_t n_params = 20);

void print_suite(std::ostream& os, const SuiteResult& result, double tol);

}  // namespace ecgnn
