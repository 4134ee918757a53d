#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace graphevo {

/// Result of one finite-difference check. `max_rel_err` is the worst
/// parameter entry across the component, `tol` the bound it was held to.
struct ComponentCheck {
    std::string name;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool pass = false;
};

/// Central-difference gradient checks over every differentiable component:
/// the edge-conditioned convolution layer, the full generator and
/// discriminator, and each loss (l1 evaluated away from its kinks). Instances
/// are small random graphs drawn from `seed`, so the whole sweep runs in
/// seconds and the reported errors are reproducible. Purely linear paths are
/// held to `tol_linear`, everything else to `tol`.
std::vector<ComponentCheck> run_gradient_checks(std::uint64_t seed = 13, double tol = 1e-3,
                                                double tol_linear = 1e-5, double step = 1e-4);

bool all_pass(const std::vector<ComponentCheck>& checks);

} // namespace graphevo
