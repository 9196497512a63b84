#pragma once

#include <vector>

#include "isac/mat.hpp"

namespace isac {

/// Discrete-time noise schedule. Index convention: arrays use t-1 for
/// t in 1..T; alpha_bar_prev(1) is defined as 1, so the terminal step
/// injects no noise.
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> beta;            // beta_t
    std::vector<double> alpha;           // 1 - beta_t
    std::vector<double> alpha_bar;       // prod_{s<=t} alpha_s
    std::vector<double> posterior_sigma; // sqrt(beta_t * (1-abar_{t-1})/(1-abar_t))

    /// Linear beta from 1e-4 to 0.02 over T steps.
    static DiffusionSchedule linear(int T, double beta_min = 1e-4, double beta_max = 0.02);

    double beta_at(int t) const { return beta[t - 1]; }
    double alpha_at(int t) const { return alpha[t - 1]; }
    double alpha_bar_at(int t) const { return alpha_bar[t - 1]; }
    double sigma_at(int t) const { return posterior_sigma[t - 1]; }
};

}  // namespace isac
