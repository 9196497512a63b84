#include "isac/diffusion.hpp"

#include <cmath>

namespace isac {

DiffusionSchedule DiffusionSchedule::linear(int T, double beta_min, double beta_max) {
    if (T < 2) throw ConfigError("diffusion schedule: T must be >= 2");
    DiffusionSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.posterior_sigma.resize(T);
    double abar = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double b = beta_min + (beta_max - beta_min) * (t - 1) / (T - 1);
        const double abar_prev = abar;  // alpha_bar_{t-1}, = 1 for t = 1
        s.beta[t - 1] = b;
        s.alpha[t - 1] = 1.0 - b;
        abar *= s.alpha[t - 1];
        s.alpha_bar[t - 1] = abar;
        s.posterior_sigma[t - 1] =
            t == 1 ? 0.0 : std::sqrt(b * (1.0 - abar_prev) / (1.0 - abar));
    }
    return s;
}

}  // namespace isac
