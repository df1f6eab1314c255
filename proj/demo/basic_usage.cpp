// Minimal library walkthrough: simulate ratings, fit the model, and score
// predictions on the hidden pairs.

#include <cstdio>

#include "bmm/bmm.hpp"

int main() {
    bmm::SimScenario scenario = bmm::builtin_scenario(5);
    scenario.eta = 0.2;
    scenario.seed = 7;
    const bmm::SimOutput sim = bmm::generate(scenario);
    std::printf("observed %zu ratings, hidden %zu\n", sim.observed.size(), sim.hidden.size());

    bmm::ModelConfig config = bmm::ModelConfig::uniform(scenario.K, scenario.L);
    config.max_iters = 200;
    config.rel_tol = 1e-5;
    config.seed = 3;
    const bmm::FitResult fitted = bmm::fit(sim.observed, config);
    std::printf("converged=%d after %zu iterations, final objective %.4f\n",
                fitted.converged ? 1 : 0, fitted.iterations, fitted.elbo_trace.back());

    const bmm::MembershipEstimates est = bmm::estimate_memberships(fitted.state);
    const auto truth = bmm::to_rated_pairs(sim.hidden);
    const auto preds = bmm::predict_many(est, fitted.mu, sim.observed.scale(), truth);
    const bmm::EvalReport report = bmm::evaluate(preds, truth);
    std::printf("hidden-set MAE %.4f  MSE %.4f  exact-match rate %.4f\n",
                report.mae, report.mse, report.ar);
    return 0;
}
