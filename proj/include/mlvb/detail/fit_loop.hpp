#pragma once

#include <chrono>
#include <cmath>
#include <string>

#include "mlvb/mfvb.hpp"

namespace mlvb::detail {

inline void check_elbo(double elbo, double previous, int iter, const FitOptions& opts) {
    if (!std::isfinite(elbo))
        throw NumericalError(Failure::non_finite, "evidence lower bound is not finite at iteration " + std::to_string(iter));
    if (opts.check_monotone && iter > 1 && elbo < previous - 1e-10 * std::abs(previous))
        throw NumericalError(Failure::inconsistent, "evidence lower bound decreased at iteration " + std::to_string(iter));
}

// Coordinate ascent driver shared by the streamlined and naive fits. The
// clock covers the cycle loop only.
template <class Result, class Data, class Priors, class Init, class Step>
Result run_fit(const Data& data, const Priors& priors, const FitOptions& opts, Init init, Step step) {
    if (opts.max_iter < 1 || !(opts.tol > 0.0)) throw ShapeError("max_iter must be >= 1 and tol > 0");
    Result out;
    out.state = init(data, priors);
    const auto start = std::chrono::steady_clock::now();
    double previous = 0.0;
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        step(data, priors, out.state);
        check_elbo(out.state.elbo, previous, iter, opts);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.trace.push_back({iter, out.state.elbo, secs});
        out.iterations = iter;
        if (!opts.fixed_iterations && iter > 1 && out.state.elbo - previous < opts.tol * std::abs(previous)) {
            out.converged = true;
            break;
        }
        previous = out.state.elbo;
    }
    if (opts.fixed_iterations) out.converged = true;
    return out;
}

}  // namespace mlvb::detail
