#pragma once

// Classical gradient projection for the LRMS-aware and PAN-aware fidelity
// problems, using the exact observation operators:
//
//   f(H) = 1/2 |L - DKH|^2        grad f = -(DK)^T (L - DKH)
//   g(H) = 1/2 |P - HS|^2         grad g = -(P - HS) S^T
//
// A step is H+ = prox(H - rho * grad). This is the non-learned counterpart of
// the MS and PAN blocks and the reference they are tested against.

#include <vector>

#include "pansharp/observation.hpp"

namespace pansharp {

enum class Prox { identity, nonneg_clip };

struct GPConfig {
    double rho = 0.5;
    std::size_t iterations = 50;
    Prox prox = Prox::identity;
    DegradationSpec spec;

    void validate() const;
};

template <typename T>
Tensor<T> apply_prox(const Tensor<T>& h, Prox prox);

template <typename T>
Tensor<T> grad_f(const Tensor<T>& h, const Tensor<T>& lrms, const DegradationSpec& spec);
template <typename T>
Tensor<T> grad_g(const Tensor<T>& h, const Tensor<T>& pan, const DegradationSpec& spec);

template <typename T>
double fidelity_f(const Tensor<T>& h, const Tensor<T>& lrms, const DegradationSpec& spec);
template <typename T>
double fidelity_g(const Tensor<T>& h, const Tensor<T>& pan, const DegradationSpec& spec);

// Four-step split: L^ = DKH, R_l = L - L^, R_h = rho (DK)^T R_l, H+ = prox(H + R_h).
template <typename T>
Tensor<T> gp_step_ms(const Tensor<T>& h, const Tensor<T>& lrms, const GPConfig& cfg);
// Four-step split: P^ = HS, R_p = P - P^, R_h = rho R_p S^T, H+ = prox(H + R_h).
template <typename T>
Tensor<T> gp_step_pan(const Tensor<T>& h, const Tensor<T>& pan, const GPConfig& cfg);
// H+ = prox(H - rho (grad f + grad g)).
template <typename T>
Tensor<T> fused_gp_step(const Tensor<T>& h, const Tensor<T>& lrms, const Tensor<T>& pan, const GPConfig& cfg);

template <typename T>
struct SolveResult {
    Tensor<T> image;
    // Index 0 is the initial estimate, index i the estimate after round i.
    std::vector<double> f_trace;
    std::vector<double> g_trace;
};

// Starts from bicubic-upsampled LRMS and alternates MS and PAN steps.
// Throws NumericError when f + g grows more than tenfold over its start.
template <typename T>
SolveResult<T> solve(const Tensor<T>& lrms, const Tensor<T>& pan, const GPConfig& cfg);
// Same iteration from a caller-provided start.
template <typename T>
SolveResult<T> solve_from(const Tensor<T>& init, const Tensor<T>& lrms, const Tensor<T>& pan, const GPConfig& cfg);

}  // namespace pansharp
