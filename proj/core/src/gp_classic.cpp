#include "pansharp/gp_classic.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pansharp/image_ops.hpp"

namespace pansharp {

void GPConfig::validate() const {
    if (!(rho >= 0.0)) throw std::invalid_argument("GP step size rho must be nonnegative");
    if (iterations == 0) throw std::invalid_argument("GP iterations must be positive");
    spec.validate();
}

template <typename T>
Tensor<T> apply_prox(const Tensor<T>& h, Prox prox) {
    if (prox == Prox::identity) return h;
    Tensor<T> out = h;
    for (T& v : out.data()) v = v > T(0) ? v : T(0);
    return out;
}

namespace {

template <typename T>
void check_pair(const Tensor<T>& h, const Tensor<T>& lrms, const DegradationSpec& spec) {
    const std::size_t r = spec.ratio;
    if (h.rank() != 3 || lrms.rank() != 3 || h.dim(0) != lrms.dim(0) || h.dim(1) != lrms.dim(1) * r ||
        h.dim(2) != lrms.dim(2) * r)
        throw ShapeError("HRMS " + shape_str(h.shape()) + " and LRMS " + shape_str(lrms.shape()) +
                         " are inconsistent at ratio " + std::to_string(r));
}

template <typename T>
void check_pan(const Tensor<T>& h, const Tensor<T>& pan) {
    if (h.rank() != 3 || pan.rank() != 3 || pan.dim(0) != 1 || pan.dim(1) != h.dim(1) || pan.dim(2) != h.dim(2))
        throw ShapeError("HRMS " + shape_str(h.shape()) + " and PAN " + shape_str(pan.shape()) + " are inconsistent");
}

template <typename T>
Tensor<T> minus(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

template <typename T>
double half_sq_norm(const Tensor<T>& t) {
    double s = 0.0;
    for (T v : t.data()) s += static_cast<double>(v) * static_cast<double>(v);
    return 0.5 * s;
}

// DK^T applied to the LRMS residual, the LRMS half of the step.
template <typename T>
Tensor<T> ms_residual(const Tensor<T>& h, const Tensor<T>& lrms, const DegradationSpec& spec) {
    const Tensor<T> l_hat = apply_blur_downsample(h, spec);
    const Tensor<T> r_l = minus(lrms, l_hat);
    return apply_blur_downsample_adjoint(r_l, spec);
}

template <typename T>
Tensor<T> pan_residual(const Tensor<T>& h, const Tensor<T>& pan, const DegradationSpec& spec) {
    const Tensor<T> p_hat = apply_spectral_response(h, spec);
    const Tensor<T> r_p = minus(pan, p_hat);
    return apply_spectral_response_adjoint(r_p, spec);
}

template <typename T>
Tensor<T> step_with(const Tensor<T>& h, const Tensor<T>& residual, double rho, Prox prox) {
    Tensor<T> out = h;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += static_cast<T>(rho * static_cast<double>(residual[i]));
    return apply_prox(out, prox);
}

}  // namespace

template <typename T>
Tensor<T> grad_f(const Tensor<T>& h, const Tensor<T>& lrms, const DegradationSpec& spec) {
    check_pair(h, lrms, spec);
    Tensor<T> g = ms_residual(h, lrms, spec);
    for (T& v : g.data()) v = -v;
    return g;
}

template <typename T>
Tensor<T> grad_g(const Tensor<T>& h, const Tensor<T>& pan, const DegradationSpec& spec) {
    check_pan(h, pan);
    Tensor<T> g = pan_residual(h, pan, spec);
    for (T& v : g.data()) v = -v;
    return g;
}

template <typename T>
double fidelity_f(const Tensor<T>& h, const Tensor<T>& lrms, const DegradationSpec& spec) {
    check_pair(h, lrms, spec);
    return half_sq_norm(minus(lrms, apply_blur_downsample(h, spec)));
}

template <typename T>
double fidelity_g(const Tensor<T>& h, const Tensor<T>& pan, const DegradationSpec& spec) {
    check_pan(h, pan);
    return half_sq_norm(minus(pan, apply_spectral_response(h, spec)));
}

template <typename T>
Tensor<T> gp_step_ms(const Tensor<T>& h, const Tensor<T>& lrms, const GPConfig& cfg) {
    check_pair(h, lrms, cfg.spec);
    return step_with(h, ms_residual(h, lrms, cfg.spec), cfg.rho, cfg.prox);
}

template <typename T>
Tensor<T> gp_step_pan(const Tensor<T>& h, const Tensor<T>& pan, const GPConfig& cfg) {
    check_pan(h, pan);
    return step_with(h, pan_residual(h, pan, cfg.spec), cfg.rho, cfg.prox);
}

template <typename T>
Tensor<T> fused_gp_step(const Tensor<T>& h, const Tensor<T>& lrms, const Tensor<T>& pan, const GPConfig& cfg) {
    check_pair(h, lrms, cfg.spec);
    check_pan(h, pan);
    Tensor<T> residual = ms_residual(h, lrms, cfg.spec);
    const Tensor<T> rp = pan_residual(h, pan, cfg.spec);
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] += rp[i];
    return step_with(h, residual, cfg.rho, cfg.prox);
}

template <typename T>
SolveResult<T> solve_from(const Tensor<T>& init, const Tensor<T>& lrms, const Tensor<T>& pan, const GPConfig& cfg) {
    cfg.validate();
    SolveResult<T> result;
    result.image = init;
    result.f_trace.push_back(fidelity_f(result.image, lrms, cfg.spec));
    result.g_trace.push_back(fidelity_g(result.image, pan, cfg.spec));
    const double start = result.f_trace[0] + result.g_trace[0];
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        result.image = gp_step_pan(gp_step_ms(result.image, lrms, cfg), pan, cfg);
        const double f = fidelity_f(result.image, lrms, cfg.spec);
        const double g = fidelity_g(result.image, pan, cfg.spec);
        result.f_trace.push_back(f);
        result.g_trace.push_back(g);
        if (!std::isfinite(f + g) || (f + g > 10.0 * start && f + g > 1e-12)) {
            std::ostringstream os;
            os << "gradient projection diverged at round " << it + 1 << " (f+g = " << f + g << ", start "
               << start << "); use a smaller rho than " << cfg.rho;
            throw NumericError(os.str());
        }
    }
    return result;
}

template <typename T>
SolveResult<T> solve(const Tensor<T>& lrms, const Tensor<T>& pan, const GPConfig& cfg) {
    return solve_from(bicubic_upsample(lrms, cfg.spec.ratio), lrms, pan, cfg);
}

#define PANSHARP_INSTANTIATE(T)                                                                        \
    template Tensor<T> apply_prox<T>(const Tensor<T>&, Prox);                                          \
    template Tensor<T> grad_f<T>(const Tensor<T>&, const Tensor<T>&, const DegradationSpec&);          \
    template Tensor<T> grad_g<T>(const Tensor<T>&, const Tensor<T>&, const DegradationSpec&);          \
    template double fidelity_f<T>(const Tensor<T>&, const Tensor<T>&, const DegradationSpec&);         \
    template double fidelity_g<T>(const Tensor<T>&, const Tensor<T>&, const DegradationSpec&);         \
    template Tensor<T> gp_step_ms<T>(const Tensor<T>&, const Tensor<T>&, const GPConfig&);             \
    template Tensor<T> gp_step_pan<T>(const Tensor<T>&, const Tensor<T>&, const GPConfig&);            \
    template Tensor<T> fused_gp_step<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const GPConfig&); \
    template SolveResult<T> solve<T>(const Tensor<T>&, const Tensor<T>&, const GPConfig&);             \
    template SolveResult<T> solve_from<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const GPConfig&);

PANSHARP_INSTANTIATE(float)
PANSHARP_INSTANTIATE(double)
#undef PANSHARP_INSTANTIATE

}  // namespace pansharp
