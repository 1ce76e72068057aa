#include "faceswap/diffusion.hpp"

#include <cmath>

namespace faceswap {

int NoiseSchedule::check_index(int t) const {
    if (t < 0 || t > num_steps)
        throw ParameterError("timestep " + std::to_string(t) + " out of range [0," + std::to_string(num_steps) + "]");
    return t;
}

static void finalize_tables(NoiseSchedule& s) {
    int T = s.num_steps;
    s.alphas.assign(T + 1, 1.0);
    s.alpha_bars.assign(T + 1, 1.0);
    s.posterior_variances.assign(T + 1, 0.0);
    for (int t = 1; t <= T; ++t) {
        s.alphas[t] = 1.0 - s.betas[t];
        s.alpha_bars[t] = s.alpha_bars[t - 1] * s.alphas[t];
        s.posterior_variances[t] = s.betas[t] * (1.0 - s.alpha_bars[t - 1]) / (1.0 - s.alpha_bars[t]);
    }
    if (s.timestep_map.empty()) {
        s.timestep_map.assign(T + 1, 0);
        for (int t = 0; t <= T; ++t) s.timestep_map[t] = t;
    }
}

NoiseSchedule make_schedule(ScheduleKind kind, int num_steps, double beta_start, double beta_end) {
    if (num_steps < 1) throw ParameterError("make_schedule: num_steps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ParameterError("make_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.kind = kind;
    s.num_steps = num_steps;
    s.betas.assign(num_steps + 1, 0.0);
    if (kind == ScheduleKind::Linear) {
        for (int t = 1; t <= num_steps; ++t)
            s.betas[t] = num_steps == 1
                             ? beta_start
                             : beta_start + (beta_end - beta_start) * (t - 1) / double(num_steps - 1);
    } else {
        // squared-cosine alpha_bar profile with the usual small offset
        const double offset = 0.008;
        auto abar = [&](double u) {
            double v = std::cos((u + offset) / (1.0 + offset) * M_PI / 2.0);
            return v * v;
        };
        double a0 = abar(0.0);
        double prev = 1.0;
        for (int t = 1; t <= num_steps; ++t) {
            double cur = abar(double(t) / num_steps) / a0;
            s.betas[t] = std::min(1.0 - cur / prev, 0.999);
            prev = cur;
        }
    }
    finalize_tables(s);
    return s;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    require_same_shape(x0, eps, "q_sample");
    double ab = sched.alpha_bar(t);
    float c0 = static_cast<float>(std::sqrt(ab));
    float c1 = static_cast<float>(std::sqrt(1.0 - ab));
    Tensor out = x0;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = c0 * x0.data[i] + c1 * eps.data[i];
    return out;
}

static std::pair<float, float> predict_x0_coeffs(int t, const NoiseSchedule& sched) {
    if (t < 1) throw ParameterError("predict_x0: t must be >= 1");
    double ab = sched.alpha_bar(t);
    if (ab < kAlphaBarFloor) throw NumericError("predict_x0: alpha_bar below numeric floor");
    return {static_cast<float>(1.0 / std::sqrt(ab)), static_cast<float>(std::sqrt(1.0 - ab) / std::sqrt(ab))};
}

Tensor predict_x0(const Tensor& x_t, int t, const Tensor& eps_pred, const NoiseSchedule& sched) {
    require_same_shape(x_t, eps_pred, "predict_x0");
    auto [c0, c1] = predict_x0_coeffs(t, sched);
    Tensor out = x_t;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = c0 * x_t.data[i] - c1 * eps_pred.data[i];
    return out;
}

ad::Var predict_x0(const ad::Var& x_t, int t, const ad::Var& eps_pred, const NoiseSchedule& sched) {
    auto [c0, c1] = predict_x0_coeffs(t, sched);
    return ad::sub(ad::scale(x_t, c0), ad::scale(eps_pred, c1));
}

Tensor posterior_mean(const Tensor& x_t, int t, const Tensor& eps_pred, const NoiseSchedule& sched) {
    require_same_shape(x_t, eps_pred, "posterior_mean");
    if (t < 1) throw ParameterError("posterior_mean: t must be >= 1");
    double ab = sched.alpha_bar(t);
    if (ab < kAlphaBarFloor) throw NumericError("posterior_mean: alpha_bar below numeric floor");
    double beta = sched.beta(t);
    float inv = static_cast<float>(1.0 / std::sqrt(1.0 - beta));
    float c = static_cast<float>(beta / std::sqrt(1.0 - ab));
    Tensor out = x_t;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = inv * (x_t.data[i] - c * eps_pred.data[i]);
    return out;
}

Tensor ddpm_step(const Tensor& x_t, int t, const Tensor& eps_pred, const Tensor& z,
                 const NoiseSchedule& sched) {
    Tensor out = posterior_mean(x_t, t, eps_pred, sched);
    if (t == 1) return out;  // final transition is deterministic
    require_same_shape(x_t, z, "ddpm_step");
    float sigma = static_cast<float>(std::sqrt(sched.posterior_variances[t]));
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += sigma * z.data[i];
    return out;
}

NoiseSchedule respace(const NoiseSchedule& sched, int num_sample_steps) {
    int T = sched.num_steps;
    if (num_sample_steps < 1 || num_sample_steps > T)
        throw ParameterError("respace: num_sample_steps out of range");
    NoiseSchedule out;
    out.kind = sched.kind;
    out.num_steps = num_sample_steps;
    out.betas.assign(num_sample_steps + 1, 0.0);
    out.timestep_map.assign(num_sample_steps + 1, 0);
    double prev_ab = 1.0;
    for (int i = 1; i <= num_sample_steps; ++i) {
        // even selection over 1..T, always keeping the endpoint T
        int idx = static_cast<int>(std::llround(double(i) * T / num_sample_steps));
        idx = std::max(1, std::min(T, idx));
        double ab = sched.alpha_bars[idx];
        out.betas[i] = 1.0 - ab / prev_ab;
        out.timestep_map[i] = sched.timestep_map[idx];
        prev_ab = ab;
    }
    finalize_tables(out);
    return out;
}

std::string to_string(ScheduleKind k) { return k == ScheduleKind::Linear ? "linear" : "cosine"; }

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw ConfigError("unknown schedule kind: " + s);
}

}  // namespace faceswap
