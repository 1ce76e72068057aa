#ifndef FACESWAP_DIFFUSION_HPP
#define FACESWAP_DIFFUSION_HPP

#include <string>
#include <vector>

#include "faceswap/ad.hpp"
#include "faceswap/tensor.hpp"

namespace faceswap {

enum class ScheduleKind { Linear, Cosine };

// Variance schedule tables. All arrays are indexed by timestep 1..T with a
// leading slot at index 0 so that alpha_bar[0] == 1 exactly (step index 0
// denotes the clean image; blending relies on this).
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Linear;
    int num_steps = 0;
    std::vector<double> betas;               // betas[0] = 0, unused
    std::vector<double> alphas;              // 1 - beta_t
    std::vector<double> alpha_bars;          // cumulative product, alpha_bars[0] = 1
    std::vector<double> posterior_variances; // beta_t * (1 - abar_{t-1}) / (1 - abar_t)
    // When the schedule was produced by respacing, maps sampling step i (1..T)
    // to the originating timestep of the parent schedule (used for the
    // denoiser's timestep conditioning). Identity map otherwise.
    std::vector<int> timestep_map;

    double alpha_bar(int t) const { return alpha_bars[check_index(t)]; }
    double beta(int t) const { return betas[check_index(t)]; }
    int check_index(int t) const;
};

// Minimum alpha_bar allowed in divisions.
inline constexpr double kAlphaBarFloor = 1e-8;

NoiseSchedule make_schedule(ScheduleKind kind, int num_steps, double beta_start = 1e-4,
                            double beta_end = 0.02);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. t in 0..T (t = 0 returns x0).
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

// x0_hat = (x_t - sqrt(1 - abar_t) eps_pred) / sqrt(abar_t). t in 1..T.
Tensor predict_x0(const Tensor& x_t, int t, const Tensor& eps_pred, const NoiseSchedule& sched);
ad::Var predict_x0(const ad::Var& x_t, int t, const ad::Var& eps_pred, const NoiseSchedule& sched);

// mu = (x_t - beta_t / sqrt(1 - abar_t) eps_pred) / sqrt(1 - beta_t). t in 1..T.
Tensor posterior_mean(const Tensor& x_t, int t, const Tensor& eps_pred, const NoiseSchedule& sched);

// One reverse transition: posterior_mean + sqrt(posterior_variance_t) * z.
// z is forced to zero at t = 1.
Tensor ddpm_step(const Tensor& x_t, int t, const Tensor& eps_pred, const Tensor& z,
                 const NoiseSchedule& sched);

// Selects num_sample_steps timesteps evenly over 1..T and rebuilds betas so
// the cumulative alpha_bar at the kept points is preserved exactly.
NoiseSchedule respace(const NoiseSchedule& sched, int num_sample_steps);

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

}  // namespace faceswap

#endif
