#include "patchdepth/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchdepth/errors.hpp"

namespace patchdepth {

void SolverConfig::validate() const {
  if (iters < 0) throw ValidationError("iteration count must be nonnegative");
  if (!(lr_depth > 0.0) || !(lr_pose > 0.0)) {
    throw ValidationError("learning rates must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("moment decay rates must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  if (!(depth_min > 0.0) || !(depth_max > depth_min)) {
    throw ValidationError("depth clamp range is empty");
  }
}

namespace {

// one Adam coordinate: returns the bias-corrected step for gradient g
class Moments {
 public:
  explicit Moments(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  double step(std::size_t i, double g, const SolverConfig& c, double bc1,
              double bc2) {
    m_[i] = c.beta1 * m_[i] + (1.0 - c.beta1) * g;
    v_[i] = c.beta2 * v_[i] + (1.0 - c.beta2) * g * g;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    return mhat / (std::sqrt(vhat) + c.eps);
  }

 private:
  std::vector<double> m_, v_;
};

}  // namespace

SolverResult refine(FrameBundle bundle, const SolverConfig& config) {
  config.validate();
  bundle.validate();

  const std::size_t n_grid = bundle.grid.log_depth.size();
  const std::size_t n_pose = 6 * bundle.twists.size();
  Moments grid_moments(n_grid);
  Moments pose_moments(n_pose);
  const double log_min = std::log(config.depth_min);
  const double log_max = std::log(config.depth_max);

  SolverResult out;
  out.trace.reserve(static_cast<std::size_t>(config.iters) + 1);

  for (int iter = 0; iter <= config.iters; ++iter) {
    TotalLossResult eval;
    try {
      eval = total_loss_and_grad(bundle, config.loss);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(iter) + ": " +
                         e.what());
    }
    if (!std::isfinite(eval.breakdown.total)) {
      throw NumericError("iteration " + std::to_string(iter) +
                         ": loss is not finite");
    }
    out.trace.push_back({iter, eval.breakdown.total,
                         eval.breakdown.photometric,
                         eval.breakdown.smoothness, eval.breakdown.planar,
                         eval.breakdown.surviving_points});
    if (iter == config.iters) {
      out.final_eval = std::move(eval);
      break;
    }

    const int t = iter + 1;
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);

    if (!config.fix_depth) {
      for (std::size_t i = 0; i < n_grid; ++i) {
        const double step =
            grid_moments.step(i, eval.grads.grid[i], config, bc1, bc2);
        bundle.grid.log_depth[i] = std::clamp(
            bundle.grid.log_depth[i] - config.lr_depth * step, log_min,
            log_max);
      }
    }
    if (!config.fix_poses) {
      for (std::size_t s = 0; s < bundle.twists.size(); ++s) {
        Twist increment;
        for (int i = 0; i < 6; ++i) {
          const double step = pose_moments.step(
              6 * s + i, eval.grads.twists[s][i], config, bc1, bc2);
          const double delta = -config.lr_pose * step;
          if (i < 3) {
            increment.v[i] = delta;
          } else {
            increment.w[i - 3] = delta;
          }
        }
        bundle.twists[s] = se3_log(pose_compose(
            se3_exp(increment), se3_exp(bundle.twists[s])));
      }
    }
  }

  out.bundle = std::move(bundle);
  return out;
}

}  // namespace patchdepth
