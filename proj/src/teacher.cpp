#include "cma/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "cma/error.hpp"

namespace cma {

void TeacherGains::Validate() const {
  if (!(k_p > 0 && k_h > 0 && k_v > 0 && steer_limit > 0 && steer_rate_limit > 0 &&
        lat_accel_limit > 0 && wheelbase > 0)) {
    throw Error(ErrorCode::kConfigInvalid, "teacher gains must be positive");
  }
}

double SteerLimit(const TeacherGains& g, double speed) {
  if (speed <= 0.0) return g.steer_limit;
  return std::min(g.steer_limit,
                  std::atan(g.lat_accel_limit * g.wheelbase / (speed * speed)));
}

double TeacherSteer(const TeacherGains& g, double D_o, double V_a, double speed) {
  const double limit = SteerLimit(g, speed);
  return std::clamp(g.k_p * D_o - g.k_h * V_a, -limit, limit);
}

double RateLimit(double prev, double command, double rate, double dt) {
  const double step = rate * dt;
  return std::clamp(command, prev - step, prev + step);
}

double SpeedCommand(const SpeedRule& rule, const TeacherGains& g,
                    DrivingIntention intent, double speed) {
  if (intent == DrivingIntention::kBrakeAndStayInLane) {
    return speed > 0.0 ? -rule.brake_decel : 0.0;
  }
  return std::clamp(g.k_v * (rule.cruise_speed - speed), -rule.accel_limit,
                    rule.accel_limit);
}

double Teacher::Steer(double D_o, double V_a, double speed, double dt) {
  const double raw = TeacherSteer(gains_, D_o, V_a, speed);
  prev_ = RateLimit(prev_, raw, gains_.steer_rate_limit, dt);
  return prev_;
}

}  // namespace cma
