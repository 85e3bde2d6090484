#pragma once

// Analytic driver: proportional steering on the target offset and heading,
// proportional speed tracking, constant-deceleration braking.

#include "cma/cogmap.hpp"

namespace cma {

struct TeacherGains {
  double k_p = 0.2;               // [rad/m]
  double k_h = 1.0;               // [rad/rad]
  double k_v = 0.5;               // [1/s]
  double steer_limit = 0.5;       // [rad]
  double steer_rate_limit = 1.0;  // [rad/s]
  // Steering magnitude is further capped so that v^2 tan(delta) / L stays
  // below this lateral acceleration.
  double lat_accel_limit = 2.5;   // [m/s^2]
  double wheelbase = 2.6;         // [m]

  void Validate() const;
};

struct SpeedRule {
  double cruise_speed = 40.0 / 3.6;  // [m/s]
  double brake_decel = 3.0;          // [m/s^2]
  double accel_limit = 3.0;          // [m/s^2]
};

// Steering limit at the given speed.
double SteerLimit(const TeacherGains& g, double speed);

// k_p * D_o - k_h * V_a, clamped to SteerLimit. D_o > 0 (target on the
// right) and V_a > 0 (nose right of the lane) follow the same sign as
// steering (positive turns right).
double TeacherSteer(const TeacherGains& g, double D_o, double V_a, double speed);

// Moves prev towards command by at most rate * dt.
double RateLimit(double prev, double command, double rate, double dt);

double SpeedCommand(const SpeedRule& rule, const TeacherGains& g,
                    DrivingIntention intent, double speed);

// Stateful wrapper holding the last applied steering for the rate limiter.
class Teacher {
 public:
  explicit Teacher(TeacherGains gains = {}) : gains_(gains) {}

  double Steer(double D_o, double V_a, double speed, double dt);
  void Reset(double steering = 0.0) { prev_ = steering; }
  double previous() const { return prev_; }
  const TeacherGains& gains() const { return gains_; }

 private:
  TeacherGains gains_;
  double prev_ = 0.0;
};

}  // namespace cma
