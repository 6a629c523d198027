#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

#include "vaxledger/error.hpp"
#include "vaxledger/sim_time.hpp"

namespace vaxledger {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

/// Exact transaction rate: basis_count / horizon_seconds.
struct LoadDerivation {
  std::int64_t basis_count = 0;
  std::int64_t horizon_seconds = 0;
  Rational tps;

  double value() const { return to_double(tps); }
};

inline LoadDerivation required_registration_tps(std::int64_t population, std::int64_t doses_per_person,
                                                std::int64_t horizon_seconds) {
  require(horizon_seconds > 0, Errc::invalid_argument, "horizon must be positive");
  require(population > 0 && doses_per_person > 0, Errc::invalid_argument, "population and doses must be positive");
  std::int64_t basis = population * doses_per_person;
  return {basis, horizon_seconds, Rational(basis, horizon_seconds)};
}

inline LoadDerivation required_verification_tps(std::int64_t annual_passengers, std::int64_t horizon_seconds) {
  require(horizon_seconds > 0, Errc::invalid_argument, "horizon must be positive");
  require(annual_passengers > 0, Errc::invalid_argument, "passenger count must be positive");
  return {annual_passengers, horizon_seconds, Rational(annual_passengers, horizon_seconds)};
}

/// Rounds to two significant figures; prefixes "≈" when that differs from
/// rounding to the nearest integer.
inline std::string display_tps(double tps) {
  require(tps > 0, Errc::invalid_argument, "tps must be positive");
  double magnitude = std::pow(10.0, std::floor(std::log10(tps)) - 1);
  double two_sig = std::round(tps / magnitude) * magnitude;
  long long shown = std::llround(two_sig);
  long long nearest = std::llround(tps);
  std::string text = std::to_string(shown);
  return shown == nearest ? text : "≈" + text;
}

// ---------------------------------------------------------------------------
// Arrival schedules
// ---------------------------------------------------------------------------

enum class ArrivalMode : std::uint8_t { uniform, poisson };

inline std::string_view to_string(ArrivalMode m) { return m == ArrivalMode::uniform ? "uniform" : "poisson"; }

inline ArrivalMode parse_arrival_mode(std::string_view s) {
  if (s == "uniform") return ArrivalMode::uniform;
  if (s == "poisson") return ArrivalMode::poisson;
  fail(Errc::invalid_argument, "unknown arrival mode '" + std::string(s) + "'");
}

struct ArrivalSchedule {
  ArrivalMode mode = ArrivalMode::uniform;
  double tps = 0;
  double duration_seconds = 0;
  std::uint64_t seed = 0;
  std::vector<SimTime> arrivals;
};

namespace detail {
// Uniform double in [0, 1) from the top 53 bits; std distributions are not
// portable across standard libraries.
inline double unit_interval(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
}  // namespace detail

/// Uniform: round(tps × duration) arrivals at i / tps. Poisson: exponential
/// gaps from a seeded mt19937_64 until the duration is exceeded.
inline ArrivalSchedule generate_arrivals(double tps, double duration_seconds, ArrivalMode mode = ArrivalMode::uniform,
                                         std::uint64_t seed = 0) {
  require(tps > 0 && std::isfinite(tps), Errc::invalid_argument, "tps must be positive");
  require(duration_seconds > 0 && std::isfinite(duration_seconds), Errc::invalid_argument,
          "duration must be positive");
  ArrivalSchedule s{mode, tps, duration_seconds, seed, {}};
  if (mode == ArrivalMode::uniform) {
    auto n = static_cast<std::size_t>(std::llround(tps * duration_seconds));
    s.arrivals.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) s.arrivals.push_back(at_seconds(static_cast<double>(i) / tps));
  } else {
    std::mt19937_64 rng(seed);
    double t = 0;
    while (true) {
      t += -std::log1p(-detail::unit_interval(rng)) / tps;
      if (t > duration_seconds) break;
      s.arrivals.push_back(at_seconds(t));
    }
  }
  return s;
}

}  // namespace vaxledger
