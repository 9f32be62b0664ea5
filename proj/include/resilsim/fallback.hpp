#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace resilsim::breaker {

inline constexpr std::string_view kPaymentUnavailable =
    "Payment service is unavailable at the moment. Please try again later.";
inline constexpr std::string_view kServiceUnavailable = "Service Unavailable";

struct FlightSearchResponse {
  std::string status;
  std::vector<std::string> flights;

  bool operator==(const FlightSearchResponse&) const = default;
};

inline std::string payment_fallback() { return std::string(kPaymentUnavailable); }

inline FlightSearchResponse flight_search_fallback() {
  return FlightSearchResponse{std::string(kServiceUnavailable), {}};
}

/// Degraded response a caller returns when a guarded dependency is denied or fails.
enum class FallbackKind { None, Payment, FlightSearch };

std::string_view to_string(FallbackKind kind);
FallbackKind fallback_kind_from(std::string_view name);  // throws std::invalid_argument

/// Body recorded on a hop that engaged the fallback.
std::string fallback_body(FallbackKind kind);

}  // namespace resilsim::breaker
