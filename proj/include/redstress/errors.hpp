#pragma once

#include <stdexcept>
#include <string>

namespace redstress {

enum class errc {
  invalid_denominator,
  constraint_violation,
  normalization,
  empty_sample,
  domain,
  parameter,
  infeasible_moments,
  numerical,
  ordering,
  infeasible_correlation,
  unsupported_range,
  singular_design,
  sample_size,
  regime_empty,
  undefined_autocorrelation,
  nonstationary,
  unbounded_return_time,
  undefined_correlation,
  ingest,
  config,
};

class error : public std::runtime_error {
public:
  error(errc c, const std::string& msg) : std::runtime_error(msg), code_(c) {}
  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc c, const std::string& msg) { throw error(c, msg); }

}  // namespace redstress
