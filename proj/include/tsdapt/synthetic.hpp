#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsdapt/data.hpp"

namespace tsdapt {

/// Per-domain distortion of the class signals.
struct DomainShift {
  double amplitude_scale = 1.0;
  double frequency_offset = 0.0;     // Hz
  std::vector<double> channel_bias;  // per channel; empty means zeros
  double rotation = 0.0;             // radians, mixes channels 0 and 1
};

/// Per-week increments applied on top of the domain shift.
struct WeeklyDrift {
  double frequency = 0.0;  // Hz per week
  double amplitude = 0.0;  // relative amplitude change per week
  double bias = 0.0;       // added to every channel per week
};

/// Parameters of the synthetic multi-domain activity benchmark. Class c on
/// channel k of domain d in week w is
///   A_c s_d (1 + w a) sin(2 pi (f_c + df_d + w f) t + phi + psi_ck) + b_dk + w b + noise
/// with the first two channels rotated by the domain's angle. Per-window
/// dispersion jitters amplitude (log-normal), frequency, and channel offsets.
struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t channels = 3;
  std::size_t length = 128;
  double sample_rate = 10.0;
  std::vector<double> class_frequencies;  // Hz, distinct; default 0.5, 1.0, ... Hz
  std::vector<double> class_amplitudes;   // default all 1
  std::size_t num_domains = 6;
  std::size_t weeks = 1;
  std::size_t windows_per_week = 250;
  /// Explicit shifts per domain; when empty they are drawn from
  /// `shift_magnitude` (scaling fixed standard-normal draws).
  std::vector<DomainShift> domain_shifts;
  double shift_magnitude = 0.0;
  WeeklyDrift drift;
  double noise = 0.1;
  double class_dispersion = 0.0;
  /// Optional per-domain class proportions; empty means balanced.
  std::vector<std::vector<double>> class_proportions;
  std::uint64_t seed = 0;
  std::string person_prefix = "p";

  void validate() const;
  std::vector<double> frequencies() const;
  std::vector<double> amplitudes() const;
  /// Explicit shifts, or the ones derived from `shift_magnitude`.
  std::vector<DomainShift> resolved_shifts() const;
};

struct DomainWindows {
  std::string id;
  std::vector<Window> windows;
};

/// Start of the synthetic timeline (Monday 2021-01-04 00:00 UTC).
inline constexpr double kSyntheticEpoch = 1609718400.0;

/// Deterministic given `spec.seed`; domains ordered by id.
std::vector<DomainWindows> generate_synthetic(const SyntheticSpec& spec);

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
void save_synthetic_spec(const std::filesystem::path& path, const SyntheticSpec& spec);

/// Writes one raw CSV per person whose preprocessing at 10 Hz reproduces the
/// generated windows: each window is an isolated episode, spaced more than
/// five minutes apart, with its label prompt on its last reading.
void write_synthetic_raw(const std::filesystem::path& dir, const std::vector<DomainWindows>& domains);

}  // namespace tsdapt
