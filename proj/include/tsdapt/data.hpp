#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsdapt/array.hpp"
#include "tsdapt/losses.hpp"

namespace tsdapt {

inline constexpr std::size_t kMotionChannels = 9;
inline constexpr std::array<std::string_view, kMotionChannels> kMotionChannelNames{
    "ax", "ay", "az", "rx", "ry", "rz", "yaw", "pitch", "roll"};

enum class LocationType { other, house, road, service, work, attraction };
inline constexpr std::array<std::string_view, 6> kLocationNames{"other",   "house", "road",
                                                                 "service", "work",  "attraction"};
inline constexpr std::size_t kContextFeatures = kLocationNames.size() + 3;

/// One row of a raw per-person sensor stream.
struct SensorReading {
  double timestamp = 0.0;  // UTC seconds
  std::array<double, kMotionChannels> motion{};
  std::optional<std::string> location_type;
  std::optional<std::string> label;
  std::string person_id;

  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

/// Activity prompt answered at `time`; labels the preceding five minutes.
struct Prompt {
  double time = 0.0;
  std::string label;
};

inline constexpr double kLabelLookback = 300.0;

/// A fixed-length multichannel window with per-window context.
struct Window {
  Array values;                 // [K x H]
  std::vector<double> context;  // one-hot location (6), day of week, hour, minutes past midnight
  std::optional<int> label;
  std::string person;
  int week = 0;

  friend bool operator==(const Window&, const Window&) = default;
};

/// Labeled/unlabeled splits for one domain (a person, or a person-week).
struct DomainDataset {
  std::string id;
  std::vector<Window> train;
  std::vector<Window> valid;
  std::vector<Window> test;
  bool train_labels_stripped = false;
};

/// Category renames applied at ingestion; a null target drops the label.
using LabelMap = std::map<std::string, std::optional<std::string>>;

// --- raw stream processing -------------------------------------------------

/// Reads `timestamp,ax,ay,az,rx,ry,rz,yaw,pitch,roll,location_type,label`.
/// Throws DataError naming the line on malformed rows and naming the person and
/// timestamp when timestamps decrease.
std::vector<SensorReading> ingest_csv(const std::filesystem::path& path,
                                      const std::string& person_id);
std::vector<SensorReading> ingest_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<SensorReading>& readings);

void apply_label_map(std::vector<SensorReading>& readings, const LabelMap& map);
LabelMap load_label_map(const std::filesystem::path& path);

/// Decimates to `target_rate` (keeping every k-th sample, k = input/target)
/// and carries the last observed location forward; readings before the first
/// observation get "other".
std::vector<SensorReading> resample_and_carry_forward(const std::vector<SensorReading>& readings,
                                                      double input_rate, double target_rate = 10.0);

/// Labels present on readings, in time order. These are the prompt answers.
std::vector<Prompt> extract_prompts(const std::vector<SensorReading>& readings);

/// A reading at u receives the label of prompt (t, l) iff t - 300 <= u <= t;
/// later prompts win. All prior labels are cleared first.
std::vector<SensorReading> assign_labels(std::vector<SensorReading> readings,
                                         const std::vector<Prompt>& prompts);

LocationType parse_location(std::string_view name);

/// Context vector: one-hot location, day of week (Monday = 0), hour, and
/// minutes past midnight, all in UTC.
std::vector<double> encode_features(const SensorReading& reading);

/// Week index counted from `origin` (both UTC seconds).
int week_index(double timestamp, double origin);

/// Sorted distinct labels -> 0..L-1.
std::map<std::string, int> build_vocabulary(const std::vector<SensorReading>& readings);

/// Non-overlapping windows of `length` readings that never cross a person or
/// week boundary. A window is labeled with the majority label when at least
/// half of its readings are labeled (ties go to the smallest class index);
/// context comes from the first reading. `channels` indexes into the motion
/// array; empty means all nine.
std::vector<Window> segment_windows(const std::vector<SensorReading>& readings, std::size_t length,
                                    const std::map<std::string, int>& vocabulary,
                                    const std::vector<std::size_t>& channels = {},
                                    std::optional<double> week_origin = std::nullopt);

// --- windowed datasets -----------------------------------------------------

void write_windows_jsonl(const std::filesystem::path& path, const std::vector<Window>& windows);
std::vector<Window> read_windows_jsonl(const std::filesystem::path& path);

struct SplitFractions {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
};

/// Disjoint shuffled splits. The target domain's training split is returned
/// with labels removed.
DomainDataset split_train_valid_test(std::string id, std::vector<Window> windows,
                                     const SplitFractions& fractions, std::uint64_t seed,
                                     bool is_target);

/// Empirical class frequencies over labeled windows.
LabelProportions measure_label_proportions(const std::vector<Window>& windows,
                                           std::size_t num_classes);

void strip_labels(std::vector<Window>& windows);

/// Stacks window values into a [B x K x H] batch, optionally appending the
/// context vector as constant channels.
Array stack_values(const std::vector<const Window*>& windows, bool include_context = false);

/// Domain key: person, or "person/wN" when `by_week`.
std::string domain_key(const Window& w, bool by_week);
std::map<std::string, std::vector<Window>> group_by_domain(const std::vector<Window>& windows,
                                                           bool by_week);

}  // namespace tsdapt
