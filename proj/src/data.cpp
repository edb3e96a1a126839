#include "tsdapt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tsdapt/errors.hpp"

namespace tsdapt {

namespace {

constexpr std::string_view kCsvHeader =
    "timestamp,ax,ay,az,rx,ry,rz,yaw,pitch,roll,location_type,label";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  if (value == std::floor(value) && std::abs(value) < 1e15) {
    return std::to_string(static_cast<long long>(value));
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<SensorReading> ingest_csv(const std::filesystem::path& path) {
  return ingest_csv(path, path.stem().string());
}

std::vector<SensorReading> ingest_csv(const std::filesystem::path& path,
                                      const std::string& person_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) {
    throw DataError(path.string() + ":1: header must be '" + std::string(kCsvHeader) + "'");
  }
  std::vector<SensorReading> readings;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    const auto fields = split_fields(line);
    if (fields.size() != 12) {
      throw DataError(where + "expected 12 fields, got " + std::to_string(fields.size()));
    }
    SensorReading r;
    r.person_id = person_id;
    const auto ts = parse_double(fields[0]);
    if (!ts) throw DataError(where + "bad timestamp '" + std::string(fields[0]) + "'");
    r.timestamp = *ts;
    for (std::size_t k = 0; k < kMotionChannels; ++k) {
      const auto v = parse_double(fields[k + 1]);
      if (!v) {
        throw DataError(where + "non-numeric " + std::string(kMotionChannelNames[k]) + " value '" +
                        std::string(fields[k + 1]) + "'");
      }
      r.motion[k] = *v;
    }
    if (!fields[10].empty()) r.location_type = std::string(fields[10]);
    if (!fields[11].empty()) r.label = std::string(fields[11]);
    if (!readings.empty() && r.timestamp < readings.back().timestamp) {
      throw DataError(where + "timestamps decrease for person '" + person_id + "' at " +
                      format_double(r.timestamp));
    }
    readings.push_back(std::move(r));
  }
  return readings;
}

void write_csv(const std::filesystem::path& path, const std::vector<SensorReading>& readings) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const auto& r : readings) {
    out << format_double(r.timestamp);
    for (double v : r.motion) out << ',' << format_double(v);
    out << ',' << r.location_type.value_or("") << ',' << r.label.value_or("") << '\n';
  }
}

void apply_label_map(std::vector<SensorReading>& readings, const LabelMap& map) {
  for (auto& r : readings) {
    if (!r.label) continue;
    auto it = map.find(*r.label);
    if (it != map.end()) r.label = it->second;
  }
}

LabelMap load_label_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label map " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("label map " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("label map must be a JSON object");
  LabelMap map;
  for (const auto& [from, to] : j.items()) {
    if (to.is_null()) map[from] = std::nullopt;
    else if (to.is_string()) map[from] = to.get<std::string>();
    else throw DataError("label map entry '" + from + "' must be a string or null");
  }
  return map;
}

std::vector<SensorReading> resample_and_carry_forward(const std::vector<SensorReading>& readings,
                                                      double input_rate, double target_rate) {
  if (!(target_rate > 0.0) || input_rate < target_rate) {
    throw DataError("resample: input rate " + format_double(input_rate) +
                    " Hz is below target rate " + format_double(target_rate) + " Hz");
  }
  const double ratio = input_rate / target_rate;
  const double step = std::round(ratio);
  if (std::abs(ratio - step) > 1e-9) {
    throw DataError("resample: input rate " + format_double(input_rate) +
                    " Hz is not an integer multiple of " + format_double(target_rate) + " Hz");
  }
  const auto k = static_cast<std::size_t>(step);
  std::vector<SensorReading> out;
  out.reserve(readings.size() / k + 1);
  std::string last_location = "other";
  std::string person;
  std::size_t index_in_person = 0;
  for (const auto& r : readings) {
    if (r.person_id != person) {
      person = r.person_id;
      last_location = "other";
      index_in_person = 0;
    }
    if (r.location_type) last_location = *r.location_type;
    if (index_in_person++ % k == 0) {
      SensorReading kept = r;
      kept.location_type = last_location;
      out.push_back(std::move(kept));
    }
  }
  return out;
}

std::vector<Prompt> extract_prompts(const std::vector<SensorReading>& readings) {
  std::vector<Prompt> prompts;
  for (const auto& r : readings) {
    if (r.label) prompts.push_back({r.timestamp, *r.label});
  }
  std::stable_sort(prompts.begin(), prompts.end(),
                   [](const Prompt& a, const Prompt& b) { return a.time < b.time; });
  return prompts;
}

std::vector<SensorReading> assign_labels(std::vector<SensorReading> readings,
                                         const std::vector<Prompt>& prompts) {
  // For a reading at u the winning prompt is the latest t with u <= t <= u + 300.
  for (auto& r : readings) {
    r.label.reset();
    const double u = r.timestamp;
    auto hi = std::upper_bound(prompts.begin(), prompts.end(), u + kLabelLookback,
                               [](double v, const Prompt& p) { return v < p.time; });
    if (hi == prompts.begin()) continue;
    const Prompt& p = *std::prev(hi);
    if (p.time >= u) r.label = p.label;
  }
  return readings;
}

LocationType parse_location(std::string_view name) {
  for (std::size_t i = 0; i < kLocationNames.size(); ++i) {
    if (kLocationNames[i] == name) return static_cast<LocationType>(i);
  }
  warn("unknown location category '" + std::string(name) + "' mapped to 'other'");
  return LocationType::other;
}

std::vector<double> encode_features(const SensorReading& reading) {
  std::vector<double> ctx(kContextFeatures, 0.0);
  const LocationType loc =
      reading.location_type ? parse_location(*reading.location_type) : LocationType::other;
  ctx[static_cast<std::size_t>(loc)] = 1.0;
  const auto seconds = static_cast<long long>(std::floor(reading.timestamp));
  long long days = seconds / 86400;
  long long in_day = seconds % 86400;
  if (in_day < 0) {
    in_day += 86400;
    --days;
  }
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  const long long dow = ((days + 3) % 7 + 7) % 7;
  const long long minutes = in_day / 60;
  ctx[6] = static_cast<double>(dow);
  ctx[7] = static_cast<double>(minutes / 60);
  ctx[8] = static_cast<double>(minutes);
  return ctx;
}

int week_index(double timestamp, double origin) {
  return static_cast<int>(std::floor((timestamp - origin) / (7.0 * 86400.0)));
}

std::map<std::string, int> build_vocabulary(const std::vector<SensorReading>& readings) {
  std::set<std::string> names;
  for (const auto& r : readings) {
    if (r.label) names.insert(*r.label);
  }
  std::map<std::string, int> vocab;
  int next = 0;
  for (const auto& n : names) vocab[n] = next++;
  return vocab;
}

std::vector<Window> segment_windows(const std::vector<SensorReading>& readings, std::size_t length,
                                    const std::map<std::string, int>& vocabulary,
                                    const std::vector<std::size_t>& channels,
                                    std::optional<double> week_origin) {
  if (length == 0) throw std::invalid_argument("segment_windows: length must be >= 1");
  std::vector<std::size_t> chans = channels;
  if (chans.empty()) {
    chans.resize(kMotionChannels);
    std::iota(chans.begin(), chans.end(), std::size_t{0});
  }
  for (std::size_t c : chans) {
    if (c >= kMotionChannels) throw std::out_of_range("segment_windows: channel index out of range");
  }

  std::vector<Window> out;
  std::vector<const SensorReading*> buffer;
  std::string person;
  int week = 0;
  double origin = 0.0;
  auto flush = [&]() {
    const std::size_t K = chans.size();
    Window w;
    w.values = Array(Shape{K, length});
    std::vector<std::size_t> counts(vocabulary.size(), 0);
    std::size_t labeled = 0;
    for (std::size_t t = 0; t < length; ++t) {
      const SensorReading& r = *buffer[t];
      for (std::size_t k = 0; k < K; ++k) w.values.at(k, t) = r.motion[chans[k]];
      if (r.label) {
        auto it = vocabulary.find(*r.label);
        if (it == vocabulary.end()) throw DataError("label '" + *r.label + "' missing from vocabulary");
        ++counts[static_cast<std::size_t>(it->second)];
        ++labeled;
      }
    }
    if (2 * labeled >= length && labeled > 0) {
      w.label = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    w.context = encode_features(*buffer.front());
    w.person = person;
    w.week = week;
    out.push_back(std::move(w));
    buffer.clear();
  };

  for (const auto& r : readings) {
    if (r.person_id != person) {
      buffer.clear();
      person = r.person_id;
      origin = week_origin.value_or(r.timestamp);
    }
    const int w = week_index(r.timestamp, origin);
    if (!buffer.empty() && w != week) buffer.clear();
    week = w;
    buffer.push_back(&r);
    if (buffer.size() == length) flush();
  }
  return out;
}

// --- JSON Lines ------------------------------------------------------------

namespace {

nlohmann::json window_to_json(const Window& w) {
  nlohmann::json j;
  j["person"] = w.person;
  j["week"] = w.week;
  j["label"] = w.label ? nlohmann::json(*w.label) : nlohmann::json(nullptr);
  j["context"] = w.context;
  auto values = nlohmann::json::array();
  const std::size_t K = w.values.dim(0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto row = w.values.row(k);
    values.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["values"] = std::move(values);
  return j;
}

Window window_from_json(const nlohmann::json& j) {
  Window w;
  w.person = j.at("person").get<std::string>();
  w.week = j.at("week").get<int>();
  if (!j.at("label").is_null()) w.label = j.at("label").get<int>();
  w.context = j.at("context").get<std::vector<double>>();
  const auto& values = j.at("values");
  if (!values.is_array() || values.empty()) throw DataError("window has no channels");
  const std::size_t K = values.size();
  const std::size_t H = values[0].size();
  std::vector<double> data;
  data.reserve(K * H);
  for (const auto& row : values) {
    if (row.size() != H) throw DataError("window channels have unequal lengths");
    for (const auto& v : row) data.push_back(v.get<double>());
  }
  w.values = Array(Shape{K, H}, std::move(data));
  return w;
}

}  // namespace

void write_windows_jsonl(const std::filesystem::path& path, const std::vector<Window>& windows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& w : windows) out << window_to_json(w).dump() << '\n';
}

std::vector<Window> read_windows_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Window> out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> channels;
  std::optional<std::size_t> length;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Window w = window_from_json(nlohmann::json::parse(line));
      if (!channels) {
        channels = w.values.dim(0);
        length = w.values.dim(1);
      } else if (w.values.dim(0) != *channels || w.values.dim(1) != *length) {
        throw DataError("window shape " + shape_string(w.values.shape()) +
                        " differs from the first record");
      }
      out.push_back(std::move(w));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

DomainDataset split_train_valid_test(std::string id, std::vector<Window> windows,
                                     const SplitFractions& f, std::uint64_t seed, bool is_target) {
  if (!(f.train > 0.0) || !(f.valid > 0.0) || !(f.test > 0.0) ||
      std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be positive and sum to 1");
  }
  const std::size_t n = windows.size();
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::llround(f.valid * static_cast<double>(n)));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n) {
    throw DataError("domain '" + id + "' has too few windows (" + std::to_string(n) +
                    ") to split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DomainDataset ds;
  ds.id = std::move(id);
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? ds.train : (i < n_train + n_valid ? ds.valid : ds.test);
    dst.push_back(std::move(windows[order[i]]));
  }
  if (is_target) {
    strip_labels(ds.train);
    ds.train_labels_stripped = true;
  }
  return ds;
}

LabelProportions measure_label_proportions(const std::vector<Window>& windows,
                                           std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  std::size_t labeled = 0;
  for (const auto& w : windows) {
    if (!w.label) continue;
    if (*w.label < 0 || static_cast<std::size_t>(*w.label) >= num_classes) {
      throw DataError("label " + std::to_string(*w.label) + " outside class range");
    }
    counts[static_cast<std::size_t>(*w.label)] += 1.0;
    ++labeled;
  }
  if (labeled == 0) throw DataError("cannot measure label proportions: no labeled windows");
  for (double& c : counts) c /= static_cast<double>(labeled);
  // Renormalize the rounding residue onto the largest class.
  const double residue = 1.0 - std::accumulate(counts.begin(), counts.end(), 0.0);
  *std::max_element(counts.begin(), counts.end()) += residue;
  return LabelProportions(std::move(counts));
}

void strip_labels(std::vector<Window>& windows) {
  for (auto& w : windows) w.label.reset();
}

Array stack_values(const std::vector<const Window*>& windows, bool include_context) {
  if (windows.empty()) throw DataError("stack_values: no windows");
  const std::size_t K = windows.front()->values.dim(0);
  const std::size_t H = windows.front()->values.dim(1);
  const std::size_t extra = include_context ? windows.front()->context.size() : 0;
  Array out(Shape{windows.size(), K + extra, H});
  double* dst = out.data().data();
  for (const Window* w : windows) {
    if (w->values.dim(0) != K || w->values.dim(1) != H) {
      throw ShapeError("stack_values: window shape " + shape_string(w->values.shape()) +
                       " differs from " + shape_string({K, H}));
    }
    dst = std::copy(w->values.data().begin(), w->values.data().end(), dst);
    for (std::size_t c = 0; c < extra; ++c) dst = std::fill_n(dst, H, w->context[c]);
  }
  return out;
}

std::string domain_key(const Window& w, bool by_week) {
  return by_week ? w.person + "/w" + std::to_string(w.week) : w.person;
}

std::map<std::string, std::vector<Window>> group_by_domain(const std::vector<Window>& windows,
                                                           bool by_week) {
  std::map<std::string, std::vector<Window>> out;
  for (const auto& w : windows) out[domain_key(w, by_week)].push_back(w);
  return out;
}

}  // namespace tsdapt
