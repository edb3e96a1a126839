#include "tsdapt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "tsdapt/errors.hpp"
#include "tsdapt/random.hpp"

namespace tsdapt {

namespace {

constexpr double kWeekSeconds = 7.0 * 86400.0;

std::string domain_id(const SyntheticSpec& spec, std::size_t d) {
  const std::string digits = std::to_string(d);
  return spec.person_prefix + std::string(digits.size() < 2 ? 2 - digits.size() : 0, '0') + digits;
}

std::string synthetic_label_name(int label) {
  const std::string digits = std::to_string(label);
  return "c" + std::string(digits.size() < 2 ? 2 - digits.size() : 0, '0') + digits;
}

std::vector<int> class_sequence(const SyntheticSpec& spec, std::size_t domain, std::size_t count,
                                std::mt19937_64& rng) {
  std::vector<double> p(spec.num_classes, 1.0 / static_cast<double>(spec.num_classes));
  if (!spec.class_proportions.empty()) p = spec.class_proportions[domain];
  // Largest-remainder allocation of `count` windows.
  std::vector<std::size_t> n(p.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double exact = p[c] * static_cast<double>(count);
    n[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += n[c];
    remainders.push_back({exact - std::floor(exact), c});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < count; ++i, ++assigned) ++n[remainders[i % p.size()].second];
  std::vector<int> labels;
  labels.reserve(count);
  for (std::size_t c = 0; c < n.size(); ++c) labels.insert(labels.end(), n[c], static_cast<int>(c));
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

}  // namespace

std::vector<double> SyntheticSpec::frequencies() const {
  if (!class_frequencies.empty()) return class_frequencies;
  std::vector<double> f(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) f[c] = 0.5 * static_cast<double>(c + 1);
  return f;
}

std::vector<double> SyntheticSpec::amplitudes() const {
  if (!class_amplitudes.empty()) return class_amplitudes;
  return std::vector<double>(num_classes, 1.0);
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic spec: num_classes must be >= 2");
  if (channels < 1 || length < 1) throw ConfigError("synthetic spec: channels and length must be >= 1");
  if (num_domains < 1 || weeks < 1 || windows_per_week < 1) {
    throw ConfigError("synthetic spec: domains, weeks, and windows_per_week must be >= 1");
  }
  if (!(sample_rate > 0.0)) throw ConfigError("synthetic spec: sample_rate must be > 0");
  if (!(noise >= 0.0) || !(class_dispersion >= 0.0) || !(shift_magnitude >= 0.0)) {
    throw ConfigError("synthetic spec: noise, dispersion, and shift magnitude must be >= 0");
  }
  const auto f = frequencies();
  if (f.size() != num_classes) throw ConfigError("synthetic spec: need one frequency per class");
  if (std::set<double>(f.begin(), f.end()).size() != f.size()) {
    throw ConfigError("synthetic spec: class frequencies must be distinct");
  }
  if (amplitudes().size() != num_classes) throw ConfigError("synthetic spec: need one amplitude per class");
  if (!domain_shifts.empty() && domain_shifts.size() != num_domains) {
    throw ConfigError("synthetic spec: domain_shifts must list every domain");
  }
  for (const auto& s : domain_shifts) {
    if (!s.channel_bias.empty() && s.channel_bias.size() != channels) {
      throw ConfigError("synthetic spec: channel_bias must have one entry per channel");
    }
  }
  if (!class_proportions.empty()) {
    if (class_proportions.size() != num_domains) {
      throw ConfigError("synthetic spec: class_proportions must list every domain");
    }
    for (const auto& p : class_proportions) LabelProportions{p};
    for (const auto& p : class_proportions) {
      if (p.size() != num_classes) throw ConfigError("synthetic spec: proportions need one entry per class");
    }
  }
  const double episode = static_cast<double>(length) / sample_rate + kLabelLookback + 1.0;
  if (kWeekSeconds / static_cast<double>(windows_per_week) <= episode) {
    throw ConfigError("synthetic spec: too many windows per week to lay out isolated episodes");
  }
}

std::vector<DomainShift> SyntheticSpec::resolved_shifts() const {
  if (!domain_shifts.empty()) return domain_shifts;
  std::vector<DomainShift> out(num_domains);
  for (std::size_t d = 0; d < num_domains; ++d) {
    auto rng = make_stream(seed, 0x5348494654ull, d);
    std::normal_distribution<double> z(0.0, 1.0);
    const double za = z(rng), zf = z(rng), zr = z(rng);
    DomainShift& s = out[d];
    s.amplitude_scale = std::exp(0.25 * shift_magnitude * za);
    s.frequency_offset = 0.1 * shift_magnitude * zf;
    s.rotation = 0.5 * shift_magnitude * zr;
    s.channel_bias.resize(channels);
    for (double& b : s.channel_bias) b = 0.5 * shift_magnitude * z(rng);
  }
  return out;
}

std::vector<DomainWindows> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto freqs = spec.frequencies();
  const auto amps = spec.amplitudes();
  const auto shifts = spec.resolved_shifts();
  const double spacing = std::floor(kWeekSeconds / static_cast<double>(spec.windows_per_week));
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::vector<DomainWindows> out;
  for (std::size_t d = 0; d < spec.num_domains; ++d) {
    DomainWindows dom{domain_id(spec, d), {}};
    const DomainShift& shift = shifts[d];
    for (std::size_t week = 0; week < spec.weeks; ++week) {
      auto rng = make_stream(spec.seed, 0x57494e444f57ull, d, week);
      std::normal_distribution<double> z(0.0, 1.0);
      std::uniform_real_distribution<double> phase(0.0, two_pi);
      const auto labels = class_sequence(spec, d, spec.windows_per_week, rng);
      const double wk = static_cast<double>(week);
      for (std::size_t j = 0; j < spec.windows_per_week; ++j) {
        const int c = labels[j];
        const auto cu = static_cast<std::size_t>(c);
        const double amp_jitter = std::exp(spec.class_dispersion * z(rng));
        const double freq_jitter = 1.0 + 0.1 * spec.class_dispersion * z(rng);
        const double amplitude =
            amps[cu] * shift.amplitude_scale * (1.0 + wk * spec.drift.amplitude) * amp_jitter;
        const double frequency =
            (freqs[cu] + shift.frequency_offset + wk * spec.drift.frequency) * freq_jitter;
        const double phi = phase(rng);
        std::vector<double> offset(spec.channels);
        for (std::size_t k = 0; k < spec.channels; ++k) {
          const double bias = shift.channel_bias.empty() ? 0.0 : shift.channel_bias[k];
          offset[k] = bias + wk * spec.drift.bias + spec.class_dispersion * z(rng);
        }

        Window w;
        w.values = Array(Shape{spec.channels, spec.length});
        for (std::size_t t = 0; t < spec.length; ++t) {
          const double time = static_cast<double>(t) / spec.sample_rate;
          for (std::size_t k = 0; k < spec.channels; ++k) {
            const double psi = 0.7 * static_cast<double>(k * (cu + 1));
            w.values.at(k, t) = amplitude * std::sin(two_pi * frequency * time + phi + psi);
          }
          if (spec.channels >= 2 && shift.rotation != 0.0) {
            const double x = w.values.at(0, t), y = w.values.at(1, t);
            const double cr = std::cos(shift.rotation), sr = std::sin(shift.rotation);
            w.values.at(0, t) = cr * x - sr * y;
            w.values.at(1, t) = sr * x + cr * y;
          }
          for (std::size_t k = 0; k < spec.channels; ++k) {
            w.values.at(k, t) += offset[k] + spec.noise * z(rng);
          }
        }
        SensorReading first;
        first.timestamp = kSyntheticEpoch + wk * kWeekSeconds + static_cast<double>(j) * spacing;
        w.context = encode_features(first);
        w.label = c;
        w.person = dom.id;
        w.week = static_cast<int>(week);
        dom.windows.push_back(std::move(w));
      }
    }
    out.push_back(std::move(dom));
  }
  return out;
}

// --- spec files --------------------------------------------------------------

namespace {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open synthetic spec " + path.string());
  SyntheticSpec s;
  try {
    const auto j = nlohmann::json::parse(in);
    read_opt(j, "num_classes", s.num_classes);
    read_opt(j, "channels", s.channels);
    read_opt(j, "length", s.length);
    read_opt(j, "sample_rate", s.sample_rate);
    read_opt(j, "class_frequencies", s.class_frequencies);
    read_opt(j, "class_amplitudes", s.class_amplitudes);
    read_opt(j, "num_domains", s.num_domains);
    read_opt(j, "weeks", s.weeks);
    read_opt(j, "windows_per_week", s.windows_per_week);
    read_opt(j, "shift_magnitude", s.shift_magnitude);
    read_opt(j, "noise", s.noise);
    read_opt(j, "class_dispersion", s.class_dispersion);
    read_opt(j, "class_proportions", s.class_proportions);
    read_opt(j, "seed", s.seed);
    read_opt(j, "person_prefix", s.person_prefix);
    if (j.contains("drift")) {
      const auto& d = j.at("drift");
      read_opt(d, "frequency", s.drift.frequency);
      read_opt(d, "amplitude", s.drift.amplitude);
      read_opt(d, "bias", s.drift.bias);
    }
    if (j.contains("domain_shifts")) {
      for (const auto& e : j.at("domain_shifts")) {
        DomainShift shift;
        read_opt(e, "amplitude_scale", shift.amplitude_scale);
        read_opt(e, "frequency_offset", shift.frequency_offset);
        read_opt(e, "channel_bias", shift.channel_bias);
        read_opt(e, "rotation", shift.rotation);
        s.domain_shifts.push_back(std::move(shift));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("synthetic spec " + path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

void save_synthetic_spec(const std::filesystem::path& path, const SyntheticSpec& s) {
  nlohmann::json j;
  j["num_classes"] = s.num_classes;
  j["channels"] = s.channels;
  j["length"] = s.length;
  j["sample_rate"] = s.sample_rate;
  j["class_frequencies"] = s.frequencies();
  j["class_amplitudes"] = s.amplitudes();
  j["num_domains"] = s.num_domains;
  j["weeks"] = s.weeks;
  j["windows_per_week"] = s.windows_per_week;
  j["shift_magnitude"] = s.shift_magnitude;
  j["noise"] = s.noise;
  j["class_dispersion"] = s.class_dispersion;
  j["class_proportions"] = s.class_proportions;
  j["seed"] = s.seed;
  j["person_prefix"] = s.person_prefix;
  j["drift"] = {{"frequency", s.drift.frequency},
                {"amplitude", s.drift.amplitude},
                {"bias", s.drift.bias}};
  auto shifts = nlohmann::json::array();
  for (const auto& d : s.domain_shifts) {
    shifts.push_back({{"amplitude_scale", d.amplitude_scale},
                      {"frequency_offset", d.frequency_offset},
                      {"channel_bias", d.channel_bias},
                      {"rotation", d.rotation}});
  }
  j["domain_shifts"] = shifts;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_synthetic_raw(const std::filesystem::path& dir, const std::vector<DomainWindows>& domains) {
  std::filesystem::create_directories(dir);
  for (const auto& dom : domains) {
    std::vector<SensorReading> readings;
    const std::size_t per_week = [&] {
      std::map<int, std::size_t> counts;
      for (const auto& w : dom.windows) ++counts[w.week];
      std::size_t mx = 1;
      for (const auto& [wk, n] : counts) mx = std::max(mx, n);
      return mx;
    }();
    const double spacing = std::floor(kWeekSeconds / static_cast<double>(per_week));
    const double episode = dom.windows.empty() ? 0.0 : std::ceil(static_cast<double>(dom.windows.front().values.dim(1)) / 10.0);
    if (spacing <= kLabelLookback + episode) {
      throw DataError("raw export: " + std::to_string(per_week) +
                      " windows per week leave too little time between episodes for isolated labels");
    }
    std::map<int, std::size_t> index_in_week;
    for (const auto& w : dom.windows) {
      const std::size_t j = index_in_week[w.week]++;
      const double start = kSyntheticEpoch + w.week * kWeekSeconds + static_cast<double>(j) * spacing;
      const std::size_t K = w.values.dim(0);
      const std::size_t H = w.values.dim(1);
      if (K > kMotionChannels) throw DataError("raw export supports at most 9 channels");
      for (std::size_t t = 0; t < H; ++t) {
        SensorReading r;
        r.person_id = dom.id;
        r.timestamp = start + std::floor(static_cast<double>(t) / 10.0);
        for (std::size_t k = 0; k < K; ++k) r.motion[k] = w.values.at(k, t);
        if (t + 1 == H && w.label) r.label = synthetic_label_name(*w.label);
        readings.push_back(std::move(r));
      }
    }
    write_csv(dir / (dom.id + ".csv"), readings);
  }
}

}  // namespace tsdapt
