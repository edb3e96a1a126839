#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "tsdapt/errors.hpp"
#include "tsdapt/experiment.hpp"

namespace tsdapt {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'T', 'S', 'D', 'A', 'P', 'T', '0', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <class U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void string(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void array(const std::string& name, const Array& a) {
    string(name);
    uint(static_cast<std::uint32_t>(a.rank()));
    for (std::size_t d : a.shape()) uint(static_cast<std::uint64_t>(d));
    for (double v : a.data()) uint(std::bit_cast<std::uint64_t>(v));
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

  const unsigned char* take(std::size_t k) {
    if (k > n_ - pos_) throw FormatError("checkpoint truncated");
    const unsigned char* out = p_ + pos_;
    pos_ += k;
    return out;
  }
  template <class U>
  U uint() {
    const unsigned char* b = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
  }
  std::string string() {
    const auto len = uint<std::uint32_t>();
    const auto* b = take(len);
    return std::string(reinterpret_cast<const char*>(b), len);
  }
  std::pair<std::string, Array> array() {
    std::string name = string();
    const auto rank = uint<std::uint32_t>();
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(uint<std::uint64_t>());
      count *= d;
    }
    if (count > (n_ - pos_) / 8) throw FormatError("checkpoint truncated");
    std::vector<double> values(count);
    for (double& v : values) v = std::bit_cast<double>(uint<std::uint64_t>());
    return {std::move(name), Array(std::move(shape), std::move(values))};
  }
  bool done() const { return pos_ == n_; }

 private:
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto& opt = ck.optimizer;
  const json header{{"architecture", ck.model.arch},
                    {"optimizer",
                     {{"learning_rate", opt.config.learning_rate},
                      {"beta1", opt.config.beta1},
                      {"beta2", opt.config.beta2},
                      {"epsilon", opt.config.epsilon},
                      {"step", opt.step}}},
                    {"metadata", ck.metadata}};

  std::vector<std::pair<std::string, const Array*>> arrays;
  ck.model.values.for_each([&](const std::string& name, const Array& a) { arrays.emplace_back(name, &a); });
  const std::size_t count = arrays.size();
  if (!opt.first_moment.empty()) {
    if (opt.first_moment.size() != count || opt.second_moment.size() != count) {
      throw ShapeError("optimizer state does not match the parameter count");
    }
    for (std::size_t i = 0; i < count; ++i) arrays.emplace_back("adam.m/" + arrays[i].first, &opt.first_moment[i]);
    for (std::size_t i = 0; i < count; ++i) arrays.emplace_back("adam.v/" + arrays[i].first, &opt.second_moment[i]);
  }

  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint(kCheckpointVersion);
  const std::string text = header.dump();
  w.uint(static_cast<std::uint64_t>(text.size()));
  w.bytes(text.data(), text.size());
  w.uint(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, a] : arrays) w.array(name, *a);
  auto& buf = w.buffer();
  w.uint(checksum(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a checkpoint (bad magic): " + path.string());
  }
  if (buf.size() < sizeof kMagic + 8) throw FormatError("checkpoint checksum mismatch (truncated)");
  const std::size_t body = buf.size() - 4;
  Reader tail(buf.data() + body, 4);
  if (tail.uint<std::uint32_t>() != checksum(buf.data(), body)) {
    throw FormatError("checkpoint checksum mismatch: " + path.string());
  }

  Reader r(buf.data() + sizeof kMagic, body - sizeof kMagic);
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = r.uint<std::uint64_t>();
  const auto* header_bytes = r.take(static_cast<std::size_t>(header_len));
  json header;
  try {
    header = json::parse(header_bytes, header_bytes + header_len);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  try {
    header.at("architecture").get_to(ck.model.arch);
    const auto& o = header.at("optimizer");
    ck.optimizer.config.learning_rate = o.at("learning_rate").get<double>();
    ck.optimizer.config.beta1 = o.at("beta1").get<double>();
    ck.optimizer.config.beta2 = o.at("beta2").get<double>();
    ck.optimizer.config.epsilon = o.at("epsilon").get<double>();
    ck.optimizer.step = o.at("step").get<std::uint64_t>();
    ck.metadata = header.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  ck.model.arch.validate();

  std::map<std::string, Array> arrays;
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, a] = r.array();
    if (!arrays.emplace(name, std::move(a)).second) throw FormatError("duplicate array '" + name + "'");
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");

  auto take = [&](const std::string& name, const Array& like) {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError("checkpoint missing array '" + name + "'");
    if (it->second.shape() != like.shape()) {
      throw FormatError("array '" + name + "' has shape " + shape_string(it->second.shape()) +
                        ", architecture expects " + shape_string(like.shape()));
    }
    Array out = std::move(it->second);
    arrays.erase(it);
    return out;
  };

  // Shapes come from a freshly initialized model of the stored architecture.
  ck.model.values = init_parameters(ck.model.arch, 0).values;
  std::vector<std::string> names;
  ck.model.values.for_each([&](const std::string& name, Array& a) {
    a = take(name, a);
    names.push_back(name);
  });
  if (arrays.count("adam.m/" + names.front()) != 0) {
    std::size_t i = 0;
    std::vector<const Array*> likes;
    ck.model.values.for_each([&](const std::string&, const Array& a) { likes.push_back(&a); });
    for (const auto& name : names) ck.optimizer.first_moment.push_back(take("adam.m/" + name, *likes[i++]));
    i = 0;
    for (const auto& name : names) ck.optimizer.second_moment.push_back(take("adam.v/" + name, *likes[i++]));
  }
  if (!arrays.empty()) throw FormatError("unexpected array '" + arrays.begin()->first + "'");
  return ck;
}

}  // namespace tsdapt
