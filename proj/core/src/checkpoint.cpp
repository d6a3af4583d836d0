#include "ivt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ivt/digest.hpp"

namespace ivt {

namespace {

constexpr char kMagic[8] = {'I', 'V', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void raw(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  void reals(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes() {
    const std::uint64_t n = u64();
    if (n > data_.size() - pos_) throw FormatError("checkpoint is truncated");
    return std::string(raw(n));
  }
  Eigen::VectorXd reals() {
    const std::uint64_t n = u64();
    if (n > (data_.size() - pos_) / 8) throw FormatError("checkpoint is truncated");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

nlohmann::json meta_to_json(const CheckpointMeta& m) {
  return {{"task_index", m.task_index},
          {"seed", m.seed},
          {"config_digest", m.config_digest},
          {"extra", m.extra}};
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta m;
  m.task_index = j.at("task_index").get<std::uint64_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_digest = j.at("config_digest").get<std::string>();
  m.extra = j.value("extra", nlohmann::json::object());
  return m;
}

nlohmann::json parse_json(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint ") + what + ": " + e.what());
  }
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json layout_to_json(const ParamLayout& layout) {
  nlohmann::json segments = nlohmann::json::array();
  for (const Segment& s : layout.segments()) {
    segments.push_back(
        {{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"per_class", s.per_class}});
  }
  return {{"activation", std::string(to_string(layout.activation()))},
          {"head_classes", layout.class_ids()},
          {"segments", segments}};
}

LayoutPtr layout_from_json(const nlohmann::json& j) {
  try {
    auto layout = std::make_shared<ParamLayout>(
        activation_from_string(j.at("activation").get<std::string>()));
    for (int c : j.at("head_classes").get<std::vector<int>>()) layout->add_class(c);
    for (const auto& s : j.at("segments")) {
      layout->add_segment(s.at("name").get<std::string>(), s.at("rows").get<std::size_t>(),
                          s.at("cols").get<std::size_t>(), s.at("per_class").get<bool>());
    }
    layout->validate();
    return layout;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("layout JSON: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("layout JSON: ") + e.what());
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("layout JSON: ") + e.what());
  }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const LayoutPtr& layout = ckpt.params.layout_ptr();
  if (!layout) throw PreconditionError("checkpoint has no parameters");
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.bytes(meta_to_json(ckpt.meta).dump());
  w.bytes(layout_to_json(*layout).dump());
  w.reals(ckpt.params.values());

  Writer opt;
  opt.u64(ckpt.optimizer.steps);
  opt.reals(ckpt.optimizer.velocity);
  opt.reals(ckpt.optimizer.first_moment);
  opt.reals(ckpt.optimizer.second_moment);
  w.bytes(opt.str());

  w.u64(ckpt.ledger.size());
  for (const auto& [id, f] : ckpt.ledger.entries()) {
    w.i64(id);
    w.reals(reconcile(f, layout, 0.0).values());
  }
  const std::uint64_t digest = fnv1a64(w.str());
  w.u64(digest);
  return std::move(w.str());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8) throw FormatError("checkpoint is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  Reader trailer(bytes.substr(bytes.size() - 8));
  if (trailer.u64() != fnv1a64(body)) throw FormatError("checkpoint checksum mismatch");

  Reader r(body);
  r.raw(sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  try {
    c.meta = meta_from_json(parse_json(r.bytes(), "metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  const LayoutPtr layout = layout_from_json(parse_json(r.bytes(), "layout"));
  Eigen::VectorXd values = r.reals();
  if (static_cast<std::size_t>(values.size()) != layout->total_len()) {
    throw FormatError("checkpoint parameter count disagrees with its layout");
  }
  c.params = ParamVector(layout, std::move(values));

  const std::string opt_blob = r.bytes();
  Reader opt(opt_blob);
  c.optimizer.steps = opt.u64();
  c.optimizer.velocity = opt.reals();
  c.optimizer.first_moment = opt.reals();
  c.optimizer.second_moment = opt.reals();
  if (!opt.done()) throw FormatError("checkpoint optimizer blob has trailing bytes");

  const std::uint64_t k = r.u64();
  std::vector<std::pair<int, FisherDiagonal>> entries;
  for (std::uint64_t i = 0; i < k; ++i) {
    const auto id = static_cast<int>(r.i64());
    Eigen::VectorXd f = r.reals();
    if (static_cast<std::size_t>(f.size()) != layout->total_len()) {
      throw FormatError("checkpoint Fisher entry disagrees with the layout");
    }
    entries.emplace_back(id, make_fisher(layout, std::move(f)));
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  c.ledger = FisherLedger::from_entries(std::move(entries));
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

nlohmann::json checkpoint_to_text(const Checkpoint& ckpt) {
  const LayoutPtr& layout = ckpt.params.layout_ptr();
  nlohmann::json ledger = nlohmann::json::array();
  for (const auto& [id, f] : ckpt.ledger.entries()) {
    ledger.push_back({{"task_id", id}, {"values", to_std(reconcile(f, layout, 0.0).values())}});
  }
  return {{"format", "ivt-checkpoint-text"},
          {"version", kVersion},
          {"meta", meta_to_json(ckpt.meta)},
          {"layout", layout_to_json(*layout)},
          {"params", to_std(ckpt.params.values())},
          {"optimizer",
           {{"steps", ckpt.optimizer.steps},
            {"velocity", to_std(ckpt.optimizer.velocity)},
            {"first_moment", to_std(ckpt.optimizer.first_moment)},
            {"second_moment", to_std(ckpt.optimizer.second_moment)}}},
          {"ledger", ledger}};
}

Checkpoint checkpoint_from_text(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "ivt-checkpoint-text") {
      throw FormatError("not a text checkpoint");
    }
    Checkpoint c;
    c.meta = meta_from_json(j.at("meta"));
    const LayoutPtr layout = layout_from_json(j.at("layout"));
    c.params = ParamVector(layout, from_std(j.at("params").get<std::vector<double>>()));
    const auto& o = j.at("optimizer");
    c.optimizer.steps = o.at("steps").get<std::uint64_t>();
    c.optimizer.velocity = from_std(o.at("velocity").get<std::vector<double>>());
    c.optimizer.first_moment = from_std(o.at("first_moment").get<std::vector<double>>());
    c.optimizer.second_moment = from_std(o.at("second_moment").get<std::vector<double>>());
    std::vector<std::pair<int, FisherDiagonal>> entries;
    for (const auto& e : j.at("ledger")) {
      entries.emplace_back(e.at("task_id").get<int>(),
                           make_fisher(layout, from_std(e.at("values").get<std::vector<double>>())));
    }
    c.ledger = FisherLedger::from_entries(std::move(entries));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("text checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("text checkpoint: ") + e.what());
  }
}

}  // namespace ivt
