#include "cardioflow/app/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <map>
#include <type_traits>

#include "cardioflow/error.hpp"
#include "cardioflow/file_util.hpp"

namespace cardioflow::app {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_arithmetic_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof v);
  }
  void bytes(std::string_view s) {
    put<std::uint64_t>(s.size());
    out_.append(s);
  }
  void matrix(const Eigen::MatrixXd& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    out_.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  void vector(const Eigen::VectorXd& v) { matrix(v); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view data, std::string context) : data_(data), context_(std::move(context)) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof v);
    std::memcpy(&v, data_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string_view bytes() {
    const auto n = get<std::uint64_t>();
    need(n);
    const std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Eigen::MatrixXd matrix() {
    const auto rows = get<std::uint64_t>(), cols = get<std::uint64_t>();
    if (cols != 0 && rows > (data_.size() - pos_) / sizeof(double) / cols) fail("matrix larger than its section");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const std::size_t n = sizeof(double) * static_cast<std::size_t>(m.size());
    need(n);
    std::memcpy(m.data(), data_.data() + pos_, n);
    pos_ += n;
    return m;
  }
  Eigen::VectorXd vector() {
    const Eigen::MatrixXd m = matrix();
    if (m.cols() != 1 && m.size() != 0) fail("expected a column vector");
    return m.reshaped();
  }
  void expect_end() const {
    if (pos_ != data_.size()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(context_ + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) fail("unexpected end of data");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string context_;
};

void write_pca(Writer& w, const edspace::Pca& p) {
  w.vector(p.mean);
  w.matrix(p.basis);
  w.vector(p.spectrum);
  w.matrix(p.coefficients);
}

edspace::Pca read_pca(Reader& r) {
  edspace::Pca p;
  p.mean = r.vector();
  p.basis = r.matrix();
  p.spectrum = r.vector();
  p.coefficients = r.matrix();
  if (p.basis.rows() != p.mean.size() && p.basis.size() != 0) r.fail("PCA basis does not match its mean");
  return p;
}

void write_net(Writer& w, const diff::DenseNet& net) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.activation));
    w.matrix(l.weight);
    w.vector(l.bias);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.skips().size()));
  for (const auto& s : net.skips()) {
    w.put<std::uint64_t>(s.source);
    w.put<std::uint64_t>(s.target);
  }
}

diff::DenseNet read_net(Reader& r) {
  std::vector<diff::DenseLayer> layers(r.get<std::uint32_t>());
  for (auto& l : layers) {
    const auto act = r.get<std::uint32_t>();
    if (act > static_cast<std::uint32_t>(diff::Activation::kIdentity)) r.fail("unknown activation");
    l.activation = static_cast<diff::Activation>(act);
    l.weight = r.matrix();
    l.bias = r.vector();
  }
  std::vector<diff::SkipConnection> skips(r.get<std::uint32_t>());
  for (auto& s : skips) {
    s.source = r.get<std::uint64_t>();
    s.target = r.get<std::uint64_t>();
  }
  try {
    return diff::DenseNet(std::move(layers), std::move(skips));
  } catch (const Error& e) {
    r.fail(std::string("invalid network: ") + e.what());
  }
}

std::string encode_shape(const models::ShapeNet& net) {
  Writer w;
  const auto& c = net.config();
  for (int v : {c.code_dim, c.hidden, c.hidden_layers, c.skip_layer, c.positional_frequencies}) w.put<std::int32_t>(v);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.init));
  w.put<double>(c.init_radius);
  write_net(w, net.net());
  return std::move(w.str());
}

models::ShapeNet decode_shape(Reader& r) {
  models::ShapeNetConfig c;
  for (int* v : {&c.code_dim, &c.hidden, &c.hidden_layers, &c.skip_layer, &c.positional_frequencies}) *v = r.get<std::int32_t>();
  c.init = r.get<std::uint32_t>() == 0 ? models::ShapeInit::kHe : models::ShapeInit::kGeometric;
  c.init_radius = r.get<double>();
  diff::DenseNet net = read_net(r);
  try {
    return models::ShapeNet(c, std::move(net));
  } catch (const Error& e) {
    r.fail(std::string("shape network: ") + e.what());
  }
}

std::string encode_motion(const models::MotionNet& net) {
  Writer w;
  const auto& c = net.config();
  for (int v : {c.code_dim, c.hidden, c.hidden_layers, c.positional_frequencies}) w.put<std::int32_t>(v);
  write_net(w, net.net());
  return std::move(w.str());
}

models::MotionNet decode_motion(Reader& r) {
  models::MotionNetConfig c;
  for (int* v : {&c.code_dim, &c.hidden, &c.hidden_layers, &c.positional_frequencies}) *v = r.get<std::int32_t>();
  diff::DenseNet net = read_net(r);
  try {
    return models::MotionNet(c, std::move(net));
  } catch (const Error& e) {
    r.fail(std::string("motion network: ") + e.what());
  }
}

std::string encode_codes(const models::CodeTable& t) {
  Writer w;
  w.put<std::int32_t>(t.shape_dim());
  w.put<std::int32_t>(t.motion_dim());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int s = static_cast<int>(i);
    w.bytes(t.subjects()[i]);
    w.vector(t.shape_code(s));
    w.matrix(t.motion_codes(s));
  }
  return std::move(w.str());
}

models::CodeTable decode_codes(Reader& r) {
  const int ks = r.get<std::int32_t>(), km = r.get<std::int32_t>();
  models::CodeTable t(ks, km);
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string id(r.bytes());
    const Eigen::VectorXd shape = r.vector();
    const Eigen::MatrixXd motion = r.matrix();
    try {
      const int s = t.add_subject(id, shape, static_cast<int>(motion.cols()));
      t.set_motion_codes(s, motion);
    } catch (const Error& e) {
      r.fail(std::string("code table: ") + e.what());
    }
  }
  return t;
}

std::uint32_t crc32_of(std::string_view s) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(s.size() - pos, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(s.data() + pos), chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  std::vector<std::pair<std::string, std::string>> sections;
  sections.emplace_back("config", ck.config);
  if (ck.ssm) {
    Writer w;
    write_pca(w, ck.ssm->pca);
    w.put<std::uint64_t>(ck.ssm->faces.size());
    for (const auto& f : ck.ssm->faces)
      for (int k = 0; k < 3; ++k) w.put<std::int32_t>(f[k]);
    sections.emplace_back("ssm", std::move(w.str()));
  }
  if (ck.normalization) {
    Writer w;
    for (int k = 0; k < 3; ++k) w.put<double>(ck.normalization->center[k]);
    w.put<double>(ck.normalization->scale);
    sections.emplace_back("normalization", std::move(w.str()));
  }
  if (ck.shape) sections.emplace_back("shape_net", encode_shape(*ck.shape));
  if (ck.pretrain_codes) {
    Writer w;
    w.matrix(*ck.pretrain_codes);
    sections.emplace_back("pretrain_codes", std::move(w.str()));
  }
  if (ck.motion) sections.emplace_back("motion_net", encode_motion(*ck.motion));
  if (ck.codes) sections.emplace_back("codes", encode_codes(*ck.codes));
  if (ck.motion_pca) {
    Writer w;
    write_pca(w, ck.motion_pca->pca);
    w.put<std::int32_t>(ck.motion_pca->phases);
    w.put<std::int32_t>(ck.motion_pca->code_dim);
    sections.emplace_back("motion_pca", std::move(w.str()));
  }

  Writer out;
  out.str().append("CFLW");
  out.put<std::uint32_t>(kCheckpointVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    out.str().append(name);
    out.bytes(payload);
  }
  out.put<std::uint32_t>(crc32_of(out.str()));
  return std::move(out.str());
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "CFLW") throw CheckpointError(source + ": not a CFLW checkpoint");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(source + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < 16) throw CheckpointError(source + ": checksum mismatch (file truncated or corrupted)");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (crc32_of(body) != stored) throw CheckpointError(source + ": checksum mismatch (file truncated or corrupted)");

  Reader r(body.substr(8), source);
  const auto count = r.get<std::uint32_t>();
  std::map<std::string, std::string_view> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    std::string name;
    for (std::uint32_t k = 0; k < len; ++k) name.push_back(r.get<char>());
    if (!sections.emplace(name, r.bytes()).second) r.fail("duplicate section " + name);
  }
  r.expect_end();

  Checkpoint ck;
  for (const auto& [name, payload] : sections) {
    Reader s(payload, source + " [" + name + "]");
    if (name == "config") {
      ck.config = std::string(payload);
      continue;
    } else if (name == "ssm") {
      edspace::Ssm ssm;
      ssm.pca = read_pca(s);
      const auto faces = s.get<std::uint64_t>();
      if (faces > payload.size() / 12) s.fail("face count larger than its section");
      ssm.faces.resize(faces);
      for (auto& f : ssm.faces)
        for (int k = 0; k < 3; ++k) f[k] = s.get<std::int32_t>();
      ck.ssm = std::move(ssm);
    } else if (name == "normalization") {
      edspace::NormalizationSpec n;
      for (int k = 0; k < 3; ++k) n.center[k] = s.get<double>();
      n.scale = s.get<double>();
      ck.normalization = n;
    } else if (name == "shape_net") {
      ck.shape = decode_shape(s);
    } else if (name == "pretrain_codes") {
      ck.pretrain_codes = s.matrix();
    } else if (name == "motion_net") {
      ck.motion = decode_motion(s);
    } else if (name == "codes") {
      ck.codes = decode_codes(s);
    } else if (name == "motion_pca") {
      inference::MotionPca m;
      m.pca = read_pca(s);
      m.phases = s.get<std::int32_t>();
      m.code_dim = s.get<std::int32_t>();
      ck.motion_pca = std::move(m);
    } else {
      s.fail("unknown section");
    }
    s.expect_end();
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  atomic_write(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace cardioflow::app
