#include "dialoforge/fusion_io.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "dialoforge/errors.hpp"
#include "dialoforge/manifest.hpp"

namespace dialoforge::fusion {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}

  std::uint64_t take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ParseError(pos_, "tensor container is truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
  std::string str(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ParseError(pos_, "tensor container is truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensors(const std::vector<NamedTensor>& tensors) {
  std::string out = "DFTC";
  put_u32(out, kTensorFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) put_f64(out, t.value(r, c));
    }
  }
  return out;
}

std::vector<NamedTensor> decode_tensors(const std::string& bytes) {
  Reader in(bytes);
  if (in.str(4) != "DFTC") throw ParseError(0, "bad tensor container magic");
  const auto version = in.u32();
  if (version != kTensorFormatVersion) {
    throw ParseError(4, "unsupported tensor container version " + std::to_string(version));
  }
  const auto count = in.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = in.str(in.u32());
    const auto rows = in.u32();
    const auto cols = in.u32();
    if (static_cast<std::uint64_t>(rows) * cols * 8 > bytes.size()) {
      throw ParseError(in.pos(), "tensor '" + t.name + "' is larger than the container");
    }
    t.value.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) t.value(r, c) = in.f64();
    }
    out.push_back(std::move(t));
  }
  if (!in.done()) throw ParseError(in.pos(), "trailing bytes after last tensor");
  return out;
}

std::vector<NamedTensor> model_tensors(const Model& model) {
  Model copy = model;
  std::vector<NamedTensor> out;
  for (const auto& v : param_views(copy)) {
    out.push_back({v.name, Eigen::Map<const Matrix>(v.data, v.rows, v.cols)});
  }
  return out;
}

Model model_from_tensors(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& t : tensors) {
    if (!by_name.emplace(t.name, &t.value).second) throw ContractError("duplicate tensor '" + t.name + "'");
  }
  // Shape everything from the file first, then copy values through the views.
  Model m;
  auto get = [&](const std::string& name) -> const Matrix& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ContractError("missing tensor '" + name + "'");
    return *it->second;
  };
  for (std::size_t e = 0; e < kExperts; ++e) {
    const std::string p = std::string(to_string(static_cast<Expert>(e))) + ".";
    auto& q = m.fusion.qformer[e];
    q.queries = get(p + "queries");
    q.w_q = get(p + "w_q");
    q.w_k = get(p + "w_k");
    q.w_v = get(p + "w_v");
    q.w_o = get(p + "w_o");
    m.fusion.gate[e].weight.resize(get(p + "gate.weight").size());
  }
  m.fusion.projection = get("projection");
  m.fusion.projection_bias.resize(get("projection_bias").size());
  auto& d = m.decoder;
  d.embedding = get("decoder.embedding");
  d.bos.resize(get("decoder.bos").size());
  d.w_query = get("decoder.w_query");
  d.w_key = get("decoder.w_key");
  d.w_value = get("decoder.w_value");
  d.w_out = get("decoder.w_out");
  d.b_out.resize(get("decoder.b_out").size());
  for (auto& v : param_views(m)) {
    const Matrix& src = get(v.name);
    if (src.size() != v.size()) throw ContractError("tensor '" + v.name + "' has the wrong size");
    if (v.cols == 1 || v.rows == 1) {
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data[i] = src.data()[i];
    }
  }
  if (by_name.size() != param_views(m).size()) throw ContractError("unexpected extra tensors in bundle");
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  write_file_atomic(path, encode_tensors(model_tensors(model)));
}

Model load_model(const std::filesystem::path& path) {
  return model_from_tensors(decode_tensors(read_text_file(path)));
}

}  // namespace dialoforge::fusion
