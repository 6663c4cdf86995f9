#include "agil/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "json.hpp"

namespace agil::nn {

namespace {

std::filesystem::path bin_path(const std::filesystem::path& manifest) {
  std::filesystem::path p = manifest;
  p.replace_extension(".bin");
  return p;
}

void write_f64_le(std::ofstream& os, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

double read_f64_le(std::ifstream& is) {
  char bytes[8];
  is.read(bytes, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void CheckpointWriter::add(const std::string& name, std::vector<int> shape,
                           const double* data, int count) {
  require(shape_numel(shape) == count, "CheckpointWriter::add: shape/count mismatch");
  Entry e;
  e.name = name;
  e.shape = std::move(shape);
  e.data.assign(data, data + count);
  entries_.push_back(std::move(e));
}

void CheckpointWriter::add_store(const std::string& group, const ParamStore& store) {
  for (const auto& buf : store.buffers())
    add(group + "/" + buf.name, buf.shape, buf.values.data(),
        static_cast<int>(buf.values.size()));
}

void CheckpointWriter::add_optimizer(const std::string& group,
                                     const OptimizerState& opt,
                                     const ParamStore& store) {
  const auto& bufs = store.buffers();
  for (std::size_t i = 0; i < opt.first_moment.size() && i < bufs.size(); ++i)
    add(group + "/m1/" + bufs[i].name, {static_cast<int>(opt.first_moment[i].size())},
        opt.first_moment[i].data(), static_cast<int>(opt.first_moment[i].size()));
  for (std::size_t i = 0; i < opt.second_moment.size() && i < bufs.size(); ++i)
    add(group + "/m2/" + bufs[i].name, {static_cast<int>(opt.second_moment[i].size())},
        opt.second_moment[i].data(), static_cast<int>(opt.second_moment[i].size()));
  add_text(group + "/step_count", std::to_string(opt.step_count));
}

void CheckpointWriter::add_text(const std::string& key, const std::string& value) {
  texts_.emplace_back(key, value);
}

void CheckpointWriter::write(const std::filesystem::path& manifest_path) const {
  nlohmann::json manifest;
  manifest["format"] = "agil-checkpoint-v1";
  manifest["arrays"] = nlohmann::json::array();
  for (const auto& e : entries_) {
    nlohmann::json a;
    a["name"] = e.name;
    a["shape"] = e.shape;
    manifest["arrays"].push_back(a);
  }
  manifest["texts"] = nlohmann::json::object();
  for (const auto& [k, v] : texts_) manifest["texts"][k] = v;

  std::ofstream mos(manifest_path);
  require(mos.good(), "CheckpointWriter: cannot open " + manifest_path.string());
  mos << manifest.dump(2) << "\n";
  mos.close();

  std::ofstream bos(bin_path(manifest_path), std::ios::binary);
  require(bos.good(), "CheckpointWriter: cannot open binary payload");
  for (const auto& e : entries_)
    for (double x : e.data) write_f64_le(bos, x);
}

CheckpointReader::CheckpointReader(const std::filesystem::path& manifest_path) {
  std::ifstream mis(manifest_path);
  require(mis.good(), "CheckpointReader: cannot open " + manifest_path.string());
  nlohmann::json manifest = nlohmann::json::parse(mis);
  require(manifest.value("format", "") == "agil-checkpoint-v1",
          "CheckpointReader: unknown checkpoint format");
  std::size_t offset = 0;
  for (const auto& a : manifest["arrays"]) {
    Entry e;
    e.name = a["name"].get<std::string>();
    e.shape = a["shape"].get<std::vector<int>>();
    e.offset = offset;
    offset += static_cast<std::size_t>(shape_numel(e.shape));
    entries_.push_back(std::move(e));
  }
  if (manifest.contains("texts"))
    for (auto it = manifest["texts"].begin(); it != manifest["texts"].end(); ++it)
      texts_.emplace_back(it.key(), it.value().get<std::string>());

  std::ifstream bis(bin_path(manifest_path), std::ios::binary);
  require(bis.good(), "CheckpointReader: cannot open binary payload");
  payload_.resize(offset);
  for (std::size_t i = 0; i < offset; ++i) payload_[i] = read_f64_le(bis);
  require(bis.good(), "CheckpointReader: binary payload truncated");
}

bool CheckpointReader::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const CheckpointReader::Entry& CheckpointReader::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw ContractViolation("CheckpointReader: missing array " + name);
}

std::vector<int> CheckpointReader::shape(const std::string& name) const {
  return find(name).shape;
}

std::vector<double> CheckpointReader::read(const std::string& name) const {
  const Entry& e = find(name);
  const std::size_t n = static_cast<std::size_t>(shape_numel(e.shape));
  return std::vector<double>(payload_.begin() + static_cast<std::ptrdiff_t>(e.offset),
                             payload_.begin() + static_cast<std::ptrdiff_t>(e.offset + n));
}

void CheckpointReader::read_store(const std::string& group, ParamStore& store) const {
  for (auto& buf : store.buffers()) {
    const Entry& e = find(group + "/" + buf.name);
    require(e.shape == buf.shape,
            "CheckpointReader: shape mismatch for " + buf.name);
    const auto data = read(e.name);
    for (int i = 0; i < buf.size(); ++i) buf.values[i] = data[static_cast<std::size_t>(i)];
  }
}

void CheckpointReader::read_optimizer(const std::string& group, OptimizerState& opt,
                                      const ParamStore& store) const {
  opt.first_moment.clear();
  opt.second_moment.clear();
  for (const auto& buf : store.buffers()) {
    if (has(group + "/m1/" + buf.name)) {
      const auto m = read(group + "/m1/" + buf.name);
      opt.first_moment.emplace_back(
          Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size())));
    }
    const auto v = read(group + "/m2/" + buf.name);
    opt.second_moment.emplace_back(
        Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  opt.step_count = std::stol(text(group + "/step_count"));
}

bool CheckpointReader::has_text(const std::string& key) const {
  for (const auto& [k, v] : texts_)
    if (k == key) return true;
  return false;
}

std::string CheckpointReader::text(const std::string& key) const {
  for (const auto& [k, v] : texts_)
    if (k == key) return v;
  throw ContractViolation("CheckpointReader: missing text " + key);
}

}  // namespace agil::nn
