#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "agil/nn/optim.hpp"
#include "agil/nn/tensor.hpp"

namespace agil::nn {

// Checkpoints are a JSON manifest listing named arrays with shapes plus a
// flat little-endian float64 binary in manifest order. Round-trips are
// bit-exact. The binary sits next to the manifest with a .bin extension.
class CheckpointWriter {
 public:
  void add(const std::string& name, std::vector<int> shape, const double* data,
           int count);
  void add_store(const std::string& group, const ParamStore& store);
  // Serializes moments (against `store` buffer names) and step count.
  void add_optimizer(const std::string& group, const OptimizerState& opt,
                     const ParamStore& store);
  void add_text(const std::string& key, const std::string& value);

  void write(const std::filesystem::path& manifest_path) const;

 private:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
  };
  std::vector<Entry> entries_;
  std::vector<std::pair<std::string, std::string>> texts_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::filesystem::path& manifest_path);

  bool has(const std::string& name) const;
  std::vector<int> shape(const std::string& name) const;
  std::vector<double> read(const std::string& name) const;
  void read_store(const std::string& group, ParamStore& store) const;
  void read_optimizer(const std::string& group, OptimizerState& opt,
                      const ParamStore& store) const;
  bool has_text(const std::string& key) const;
  std::string text(const std::string& key) const;

 private:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;  // in doubles
  };
  const Entry& find(const std::string& name) const;

  std::vector<Entry> entries_;
  std::vector<std::pair<std::string, std::string>> texts_;
  std::vector<double> payload_;
};

}  // namespace agil::nn
