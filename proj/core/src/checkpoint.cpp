#include "stackseq/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stackseq {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; add byte swapping for this platform");

namespace {

constexpr const char* kHeader = "stackseq-checkpoint v1";

void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated");
  return v;
}

std::string join_i64(const std::vector<int64_t>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int64_t> split_i64(const std::string& s) {
  std::vector<int64_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.push_back(std::stoll(part));
  return out;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

  const ModelConfig& c = model.config;
  std::vector<int64_t> block_dilations;
  for (const ResidualBlock& b : model.blocks) block_dilations.push_back(b.dilation);

  out << kHeader << "\n";
  out << "vocab_size=" << c.vocab_size << "\n";
  out << "embed_dim=" << c.embed_dim << "\n";
  out << "max_len=" << c.max_len << "\n";
  out << "num_blocks=" << c.num_blocks << "\n";
  out << "kernel_width=" << c.kernel_width << "\n";
  out << "base_dilations=" << join_i64(c.base_dilations) << "\n";
  out << "output_vocab=" << c.output_vocab << "\n";
  out << "block_dilations=" << join_i64(block_dilations) << "\n";

  int64_t tensors = 0;
  for_each_param(model, std::function<void(const std::string&, const Tensor&)>(
                            [&tensors](const std::string&, const Tensor&) { ++tensors; }));
  out << "tensors=" << tensors << "\n";

  for_each_param(model, std::function<void(const std::string&, const Tensor&)>(
                            [&out](const std::string& name, const Tensor& t) {
                              write_u64(out, name.size());
                              out.write(name.data(), static_cast<std::streamsize>(name.size()));
                              write_u64(out, static_cast<uint64_t>(t.rank()));
                              for (int64_t d : t.shape) write_u64(out, static_cast<uint64_t>(d));
                              out.write(reinterpret_cast<const char*>(t.ptr()),
                                        static_cast<std::streamsize>(t.numel() * sizeof(float)));
                            }));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    throw std::runtime_error("checkpoint: bad header in " + path);

  ModelConfig config;
  std::vector<int64_t> block_dilations;
  int64_t tensors = -1;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: bad manifest line: " + line);
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "vocab_size") config.vocab_size = std::stoll(value);
    else if (key == "embed_dim") config.embed_dim = std::stoll(value);
    else if (key == "max_len") config.max_len = std::stoll(value);
    else if (key == "num_blocks") config.num_blocks = std::stoll(value);
    else if (key == "kernel_width") config.kernel_width = std::stoll(value);
    else if (key == "base_dilations") config.base_dilations = split_i64(value);
    else if (key == "output_vocab") config.output_vocab = std::stoll(value);
    else if (key == "block_dilations") block_dilations = split_i64(value);
    else if (key == "tensors") { tensors = std::stoll(value); break; }
    else throw std::runtime_error("checkpoint: unknown manifest key: " + key);
  }
  if (tensors < 0) throw std::runtime_error("checkpoint: manifest missing tensor count");
  if (static_cast<int64_t>(block_dilations.size()) != config.num_blocks)
    throw std::runtime_error("checkpoint: block dilation list does not match num_blocks");

  // Build an empty model with the right structure, then fill tensors in
  // the container's (and for_each_param's) order.
  Model model;
  model.config = config;
  const int64_t k = config.embed_dim, kw = config.kernel_width;
  model.embedding = Tensor::zeros({config.vocab_size + 1, k});
  model.blocks.resize(static_cast<size_t>(config.num_blocks));
  for (int64_t i = 0; i < config.num_blocks; ++i) {
    ResidualBlock& b = model.blocks[static_cast<size_t>(i)];
    b.conv1_w = Tensor::zeros({kw, k, k});
    b.conv1_b = Tensor::zeros({k});
    b.ln1_gamma = Tensor::zeros({k});
    b.ln1_beta = Tensor::zeros({k});
    b.conv2_w = Tensor::zeros({kw, k, k});
    b.conv2_b = Tensor::zeros({k});
    b.ln2_gamma = Tensor::zeros({k});
    b.ln2_beta = Tensor::zeros({k});
    b.alpha = Tensor::scalar(0.0f);
    b.dilation = block_dilations[static_cast<size_t>(i)];
  }
  model.softmax_w = Tensor::zeros({k, config.head_vocab() + 1});
  model.softmax_b = Tensor::zeros({config.head_vocab() + 1});

  std::vector<std::pair<std::string, Tensor*>> slots;
  for_each_param(model, std::function<void(const std::string&, Tensor&)>(
                            [&slots](const std::string& name, Tensor& t) {
                              slots.emplace_back(name, &t);
                            }));
  if (static_cast<int64_t>(slots.size()) != tensors)
    throw std::runtime_error("checkpoint: tensor count mismatch (manifest says " +
                             std::to_string(tensors) + ", structure has " +
                             std::to_string(slots.size()) + ")");

  for (auto& [expect_name, slot] : slots) {
    uint64_t name_len = read_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in || name != expect_name)
      throw std::runtime_error("checkpoint: expected tensor '" + expect_name + "', found '" +
                               name + "'");
    uint64_t rank = read_u64(in);
    std::vector<int64_t> dims(rank);
    for (uint64_t i = 0; i < rank; ++i) dims[i] = static_cast<int64_t>(read_u64(in));
    if (dims != slot->shape)
      throw std::runtime_error("checkpoint: tensor '" + name + "' has unexpected shape");
    in.read(reinterpret_cast<char*>(slot->ptr()),
            static_cast<std::streamsize>(slot->numel() * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor payload for '" + name + "'");
  }
  return model;
}

}  // namespace stackseq
