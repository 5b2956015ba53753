#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mitd/errors.hpp"
#include "mitd/transducer.hpp"

namespace mitd {

namespace {

using Kind = ModelFileError::Kind;

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ModelFileError(Kind::truncated, std::string("model file truncated before ") + what);
  }
  return line;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, '\t');) out.push_back(f);
  return out;
}

}  // namespace

void save_model(const ModelParameters& p, const Hyperparameters& h, const Vocabulary& v,
                const std::filesystem::path& path) {
  if (p.vocab_size() != v.size() || p.embed_dim() != h.embed_dim ||
      p.hidden_dim() != h.hidden_dim) {
    throw std::invalid_argument("parameters do not match hyperparameters/vocabulary");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << kModelMagic << '\n';
  out << "hyper\tembed_dim=" << h.embed_dim << "\thidden_dim=" << h.hidden_dim
      << "\tlearning_rate=" << h.learning_rate << "\tbatch_size=" << h.batch_size
      << "\tmax_epochs=" << h.max_epochs << "\tpatience=" << h.patience
      << "\tgrad_clip_norm=" << h.grad_clip_norm << "\tseed=" << h.seed << '\n';
  v.write(out);
  out << '\n';
  const auto blocks = param_blocks(p);
  std::size_t total = 0;
  out << "manifest\t" << blocks.size() << '\n';
  for (const auto& b : blocks) {
    out << b.name << '\t' << b.rows << '\t' << b.cols << '\n';
    total += b.values().size();
  }
  out << "data\t" << total << '\n';
  for (const auto& b : blocks) {
    for (double x : b.values()) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(x));
      char buf[8];
      std::memcpy(buf, &bits, 8);
      out.write(buf, 8);
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  if (read_line(in, "header") != kModelMagic) {
    throw ModelFileError(Kind::version, path.string() + ": not a mitd1 model file");
  }
  SavedModel saved{ModelParameters{}, Hyperparameters{}, Vocabulary{}};
  Hyperparameters& h = saved.hyper;
  {
    auto fields = split_tabs(read_line(in, "hyperparameters"));
    if (fields.empty() || fields[0] != "hyper") {
      throw ModelFileError(Kind::version, "missing hyperparameter line");
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto eq = fields[i].find('=');
      if (eq == std::string::npos) throw ModelFileError(Kind::version, "bad hyperparameter");
      const std::string key = fields[i].substr(0, eq);
      const std::string val = fields[i].substr(eq + 1);
      if (key == "embed_dim") h.embed_dim = std::stoul(val);
      else if (key == "hidden_dim") h.hidden_dim = std::stoul(val);
      else if (key == "learning_rate") h.learning_rate = std::stod(val);
      else if (key == "batch_size") h.batch_size = std::stoul(val);
      else if (key == "max_epochs") h.max_epochs = std::stoul(val);
      else if (key == "patience") h.patience = std::stoul(val);
      else if (key == "grad_clip_norm") h.grad_clip_norm = std::stod(val);
      else if (key == "seed") h.seed = std::stoull(val);
      else throw ModelFileError(Kind::version, "unknown hyperparameter " + key);
    }
  }
  {
    std::ostringstream vocab_text;
    for (std::string line = read_line(in, "vocabulary"); !line.empty();
         line = read_line(in, "vocabulary")) {
      vocab_text << line << '\n';
    }
    std::istringstream vin(vocab_text.str());
    try {
      saved.vocab = Vocabulary::read(vin);
    } catch (const DataError& e) {
      throw ModelFileError(Kind::version, std::string("vocabulary: ") + e.what());
    }
  }

  saved.params = ModelParameters::zeros(saved.vocab.size(), h.embed_dim, h.hidden_dim);
  auto blocks = param_blocks(saved.params);
  auto manifest = split_tabs(read_line(in, "manifest"));
  if (manifest.size() != 2 || manifest[0] != "manifest") {
    throw ModelFileError(Kind::truncated, "missing manifest");
  }
  if (std::stoul(manifest[1]) != blocks.size()) {
    throw ModelFileError(Kind::shape, "manifest lists " + manifest[1] + " blocks, expected " +
                                          std::to_string(blocks.size()));
  }
  std::size_t total = 0;
  for (const auto& b : blocks) {
    auto f = split_tabs(read_line(in, "manifest entry"));
    if (f.size() != 3 || f[0] != b.name || std::stol(f[1]) != b.rows ||
        std::stol(f[2]) != b.cols) {
      throw ModelFileError(Kind::shape, "manifest entry mismatch for " + b.name);
    }
    total += b.values().size();
  }
  auto data = split_tabs(read_line(in, "data"));
  if (data.size() != 2 || data[0] != "data" || std::stoul(data[1]) != total) {
    throw ModelFileError(Kind::shape, "data length does not match manifest");
  }
  for (auto& b : blocks) {
    for (double& x : b.values()) {
      char buf[8];
      if (!in.read(buf, 8)) throw ModelFileError(Kind::truncated, "model data truncated");
      std::uint64_t bits;
      std::memcpy(&bits, buf, 8);
      x = std::bit_cast<double>(to_little_endian(bits));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ModelFileError(Kind::shape, "trailing bytes after model data");
  }
  return saved;
}

}  // namespace mitd
