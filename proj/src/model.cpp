#include "samelda/model.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "samelda/errors.hpp"

namespace samelda {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'A', 'M', 'E', 'L', 'D', 'A', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& value, const std::string& path) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw IoError("truncated checkpoint: " + path);
  }
}

}  // namespace

DenseMatrix transposed(const DenseMatrix& m) {
  DenseMatrix t(m.cols, m.rows);
  for (std::int64_t r = 0; r < m.rows; ++r) {
    for (std::int64_t c = 0; c < m.cols; ++c) {
      t(c, r) = m(r, c);
    }
  }
  return t;
}

Model init_model(std::int64_t n_topics, std::int64_t n_words, std::int64_t n_docs,
                 double alpha, double beta) {
  Model model;
  model.n_topics = n_topics;
  model.n_words = n_words;
  model.alpha = alpha;
  model.beta = beta;
  model.phi = DenseMatrix(n_topics, n_words, 1.0 / static_cast<double>(n_words));
  model.theta =
      DenseMatrix(n_docs, n_topics, alpha + 1.0 / static_cast<double>(n_topics));
  return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write checkpoint: " + path);
  }
  out.write(kMagic.data(), kMagic.size());
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(model.n_topics));
  write_pod(out, static_cast<std::uint64_t>(model.n_words));
  write_pod(out, model.alpha);
  write_pod(out, model.beta);
  out.write(reinterpret_cast<const char*>(model.phi.data.data()),
            static_cast<std::streamsize>(model.phi.data.size() * sizeof(double)));
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path);
  }
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw IoError("not a model checkpoint: " + path);
  }
  std::uint32_t version = 0;
  read_pod(in, version, path);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version in " + path);
  }
  std::uint64_t k = 0, w = 0;
  read_pod(in, k, path);
  read_pod(in, w, path);
  Model model;
  model.n_topics = static_cast<std::int64_t>(k);
  model.n_words = static_cast<std::int64_t>(w);
  if (model.n_topics < 1 || model.n_words < 1 ||
      model.n_topics > (1 << 20) || model.n_words > (std::int64_t{1} << 32)) {
    throw IoError("implausible checkpoint header in " + path);
  }
  read_pod(in, model.alpha, path);
  read_pod(in, model.beta, path);
  model.phi = DenseMatrix(model.n_topics, model.n_words);
  in.read(reinterpret_cast<char*>(model.phi.data.data()),
          static_cast<std::streamsize>(model.phi.data.size() * sizeof(double)));
  if (in.gcount() !=
      static_cast<std::streamsize>(model.phi.data.size() * sizeof(double))) {
    throw IoError("truncated checkpoint: " + path);
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw IoError("trailing bytes in checkpoint: " + path);
  }
  return model;
}

}  // namespace samelda
