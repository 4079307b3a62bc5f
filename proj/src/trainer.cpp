// Copyright 2026 The dictpfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dictpfl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "dictpfl/rng.hpp"

namespace dictpfl::trainer {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'D', 'S'};
constexpr std::uint8_t kDatasetVersion = 1;

void put_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

// Row-wise softmax with the usual max shift; returns probabilities.
Matrix softmax(const Eigen::Ref<const Matrix>& logits) {
  Matrix p = logits;
  for (Index r = 0; r < p.rows(); ++r) {
    p.row(r).array() -= p.row(r).maxCoeff();
    p.row(r) = p.row(r).array().exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

void check_labels(const Eigen::Ref<const Matrix>& logits,
                  const std::vector<std::uint32_t>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw ShapeError("labels: expected " + std::to_string(logits.rows()) +
                     " entries, got " + std::to_string(labels.size()));
  }
  for (std::uint32_t y : labels) {
    if (y >= static_cast<std::uint32_t>(logits.cols())) {
      throw ParameterError("label " + std::to_string(y) + " outside class range");
    }
  }
}

struct FlatParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

FlatParams effective_params(const ToyModel& model) {
  FlatParams p;
  for (const DenseLayer& layer : model.layers) {
    p.weights.push_back(layer.effective_weight());
    p.biases.push_back(layer.bias);
  }
  return p;
}

Matrix forward_raw(const FlatParams& p, const Eigen::Ref<const Matrix>& x,
                   std::vector<Matrix>* activations) {
  Matrix h = x;
  if (activations) activations->push_back(h);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Matrix z = h * p.weights[l].transpose();
    z.rowwise() += p.biases[l].transpose();
    if (l + 1 < p.weights.size()) {
      h = z.cwiseMax(0.0);
      if (activations) activations->push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Gradients gradient_raw(const FlatParams& p, const Eigen::Ref<const Matrix>& x,
                       const std::vector<std::uint32_t>& labels) {
  std::vector<Matrix> acts;
  const Matrix logits = forward_raw(p, x, &acts);
  check_labels(logits, labels);
  const auto batch = static_cast<double>(x.rows());

  Matrix delta = softmax(logits);
  for (Index r = 0; r < delta.rows(); ++r) {
    delta(r, static_cast<Index>(labels[static_cast<std::size_t>(r)])) -= 1.0;
  }
  delta /= batch;

  const std::size_t depth = p.weights.size();
  Gradients g;
  g.weight.resize(depth);
  g.bias.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    g.weight[l] = delta.transpose() * acts[l];
    g.bias[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * p.weights[l];
      // Rectifier gate: activations are zero exactly where the unit was off.
      delta = back.cwiseProduct(
          (acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

}  // namespace

Dataset synth_blobs(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2 || spec.dim < 1 || spec.samples_per_class < 1) {
    throw ParameterError("synth_blobs: need >= 2 classes and positive sizes");
  }
  if (!(spec.margin >= 0.0)) {
    throw ParameterError("synth_blobs: margin must be non-negative");
  }
  Rng mean_rng = Rng::stream(seed, streams::kSynthMeans);
  Matrix means(spec.classes, spec.dim);
  for (int c = 0; c < spec.classes; ++c) {
    Vector dir(spec.dim);
    for (Index j = 0; j < spec.dim; ++j) dir[j] = mean_rng.normal();
    means.row(c) = (spec.margin / dir.norm()) * dir.transpose();
  }

  Rng rng = Rng::stream(seed, streams::kSynthSamples);
  const Index n = static_cast<Index>(spec.classes) * spec.samples_per_class;
  Dataset ds;
  ds.classes = spec.classes;
  ds.features.resize(n, spec.dim);
  ds.labels.resize(static_cast<std::size_t>(n));
  Index row = 0;
  for (int c = 0; c < spec.classes; ++c) {
    for (int i = 0; i < spec.samples_per_class; ++i, ++row) {
      for (Index j = 0; j < spec.dim; ++j) {
        ds.features(row, j) = means(c, j) + rng.normal();
      }
      ds.labels[static_cast<std::size_t>(row)] = static_cast<std::uint32_t>(c);
    }
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  out.put(static_cast<char>(kDatasetVersion));
  out.put(0);
  put_u16(out, static_cast<std::uint16_t>(ds.classes));
  put_u16(out, static_cast<std::uint16_t>(ds.dim()));
  put_u32(out, static_cast<std::uint32_t>(ds.size()));
  for (Index r = 0; r < ds.size(); ++r) {
    for (Index c = 0; c < ds.dim(); ++c) put_f64(out, ds.features(r, c));
  }
  for (std::uint32_t y : ds.labels) put_u32(out, y);
  if (!out) throw IoError("write failed for '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("'" + path + "': not a dataset file");
  }
  const int version = in.get();
  in.get();  // reserved
  if (version != kDatasetVersion) {
    throw IoError("'" + path + "': unsupported dataset version");
  }
  Dataset ds;
  ds.classes = get_u16(in);
  const Index dim = get_u16(in);
  const std::uint32_t count = get_u32(in);
  if (!in || ds.classes < 2 || dim < 1) {
    throw IoError("'" + path + "': malformed header");
  }
  ds.features.resize(static_cast<Index>(count), dim);
  for (Index r = 0; r < ds.features.rows(); ++r) {
    for (Index c = 0; c < dim; ++c) ds.features(r, c) = get_f64(in);
  }
  ds.labels.resize(count);
  for (auto& y : ds.labels) y = get_u32(in);
  if (!in) throw IoError("'" + path + "': truncated file");
  in.peek();
  if (!in.eof()) throw IoError("'" + path + "': trailing bytes");
  for (std::uint32_t y : ds.labels) {
    if (y >= static_cast<std::uint32_t>(ds.classes)) {
      throw IoError("'" + path + "': label outside class range");
    }
  }
  return ds;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (Index c = 0; c < ds.dim(); ++c) out << "f" << c << ",";
  out << "label\n";
  char buf[32];
  for (Index r = 0; r < ds.size(); ++r) {
    for (Index c = 0; c < ds.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g,", ds.features(r, c));
      out << buf;
    }
    out << ds.labels[static_cast<std::size_t>(r)] << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<DataShard> dirichlet_partition(const Dataset& ds, int clients,
                                           double alpha, std::uint64_t seed) {
  if (clients < 1) throw ParameterError("dirichlet_partition: clients must be >= 1");
  if (ds.size() < clients) {
    throw ParameterError("dirichlet_partition: fewer samples than clients");
  }
  if (!(alpha > 0.0)) {
    throw ParameterError("dirichlet_partition: alpha must be positive");
  }
  Rng rng = Rng::stream(seed, streams::kPartition);
  const auto k = static_cast<std::size_t>(clients);

  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(ds.classes));
  for (Index i = 0; i < ds.size(); ++i) {
    by_class[ds.labels[static_cast<std::size_t>(i)]].push_back(i);
  }

  std::vector<std::vector<Index>> assigned(k);
  for (auto& members : by_class) {
    rng.shuffle(members);
    const std::size_t nc = members.size();
    std::vector<std::size_t> counts(k, 0);
    if (std::isinf(alpha)) {
      for (auto& c : counts) c = nc / k;
    } else {
      std::vector<double> w(k);
      double sum = 0.0;
      for (auto& wi : w) {
        wi = rng.gamma(alpha);
        sum += wi;
      }
      if (sum <= 0.0) {
        w.assign(k, 1.0);
        sum = static_cast<double>(k);
      }
      // Largest-remainder rounding of nc * w / sum.
      std::vector<double> frac(k);
      std::size_t total = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const double target = static_cast<double>(nc) * w[i] / sum;
        counts[i] = static_cast<std::size_t>(std::floor(target));
        frac[i] = target - std::floor(target);
        total += counts[i];
      }
      std::vector<std::size_t> order(k);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (frac[a] != frac[b]) return frac[a] > frac[b];
        return a < b;
      });
      for (std::size_t i = 0; total < nc; ++i, ++total) {
        ++counts[order[i % k]];
      }
    }
    std::size_t off = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < counts[i] && off < nc; ++j, ++off) {
        assigned[i].push_back(members[off]);
      }
    }
  }

  // Guarantee non-empty shards before equalizing, moving one sample at a
  // time from the currently largest shard.
  for (auto& shard : assigned) {
    while (shard.empty()) {
      auto largest = std::max_element(
          assigned.begin(), assigned.end(),
          [](const auto& a, const auto& b) { return a.size() < b.size(); });
      if (largest->size() <= 1) {
        throw ParameterError("dirichlet_partition: not enough samples");
      }
      shard.push_back(largest->back());
      largest->pop_back();
    }
  }

  std::size_t min_size = std::numeric_limits<std::size_t>::max();
  for (auto& shard : assigned) {
    rng.shuffle(shard);
    min_size = std::min(min_size, shard.size());
  }

  std::vector<DataShard> shards(k);
  for (std::size_t i = 0; i < k; ++i) {
    DataShard& s = shards[i];
    s.features.resize(static_cast<Index>(min_size), ds.dim());
    s.labels.resize(min_size);
    for (std::size_t j = 0; j < min_size; ++j) {
      const Index src = assigned[i][j];
      s.features.row(static_cast<Index>(j)) = ds.features.row(src);
      s.labels[j] = ds.labels[static_cast<std::size_t>(src)];
    }
  }
  return shards;
}

Index DenseLayer::in() const {
  return factor ? factor->cols() : weight.cols();
}

Index DenseLayer::out() const {
  return factor ? factor->rows() : weight.rows();
}

Matrix DenseLayer::effective_weight() const {
  return factor ? factor->reconstruct() : weight;
}

ToyModel ToyModel::mlp(const std::vector<Index>& dims, std::uint64_t seed) {
  if (dims.size() < 2) {
    throw ParameterError("mlp: need at least input and output sizes");
  }
  for (Index d : dims) {
    if (d < 1) throw ParameterError("mlp: non-positive layer size");
  }
  ToyModel model;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Rng rng = Rng::stream(seed, streams::kModelInit, l);
    DenseLayer layer;
    layer.weight.resize(dims[l + 1], dims[l]);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (Index r = 0; r < layer.weight.rows(); ++r) {
      for (Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = sigma * rng.normal();
      }
    }
    layer.bias = Vector::Zero(dims[l + 1]);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void ToyModel::factorize(Index rank) {
  if (rank < 1) throw ParameterError("factorize: rank must be >= 1");
  for (DenseLayer& layer : layers) {
    if (layer.factor) continue;
    const Index r_eff = std::min(rank, std::min(layer.weight.rows(), layer.weight.cols()));
    layer.factor = depe::WeightDecomposition::init(layer.weight, r_eff);
    layer.weight = Matrix();
  }
}

Matrix ToyModel::logits(const Eigen::Ref<const Matrix>& x) const {
  if (layers.empty()) throw ParameterError("logits: empty model");
  if (x.cols() != layers.front().in()) {
    throw ShapeError("logits: expected " + std::to_string(layers.front().in()) +
                     " features, got " + std::to_string(x.cols()));
  }
  return forward_raw(effective_params(*this), x, nullptr);
}

int ToyModel::classes() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().out());
}

bool ToyModel::factorized() const {
  for (const DenseLayer& l : layers) {
    if (l.factor) return true;
  }
  return false;
}

double cross_entropy(const Eigen::Ref<const Matrix>& logits,
                     const std::vector<std::uint32_t>& labels) {
  check_labels(logits, labels);
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = std::log((logits.row(r).array() - mx).exp().sum()) + mx;
    total += lse - logits(r, static_cast<Index>(labels[static_cast<std::size_t>(r)]));
  }
  return total / static_cast<double>(logits.rows());
}

double accuracy(const Eigen::Ref<const Matrix>& logits,
                const std::vector<std::uint32_t>& labels) {
  check_labels(logits, labels);
  Index hits = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    if (arg == static_cast<Index>(labels[static_cast<std::size_t>(r)])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

EvalResult evaluate(const ToyModel& model, const Eigen::Ref<const Matrix>& x,
                    const std::vector<std::uint32_t>& labels) {
  const Matrix logits = model.logits(x);
  return EvalResult{cross_entropy(logits, labels), accuracy(logits, labels)};
}

Gradients gradient(const ToyModel& model, const Eigen::Ref<const Matrix>& x,
                   const std::vector<std::uint32_t>& labels) {
  return gradient_raw(effective_params(model), x, labels);
}

Gradients local_train(const ToyModel& model, const DataShard& shard,
                      int epochs, double lr) {
  if (epochs < 1) throw ParameterError("local_train: epochs must be >= 1");
  if (shard.size() < 1) throw ParameterError("local_train: empty shard");
  FlatParams p = effective_params(model);

  Gradients diff;
  diff.weight.reserve(p.weights.size());
  diff.bias.reserve(p.biases.size());
  if (lr == 0.0) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      diff.weight.push_back(Matrix::Zero(p.weights[l].rows(), p.weights[l].cols()));
      diff.bias.push_back(Vector::Zero(p.biases[l].size()));
    }
    return diff;
  }

  const FlatParams start = p;
  for (int e = 0; e < epochs; ++e) {
    const Gradients g = gradient_raw(p, shard.features, shard.labels);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      linalg::require_finite(g.weight[l], "local_train gradient");
      p.weights[l] -= lr * g.weight[l];
      p.biases[l] -= lr * g.bias[l];
    }
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    diff.weight.push_back((start.weights[l] - p.weights[l]) / lr);
    diff.bias.push_back((start.biases[l] - p.biases[l]) / lr);
  }
  return diff;
}

std::uint64_t train_flops(const ToyModel& model, Index batch, int epochs) {
  std::uint64_t per_sample = 0;
  for (const DenseLayer& l : model.layers) {
    per_sample += 6ull * static_cast<std::uint64_t>(l.in()) *
                  static_cast<std::uint64_t>(l.out());
  }
  return per_sample * static_cast<std::uint64_t>(batch) *
         static_cast<std::uint64_t>(epochs);
}

}  // namespace dictpfl::trainer
