// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include "sarstream/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sarstream/ctc.hpp"
#include "sarstream/kernels.hpp"

namespace sarstream::grad {

// ---------------------------------------------------------------------------
// ParamStore

Param& ParamStore::create(const std::string& name, int rows, int cols, Rng& rng,
                          double stddev) {
  if (index_.count(name)) throw InputError("ParamStore: duplicate parameter " + name);
  params_.push_back(Param{name, Matrix::gaussian(rows, cols, rng, stddev),
                          Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols)});
  index_[name] = &params_.back();
  return params_.back();
}

Param& ParamStore::create_zeros(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw InputError("ParamStore: duplicate parameter " + name);
  params_.push_back(
      Param{name, Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols)});
  index_[name] = &params_.back();
  return params_.back();
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("ParamStore: unknown parameter " + name);
  return *it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("ParamStore: unknown parameter " + name);
  return *it->second;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) > 0; }

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Param*> ParamStore::all() const {
  std::vector<const Param*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.zero();
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.params_.size() != params_.size())
    throw InputError("ParamStore: layout mismatch in copy_values_from");
  auto it = params_.begin();
  auto jt = other.params_.begin();
  for (; it != params_.end(); ++it, ++jt) {
    if (it->name != jt->name || !it->value.same_shape(jt->value))
      throw InputError("ParamStore: layout mismatch at parameter " + it->name);
    it->value = jt->value;
  }
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void put_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

struct Reader {
  std::ifstream in;
  std::string file;
  std::size_t offset = 0;

  void read(void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw FormatError(file + ": truncated at byte offset " + std::to_string(offset));
    offset += n;
  }
  std::uint32_t u32() {
    unsigned char buf[4];
    read(buf, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }
  double f64() {
    unsigned char buf[8];
    read(buf, 8);
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | buf[i];
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  bool at_eof() { return in.peek() == std::ifstream::traits_type::eof(); }
};

}  // namespace

void ParamStore::save(const std::filesystem::path& file) const {
  const auto ptrs = all();
  save_params(file, ptrs);
}

void ParamStore::load(const std::filesystem::path& file) {
  const auto ptrs = all();
  load_params(file, ptrs);
}

void save_params(const std::filesystem::path& file, std::span<const Param* const> params) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot open " + file.string() + " for writing");
  out.write("SARP", 4);
  for (const Param* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, 2u);
    put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (std::size_t i = 0; i < p->value.size(); ++i) put_f64(out, p->value.data()[i]);
  }
  if (!out) throw FormatError("write failed for " + file.string());
}

void load_params(const std::filesystem::path& file, std::span<Param* const> params) {
  std::unordered_map<std::string, Param*> index;
  for (Param* p : params) index[p->name] = p;

  Reader r;
  r.in.open(file, std::ios::binary);
  r.file = file.string();
  if (!r.in) throw MissingArtifactError("missing checkpoint: " + file.string());
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, "SARP", 4) != 0)
    throw FormatError(r.file + ": bad magic at byte offset 0");

  std::size_t loaded = 0;
  while (!r.at_eof()) {
    const std::uint32_t name_len = r.u32();
    if (name_len == 0 || name_len > 4096)
      throw FormatError(r.file + ": implausible name length at byte offset " +
                        std::to_string(r.offset - 4));
    std::string name(name_len, '\0');
    r.read(name.data(), name_len);
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 2)
      throw FormatError(r.file + ": unsupported rank at byte offset " +
                        std::to_string(r.offset - 4));
    std::uint32_t rows = 1, cols = 1;
    if (rank == 1) {
      cols = r.u32();
    } else {
      rows = r.u32();
      cols = r.u32();
    }
    auto it = index.find(name);
    if (it == index.end())
      throw FormatError(r.file + ": unknown parameter '" + name + "'");
    Param& p = *it->second;
    if (p.value.rows() != static_cast<int>(rows) || p.value.cols() != static_cast<int>(cols))
      throw FormatError(r.file + ": shape mismatch for parameter '" + name + "'");
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value.data()[i] = r.f64();
    ++loaded;
  }
  if (loaded != params.size())
    throw FormatError(r.file + ": expected " + std::to_string(params.size()) +
                      " parameters, found " + std::to_string(loaded));
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Node::value() const { return tape->value(id); }

double Node::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw InputError("Node: not a scalar");
  return v(0, 0);
}

Node Tape::push(Matrix value, std::function<void(Tape&)> back, Param* origin) {
  Rec rec;
  rec.grad = Matrix(value.rows(), value.cols());
  rec.value = std::move(value);
  rec.back = std::move(back);
  rec.origin = origin;
  recs_.push_back(std::move(rec));
  return Node{this, static_cast<int>(recs_.size()) - 1};
}

Node Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Node Tape::param(Param& p) { return push(p.value, nullptr, &p); }

Node Tape::affine(Node x, Node w, Node b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols())
    throw InputError("affine: shape mismatch");
  Matrix out(x.rows(), w.cols());
  for (int i = 0; i < out.rows(); ++i)
    std::memcpy(out.row(i), b.value().row(0), sizeof(double) * static_cast<std::size_t>(out.cols()));
  add_ab(out, x.value(), w.value());
  const int xid = x.id, wid = w.id, bid = b.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, wid, bid, self](Tape& t) {
    add_abt(t.grad(xid), t.grad(self), t.value(wid));
    add_atb(t.grad(wid), t.value(xid), t.grad(self));
    const Matrix& gy = t.grad(self);
    Matrix& gb = t.grad(bid);
    for (int i = 0; i < gy.rows(); ++i)
      kernels::add(gy.row(i), gb.row(0), static_cast<std::size_t>(gy.cols()));
  };
  return n;
}

Node Tape::matmul(Node a, Node b) {
  if (a.cols() != b.rows()) throw InputError("matmul: shape mismatch");
  Matrix out(a.rows(), b.cols());
  add_ab(out, a.value(), b.value());
  const int aid = a.id, bid = b.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [aid, bid, self](Tape& t) {
    add_abt(t.grad(aid), t.grad(self), t.value(bid));
    add_atb(t.grad(bid), t.value(aid), t.grad(self));
  };
  return n;
}

Node Tape::matmul_nt(Node a, Node b) {
  if (a.cols() != b.cols()) throw InputError("matmul_nt: shape mismatch");
  Matrix out(a.rows(), b.rows());
  add_abt(out, a.value(), b.value());
  const int aid = a.id, bid = b.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [aid, bid, self](Tape& t) {
    add_ab(t.grad(aid), t.grad(self), t.value(bid));
    add_atb(t.grad(bid), t.grad(self), t.value(aid));
  };
  return n;
}

Node Tape::add(Node a, Node b) { return scaled_sum(1.0, a, 1.0, b); }

Node Tape::scaled_sum(double alpha, Node a, double beta, Node b) {
  if (!a.value().same_shape(b.value())) throw InputError("scaled_sum: shape mismatch");
  Matrix out(a.rows(), a.cols());
  kernels::scaled_sum(alpha, a.value().data(), beta, b.value().data(), out.data(), out.size());
  const int aid = a.id, bid = b.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [aid, bid, alpha, beta, self](Tape& t) {
    kernels::axpy(alpha, t.grad(self).data(), t.grad(aid).data(), t.grad(self).size());
    kernels::axpy(beta, t.grad(self).data(), t.grad(bid).data(), t.grad(self).size());
  };
  return n;
}

Node Tape::scale(Node a, double s) {
  Matrix out = a.value();
  kernels::scale(s, out.data(), out.size());
  const int aid = a.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [aid, s, self](Tape& t) {
    kernels::axpy(s, t.grad(self).data(), t.grad(aid).data(), t.grad(self).size());
  };
  return n;
}

Node Tape::hadamard(Node a, Node b) {
  if (!a.value().same_shape(b.value())) throw InputError("hadamard: shape mismatch");
  Matrix out(a.rows(), a.cols());
  kernels::hadamard(a.value().data(), b.value().data(), out.data(), out.size());
  const int aid = a.id, bid = b.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [aid, bid, self](Tape& t) {
    kernels::hadamard_acc(t.grad(self).data(), t.value(bid).data(), t.grad(aid).data(),
                          t.grad(self).size());
    kernels::hadamard_acc(t.grad(self).data(), t.value(aid).data(), t.grad(bid).data(),
                          t.grad(self).size());
  };
  return n;
}

Node Tape::tanh_op(Node x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(x.value().data()[i]);
  const int xid = x.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, self](Tape& t) {
    const Matrix& y = t.value(self);
    const Matrix& gy = t.grad(self);
    Matrix& gx = t.grad(xid);
    for (std::size_t i = 0; i < y.size(); ++i)
      gx.data()[i] += gy.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
  };
  return n;
}

Node Tape::relu_op(Node x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = x.value().data()[i] > 0.0 ? x.value().data()[i] : 0.0;
  const int xid = x.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, self](Tape& t) {
    const Matrix& xin = t.value(xid);
    const Matrix& gy = t.grad(self);
    Matrix& gx = t.grad(xid);
    for (std::size_t i = 0; i < gy.size(); ++i)
      if (xin.data()[i] > 0.0) gx.data()[i] += gy.data()[i];
  };
  return n;
}

Node Tape::sigmoid_op(Node x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.value().data()[i];
    out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
  }
  const int xid = x.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, self](Tape& t) {
    const Matrix& y = t.value(self);
    const Matrix& gy = t.grad(self);
    Matrix& gx = t.grad(xid);
    for (std::size_t i = 0; i < y.size(); ++i)
      gx.data()[i] += gy.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
  };
  return n;
}

Node Tape::row_softmax(Node x) {
  Matrix out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    const double* in = x.value().row(i);
    double* o = out.row(i);
    const double m = kernels::max_value(in, static_cast<std::size_t>(x.cols()));
    double z = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      o[j] = std::exp(in[j] - m);
      z += o[j];
    }
    const double inv = 1.0 / z;
    for (int j = 0; j < x.cols(); ++j) o[j] *= inv;
  }
  const int xid = x.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, self](Tape& t) {
    const Matrix& y = t.value(self);
    const Matrix& gy = t.grad(self);
    Matrix& gx = t.grad(xid);
    for (int i = 0; i < y.rows(); ++i) {
      const double inner = kernels::dot(gy.row(i), y.row(i), static_cast<std::size_t>(y.cols()));
      for (int j = 0; j < y.cols(); ++j)
        gx(i, j) += y(i, j) * (gy(i, j) - inner);
    }
  };
  return n;
}

Node Tape::log_softmax(Node x) {
  Matrix out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    const double* in = x.value().row(i);
    double* o = out.row(i);
    const double m = kernels::max_value(in, static_cast<std::size_t>(x.cols()));
    double z = 0.0;
    for (int j = 0; j < x.cols(); ++j) z += std::exp(in[j] - m);
    const double lse = m + std::log(z);
    for (int j = 0; j < x.cols(); ++j) o[j] = in[j] - lse;
  }
  const int xid = x.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, self](Tape& t) {
    const Matrix& y = t.value(self);
    const Matrix& gy = t.grad(self);
    Matrix& gx = t.grad(xid);
    for (int i = 0; i < y.rows(); ++i) {
      const double total = kernels::sum(gy.row(i), static_cast<std::size_t>(y.cols()));
      for (int j = 0; j < y.cols(); ++j)
        gx(i, j) += gy(i, j) - std::exp(y(i, j)) * total;
    }
  };
  return n;
}

Node Tape::layer_norm(Node x, Node gain, Node bias, double eps) {
  const int d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d)
    throw InputError("layer_norm: gain/bias must be 1 x cols(x)");
  Matrix out(x.rows(), d);
  Matrix xhat(x.rows(), d);
  std::vector<double> inv_std(static_cast<std::size_t>(x.rows()));
  for (int i = 0; i < x.rows(); ++i) {
    const double* in = x.value().row(i);
    const double mean = kernels::sum(in, static_cast<std::size_t>(d)) / d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(i)] = inv;
    for (int j = 0; j < d; ++j) {
      xhat(i, j) = (in[j] - mean) * inv;
      out(i, j) = gain.value()(0, j) * xhat(i, j) + bias.value()(0, j);
    }
  }
  const int xid = x.id, gid = gain.id, bid = bias.id;
  auto xhat_p = std::make_shared<Matrix>(std::move(xhat));
  auto inv_p = std::make_shared<std::vector<double>>(std::move(inv_std));
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, gid, bid, self, xhat_p, inv_p](Tape& t) {
    const Matrix& gy = t.grad(self);
    const Matrix& g = t.value(gid);
    Matrix& gx = t.grad(xid);
    Matrix& gg = t.grad(gid);
    Matrix& gb = t.grad(bid);
    const int d = gy.cols();
    for (int i = 0; i < gy.rows(); ++i) {
      const double inv = (*inv_p)[static_cast<std::size_t>(i)];
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int j = 0; j < d; ++j) {
        const double dxhat = gy(i, j) * g(0, j);
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * (*xhat_p)(i, j);
        gg(0, j) += gy(i, j) * (*xhat_p)(i, j);
        gb(0, j) += gy(i, j);
      }
      for (int j = 0; j < d; ++j) {
        const double dxhat = gy(i, j) * g(0, j);
        gx(i, j) += inv * (dxhat - (sum_dxhat + (*xhat_p)(i, j) * sum_dxhat_xhat) / d);
      }
    }
  };
  return n;
}

Node Tape::concat_rows(std::span<const Node> parts) {
  if (parts.empty()) throw InputError("concat_rows: empty input");
  const int cols = parts[0].cols();
  int rows = 0;
  for (const Node& p : parts) {
    if (p.cols() != cols) throw InputError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, int>> layout;  // (id, first row in out)
  int r = 0;
  for (const Node& p : parts) {
    for (int i = 0; i < p.rows(); ++i)
      std::memcpy(out.row(r + i), p.value().row(i), sizeof(double) * static_cast<std::size_t>(cols));
    layout.emplace_back(p.id, r);
    r += p.rows();
  }
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [layout, self](Tape& t) {
    const Matrix& gy = t.grad(self);
    for (const auto& [id, first] : layout) {
      Matrix& gp = t.grad(id);
      for (int i = 0; i < gp.rows(); ++i)
        kernels::add(gy.row(first + i), gp.row(i), static_cast<std::size_t>(gp.cols()));
    }
  };
  return n;
}

Node Tape::concat_cols(std::span<const Node> parts) {
  if (parts.empty()) throw InputError("concat_cols: empty input");
  const int rows = parts[0].rows();
  int cols = 0;
  for (const Node& p : parts) {
    if (p.rows() != rows) throw InputError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, int>> layout;  // (id, first col in out)
  int c = 0;
  for (const Node& p : parts) {
    for (int i = 0; i < rows; ++i)
      std::memcpy(out.row(i) + c, p.value().row(i), sizeof(double) * static_cast<std::size_t>(p.cols()));
    layout.emplace_back(p.id, c);
    c += p.cols();
  }
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [layout, self](Tape& t) {
    const Matrix& gy = t.grad(self);
    for (const auto& [id, first] : layout) {
      Matrix& gp = t.grad(id);
      for (int i = 0; i < gp.rows(); ++i)
        for (int j = 0; j < gp.cols(); ++j) gp(i, j) += gy(i, first + j);
    }
  };
  return n;
}

Node Tape::slice_rows(Node x, int r0, int r1) {
  if (r0 < 0 || r1 > x.rows() || r0 >= r1) throw InputError("slice_rows: bad range");
  Matrix out(r1 - r0, x.cols());
  for (int i = r0; i < r1; ++i)
    std::memcpy(out.row(i - r0), x.value().row(i), sizeof(double) * static_cast<std::size_t>(x.cols()));
  const int xid = x.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, r0, self](Tape& t) {
    const Matrix& gy = t.grad(self);
    Matrix& gx = t.grad(xid);
    for (int i = 0; i < gy.rows(); ++i)
      kernels::add(gy.row(i), gx.row(r0 + i), static_cast<std::size_t>(gy.cols()));
  };
  return n;
}

Node Tape::embed(Node table, std::span<const int> ids) {
  Matrix out(static_cast<int>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw InputError("embed: id out of range");
    std::memcpy(out.row(static_cast<int>(i)), table.value().row(ids[i]),
                sizeof(double) * static_cast<std::size_t>(table.cols()));
  }
  const int tid = table.id;
  std::vector<int> ids_copy(ids.begin(), ids.end());
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [tid, ids_copy, self](Tape& t) {
    const Matrix& gy = t.grad(self);
    Matrix& gt = t.grad(tid);
    for (std::size_t i = 0; i < ids_copy.size(); ++i)
      kernels::add(gy.row(static_cast<int>(i)), gt.row(ids_copy[i]),
                   static_cast<std::size_t>(gy.cols()));
  };
  return n;
}

Node Tape::softmax_xent(Node logits, std::span<const int> targets) {
  const int n_rows = logits.rows();
  const int n_cols = logits.cols();
  if (static_cast<int>(targets.size()) != n_rows)
    throw InputError("softmax_xent: one target per row required");
  Matrix probs(n_rows, n_cols);
  double loss = 0.0;
  for (int i = 0; i < n_rows; ++i) {
    const int tgt = targets[static_cast<std::size_t>(i)];
    if (tgt < 0 || tgt >= n_cols) throw InputError("softmax_xent: target out of range");
    const double* in = logits.value().row(i);
    double* p = probs.row(i);
    const double m = kernels::max_value(in, static_cast<std::size_t>(n_cols));
    double z = 0.0;
    for (int j = 0; j < n_cols; ++j) {
      p[j] = std::exp(in[j] - m);
      z += p[j];
    }
    const double inv = 1.0 / z;
    for (int j = 0; j < n_cols; ++j) p[j] *= inv;
    loss -= std::log(std::max(p[tgt], 1e-300));
  }
  loss /= n_rows;

  const int lid = logits.id;
  std::vector<int> tgt_copy(targets.begin(), targets.end());
  auto probs_p = std::make_shared<Matrix>(std::move(probs));
  Matrix out(1, 1);
  out(0, 0) = loss;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [lid, tgt_copy, probs_p, self](Tape& t) {
    const double g = t.grad(self)(0, 0) / probs_p->rows();
    Matrix& gl = t.grad(lid);
    for (int i = 0; i < probs_p->rows(); ++i) {
      kernels::axpy(g, probs_p->row(i), gl.row(i), static_cast<std::size_t>(probs_p->cols()));
      gl(i, tgt_copy[static_cast<std::size_t>(i)]) -= g;
    }
  };
  return n;
}

Node Tape::pick_nll(Node x, std::span<const int> targets) {
  const int n_rows = x.rows();
  if (static_cast<int>(targets.size()) != n_rows)
    throw InputError("pick_nll: one target per row required");
  double loss = 0.0;
  for (int i = 0; i < n_rows; ++i) {
    const int tgt = targets[static_cast<std::size_t>(i)];
    if (tgt < 0 || tgt >= x.cols()) throw InputError("pick_nll: target out of range");
    loss -= x.value()(i, tgt);
  }
  loss /= n_rows;
  const int xid = x.id;
  std::vector<int> tgt_copy(targets.begin(), targets.end());
  Matrix out(1, 1);
  out(0, 0) = loss;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, tgt_copy, self](Tape& t) {
    const double g = t.grad(self)(0, 0) / static_cast<double>(tgt_copy.size());
    Matrix& gx = t.grad(xid);
    for (std::size_t i = 0; i < tgt_copy.size(); ++i)
      gx(static_cast<int>(i), tgt_copy[i]) -= g;
  };
  return n;
}

Node Tape::ctc_nll(Node log_probs, std::span<const int> y, int blank) {
  auto [loss, grad] = ctc::ctc_loss_grad(log_probs.value(), y, blank);
  const int lid = log_probs.id;
  auto grad_p = std::make_shared<Matrix>(std::move(grad));
  Matrix out(1, 1);
  out(0, 0) = loss;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [lid, grad_p, self](Tape& t) {
    kernels::axpy(t.grad(self)(0, 0), grad_p->data(), t.grad(lid).data(), grad_p->size());
  };
  return n;
}

Node Tape::sum_all(Node x) {
  Matrix out(1, 1);
  out(0, 0) = kernels::sum(x.value().data(), x.value().size());
  const int xid = x.id;
  Node n = push(std::move(out), nullptr);
  const int self = n.id;
  recs_[static_cast<std::size_t>(self)].back = [xid, self](Tape& t) {
    const double g = t.grad(self)(0, 0);
    Matrix& gx = t.grad(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g;
  };
  return n;
}

void Tape::backward(Node loss) {
  if (loss.tape != this) throw InputError("backward: node from another tape");
  const Matrix& lv = value(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) throw InputError("backward: loss must be scalar");
  for (auto& rec : recs_) rec.grad.zero();
  recs_[static_cast<std::size_t>(loss.id)].grad(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    auto& rec = recs_[static_cast<std::size_t>(id)];
    if (rec.back) rec.back(*this);
  }
  for (auto& rec : recs_) {
    if (rec.origin) add_into(rec.origin->grad, rec.grad);
  }
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(ParamStore& params) {
  const auto ptrs = params.all();
  step(ptrs);
}

void Adam::step(std::span<Param* const> params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.data()[i];
      double& m = p->moment1.data()[i];
      double& v = p->moment2.data()[i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p->value.data()[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Finite differences

FiniteDiffReport finite_diff_check(const std::function<Node(Tape&)>& build,
                                   std::span<Param* const> params, double h, double tol) {
  auto eval = [&build]() {
    Tape tape;
    return build(tape).scalar();
  };
  const double l1 = eval();
  const double l2 = eval();
  if (l1 != l2) throw Error("finite_diff_check: forward pass is non-deterministic");

  // Analytic gradients.
  for (Param* p : params) p->grad.zero();
  {
    Tape tape;
    Node loss = build(tape);
    tape.backward(loss);
  }
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  FiniteDiffReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    double worst = 0.0;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + h;
      const double up = eval();
      p->value.data()[i] = saved - h;
      const double down = eval();
      p->value.data()[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[pi].data()[i];
      const double denom = std::max({std::abs(an), std::abs(fd), 1e-6});
      const double rel = std::abs(an - fd) / denom;
      worst = std::max(worst, rel);
    }
    report.entries.push_back({p->name, worst});
    report.worst = std::max(report.worst, worst);
    if (worst >= tol) report.pass = false;
  }
  return report;
}

}  // namespace sarstream::grad
