#include "smrl/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace smrl {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;
using EArr = Eigen::Map<Eigen::ArrayXd>;
using ECArr = Eigen::Map<const Eigen::ArrayXd>;

namespace {

ECMap cmap(const Tensor& t) {
  return ECMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
               static_cast<Eigen::Index>(t.cols()));
}

EMap mmap(Tensor& t) {
  return EMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

EArr arr(Tensor& t) { return EArr(t.data.data(), static_cast<Eigen::Index>(t.numel())); }

ECArr carr(const Tensor& t) {
  return ECArr(t.data.data(), static_cast<Eigen::Index>(t.numel()));
}

}  // namespace

void vec_exp(double* p, std::size_t n) {
  EArr a(p, static_cast<Eigen::Index>(n));
  a = a.exp();
}

void vec_sigmoid(double* p, std::size_t n) {
  EArr a(p, static_cast<Eigen::Index>(n));
  a = 1.0 / (1.0 + (-a).exp());
}

void vec_tanh(double* p, std::size_t n) {
  // tanh via the vectorized exp; saturates cleanly at +-1
  EArr a(p, static_cast<Eigen::Index>(n));
  a = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dims " + shape_str(a) + " vs " + shape_str(b));
  Tensor c = Tensor::zeros({a.rows(), b.cols()});
  mmap(c).noalias() = cmap(a) * cmap(b);
  return c;
}

Tensor dense_forward(const Tensor& w, const Tensor& b, const Tensor& x) {
  require(w.cols() == x.rows(), "dense_forward: W" + shape_str(w) + " vs x" + shape_str(x));
  require(b.rows() == w.rows(), "dense_forward: bias " + shape_str(b) + " vs W" + shape_str(w));
  Tensor y = matmul(w, x);
  mmap(y).colwise() += cmap(b).col(0);
  return y;
}

Tensor gru_cell_forward(const GruParams& p, const Tensor& x, const Tensor& h) {
  require(p.uz->cols() == h.rows(), "gru_cell_forward: hidden dim mismatch");
  require(p.wz->cols() == x.rows(), "gru_cell_forward: input dim mismatch");
  require(x.cols() == h.cols(), "gru_cell_forward: batch mismatch");
  Tensor z = dense_forward(*p.wz, *p.bz, x);
  mmap(z).noalias() += cmap(*p.uz) * cmap(h);
  vec_sigmoid(z.data.data(), z.numel());

  Tensor r = dense_forward(*p.wr, *p.br, x);
  mmap(r).noalias() += cmap(*p.ur) * cmap(h);
  vec_sigmoid(r.data.data(), r.numel());

  Tensor rh = h;
  arr(rh) *= carr(r);

  Tensor c = dense_forward(*p.wh, *p.bh, x);
  mmap(c).noalias() += cmap(*p.uh) * cmap(rh);
  vec_tanh(c.data.data(), c.numel());

  // h' = h + z*(c - h), the convex mix (1-z)*h + z*c
  Tensor out = h;
  arr(out) += carr(z) * (carr(c) - carr(h));
  return out;
}

// ---- Tape ----

int Tape::push(Node n) {
  if (nodes_.empty()) nodes_.reserve(64);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size() - 1);
}

int Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(value);
  return push(std::move(n));
}

int Tape::param(const std::string& name) {
  require(store_ != nullptr, "tape has no parameter store bound");
  Node n;
  n.op = Op::kParam;
  n.param_name = name;
  n.value = store_->value(name);
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.value = smrl::matmul(value(a), value(b));
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  require(value(a).same_shape(value(b)), "add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = value(a);
  arr(n.value) += carr(value(b));
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  require(value(a).same_shape(value(b)), "sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = value(a);
  arr(n.value) -= carr(value(b));
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  require(value(a).same_shape(value(b)), "mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = value(a);
  arr(n.value) *= carr(value(b));
  return push(std::move(n));
}

int Tape::add_bias(int a, int bias) {
  require(value(bias).rows() == value(a).rows() && value(bias).cols() == 1,
          "add_bias: bias must be [rows x 1]");
  Node n;
  n.op = Op::kAddBias;
  n.a = a;
  n.b = bias;
  n.value = value(a);
  mmap(n.value).colwise() += cmap(value(bias)).col(0);
  return push(std::move(n));
}

int Tape::mul_rowvec(int a, int rowvec) {
  require(value(rowvec).rows() == value(a).rows() && value(rowvec).cols() == 1,
          "mul_rowvec: scale must be [rows x 1]");
  Node n;
  n.op = Op::kMulRowVec;
  n.a = a;
  n.b = rowvec;
  n.value = value(a);
  mmap(n.value).array().colwise() *= cmap(value(rowvec)).col(0).array();
  return push(std::move(n));
}

int Tape::add_scalar(int a, int scalar_node) {
  require(value(scalar_node).numel() == 1, "add_scalar: operand must be [1 x 1]");
  Node n;
  n.op = Op::kAddScalar;
  n.a = a;
  n.b = scalar_node;
  n.value = value(a);
  arr(n.value) += value(scalar_node)[0];
  return push(std::move(n));
}

int Tape::affine(int a, double alpha, double beta) {
  Node n;
  n.op = Op::kAffine;
  n.a = a;
  n.alpha = alpha;
  n.beta = beta;
  n.value = value(a);
  arr(n.value) = alpha * carr(n.value) + beta;
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.value = value(a);
  vec_sigmoid(n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

int Tape::tanh_(int a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = value(a);
  vec_tanh(n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

int Tape::exp_(int a) {
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.value = value(a);
  vec_exp(n.value.data.data(), n.value.numel());
  return push(std::move(n));
}

int Tape::clamp(int a, double lo, double hi) {
  Node n;
  n.op = Op::kClamp;
  n.a = a;
  n.alpha = lo;
  n.beta = hi;
  n.value = value(a);
  arr(n.value) = carr(n.value).max(lo).min(hi);
  return push(std::move(n));
}

int Tape::min_(int a, int b) {
  require(value(a).same_shape(value(b)), "min: shape mismatch");
  Node n;
  n.op = Op::kMin;
  n.a = a;
  n.b = b;
  n.value = value(a);
  arr(n.value) = carr(n.value).min(carr(value(b)));
  return push(std::move(n));
}

int Tape::mean_all(int a) {
  Node n;
  n.op = Op::kMeanAll;
  n.a = a;
  n.value = Tensor::zeros({1, 1});
  n.value[0] = carr(value(a)).sum() / static_cast<double>(value(a).numel());
  return push(std::move(n));
}

int Tape::sum_rows(int a) {
  Node n;
  n.op = Op::kSumRows;
  n.a = a;
  const Tensor& va = value(a);
  n.value = Tensor::zeros({1, va.cols()});
  mmap(n.value) = cmap(va).colwise().sum();
  return push(std::move(n));
}

double Tape::scalar(int id) const {
  require(value(id).numel() == 1, "scalar: node is not [1 x 1]");
  return value(id)[0];
}

Tape::GruNodes Tape::gru_params(const std::string& prefix) {
  GruNodes g;
  g.wz = param(prefix + ".Wz");
  g.uz = param(prefix + ".Uz");
  g.bz = param(prefix + ".bz");
  g.wr = param(prefix + ".Wr");
  g.ur = param(prefix + ".Ur");
  g.br = param(prefix + ".br");
  g.wh = param(prefix + ".Wh");
  g.uh = param(prefix + ".Uh");
  g.bh = param(prefix + ".bh");
  return g;
}

int Tape::gru_cell(const GruNodes& p, int x, int h) {
  Node n;
  n.op = Op::kGruCell;
  n.a = x;
  n.b = h;
  n.extra = {p.wz, p.uz, p.bz, p.wr, p.ur, p.br, p.wh, p.uh, p.bh};
  GruParams gp{&value(p.wz), &value(p.uz), &value(p.bz), &value(p.wr), &value(p.ur),
               &value(p.br), &value(p.wh), &value(p.uh), &value(p.bh)};
  const Tensor& xv = value(x);
  const Tensor& hv = value(h);
  require(gp.uz->cols() == hv.rows(), "gru_cell: hidden dim mismatch");
  require(gp.wz->cols() == xv.rows(), "gru_cell: input dim mismatch");

  Tensor z = dense_forward(*gp.wz, *gp.bz, xv);
  mmap(z).noalias() += cmap(*gp.uz) * cmap(hv);
  vec_sigmoid(z.data.data(), z.numel());
  Tensor r = dense_forward(*gp.wr, *gp.br, xv);
  mmap(r).noalias() += cmap(*gp.ur) * cmap(hv);
  vec_sigmoid(r.data.data(), r.numel());
  Tensor rh = hv;
  arr(rh) *= carr(r);
  Tensor c = dense_forward(*gp.wh, *gp.bh, xv);
  mmap(c).noalias() += cmap(*gp.uh) * cmap(rh);
  vec_tanh(c.data.data(), c.numel());

  n.value = hv;
  arr(n.value) += carr(z) * (carr(c) - carr(hv));
  n.aux.reserve(4);
  n.aux.push_back(std::move(z));
  n.aux.push_back(std::move(r));
  n.aux.push_back(std::move(c));
  n.aux.push_back(std::move(rh));
  return push(std::move(n));
}

void Tape::backward(int loss_node) {
  require(value(loss_node).numel() == 1, "backward: loss node must be scalar");
  Tensor seed = Tensor::zeros({1, 1});
  seed[0] = 1.0;
  backward(loss_node, seed);
}

void Tape::backward(int root, const Tensor& out_grad) {
  require(!nodes_.empty(), "backward without a recorded forward pass");
  require(root >= 0 && root < static_cast<int>(nodes_.size()), "backward: bad node id");
  require(out_grad.same_shape(value(root)), "backward: seed gradient shape mismatch");

  // per-sweep node gradients start at zero; buffers are reused across sweeps
  for (Node& n : nodes_) {
    if (n.grad.data.size() == n.value.data.size()) {
      std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
      n.grad.shape = n.value.shape;
    } else {
      n.grad = Tensor::zeros(n.value.shape);
    }
  }
  node(root).grad = out_grad;

  for (int id = root; id >= 0; --id) {
    Node& n = node(id);
    const Tensor& g = n.grad;

    switch (n.op) {
      case Op::kConst:
        break;
      case Op::kParam: {
        Tensor& pg = store_->grad(n.param_name);
        arr(pg) += carr(g);
        break;
      }
      case Op::kMatMul: {
        // dA += G.B^T ; dB += A^T.G
        mmap(node(n.a).grad).noalias() += cmap(g) * cmap(value(n.b)).transpose();
        mmap(node(n.b).grad).noalias() += cmap(value(n.a)).transpose() * cmap(g);
        break;
      }
      case Op::kAdd:
        arr(node(n.a).grad) += carr(g);
        arr(node(n.b).grad) += carr(g);
        break;
      case Op::kSub:
        arr(node(n.a).grad) += carr(g);
        arr(node(n.b).grad) -= carr(g);
        break;
      case Op::kMul:
        arr(node(n.a).grad) += carr(g) * carr(value(n.b));
        arr(node(n.b).grad) += carr(g) * carr(value(n.a));
        break;
      case Op::kAddBias:
        arr(node(n.a).grad) += carr(g);
        mmap(node(n.b).grad).col(0) += cmap(g).rowwise().sum();
        break;
      case Op::kMulRowVec: {
        mmap(node(n.a).grad).array() +=
            cmap(g).array().colwise() * cmap(value(n.b)).col(0).array();
        mmap(node(n.b).grad).col(0) +=
            (cmap(g).array() * cmap(value(n.a)).array()).rowwise().sum().matrix();
        break;
      }
      case Op::kAddScalar: {
        arr(node(n.a).grad) += carr(g);
        node(n.b).grad[0] += carr(g).sum();
        break;
      }
      case Op::kAffine:
        arr(node(n.a).grad) += n.alpha * carr(g);
        break;
      case Op::kSigmoid:
        arr(node(n.a).grad) += carr(g) * carr(n.value) * (1.0 - carr(n.value));
        break;
      case Op::kTanh:
        arr(node(n.a).grad) += carr(g) * (1.0 - carr(n.value) * carr(n.value));
        break;
      case Op::kExp:
        arr(node(n.a).grad) += carr(g) * carr(n.value);
        break;
      case Op::kClamp: {
        const Tensor& va = value(n.a);
        arr(node(n.a).grad) +=
            carr(g) * (carr(va) >= n.alpha && carr(va) <= n.beta).cast<double>();
        break;
      }
      case Op::kMin: {
        // route to the smaller side, ties to the first operand
        const Tensor& va = value(n.a);
        const Tensor& vb = value(n.b);
        Eigen::ArrayXd take_a = (carr(va) <= carr(vb)).cast<double>();
        arr(node(n.a).grad) += carr(g) * take_a;
        arr(node(n.b).grad) += carr(g) * (1.0 - take_a);
        break;
      }
      case Op::kMeanAll:
        arr(node(n.a).grad) += g[0] / static_cast<double>(value(n.a).numel());
        break;
      case Op::kSumRows: {
        mmap(node(n.a).grad).rowwise() += cmap(g).row(0);
        break;
      }
      case Op::kGruCell: {
        const Tensor& x = value(n.a);
        const Tensor& h = value(n.b);
        const Tensor& z = n.aux[0];
        const Tensor& r = n.aux[1];
        const Tensor& c = n.aux[2];
        const Tensor& rh = n.aux[3];
        Tensor& dx = node(n.a).grad;
        Tensor& dh = node(n.b).grad;
        const Tensor& wz = value(n.extra[0]);
        const Tensor& uz = value(n.extra[1]);
        const Tensor& wr = value(n.extra[3]);
        const Tensor& ur = value(n.extra[4]);
        const Tensor& wh = value(n.extra[6]);
        const Tensor& uh = value(n.extra[7]);

        // out = h + z*(c - h)
        Tensor pre_c = Tensor::zeros(c.shape);
        arr(pre_c) = carr(g) * carr(z) * (1.0 - carr(c) * carr(c));
        Tensor pre_z = Tensor::zeros(z.shape);
        arr(pre_z) = carr(g) * (carr(c) - carr(h)) * carr(z) * (1.0 - carr(z));
        arr(dh) += carr(g) * (1.0 - carr(z));

        // candidate branch
        mmap(node(n.extra[6]).grad).noalias() += cmap(pre_c) * cmap(x).transpose();
        mmap(node(n.extra[7]).grad).noalias() += cmap(pre_c) * cmap(rh).transpose();
        mmap(node(n.extra[8]).grad).col(0) += cmap(pre_c).rowwise().sum();
        Tensor drh = Tensor::zeros(rh.shape);
        mmap(drh).noalias() = cmap(uh).transpose() * cmap(pre_c);
        mmap(dx).noalias() += cmap(wh).transpose() * cmap(pre_c);
        arr(dh) += carr(drh) * carr(r);
        Tensor pre_r = Tensor::zeros(r.shape);
        arr(pre_r) = carr(drh) * carr(h) * carr(r) * (1.0 - carr(r));

        // update gate
        mmap(node(n.extra[0]).grad).noalias() += cmap(pre_z) * cmap(x).transpose();
        mmap(node(n.extra[1]).grad).noalias() += cmap(pre_z) * cmap(h).transpose();
        mmap(node(n.extra[2]).grad).col(0) += cmap(pre_z).rowwise().sum();
        mmap(dx).noalias() += cmap(wz).transpose() * cmap(pre_z);
        mmap(dh).noalias() += cmap(uz).transpose() * cmap(pre_z);

        // reset gate
        mmap(node(n.extra[3]).grad).noalias() += cmap(pre_r) * cmap(x).transpose();
        mmap(node(n.extra[4]).grad).noalias() += cmap(pre_r) * cmap(h).transpose();
        mmap(node(n.extra[5]).grad).col(0) += cmap(pre_r).rowwise().sum();
        mmap(dx).noalias() += cmap(wr).transpose() * cmap(pre_r);
        mmap(dh).noalias() += cmap(ur).transpose() * cmap(pre_r);
        break;
      }
    }
  }
}

}  // namespace smrl
