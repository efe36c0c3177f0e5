#pragma once

#include <string>
#include <vector>

#include "smrl/params.hpp"
#include "smrl/tensor.hpp"

namespace smrl {

// ---- forward kernels (shared by tape ops and tape-free inference) ----

// y = W.x + b
Tensor dense_forward(const Tensor& w, const Tensor& b, const Tensor& x);

// C = A.B for 2-D tensors (vectors treated as columns)
Tensor matmul(const Tensor& a, const Tensor& b);

// vectorized in-place nonlinearities; every forward path uses these so the
// tape and the inference code produce identical values
void vec_sigmoid(double* p, std::size_t n);
void vec_tanh(double* p, std::size_t n);
void vec_exp(double* p, std::size_t n);

struct GruParams {
  const Tensor* wz;
  const Tensor* uz;
  const Tensor* bz;
  const Tensor* wr;
  const Tensor* ur;
  const Tensor* br;
  const Tensor* wh;
  const Tensor* uh;
  const Tensor* bh;
};

// Standard GRU cell:
//   z = sigmoid(Wz.x + Uz.h + bz)
//   r = sigmoid(Wr.x + Ur.h + br)
//   c = tanh(Wh.x + Uh.(r*h) + bh)
//   h' = h + z*(c - h)
// x and h may be single columns or batches of columns.
Tensor gru_cell_forward(const GruParams& p, const Tensor& x, const Tensor& h);

// ---- reverse-mode tape ----

enum class Op {
  kConst,
  kParam,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kAddBias,    // [m x n] + [m x 1] broadcast across columns
  kMulRowVec,  // [m x n] rows scaled by [m x 1]
  kAddScalar,  // x + s, s a [1 x 1] node broadcast everywhere
  kAffine,     // alpha*x + beta
  kSigmoid,
  kTanh,
  kExp,
  kClamp,  // clamp to [alpha, beta]; gradient zero outside
  kMin,    // elementwise min(a, b)
  kMeanAll,
  kSumRows,   // [m x n] -> [1 x n]
  kGruCell,   // fused cell; gates saved for the hand-derived backward
};

// Wengert tape over tensor-valued nodes. Values are computed eagerly as
// nodes are appended; backward() runs the reverse sweep and accumulates
// parameter gradients into the bound ParamStore (additively, so repeated
// backward calls sum unless zero_grads() is used in between).
class Tape {
 public:
  explicit Tape(ParamStore* store = nullptr) : store_(store) {}

  int constant(Tensor value);
  int param(const std::string& name);

  int matmul(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int add_bias(int a, int bias);
  int mul_rowvec(int a, int rowvec);
  int add_scalar(int a, int scalar_node);
  int affine(int a, double alpha, double beta);
  int sigmoid(int a);
  int tanh_(int a);
  int exp_(int a);
  int clamp(int a, double lo, double hi);
  int min_(int a, int b);
  int mean_all(int a);
  int sum_rows(int a);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  double scalar(int id) const;

  // Gradient of `node` seeded with `out_grad`; the scalar overload seeds 1.
  void backward(int node, const Tensor& out_grad);
  void backward(int loss_node);

  // Gradient w.r.t. a non-parameter node from the latest backward sweep.
  const Tensor& node_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::size_t size() const { return nodes_.size(); }

  struct GruNodes {
    int wz, uz, bz, wr, ur, br, wh, uh, bh;
  };
  GruNodes gru_params(const std::string& prefix);
  int gru_cell(const GruNodes& p, int x, int h);

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double alpha = 0.0;
    double beta = 0.0;
    Tensor value;
    Tensor grad;
    std::string param_name;
    std::vector<int> extra;   // kGruCell: the 9 parameter node ids
    std::vector<Tensor> aux;  // kGruCell: saved z, r, c, r*h
  };

  int push(Node n);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  ParamStore* store_;
  std::vector<Node> nodes_;
};

}  // namespace smrl
