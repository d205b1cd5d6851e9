// SPDX-License-Identifier: Apache-2.0
#include "fnndg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fnndg/errors.hpp"

namespace fnndg {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                     b.value().shape_string());
  }
}

// out += a * b^T  (a: n x m, b: k x m, out: n x k)
void accumulate_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += a(i, p) * b(j, p);
      out(i, j) += s;
    }
  }
}

// out += a^T * b  (a: n x k, b: n x m, out: k x m)
void accumulate_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double v = a(r, i);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += v * b(r, j);
    }
  }
}

template <typename F>
Matrix map(const Matrix& x, F&& f) {
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = f(x.data[i]);
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.rows) {
    throw ShapeError("matmul: inner dimensions disagree " + av.shape_string() + " * " +
                     bv.shape_string());
  }
  Matrix out(av.rows, bv.cols);
  for (std::size_t i = 0; i < av.rows; ++i) {
    for (std::size_t p = 0; p < av.cols; ++p) {
      const double v = av(i, p);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < bv.cols; ++j) out(i, j) += v * bv(p, j);
    }
  }
  auto a_val = a.shared_value();
  auto b_val = b.shared_value();
  return make_result(std::move(out), {a, b},
                     [a_val, b_val](const Matrix& g, std::span<Matrix* const> grads) {
                       if (grads[0]) accumulate_a_bt(g, *b_val, *grads[0]);
                       if (grads[1]) accumulate_at_b(*a_val, g, *grads[1]);
                     });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  if (bv.rows != 1 || bv.cols != xv.cols) {
    throw ShapeError("add_bias: bias " + bv.shape_string() + " does not match " +
                     xv.shape_string());
  }
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += bv.data[c];
  }
  return make_result(std::move(out), {x, bias},
                     [](const Matrix& g, std::span<Matrix* const> grads) {
                       if (grads[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) grads[0]->data[i] += g.data[i];
                       }
                       if (grads[1]) {
                         for (std::size_t r = 0; r < g.rows; ++r) {
                           for (std::size_t c = 0; c < g.cols; ++c) grads[1]->data[c] += g(r, c);
                         }
                       }
                     });
}

Tensor relu(const Tensor& x) {
  auto x_val = x.shared_value();
  return make_result(map(*x_val, [](double v) { return v > 0.0 ? v : 0.0; }), {x},
                     [x_val](const Matrix& g, std::span<Matrix* const> grads) {
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (x_val->data[i] > 0.0) grads[0]->data[i] += g.data[i];
                       }
                     });
}

Tensor row_l2_norm(const Tensor& x) {
  const Matrix& xv = x.value();
  auto norms = std::make_shared<Matrix>(xv.rows, 1);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    double s = 0.0;
    for (double v : xv.row(r)) s += v * v;
    norms->data[r] = std::sqrt(s);
  }
  auto x_val = x.shared_value();
  Matrix out = *norms;
  return make_result(std::move(out), {x},
                     [x_val, norms](const Matrix& g, std::span<Matrix* const> grads) {
                       Matrix& dx = *grads[0];
                       for (std::size_t r = 0; r < x_val->rows; ++r) {
                         const double n = norms->data[r];
                         if (n < kNormEpsilon) continue;
                         const double k = g.data[r] / n;
                         for (std::size_t c = 0; c < x_val->cols; ++c) dx(r, c) += k * (*x_val)(r, c);
                       }
                     });
}

Tensor softmax_rows(const Tensor& logits) {
  const Matrix& z = logits.value();
  auto probs = std::make_shared<Matrix>(z.rows, z.cols);
  for (std::size_t r = 0; r < z.rows; ++r) {
    auto in = z.row(r);
    auto out = probs->row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double denom = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      denom += out[c];
    }
    for (double& v : out) v /= denom;
  }
  Matrix out = *probs;
  return make_result(std::move(out), {logits},
                     [probs](const Matrix& g, std::span<Matrix* const> grads) {
                       Matrix& dz = *grads[0];
                       for (std::size_t r = 0; r < g.rows; ++r) {
                         auto p = probs->row(r);
                         auto gr = g.row(r);
                         double dot = 0.0;
                         for (std::size_t c = 0; c < p.size(); ++c) dot += gr[c] * p[c];
                         for (std::size_t c = 0; c < p.size(); ++c) dz(r, c) += p[c] * (gr[c] - dot);
                       }
                     });
}

Tensor detach(const Tensor& x) {
  return Tensor::constant(x.value());
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  return make_result(std::move(out), {a, b},
                     [](const Matrix& g, std::span<Matrix* const> grads) {
                       for (Matrix* d : grads) {
                         if (!d) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) d->data[i] += g.data[i];
                       }
                     });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  require_same_shape("subtract", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
  return make_result(std::move(out), {a, b},
                     [](const Matrix& g, std::span<Matrix* const> grads) {
                       if (grads[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) grads[0]->data[i] += g.data[i];
                       }
                       if (grads[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i) grads[1]->data[i] -= g.data[i];
                       }
                     });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  require_same_shape("multiply", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
  auto a_val = a.shared_value();
  auto b_val = b.shared_value();
  return make_result(std::move(out), {a, b},
                     [a_val, b_val](const Matrix& g, std::span<Matrix* const> grads) {
                       if (grads[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           grads[0]->data[i] += g.data[i] * b_val->data[i];
                         }
                       }
                       if (grads[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           grads[1]->data[i] += g.data[i] * a_val->data[i];
                         }
                       }
                     });
}

Tensor scale(const Tensor& x, double factor) {
  return make_result(map(x.value(), [factor](double v) { return v * factor; }), {x},
                     [factor](const Matrix& g, std::span<Matrix* const> grads) {
                       for (std::size_t i = 0; i < g.size(); ++i) grads[0]->data[i] += factor * g.data[i];
                     });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return make_result(map(x.value(), [offset](double v) { return v + offset; }), {x},
                     [](const Matrix& g, std::span<Matrix* const> grads) {
                       for (std::size_t i = 0; i < g.size(); ++i) grads[0]->data[i] += g.data[i];
                     });
}

Tensor square(const Tensor& x) {
  auto x_val = x.shared_value();
  return make_result(map(*x_val, [](double v) { return v * v; }), {x},
                     [x_val](const Matrix& g, std::span<Matrix* const> grads) {
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         grads[0]->data[i] += 2.0 * x_val->data[i] * g.data[i];
                       }
                     });
}

Tensor clamped_log(const Tensor& x) {
  auto x_val = x.shared_value();
  return make_result(map(*x_val, [](double v) { return std::log(std::max(v, kLogClamp)); }), {x},
                     [x_val](const Matrix& g, std::span<Matrix* const> grads) {
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double v = x_val->data[i];
                         if (v > kLogClamp) grads[0]->data[i] += g.data[i] / v;
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  return make_result(Matrix(1, 1, s), {x}, [](const Matrix& g, std::span<Matrix* const> grads) {
    for (double& d : grads[0]->data) d += g.data[0];
  });
}

Tensor mean(const Tensor& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  double s = 0.0;
  for (double v : x.value().data) s += v;
  const double inv = 1.0 / static_cast<double>(n);
  return make_result(Matrix(1, 1, s * inv), {x},
                     [inv](const Matrix& g, std::span<Matrix* const> grads) {
                       for (double& d : grads[0]->data) d += g.data[0] * inv;
                     });
}

Tensor mean_rows(const Tensor& x) {
  const Matrix& xv = x.value();
  if (xv.rows == 0) throw ShapeError("mean_rows of a tensor with no rows");
  const double inv = 1.0 / static_cast<double>(xv.rows);
  Matrix out(1, xv.cols);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t c = 0; c < xv.cols; ++c) out.data[c] += xv(r, c);
  }
  for (double& v : out.data) v *= inv;
  return make_result(std::move(out), {x}, [inv](const Matrix& g, std::span<Matrix* const> grads) {
    Matrix& d = *grads[0];
    for (std::size_t r = 0; r < d.rows; ++r) {
      for (std::size_t c = 0; c < d.cols; ++c) d(r, c) += g.data[c] * inv;
    }
  });
}

}  // namespace fnndg
