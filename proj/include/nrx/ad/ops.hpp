// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The nrxsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrx/ad/tape.hpp"

namespace nrx::ad {

namespace detail {

[[noreturn]] inline void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

template <typename Scalar>
void same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
}

template <typename Scalar>
void accumulate(Tape<Scalar>& tape, int id, const typename Tensor<Scalar>::Array& g) {
  if (tape.requires_grad(id)) tape.grad_buffer(id).values() += g;
}

}  // namespace detail

/// Elementwise sum. \p b may also be a vector matching the last dimension of
/// \p a, in which case it is broadcast over all leading dimensions (bias add).
template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() == bv.shape()) {
    Tensor<Scalar> out(av.shape(), av.values() + bv.values());
    return a.tape().record("add", std::move(out), {a.id(), b.id()}, [](Tape<Scalar>& t, int self) {
      const auto& g = t.grad_buffer(self).values();
      detail::accumulate(t, t.inputs(self)[0], g);
      detail::accumulate(t, t.inputs(self)[1], g);
    });
  }
  if (bv.rank() == 1 && av.rank() >= 1 && bv.dim(0) == av.dim(-1)) {
    Tensor<Scalar> out = av;
    out.matrix().rowwise() += bv.values().matrix().transpose();
    return a.tape().record("add_bias", std::move(out), {a.id(), b.id()}, [](Tape<Scalar>& t, int self) {
      const auto& g = t.grad_buffer(self);
      const int ia = t.inputs(self)[0];
      const int ib = t.inputs(self)[1];
      detail::accumulate(t, ia, g.values());
      if (t.requires_grad(ib)) t.grad_buffer(ib).values() += g.matrix().colwise().sum().transpose().array();
    });
  }
  detail::shape_error("add", av.shape(), bv.shape());
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_tape(a, b);
  if (a.shape() != b.shape()) detail::shape_error("sub", a.shape(), b.shape());
  Tensor<Scalar> out(a.shape(), a.value().values() - b.value().values());
  return a.tape().record("sub", std::move(out), {a.id(), b.id()}, [](Tape<Scalar>& t, int self) {
    const auto& g = t.grad_buffer(self).values();
    detail::accumulate(t, t.inputs(self)[0], g);
    const int ib = t.inputs(self)[1];
    if (t.requires_grad(ib)) t.grad_buffer(ib).values() -= g;
  });
}

/// Elementwise (Hadamard) product.
template <typename Scalar>
Var<Scalar> multiply(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_tape(a, b);
  if (a.shape() != b.shape()) detail::shape_error("multiply", a.shape(), b.shape());
  Tensor<Scalar> out(a.shape(), a.value().values() * b.value().values());
  return a.tape().record("multiply", std::move(out), {a.id(), b.id()}, [](Tape<Scalar>& t, int self) {
    const auto& g = t.grad_buffer(self).values();
    const int ia = t.inputs(self)[0];
    const int ib = t.inputs(self)[1];
    if (t.requires_grad(ia)) t.grad_buffer(ia).values() += g * t.value(ib).values();
    if (t.requires_grad(ib)) t.grad_buffer(ib).values() += g * t.value(ia).values();
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar factor) {
  Tensor<Scalar> out(a.shape(), a.value().values() * factor);
  return a.tape().record("scale", std::move(out), {a.id()}, [factor](Tape<Scalar>& t, int self) {
    detail::accumulate<Scalar>(t, t.inputs(self)[0], t.grad_buffer(self).values() * factor);
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) { return multiply(a, b); }
template <typename Scalar>
Var<Scalar> operator*(Scalar c, const Var<Scalar>& a) { return scale(a, c); }

/// Contracts the last dimension of \p a with the first dimension of the
/// matrix \p b: [..., K] x [K, N] -> [..., N].
template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (bv.rank() != 2 || av.rank() < 1 || av.dim(-1) != bv.dim(0)) detail::shape_error("matmul", av.shape(), bv.shape());
  Shape shape = av.shape();
  shape.back() = bv.dim(1);
  Tensor<Scalar> out(shape);
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return a.tape().record("matmul", std::move(out), {a.id(), b.id()}, [](Tape<Scalar>& t, int self) {
    const auto& g = t.grad_buffer(self);
    const int ia = t.inputs(self)[0];
    const int ib = t.inputs(self)[1];
    if (t.requires_grad(ia)) t.grad_buffer(ia).matrix().noalias() += g.matrix() * t.value(ib).matrix().transpose();
    if (t.requires_grad(ib)) t.grad_buffer(ib).matrix().noalias() += t.value(ia).matrix().transpose() * g.matrix();
  });
}

namespace detail {

/// Gathers the same-padded receptive field of every output position into a
/// [N*H*W, kh*kw*C] matrix (ordering dy, dx, c to match the kernel layout).
template <typename Scalar>
Tensor<Scalar> im2col(const Tensor<Scalar>& x, std::int64_t kh, std::int64_t kw) {
  const auto n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const auto ph = kh / 2, pw = kw / 2;
  Tensor<Scalar> col({n * h * w, kh * kw * c});
  Scalar* dst = col.data();
  const Scalar* src = x.data();
  for (std::int64_t in = 0; in < n; ++in) {
    for (std::int64_t ih = 0; ih < h; ++ih) {
      for (std::int64_t iw = 0; iw < w; ++iw) {
        for (std::int64_t dy = 0; dy < kh; ++dy) {
          const auto sh = ih + dy - ph;
          for (std::int64_t dx = 0; dx < kw; ++dx, dst += c) {
            const auto sw = iw + dx - pw;
            if (sh < 0 || sh >= h || sw < 0 || sw >= w) {
              std::fill(dst, dst + c, Scalar(0));
            } else {
              std::copy_n(src + ((in * h + sh) * w + sw) * c, c, dst);
            }
          }
        }
      }
    }
  }
  return col;
}

template <typename Scalar>
void col2im_add(const Tensor<Scalar>& col, Tensor<Scalar>& x, std::int64_t kh, std::int64_t kw) {
  const auto n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const auto ph = kh / 2, pw = kw / 2;
  const Scalar* src = col.data();
  Scalar* dst = x.data();
  for (std::int64_t in = 0; in < n; ++in) {
    for (std::int64_t ih = 0; ih < h; ++ih) {
      for (std::int64_t iw = 0; iw < w; ++iw) {
        for (std::int64_t dy = 0; dy < kh; ++dy) {
          const auto sh = ih + dy - ph;
          for (std::int64_t dx = 0; dx < kw; ++dx, src += c) {
            const auto sw = iw + dx - pw;
            if (sh < 0 || sh >= h || sw < 0 || sw >= w) continue;
            Scalar* d = dst + ((in * h + sh) * w + sw) * c;
            for (std::int64_t k = 0; k < c; ++k) d[k] += src[k];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Stride-1 same-padded 2-D convolution.
/// x: [N, H, W, Cin], kernel: [kh, kw, Cin, Cout] with odd kh, kw.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& kernel) {
  detail::same_tape(x, kernel);
  const auto& xv = x.value();
  const auto& kv = kernel.value();
  if (xv.rank() != 4 || kv.rank() != 4 || kv.dim(2) != xv.dim(3) || kv.dim(0) % 2 == 0 || kv.dim(1) % 2 == 0) {
    detail::shape_error("conv2d", xv.shape(), kv.shape());
  }
  const auto kh = kv.dim(0), kw = kv.dim(1), cin = kv.dim(2), cout = kv.dim(3);
  Tensor<Scalar> col = detail::im2col(xv, kh, kw);
  Tensor<Scalar> out({xv.dim(0), xv.dim(1), xv.dim(2), cout});
  Eigen::Map<const typename Tensor<Scalar>::RowMatrix> kmat(kv.data(), kh * kw * cin, cout);
  out.matrix().noalias() = col.matrix() * kmat;
  std::vector<Tensor<Scalar>> saved;
  if (kernel.requires_grad()) saved.push_back(std::move(col));
  return x.tape().record(
      "conv2d", std::move(out), {x.id(), kernel.id()},
      [kh, kw, cin, cout](Tape<Scalar>& t, int self) {
        const auto& g = t.grad_buffer(self);
        const int ix = t.inputs(self)[0];
        const int ik = t.inputs(self)[1];
        Eigen::Map<const typename Tensor<Scalar>::RowMatrix> kmat(t.value(ik).data(), kh * kw * cin, cout);
        if (t.requires_grad(ik)) {
          const auto& col = t.saved(self).at(0);
          auto& gk = t.grad_buffer(ik);
          Eigen::Map<typename Tensor<Scalar>::RowMatrix> gkmat(gk.data(), kh * kw * cin, cout);
          gkmat.noalias() += col.matrix().transpose() * g.matrix();
        }
        if (t.requires_grad(ix)) {
          Tensor<Scalar> dcol({g.rows(), kh * kw * cin});
          dcol.matrix().noalias() = g.matrix() * kmat.transpose();
          detail::col2im_add(dcol, t.grad_buffer(ix), kh, kw);
        }
      },
      std::move(saved));
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().values().max(Scalar(0)));
  return x.tape().record("relu", std::move(out), {x.id()}, [](Tape<Scalar>& t, int self) {
    const int ix = t.inputs(self)[0];
    if (!t.requires_grad(ix)) return;
    const auto& g = t.grad_buffer(self).values();
    t.grad_buffer(ix).values() += (t.value(ix).values() > Scalar(0)).select(g, Scalar(0));
  });
}

/// Concatenates along the last (channel) dimension.
template <typename Scalar>
Var<Scalar> concat(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& ref = parts[0].shape();
  Shape shape = ref;
  shape.back() = 0;
  std::vector<int> ids;
  std::vector<std::int64_t> widths;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != ref.size() || !std::equal(s.begin(), s.end() - 1, ref.begin())) detail::shape_error("concat", ref, s);
    shape.back() += s.back();
    ids.push_back(p.id());
    widths.push_back(s.back());
  }
  Tensor<Scalar> out(shape);
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    out.matrix().middleCols(offset, p.shape().back()) = p.value().matrix();
    offset += p.shape().back();
  }
  return parts[0].tape().record("concat", std::move(out), ids, [widths](Tape<Scalar>& t, int self) {
    const auto& g = t.grad_buffer(self);
    std::int64_t off = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const int in = t.inputs(self)[i];
      if (t.requires_grad(in)) t.grad_buffer(in).matrix() += g.matrix().middleCols(off, widths[i]);
      off += widths[i];
    }
  });
}

template <typename Scalar>
Var<Scalar> concat(std::initializer_list<Var<Scalar>> parts) {
  std::vector<Var<Scalar>> v(parts);
  return concat<Scalar>(std::span<const Var<Scalar>>(v));
}

/// Channels [begin, end) of the last dimension.
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& x, std::int64_t begin, std::int64_t end) {
  const auto& xv = x.value();
  if (xv.rank() < 1 || begin < 0 || end > xv.dim(-1) || begin >= end) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") invalid for shape " + to_string(xv.shape()));
  }
  Shape shape = xv.shape();
  shape.back() = end - begin;
  Tensor<Scalar> out(shape);
  out.matrix() = xv.matrix().middleCols(begin, end - begin);
  return x.tape().record("slice", std::move(out), {x.id()}, [begin, end](Tape<Scalar>& t, int self) {
    const int ix = t.inputs(self)[0];
    if (t.requires_grad(ix)) t.grad_buffer(ix).matrix().middleCols(begin, end - begin) += t.grad_buffer(self).matrix();
  });
}

/// Sum of all elements (scalar result).
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  Tensor<Scalar> out(Shape{});
  out[0] = x.value().values().sum();
  return x.tape().record("sum", std::move(out), {x.id()}, [](Tape<Scalar>& t, int self) {
    const int ix = t.inputs(self)[0];
    if (t.requires_grad(ix)) t.grad_buffer(ix).values() += t.grad_buffer(self)[0];
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x) {
  const auto n = x.value().size();
  if (n == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(n));
}

/// Rows of the leading dimension picked by \p index (duplicates allowed).
template <typename Scalar>
Var<Scalar> select_rows(const Var<Scalar>& x, std::vector<std::int64_t> index) {
  const auto& xv = x.value();
  if (xv.rank() < 1) throw std::invalid_argument("select_rows on a scalar");
  const auto stride = xv.dim(0) == 0 ? 0 : xv.size() / xv.dim(0);
  Shape shape = xv.shape();
  shape[0] = static_cast<std::int64_t>(index.size());
  Tensor<Scalar> out(shape);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= xv.dim(0)) throw std::out_of_range("select_rows: index out of range");
    out.values().segment(static_cast<std::int64_t>(i) * stride, stride) = xv.values().segment(index[i] * stride, stride);
  }
  return x.tape().record("select_rows", std::move(out), {x.id()},
                         [index = std::move(index), stride](Tape<Scalar>& t, int self) {
                           const int ix = t.inputs(self)[0];
                           if (!t.requires_grad(ix)) return;
                           auto& gx = t.grad_buffer(ix).values();
                           const auto& g = t.grad_buffer(self).values();
                           for (std::size_t i = 0; i < index.size(); ++i) {
                             gx.segment(index[i] * stride, stride) += g.segment(static_cast<std::int64_t>(i) * stride, stride);
                           }
                         });
}

/// Stacks tensors along the leading dimension.
template <typename Scalar>
Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Shape shape = parts[0].shape();
  shape[0] = 0;
  std::vector<int> ids;
  std::vector<std::int64_t> sizes;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != shape.size() || !std::equal(s.begin() + 1, s.end(), shape.begin() + 1)) {
      detail::shape_error("concat_rows", parts[0].shape(), s);
    }
    shape[0] += s[0];
    ids.push_back(p.id());
    sizes.push_back(p.value().size());
  }
  Tensor<Scalar> out(shape);
  std::int64_t off = 0;
  for (const auto& p : parts) {
    out.values().segment(off, p.value().size()) = p.value().values();
    off += p.value().size();
  }
  return parts[0].tape().record("concat_rows", std::move(out), ids, [sizes](Tape<Scalar>& t, int self) {
    const auto& g = t.grad_buffer(self).values();
    std::int64_t o = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const int in = t.inputs(self)[i];
      if (t.requires_grad(in)) t.grad_buffer(in).values() += g.segment(o, sizes[i]);
      o += sizes[i];
    }
  });
}

/// Message aggregation over the leading (UE) dimension: row r receives the
/// sum of all other rows that carry the same group id. The sum is formed in
/// an order that does not depend on row order, so permuting the rows within
/// a group permutes the output exactly.
template <typename Scalar>
Var<Scalar> sum_others(const Var<Scalar>& x, std::vector<int> group) {
  const auto& xv = x.value();
  if (xv.rank() < 1 || static_cast<std::int64_t>(group.size()) != xv.dim(0)) {
    throw std::invalid_argument("sum_others: need one group id per row of " + to_string(xv.shape()));
  }
  const auto rows = xv.dim(0);
  const auto stride = rows == 0 ? 0 : xv.size() / rows;
  Tensor<Scalar> out(xv.shape());
  std::vector<std::int64_t> members;
  std::vector<Scalar> buf;
  for (std::int64_t r = 0; r < rows; ++r) {
    members.clear();
    for (std::int64_t q = 0; q < rows; ++q) {
      if (q != r && group[q] == group[r]) members.push_back(q);
    }
    auto dst = out.values().segment(r * stride, stride);
    if (members.size() <= 2) {
      // a + b == b + a exactly, so small groups need no canonical ordering.
      for (auto q : members) dst += xv.values().segment(q * stride, stride);
      continue;
    }
    buf.resize(members.size());
    for (std::int64_t e = 0; e < stride; ++e) {
      for (std::size_t i = 0; i < members.size(); ++i) buf[i] = xv[members[i] * stride + e];
      std::sort(buf.begin(), buf.end());
      Scalar acc = 0;
      for (Scalar v : buf) acc += v;
      dst[e] = acc;
    }
  }
  return x.tape().record("sum_others", std::move(out), {x.id()},
                         [group = std::move(group), stride](Tape<Scalar>& t, int self) {
                           const int ix = t.inputs(self)[0];
                           if (!t.requires_grad(ix)) return;
                           const auto& g = t.grad_buffer(self).values();
                           auto& gx = t.grad_buffer(ix).values();
                           const auto n = static_cast<std::int64_t>(group.size());
                           for (std::int64_t q = 0; q < n; ++q) {
                             for (std::int64_t r = 0; r < n; ++r) {
                               if (q != r && group[q] == group[r]) gx.segment(q * stride, stride) += g.segment(r * stride, stride);
                             }
                           }
                         });
}

}  // namespace nrx::ad
