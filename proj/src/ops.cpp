#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lcc/errors.hpp"
#include "lcc/graph.hpp"
#include "lcc/kernels.hpp"

namespace lcc {

namespace kn = kernels::parallel;

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul_elementwise: return "mul_elementwise";
    case OpKind::div: return "div";
    case OpKind::scale: return "scale";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::mean: return "mean";
    case OpKind::max: return "max";
    case OpKind::sum: return "sum";
    case OpKind::relu: return "relu";
    case OpKind::conv1d_temporal: return "conv1d_temporal";
    case OpKind::softmax: return "softmax";
    case OpKind::cosine_similarity: return "cosine_similarity";
    case OpKind::cosine_matrix: return "cosine_matrix";
    case OpKind::cosine_gram: return "cosine_gram";
    case OpKind::bce_mean: return "bce_mean";
    case OpKind::mse_mean: return "mse_mean";
    case OpKind::cross_entropy: return "cross_entropy";
    case OpKind::clamp: return "clamp";
    case OpKind::mask_zero: return "mask_zero";
    case OpKind::reshape: return "reshape";
    case OpKind::transpose: return "transpose";
  }
  return "unknown";
}

const std::vector<OpKind>& differentiable_ops() {
  static const std::vector<OpKind> ops = {
      OpKind::matmul,       OpKind::add,          OpKind::sub,
      OpKind::mul_elementwise, OpKind::div,       OpKind::scale,
      OpKind::concat,       OpKind::slice,        OpKind::mean,
      OpKind::max,          OpKind::sum,          OpKind::relu,
      OpKind::conv1d_temporal, OpKind::softmax,   OpKind::cosine_similarity,
      OpKind::cosine_matrix, OpKind::cosine_gram, OpKind::bce_mean,
      OpKind::mse_mean,     OpKind::cross_entropy, OpKind::clamp,
      OpKind::mask_zero,    OpKind::reshape,      OpKind::transpose,
  };
  return ops;
}

namespace {

constexpr double kBceEps = 1e-7;

[[noreturn]] void fail(OpKind kind, const std::string& what) {
  throw ContractViolation(std::string(op_name(kind)) + ": " + what);
}

void expect_arity(OpKind kind, const std::vector<Shape>& in, std::size_t n) {
  if (in.size() != n)
    fail(kind, "expects " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
}

void expect_rank(OpKind kind, const Shape& s, std::size_t rank, const char* which) {
  if (s.size() != rank)
    fail(kind, std::string(which) + " must be rank " + std::to_string(rank) + ", got " + shape_str(s));
}

// Second operand of a binary elementwise op: same shape, a suffix of the first
// operand's shape, or a single element.
void expect_broadcastable(OpKind kind, const Shape& a, const Shape& b) {
  if (a == b || numel(b) == 1) return;
  if (b.size() <= a.size() && std::equal(b.begin(), b.end(), a.end() - static_cast<long>(b.size())))
    return;
  fail(kind, "shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcast-compatible");
}

std::size_t resolve_axis(OpKind kind, const OpAttrs& attrs, const Shape& s) {
  if (!attrs.axis) fail(kind, "requires an axis");
  if (*attrs.axis >= s.size())
    fail(kind, "axis " + std::to_string(*attrs.axis) + " out of range for " + shape_str(s));
  return *attrs.axis;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out.push_back(s[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

// Reduction ops with no axis act on the flattened tensor.
AxisSplit reduction_split(const Shape& s, const OpAttrs& attrs) {
  if (!attrs.axis) return {1, numel(s), 1};
  return split_at(s, *attrs.axis);
}

std::vector<std::size_t> effective_perm(const OpAttrs& attrs, std::size_t rank) {
  if (!attrs.perm.empty()) return attrs.perm;
  std::vector<std::size_t> p(rank);
  for (std::size_t i = 0; i < rank; ++i) p[i] = rank - 1 - i;
  return p;
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// Maps each output flat index to its input flat index under `perm`.
std::vector<std::size_t> transpose_map(const Shape& in, const std::vector<std::size_t>& perm) {
  Shape out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[perm[i]];
  const auto in_st = strides_of(in);
  std::vector<std::size_t> src_stride(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) src_stride[i] = in_st[perm[i]];
  std::vector<std::size_t> map(numel(in));
  std::vector<std::size_t> idx(out.size(), 0);
  for (std::size_t flat = 0; flat < map.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < out.size(); ++d) src += idx[d] * src_stride[d];
    map[flat] = src;
    for (std::size_t d = out.size(); d-- > 0;) {
      if (++idx[d] < out[d]) break;
      idx[d] = 0;
    }
  }
  return map;
}

kernels::ConvGeometry conv_geometry(const Shape& x, const Shape& w, const OpAttrs& attrs) {
  kernels::ConvGeometry g;
  g.batch = x.size() == 3 ? x[0] : 1;
  g.t_in = x[x.size() - 2];
  g.c_in = x.back();
  g.c_out = w[2];
  g.window = attrs.window;
  g.stride = attrs.stride;
  g.dilation = attrs.dilation;
  return g;
}

}  // namespace

Shape infer_shape(OpKind kind, const std::vector<Shape>& in, const OpAttrs& attrs) {
  switch (kind) {
    case OpKind::leaf:
      fail(kind, "leaf has no shape rule");
    case OpKind::matmul: {
      expect_arity(kind, in, 2);
      expect_rank(kind, in[0], 2, "lhs");
      expect_rank(kind, in[1], 2, "rhs");
      if (in[0][1] != in[1][0])
        fail(kind, "inner dims differ: " + shape_str(in[0]) + " x " + shape_str(in[1]));
      return {in[0][0], in[1][1]};
    }
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul_elementwise:
    case OpKind::div:
      expect_arity(kind, in, 2);
      expect_broadcastable(kind, in[0], in[1]);
      return in[0];
    case OpKind::scale:
    case OpKind::relu:
    case OpKind::clamp:
      expect_arity(kind, in, 1);
      if (kind == OpKind::clamp && !(attrs.lo <= attrs.hi)) fail(kind, "lo must not exceed hi");
      return in[0];
    case OpKind::concat: {
      if (in.empty()) fail(kind, "needs at least one input");
      const std::size_t axis = resolve_axis(kind, attrs, in[0]);
      Shape out = in[0];
      out[axis] = 0;
      for (const auto& s : in) {
        if (s.size() != in[0].size()) fail(kind, "rank mismatch " + shape_str(s) + " vs " + shape_str(in[0]));
        for (std::size_t d = 0; d < s.size(); ++d)
          if (d != axis && s[d] != in[0][d])
            fail(kind, "dim " + std::to_string(d) + " differs: " + shape_str(s) + " vs " + shape_str(in[0]));
        out[axis] += s[axis];
      }
      return out;
    }
    case OpKind::slice: {
      expect_arity(kind, in, 1);
      const std::size_t axis = resolve_axis(kind, attrs, in[0]);
      if (attrs.begin >= attrs.end || attrs.end > in[0][axis])
        fail(kind, "range [" + std::to_string(attrs.begin) + "," + std::to_string(attrs.end) +
                       ") invalid for dim " + std::to_string(in[0][axis]));
      Shape out = in[0];
      out[axis] = attrs.end - attrs.begin;
      return out;
    }
    case OpKind::mean:
    case OpKind::max:
    case OpKind::sum:
      expect_arity(kind, in, 1);
      if (!attrs.axis) {
        if (kind == OpKind::max) fail(kind, "requires an axis");
        return {1};
      }
      return drop_axis(in[0], resolve_axis(kind, attrs, in[0]));
    case OpKind::conv1d_temporal: {
      expect_arity(kind, in, 2);
      const Shape& x = in[0];
      const Shape& w = in[1];
      if (x.size() != 2 && x.size() != 3) fail(kind, "input must be [T,C] or [B,T,C], got " + shape_str(x));
      expect_rank(kind, w, 3, "weight");
      if (attrs.window == 0 || attrs.stride == 0 || attrs.dilation == 0)
        fail(kind, "window, stride and dilation must be positive");
      if (w[0] != attrs.window || w[1] != x.back())
        fail(kind, "weight " + shape_str(w) + " does not match window " + std::to_string(attrs.window) +
                       " and input channels " + std::to_string(x.back()));
      Shape out = x;
      out[x.size() - 2] = (x[x.size() - 2] + attrs.stride - 1) / attrs.stride;
      out.back() = w[2];
      return out;
    }
    case OpKind::softmax:
      expect_arity(kind, in, 1);
      resolve_axis(kind, attrs, in[0]);
      if (!(attrs.temperature > 0.0)) fail(kind, "temperature must be positive");
      return in[0];
    case OpKind::cosine_similarity:
      expect_arity(kind, in, 2);
      if (in[0] != in[1]) fail(kind, "shapes differ: " + shape_str(in[0]) + " vs " + shape_str(in[1]));
      return drop_axis(in[0], resolve_axis(kind, attrs, in[0]));
    case OpKind::cosine_matrix:
      expect_arity(kind, in, 2);
      expect_rank(kind, in[0], 2, "lhs");
      expect_rank(kind, in[1], 2, "rhs");
      if (in[0][1] != in[1][1])
        fail(kind, "feature dims differ: " + shape_str(in[0]) + " vs " + shape_str(in[1]));
      return {in[0][0], in[1][0]};
    case OpKind::cosine_gram:
      expect_arity(kind, in, 1);
      expect_rank(kind, in[0], 2, "input");
      return {in[0][0], in[0][0]};
    case OpKind::bce_mean:
    case OpKind::mse_mean:
      expect_arity(kind, in, 2);
      if (in[0] != in[1]) fail(kind, "shapes differ: " + shape_str(in[0]) + " vs " + shape_str(in[1]));
      return {1};
    case OpKind::cross_entropy:
      expect_arity(kind, in, 1);
      if (attrs.label >= numel(in[0]))
        fail(kind, "label " + std::to_string(attrs.label) + " out of range for " + shape_str(in[0]));
      return {1};
    case OpKind::mask_zero: {
      expect_arity(kind, in, 1);
      const std::size_t axis = resolve_axis(kind, attrs, in[0]);
      for (auto i : attrs.indices)
        if (i >= in[0][axis]) fail(kind, "index " + std::to_string(i) + " out of range on axis " + std::to_string(axis));
      return in[0];
    }
    case OpKind::reshape:
      expect_arity(kind, in, 1);
      if (attrs.shape.empty() || numel(attrs.shape) != numel(in[0]))
        fail(kind, "cannot reshape " + shape_str(in[0]) + " to " + shape_str(attrs.shape));
      return attrs.shape;
    case OpKind::transpose: {
      expect_arity(kind, in, 1);
      const auto perm = effective_perm(attrs, in[0].size());
      if (perm.size() != in[0].size()) fail(kind, "permutation rank differs from " + shape_str(in[0]));
      std::vector<bool> seen(perm.size(), false);
      Shape out;
      for (auto p : perm) {
        if (p >= perm.size() || seen[p]) fail(kind, "invalid permutation");
        seen[p] = true;
        out.push_back(in[0][p]);
      }
      return out;
    }
  }
  fail(kind, "unknown op");
}

namespace detail {

void forward_op(OpKind kind, const std::vector<const Tensor*>& in, const OpAttrs& attrs, Tensor& out,
                SavedContext ctx) {
  auto y = out.values();
  switch (kind) {
    case OpKind::leaf:
      fail(kind, "leaf has no forward");
    case OpKind::matmul:
      kn::matmul(in[0]->values(), in[1]->values(), y, in[0]->dim(0), in[0]->dim(1), in[1]->dim(1));
      return;
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul_elementwise:
    case OpKind::div: {
      auto a = in[0]->values();
      auto b = in[1]->values();
      const std::size_t nb = b.size();
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double bv = b[i % nb];
        switch (kind) {
          case OpKind::add: y[i] = a[i] + bv; break;
          case OpKind::sub: y[i] = a[i] - bv; break;
          case OpKind::mul_elementwise: y[i] = a[i] * bv; break;
          default: y[i] = a[i] / bv; break;
        }
      }
      return;
    }
    case OpKind::scale: {
      auto a = in[0]->values();
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = attrs.factor * a[i];
      return;
    }
    case OpKind::relu: {
      auto a = in[0]->values();
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] > 0.0 ? a[i] : 0.0;
      return;
    }
    case OpKind::clamp: {
      auto a = in[0]->values();
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(a[i], attrs.lo, attrs.hi);
      return;
    }
    case OpKind::concat: {
      const auto sp = split_at(out.shape(), *attrs.axis);
      std::size_t offset = 0;
      for (const Tensor* t : in) {
        const std::size_t width = t->dim(*attrs.axis) * sp.inner;
        auto src = t->values();
        for (std::size_t o = 0; o < sp.outer; ++o)
          std::copy_n(&src[o * width], width, &y[o * sp.n * sp.inner + offset]);
        offset += width;
      }
      return;
    }
    case OpKind::slice: {
      const auto sp = split_at(in[0]->shape(), *attrs.axis);
      const std::size_t width = (attrs.end - attrs.begin) * sp.inner;
      auto src = in[0]->values();
      for (std::size_t o = 0; o < sp.outer; ++o)
        std::copy_n(&src[o * sp.n * sp.inner + attrs.begin * sp.inner], width, &y[o * width]);
      return;
    }
    case OpKind::mean:
    case OpKind::sum: {
      const auto sp = reduction_split(in[0]->shape(), attrs);
      auto a = in[0]->values();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.inner; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < sp.n; ++k) s += a[(o * sp.n + k) * sp.inner + j];
          y[o * sp.inner + j] = kind == OpKind::mean ? s / static_cast<double>(sp.n) : s;
        }
      return;
    }
    case OpKind::max: {
      const auto sp = reduction_split(in[0]->shape(), attrs);
      auto a = in[0]->values();
      ctx.index.assign(y.size(), 0);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.inner; ++j) {
          std::size_t best = 0;
          double bv = a[o * sp.n * sp.inner + j];
          for (std::size_t k = 1; k < sp.n; ++k) {
            const double v = a[(o * sp.n + k) * sp.inner + j];
            if (v > bv) {  // strict: ties keep the lowest index
              bv = v;
              best = k;
            }
          }
          y[o * sp.inner + j] = bv;
          ctx.index[o * sp.inner + j] = best;
        }
      return;
    }
    case OpKind::conv1d_temporal:
      kn::conv1d_forward(in[0]->values(), in[1]->values(), y,
                         conv_geometry(in[0]->shape(), in[1]->shape(), attrs));
      return;
    case OpKind::softmax: {
      const auto sp = split_at(in[0]->shape(), *attrs.axis);
      auto a = in[0]->values();
      const double inv_t = 1.0 / attrs.temperature;
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.inner; ++j) {
          auto at = [&](std::size_t k) { return (o * sp.n + k) * sp.inner + j; };
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < sp.n; ++k) mx = std::max(mx, a[at(k)] * inv_t);
          double z = 0.0;
          for (std::size_t k = 0; k < sp.n; ++k) {
            y[at(k)] = std::exp(a[at(k)] * inv_t - mx);
            z += y[at(k)];
          }
          for (std::size_t k = 0; k < sp.n; ++k) y[at(k)] /= z;
        }
      return;
    }
    case OpKind::cosine_similarity: {
      const auto sp = split_at(in[0]->shape(), *attrs.axis);
      auto a = in[0]->values();
      auto b = in[1]->values();
      ctx.aux.assign(2 * y.size(), 0.0);  // norms of a then b
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.inner; ++j) {
          double dot = 0.0, na = 0.0, nb = 0.0;
          for (std::size_t k = 0; k < sp.n; ++k) {
            const std::size_t i = (o * sp.n + k) * sp.inner + j;
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
          }
          const std::size_t r = o * sp.inner + j;
          ctx.aux[r] = std::sqrt(na);
          ctx.aux[y.size() + r] = std::sqrt(nb);
          const double denom = ctx.aux[r] * ctx.aux[y.size() + r];
          y[r] = denom > 0.0 ? dot / denom : 0.0;
        }
      return;
    }
    case OpKind::cosine_matrix: {
      const std::size_t p = in[0]->dim(0), q = in[1]->dim(0), c = in[0]->dim(1);
      kn::cosine_matrix(in[0]->values(), in[1]->values(), y, p, q, c);
      ctx.aux.resize(p + q);
      kernels::row_norms(in[0]->values(), std::span(ctx.aux).first(p), p, c);
      kernels::row_norms(in[1]->values(), std::span(ctx.aux).subspan(p), q, c);
      return;
    }
    case OpKind::cosine_gram: {
      const std::size_t p = in[0]->dim(0), c = in[0]->dim(1);
      kn::cosine_matrix(in[0]->values(), in[0]->values(), y, p, p, c);
      ctx.aux.resize(p);
      kernels::row_norms(in[0]->values(), ctx.aux, p, c);
      for (std::size_t i = 0; i < p; ++i) y[i * p + i] = ctx.aux[i] > 0.0 ? 1.0 : 0.0;
      return;
    }
    case OpKind::bce_mean: {
      auto p = in[0]->values();
      auto t = in[1]->values();
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double pc = std::clamp(p[i], kBceEps, 1.0 - kBceEps);
        s += -(t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc));
      }
      y[0] = s / static_cast<double>(p.size());
      return;
    }
    case OpKind::mse_mean: {
      auto a = in[0]->values();
      auto b = in[1]->values();
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      y[0] = s / static_cast<double>(a.size());
      return;
    }
    case OpKind::cross_entropy: {
      auto z = in[0]->values();
      const double mx = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (double v : z) s += std::exp(v - mx);
      y[0] = mx + std::log(s) - z[attrs.label];
      return;
    }
    case OpKind::mask_zero: {
      const auto sp = split_at(in[0]->shape(), *attrs.axis);
      std::copy(in[0]->values().begin(), in[0]->values().end(), y.begin());
      for (auto k : attrs.indices)
        for (std::size_t o = 0; o < sp.outer; ++o)
          std::fill_n(&y[(o * sp.n + k) * sp.inner], sp.inner, 0.0);
      return;
    }
    case OpKind::reshape:
      std::copy(in[0]->values().begin(), in[0]->values().end(), y.begin());
      return;
    case OpKind::transpose: {
      const auto map = transpose_map(in[0]->shape(), effective_perm(attrs, in[0]->rank()));
      auto a = in[0]->values();
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[map[i]];
      return;
    }
  }
}

void backward_op(OpKind kind, const std::vector<const Tensor*>& in, const Tensor& out,
                 const Tensor& grad_out, const OpAttrs& attrs, const std::vector<std::size_t>& index,
                 const std::vector<double>& aux, const std::vector<Tensor*>& grad_in) {
  auto g = grad_out.values();
  auto want = [&](std::size_t i) { return grad_in[i] != nullptr; };
  auto gin = [&](std::size_t i) { return grad_in[i]->values(); };

  switch (kind) {
    case OpKind::leaf:
      throw UnsupportedOp("leaf has no derivative");
    case OpKind::matmul: {
      const std::size_t m = in[0]->dim(0), k = in[0]->dim(1), n = in[1]->dim(1);
      std::vector<double> tmp;
      if (want(0)) {
        tmp.resize(m * k);
        kn::matmul_nt(g, in[1]->values(), tmp, m, k, n);
        auto ga = gin(0);
        for (std::size_t i = 0; i < tmp.size(); ++i) ga[i] += tmp[i];
      }
      if (want(1)) {
        tmp.assign(k * n, 0.0);
        kn::matmul_tn(in[0]->values(), g, tmp, m, k, n);
        auto gb = gin(1);
        for (std::size_t i = 0; i < tmp.size(); ++i) gb[i] += tmp[i];
      }
      return;
    }
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul_elementwise:
    case OpKind::div: {
      auto a = in[0]->values();
      auto b = in[1]->values();
      const std::size_t nb = b.size();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double bv = b[i % nb];
        double da = 0.0, db = 0.0;
        switch (kind) {
          case OpKind::add: da = g[i]; db = g[i]; break;
          case OpKind::sub: da = g[i]; db = -g[i]; break;
          case OpKind::mul_elementwise: da = g[i] * bv; db = g[i] * a[i]; break;
          default: da = g[i] / bv; db = -g[i] * a[i] / (bv * bv); break;
        }
        if (want(0)) gin(0)[i] += da;
        if (want(1)) gin(1)[i % nb] += db;
      }
      return;
    }
    case OpKind::scale: {
      if (!want(0)) return;
      auto ga = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += attrs.factor * g[i];
      return;
    }
    case OpKind::relu: {
      if (!want(0)) return;
      auto a = in[0]->values();
      auto ga = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (a[i] > 0.0) ga[i] += g[i];
      return;
    }
    case OpKind::clamp: {
      if (!want(0)) return;
      auto a = in[0]->values();
      auto ga = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (a[i] >= attrs.lo && a[i] <= attrs.hi) ga[i] += g[i];
      return;
    }
    case OpKind::concat: {
      const auto sp = split_at(out.shape(), *attrs.axis);
      std::size_t offset = 0;
      for (std::size_t t = 0; t < in.size(); ++t) {
        const std::size_t width = in[t]->dim(*attrs.axis) * sp.inner;
        if (want(t)) {
          auto gt = gin(t);
          for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t j = 0; j < width; ++j) gt[o * width + j] += g[o * sp.n * sp.inner + offset + j];
        }
        offset += width;
      }
      return;
    }
    case OpKind::slice: {
      if (!want(0)) return;
      const auto sp = split_at(in[0]->shape(), *attrs.axis);
      const std::size_t width = (attrs.end - attrs.begin) * sp.inner;
      auto ga = gin(0);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < width; ++j)
          ga[o * sp.n * sp.inner + attrs.begin * sp.inner + j] += g[o * width + j];
      return;
    }
    case OpKind::mean:
    case OpKind::sum: {
      if (!want(0)) return;
      const auto sp = reduction_split(in[0]->shape(), attrs);
      const double f = kind == OpKind::mean ? 1.0 / static_cast<double>(sp.n) : 1.0;
      auto ga = gin(0);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t k = 0; k < sp.n; ++k)
          for (std::size_t j = 0; j < sp.inner; ++j)
            ga[(o * sp.n + k) * sp.inner + j] += f * g[o * sp.inner + j];
      return;
    }
    case OpKind::max: {
      if (!want(0)) return;
      const auto sp = reduction_split(in[0]->shape(), attrs);
      auto ga = gin(0);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.inner; ++j) {
          const std::size_t r = o * sp.inner + j;
          ga[(o * sp.n + index[r]) * sp.inner + j] += g[r];
        }
      return;
    }
    case OpKind::conv1d_temporal: {
      const auto geom = conv_geometry(in[0]->shape(), in[1]->shape(), attrs);
      if (want(0)) {
        std::vector<double> tmp(in[0]->size());
        kn::conv1d_backward_input(g, in[1]->values(), tmp, geom);
        auto gx = gin(0);
        for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
      }
      if (want(1)) {
        std::vector<double> tmp(in[1]->size());
        kn::conv1d_backward_weight(in[0]->values(), g, tmp, geom);
        auto gw = gin(1);
        for (std::size_t i = 0; i < tmp.size(); ++i) gw[i] += tmp[i];
      }
      return;
    }
    case OpKind::softmax: {
      if (!want(0)) return;
      const auto sp = split_at(in[0]->shape(), *attrs.axis);
      auto y = out.values();
      auto ga = gin(0);
      const double inv_t = 1.0 / attrs.temperature;
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.inner; ++j) {
          auto at = [&](std::size_t k) { return (o * sp.n + k) * sp.inner + j; };
          double dot = 0.0;
          for (std::size_t k = 0; k < sp.n; ++k) dot += g[at(k)] * y[at(k)];
          for (std::size_t k = 0; k < sp.n; ++k) ga[at(k)] += inv_t * y[at(k)] * (g[at(k)] - dot);
        }
      return;
    }
    case OpKind::cosine_similarity: {
      const auto sp = split_at(in[0]->shape(), *attrs.axis);
      auto a = in[0]->values();
      auto b = in[1]->values();
      auto y = out.values();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.inner; ++j) {
          const std::size_t r = o * sp.inner + j;
          const double na = aux[r], nb = aux[y.size() + r];
          if (na == 0.0 || nb == 0.0) continue;
          const double inv = 1.0 / (na * nb);
          for (std::size_t k = 0; k < sp.n; ++k) {
            const std::size_t i = (o * sp.n + k) * sp.inner + j;
            if (want(0)) gin(0)[i] += g[r] * (b[i] * inv - y[r] * a[i] / (na * na));
            if (want(1)) gin(1)[i] += g[r] * (a[i] * inv - y[r] * b[i] / (nb * nb));
          }
        }
      return;
    }
    case OpKind::cosine_matrix: {
      const std::size_t p = in[0]->dim(0), q = in[1]->dim(0), c = in[0]->dim(1);
      auto y = out.values();
      // scaled[i,j] = g[i,j] / (|a_i||b_j|), zero where a norm vanishes
      std::vector<double> scaled(p * q, 0.0);
      std::vector<double> row_corr(p, 0.0), col_corr(q, 0.0);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) {
          const double na = aux[i], nb = aux[p + j];
          if (na == 0.0 || nb == 0.0) continue;
          scaled[i * q + j] = g[i * q + j] / (na * nb);
          row_corr[i] += g[i * q + j] * y[i * q + j] / (na * na);
          col_corr[j] += g[i * q + j] * y[i * q + j] / (nb * nb);
        }
      if (want(0)) {
        std::vector<double> tmp(p * c);
        kn::matmul(scaled, in[1]->values(), tmp, p, q, c);
        auto ga = gin(0);
        auto a = in[0]->values();
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t l = 0; l < c; ++l) ga[i * c + l] += tmp[i * c + l] - row_corr[i] * a[i * c + l];
      }
      if (want(1)) {
        std::vector<double> tmp(q * c);
        kn::matmul_tn(scaled, in[0]->values(), tmp, p, q, c);
        auto gb = gin(1);
        auto b = in[1]->values();
        for (std::size_t j = 0; j < q; ++j)
          for (std::size_t l = 0; l < c; ++l) gb[j * c + l] += tmp[j * c + l] - col_corr[j] * b[j * c + l];
      }
      return;
    }
    case OpKind::cosine_gram: {
      if (!want(0)) return;
      const std::size_t p = in[0]->dim(0), c = in[0]->dim(1);
      auto y = out.values();
      // Off-diagonal entries depend on both rows; the diagonal is constant.
      std::vector<double> scaled(p * p, 0.0);
      std::vector<double> corr(p, 0.0);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          if (i == j || aux[i] == 0.0 || aux[j] == 0.0) continue;
          const double h = g[i * p + j] + g[j * p + i];
          scaled[i * p + j] = h / (aux[i] * aux[j]);
          corr[i] += h * y[i * p + j] / (aux[i] * aux[i]);
        }
      std::vector<double> tmp(p * c);
      kn::matmul(scaled, in[0]->values(), tmp, p, p, c);
      auto ga = gin(0);
      auto a = in[0]->values();
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t l = 0; l < c; ++l) ga[i * c + l] += tmp[i * c + l] - corr[i] * a[i * c + l];
      return;
    }
    case OpKind::bce_mean: {
      auto p = in[0]->values();
      auto t = in[1]->values();
      const double f = g[0] / static_cast<double>(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double pc = std::clamp(p[i], kBceEps, 1.0 - kBceEps);
        if (want(0) && p[i] >= kBceEps && p[i] <= 1.0 - kBceEps)
          gin(0)[i] += f * (-t[i] / pc + (1.0 - t[i]) / (1.0 - pc));
        if (want(1)) gin(1)[i] += f * (std::log(1.0 - pc) - std::log(pc));
      }
      return;
    }
    case OpKind::mse_mean: {
      auto a = in[0]->values();
      auto b = in[1]->values();
      const double f = 2.0 * g[0] / static_cast<double>(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (want(0)) gin(0)[i] += f * (a[i] - b[i]);
        if (want(1)) gin(1)[i] -= f * (a[i] - b[i]);
      }
      return;
    }
    case OpKind::cross_entropy: {
      if (!want(0)) return;
      auto z = in[0]->values();
      const double mx = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (double v : z) s += std::exp(v - mx);
      auto ga = gin(0);
      for (std::size_t i = 0; i < z.size(); ++i)
        ga[i] += g[0] * (std::exp(z[i] - mx) / s - (i == attrs.label ? 1.0 : 0.0));
      return;
    }
    case OpKind::mask_zero: {
      if (!want(0)) return;
      const auto sp = split_at(in[0]->shape(), *attrs.axis);
      std::vector<bool> masked(sp.n, false);
      for (auto k : attrs.indices) masked[k] = true;
      auto ga = gin(0);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t k = 0; k < sp.n; ++k) {
          if (masked[k]) continue;
          for (std::size_t j = 0; j < sp.inner; ++j) {
            const std::size_t i = (o * sp.n + k) * sp.inner + j;
            ga[i] += g[i];
          }
        }
      return;
    }
    case OpKind::reshape: {
      if (!want(0)) return;
      auto ga = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      return;
    }
    case OpKind::transpose: {
      if (!want(0)) return;
      const auto map = transpose_map(in[0]->shape(), effective_perm(attrs, in[0]->rank()));
      auto ga = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[map[i]] += g[i];
      return;
    }
  }
}

}  // namespace detail
}  // namespace lcc
