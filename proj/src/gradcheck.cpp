// Copyright 2026 SpikeStream Contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spikestream/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "spikestream/graph.hpp"
#include "spikestream/lif.hpp"
#include "spikestream/rng.hpp"
#include "spikestream/tensor.hpp"

namespace spikestream {

namespace {

using Mirror = std::function<double(const std::vector<std::vector<double>>&)>;
using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

struct Case {
  std::string name;
  std::vector<Tensor> inputs;
  Builder build;
  Mirror mirror;
  bool relaxed = false;
};

std::vector<double> rand_vec(Rng& rng, size_t n, float lo, float hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

Tensor tensor_of(const std::vector<int64_t>& shape,
                 const std::vector<double>& v) {
  Tensor t = Tensor::zeros(shape);
  for (size_t i = 0; i < v.size(); ++i) t.data[i] = static_cast<float>(v[i]);
  t.ensure_grad();
  return t;
}

double relaxed64(double u, double thr, double alpha) {
  if (u <= thr - alpha) return 0.0;
  if (u >= thr + alpha) return 1.0;
  if (u <= thr) {
    const double s = (u - (thr - alpha)) / alpha;
    return 0.5 * s * s;
  }
  const double r = ((thr + alpha) - u) / alpha;
  return 1.0 - 0.5 * r * r;
}

// loss = sum(r . x): distinct weights exercise every partial.
Var weighted_sum(Graph& g, Var x, const std::vector<double>& r) {
  Tensor rt = Tensor::zeros(g.value(x).shape);
  for (size_t i = 0; i < r.size(); ++i) rt.data[i] = static_cast<float>(r[i]);
  return g.sum(g.mul(x, g.constant(std::move(rt))));
}

double dot64(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<Case> make_cases(Rng& rng) {
  std::vector<Case> cases;
  const auto r5 = [&] { return rand_vec(rng, 5, -1.0f, 1.0f); };

  {  // binary elementwise, same shape and trailing/scalar broadcast
    struct Bin {
      const char* name;
      std::function<double(double, double)> f;
      float blo, bhi;
    };
    const std::vector<Bin> bins = {
        {"add", [](double a, double b) { return a + b; }, -1.0f, 1.0f},
        {"sub", [](double a, double b) { return a - b; }, -1.0f, 1.0f},
        {"mul", [](double a, double b) { return a * b; }, -1.0f, 1.0f},
        {"div", [](double a, double b) { return a / b; }, 0.5f, 1.5f},
    };
    for (const Bin& bin : bins) {
      auto a = r5;
      std::vector<double> av = a(), bv = rand_vec(rng, 5, bin.blo, bin.bhi);
      std::vector<double> r = r5();
      const std::string name = bin.name;
      Case c;
      c.name = name;
      c.inputs = {tensor_of({5}, av), tensor_of({5}, bv)};
      c.build = [name](Graph& g, const std::vector<Var>& in) {
        Var out;
        if (name == "add") out = g.add(in[0], in[1]);
        if (name == "sub") out = g.sub(in[0], in[1]);
        if (name == "mul") out = g.mul(in[0], in[1]);
        if (name == "div") out = g.div(in[0], in[1]);
        return out;
      };
      auto f = bin.f;
      c.mirror = [f, r](const std::vector<std::vector<double>>& x) {
        double s = 0;
        for (size_t i = 0; i < 5; ++i) s += r[i] * f(x[0][i], x[1][i]);
        return s;
      };
      Builder inner = c.build;
      const std::vector<double> rr = r;
      c.build = [inner, rr](Graph& g, const std::vector<Var>& in) {
        return weighted_sum(g, inner(g, in), rr);
      };
      cases.push_back(std::move(c));

      // scalar-rhs broadcast
      std::vector<double> sv = rand_vec(rng, 1, bin.blo, bin.bhi);
      Case cs;
      cs.name = std::string(name) + "_scalar_bcast";
      cs.inputs = {tensor_of({5}, av), tensor_of({1}, sv)};
      cs.build = [inner, rr](Graph& g, const std::vector<Var>& in) {
        return weighted_sum(g, inner(g, in), rr);
      };
      cs.mirror = [f, r](const std::vector<std::vector<double>>& x) {
        double s = 0;
        for (size_t i = 0; i < 5; ++i) s += r[i] * f(x[0][i], x[1][0]);
        return s;
      };
      cases.push_back(std::move(cs));
    }
  }

  {  // trailing broadcast: [2,3] op [3]
    std::vector<double> av = rand_vec(rng, 6, -1.0f, 1.0f);
    std::vector<double> bv = rand_vec(rng, 3, -1.0f, 1.0f);
    std::vector<double> r = rand_vec(rng, 6, -1.0f, 1.0f);
    Case c;
    c.name = "add_trailing_bcast";
    c.inputs = {tensor_of({2, 3}, av), tensor_of({3}, bv)};
    c.build = [r](Graph& g, const std::vector<Var>& in) {
      return weighted_sum(g, g.add(in[0], in[1]), r);
    };
    c.mirror = [r](const std::vector<std::vector<double>>& x) {
      double s = 0;
      for (size_t i = 0; i < 6; ++i) s += r[i] * (x[0][i] + x[1][i % 3]);
      return s;
    };
    cases.push_back(std::move(c));
  }

  {  // unary ops
    struct Un {
      const char* name;
      std::function<double(double)> f;
      float lo, hi;
    };
    const std::vector<Un> uns = {
        {"scale", [](double x) { return 1.7 * x; }, -1.0f, 1.0f},
        {"offset", [](double x) { return x + 0.3; }, -1.0f, 1.0f},
        {"exp", [](double x) { return std::exp(x); }, -1.0f, 1.0f},
        {"log", [](double x) { return std::log(x); }, 0.5f, 2.0f},
        {"sqrt", [](double x) { return std::sqrt(x); }, 0.25f, 2.0f},
    };
    for (const Un& un : uns) {
      std::vector<double> xv = rand_vec(rng, 5, un.lo, un.hi);
      std::vector<double> r = r5();
      const std::string name = un.name;
      auto f = un.f;
      Case c;
      c.name = name;
      c.inputs = {tensor_of({5}, xv)};
      c.build = [name, r](Graph& g, const std::vector<Var>& in) {
        Var out;
        if (name == "scale") out = g.scale(in[0], 1.7f);
        if (name == "offset") out = g.offset(in[0], 0.3f);
        if (name == "exp") out = g.exp(in[0]);
        if (name == "log") out = g.log(in[0]);
        if (name == "sqrt") out = g.sqrt(in[0]);
        return weighted_sum(g, out, r);
      };
      c.mirror = [f, r](const std::vector<std::vector<double>>& x) {
        double s = 0;
        for (size_t i = 0; i < 5; ++i) s += r[i] * f(x[0][i]);
        return s;
      };
      cases.push_back(std::move(c));
    }
  }

  {  // matmul [3,4]x[4,2]
    std::vector<double> av = rand_vec(rng, 12, -1.0f, 1.0f);
    std::vector<double> bv = rand_vec(rng, 8, -1.0f, 1.0f);
    std::vector<double> r = rand_vec(rng, 6, -1.0f, 1.0f);
    Case c;
    c.name = "matmul";
    c.inputs = {tensor_of({3, 4}, av), tensor_of({4, 2}, bv)};
    c.build = [r](Graph& g, const std::vector<Var>& in) {
      return weighted_sum(g, g.matmul(in[0], in[1]), r);
    };
    c.mirror = [r](const std::vector<std::vector<double>>& x) {
      double s = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
          double cij = 0;
          for (int l = 0; l < 4; ++l) cij += x[0][i * 4 + l] * x[1][l * 2 + j];
          s += r[i * 2 + j] * cij;
        }
      return s;
    };
    cases.push_back(std::move(c));
  }

  {  // transpose
    std::vector<double> av = rand_vec(rng, 12, -1.0f, 1.0f);
    std::vector<double> r = rand_vec(rng, 12, -1.0f, 1.0f);
    Case c;
    c.name = "transpose";
    c.inputs = {tensor_of({3, 4}, av)};
    c.build = [r](Graph& g, const std::vector<Var>& in) {
      return weighted_sum(g, g.transpose(in[0]), r);
    };
    c.mirror = [r](const std::vector<std::vector<double>>& x) {
      double s = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) s += r[j * 3 + i] * x[0][i * 4 + j];
      return s;
    };
    cases.push_back(std::move(c));
  }

  {  // reductions
    std::vector<double> xv = rand_vec(rng, 6, -1.0f, 1.0f);
    Case c;
    c.name = "sum";
    c.inputs = {tensor_of({6}, xv)};
    c.build = [](Graph& g, const std::vector<Var>& in) {
      return g.scale(g.sum(in[0]), 1.3f);
    };
    c.mirror = [](const std::vector<std::vector<double>>& x) {
      double s = 0;
      for (double v : x[0]) s += v;
      return 1.3 * s;
    };
    cases.push_back(std::move(c));

    Case cm;
    cm.name = "mean";
    cm.inputs = {tensor_of({6}, rand_vec(rng, 6, -1.0f, 1.0f))};
    cm.build = [](Graph& g, const std::vector<Var>& in) {
      return g.scale(g.mean(in[0]), 1.3f);
    };
    cm.mirror = [](const std::vector<std::vector<double>>& x) {
      double s = 0;
      for (double v : x[0]) s += v;
      return 1.3 * s / 6.0;
    };
    cases.push_back(std::move(cm));

    std::vector<double> mv = rand_vec(rng, 12, -1.0f, 1.0f);
    std::vector<double> r4 = rand_vec(rng, 4, -1.0f, 1.0f);
    Case ca;
    ca.name = "sum_axis0";
    ca.inputs = {tensor_of({3, 4}, mv)};
    ca.build = [r4](Graph& g, const std::vector<Var>& in) {
      return weighted_sum(g, g.sum_axis0(in[0]), r4);
    };
    ca.mirror = [r4](const std::vector<std::vector<double>>& x) {
      double s = 0;
      for (int j = 0; j < 4; ++j) {
        double col = 0;
        for (int i = 0; i < 3; ++i) col += x[0][i * 4 + j];
        s += r4[j] * col;
      }
      return s;
    };
    cases.push_back(std::move(ca));

    Case cb;
    cb.name = "mean_axis0";
    cb.inputs = {tensor_of({3, 4}, rand_vec(rng, 12, -1.0f, 1.0f))};
    cb.build = [r4](Graph& g, const std::vector<Var>& in) {
      return weighted_sum(g, g.mean_axis0(in[0]), r4);
    };
    cb.mirror = [r4](const std::vector<std::vector<double>>& x) {
      double s = 0;
      for (int j = 0; j < 4; ++j) {
        double col = 0;
        for (int i = 0; i < 3; ++i) col += x[0][i * 4 + j];
        s += r4[j] * col / 3.0;
      }
      return s;
    };
    cases.push_back(std::move(cb));
  }

  {  // pick + reshape
    Case c;
    c.name = "pick";
    c.inputs = {tensor_of({5}, rand_vec(rng, 5, -1.0f, 1.0f))};
    c.build = [](Graph& g, const std::vector<Var>& in) {
      return g.scale(g.pick(in[0], 2), 1.3f);
    };
    c.mirror = [](const std::vector<std::vector<double>>& x) {
      return 1.3 * x[0][2];
    };
    cases.push_back(std::move(c));

    std::vector<double> r6 = rand_vec(rng, 6, -1.0f, 1.0f);
    Case cr;
    cr.name = "reshape";
    cr.inputs = {tensor_of({6}, rand_vec(rng, 6, -1.0f, 1.0f))};
    cr.build = [r6](Graph& g, const std::vector<Var>& in) {
      return weighted_sum(g, g.reshape(in[0], {2, 3}), r6);
    };
    cr.mirror = [r6](const std::vector<std::vector<double>>& x) {
      return dot64(r6, x[0]);
    };
    cases.push_back(std::move(cr));
  }

  {  // relaxed spike, inputs kept clear of the ramp kinks at 0, 1, 2
    std::vector<double> uv(5);
    for (double& u : uv) {
      do {
        u = rng.uniform(-0.5f, 2.5f);
      } while (std::fabs(u) < 0.05 || std::fabs(u - 1.0) < 0.05 ||
               std::fabs(u - 2.0) < 0.05);
    }
    std::vector<double> r = rand_vec(rng, 5, -1.0f, 1.0f);
    Case c;
    c.name = "spike_surrogate";
    c.relaxed = true;
    c.inputs = {tensor_of({5}, uv)};
    c.build = [r](Graph& g, const std::vector<Var>& in) {
      return weighted_sum(g, g.spike(in[0], 1.0f, 1.0f), r);
    };
    c.mirror = [r](const std::vector<std::vector<double>>& x) {
      double s = 0;
      for (size_t i = 0; i < 5; ++i) s += r[i] * relaxed64(x[0][i], 1.0, 1.0);
      return s;
    };
    cases.push_back(std::move(c));
  }

  {  // three-step LIF recurrence through the relaxed threshold
    const double beta = 0.9, thr = 1.0, alpha = 1.0;
    const auto simulate = [beta, thr, alpha](
                              const std::vector<std::vector<double>>& x,
                              std::vector<double>* us) {
      double out = 0;
      std::vector<double> u(4, 0.0), sp(4, 0.0);
      for (int t = 0; t < 3; ++t)
        for (int i = 0; i < 4; ++i) {
          u[i] = x[static_cast<size_t>(t)][static_cast<size_t>(i)] +
                 beta * u[i] - sp[i] * thr;
          if (us != nullptr) us->push_back(u[i]);
          sp[i] = relaxed64(u[i], thr, alpha);
          out += sp[i];
        }
      return out;
    };
    std::vector<std::vector<double>> iv;
    bool clear = false;
    while (!clear) {
      iv = {rand_vec(rng, 4, -0.2f, 1.4f), rand_vec(rng, 4, -0.2f, 1.4f),
            rand_vec(rng, 4, -0.2f, 1.4f)};
      std::vector<double> us;
      simulate(iv, &us);
      clear = true;
      for (double u : us)
        clear = clear && std::fabs(u) > 0.03 && std::fabs(u - 1.0) > 0.03 &&
                std::fabs(u - 2.0) > 0.03;
    }
    Case c;
    c.name = "lif_recurrence";
    c.relaxed = true;
    c.inputs = {tensor_of({1, 4}, iv[0]), tensor_of({1, 4}, iv[1]),
                tensor_of({1, 4}, iv[2])};
    c.build = [](Graph& g, const std::vector<Var>& in) {
      install_triangle_surrogate();
      GraphLifCell cell(g, {1, 4}, LifParams{1.0f, 0.9f, 1.0f});
      Var total;
      for (int t = 0; t < 3; ++t) {
        Var s = cell.step(in[static_cast<size_t>(t)]);
        total = t == 0 ? g.sum(s) : g.add(total, g.sum(s));
      }
      return total;
    };
    c.mirror = [simulate](const std::vector<std::vector<double>>& x) {
      return simulate(x, nullptr);
    };
    cases.push_back(std::move(c));
  }

  return cases;
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck(uint64_t seed, int64_t trials) {
  install_triangle_surrogate();
  std::vector<GradCheckRow> rows;
  for (int64_t trial = 0; trial < trials; ++trial) {
    Rng rng(seed + static_cast<uint64_t>(trial) * 0x9e37ULL);
    std::vector<Case> cases = make_cases(rng);
    for (Case& c : cases) {
      Graph g;
      g.set_relaxed_spike(c.relaxed);
      std::vector<Var> vars;
      for (Tensor& t : c.inputs) {
        t.zero_grad();
        vars.push_back(g.leaf(&t));
      }
      Var loss = c.build(g, vars);
      g.backward(loss);

      std::vector<std::vector<double>> x;
      for (const Tensor& t : c.inputs) {
        std::vector<double> v(t.data.begin(), t.data.end());
        x.push_back(std::move(v));
      }
      double max_rel = 0.0;
      for (size_t ti = 0; ti < c.inputs.size(); ++ti) {
        for (size_t i = 0; i < x[ti].size(); ++i) {
          const double keep = x[ti][i];
          x[ti][i] = keep + kGradCheckStep;
          const double up = c.mirror(x);
          x[ti][i] = keep - kGradCheckStep;
          const double down = c.mirror(x);
          x[ti][i] = keep;
          const double fd = (up - down) / (2.0 * kGradCheckStep);
          const double analytic = c.inputs[ti].grad[i];
          const double denom =
              std::max({std::fabs(fd), std::fabs(analytic), 1e-2});
          max_rel = std::max(max_rel, std::fabs(analytic - fd) / denom);
        }
      }

      GradCheckRow* row = nullptr;
      for (GradCheckRow& existing : rows)
        if (existing.op == c.name) row = &existing;
      if (row == nullptr) {
        rows.push_back({c.name, 0.0, false});
        row = &rows.back();
      }
      row->max_rel_err = std::max(row->max_rel_err, max_rel);
    }
  }
  for (GradCheckRow& row : rows) row.pass = row.max_rel_err <= kGradCheckTolerance;
  return rows;
}

bool gradcheck_all_pass(const std::vector<GradCheckRow>& rows) {
  if (rows.empty()) return false;
  for (const GradCheckRow& r : rows)
    if (!r.pass) return false;
  return true;
}

std::string gradcheck_table(const std::vector<GradCheckRow>& rows) {
  std::ostringstream os;
  char buf[128];
  for (const GradCheckRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%-22s %12.3e  %s\n", r.op.c_str(),
                  r.max_rel_err, r.pass ? "pass" : "FAIL");
    os << buf;
  }
  return os.str();
}

}  // namespace spikestream
