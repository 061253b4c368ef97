#include <algorithm>
#include <cmath>
#include <functional>

#include "opcnn/nn.hpp"

namespace opcnn {

bool GradCheckReport::passed() const {
  return std::all_of(groups.begin(), groups.end(), [](const GradCheckGroup& g) { return g.passed; });
}

namespace {

// Two windows of the sentence with identical contents stay tied under any
// parameter perturbation, so such ties cannot flip a top-k selection.
bool same_window(const Matrix& sentence, std::size_t a, std::size_t b, std::size_t h) {
  auto wa = sentence.rows_span(a, h);
  auto wb = sentence.rows_span(b, h);
  return std::equal(wa.begin(), wa.end(), wb.begin());
}

// Moves biases and kernels until every ReLU input is at least `guard` away
// from zero and every top-k boundary is separated by at least `guard`.
void move_off_kinks(OpcnnModel& model, std::span<const std::int32_t> ids, double guard) {
  Rng rng(derive_seed(0x6b696e6bULL, "gradcheck"));
  ForwardTrace trace;
  const std::size_t k = model.hyper.k;
  for (int iter = 0; iter < 500; ++iter) {
    forward_into(model, ids, std::nullopt, trace);
    bool moved = false;
    std::size_t fi = 0;
    for (auto& group : model.conv) {
      for (std::size_t f = 0; f < model.hyper.filters_per_width; ++f, ++fi) {
        const FilterTrace& ft = trace.filters[fi];
        if (std::any_of(ft.pre.begin(), ft.pre.end(), [&](double v) { return std::abs(v) < guard; })) {
          group.bias[f] += 3.0 * guard;
          moved = true;
          continue;
        }
        if (ft.act.size() > k) {
          std::vector<std::size_t> order(ft.act.size());
          for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
          std::stable_sort(order.begin(), order.end(),
                           [&](std::size_t a, std::size_t b) { return ft.act[a] > ft.act[b]; });
          const std::size_t last = order[k - 1], next = order[k];
          if (ft.act[last] > 0.0 && ft.act[last] - ft.act[next] < guard &&
              !same_window(trace.sentence, last, next, group.width)) {
            for (double& w : group.kernels.row(f)) w += rng.uniform(-0.05, 0.05);
            moved = true;
            continue;
          }
        }
        if (model.hyper.pooling_affine && model.hyper.pool_activation == PoolActivation::relu &&
            std::any_of(ft.affine_pre.begin(), ft.affine_pre.end(), [&](double v) { return std::abs(v) < guard; })) {
          model.pool_bias[fi] += 3.0 * guard;
          moved = true;
        }
      }
    }
    if (!moved) return;
  }
}

struct ParamGroup {
  std::string name;
  std::span<double> values;
  std::function<double(std::size_t)> analytic;
};

}  // namespace

GradCheckReport grad_check(const OpcnnModel& original, std::span<const std::int32_t> ids, int label,
                           const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("grad_check: epsilon must be positive");
  OpcnnModel model = original;
  move_off_kinks(model, ids, options.kink_guard);

  auto [probs, trace] = forward(model, ids);
  Gradients grads = backward(model, trace, label);
  if (!grads.kernels.empty()) {
    for (double& v : grads.kernels[0].values()) v *= options.kernel_fault_scale;
  }

  const std::size_t m = model.hyper.embedding_dim;
  std::vector<ParamGroup> groups;
  for (std::size_t g = 0; g < model.conv.size(); ++g) {
    groups.push_back({"K[w=" + std::to_string(model.conv[g].width) + "]", model.conv[g].kernels.values(),
                      [&grads, g](std::size_t i) { return grads.kernels[g].values()[i]; }});
  }
  // Conv biases of all widths form one group.
  std::vector<std::pair<std::size_t, std::size_t>> bias_slots;
  for (std::size_t g = 0; g < model.conv.size(); ++g)
    for (std::size_t f = 0; f < model.conv[g].bias.size(); ++f) bias_slots.emplace_back(g, f);

  if (model.hyper.pooling_affine) {
    groups.push_back({"pool_scale", model.pool_scale, [&grads](std::size_t i) { return grads.pool_scale[i]; }});
    groups.push_back({"pool_bias", model.pool_bias, [&grads](std::size_t i) { return grads.pool_bias[i]; }});
  }
  groups.push_back({"out_weight", model.out_weight.values(),
                    [&grads](std::size_t i) { return grads.out_weight.values()[i]; }});
  groups.push_back({"out_bias", model.out_bias, [&grads](std::size_t i) { return grads.out_bias[i]; }});
  if (model.hyper.trainable_embeddings && model.embedding.rows() > 1) {
    auto rows = model.embedding.values().subspan(m);
    groups.push_back({"embedding", rows, [&grads, m](std::size_t i) {
                        const auto id = static_cast<std::int32_t>(i / m + 1);
                        auto it = grads.embedding_rows.find(id);
                        return it == grads.embedding_rows.end() ? 0.0 : it->second[i % m];
                      }});
  }

  ForwardTrace scratch;
  auto loss_at = [&]() {
    forward_into(model, ids, std::nullopt, scratch);
    return cross_entropy(scratch.probs, label);
  };
  auto rel_error = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
  };
  auto numeric = [&](double& theta) {
    const double saved = theta;
    theta = saved + options.epsilon;
    const double up = loss_at();
    theta = saved - options.epsilon;
    const double down = loss_at();
    theta = saved;
    return (up - down) / (2.0 * options.epsilon);
  };

  GradCheckReport report;
  report.tolerance = options.tolerance;
  auto finish = [&](GradCheckGroup g) {
    g.passed = g.max_rel_error < options.tolerance;
    report.groups.push_back(std::move(g));
  };

  // Keep the report order K.., conv_bias, pool.., out.., embedding.
  std::size_t gi = 0;
  for (; gi < model.conv.size(); ++gi) {
    GradCheckGroup res{groups[gi].name, groups[gi].values.size(), 0.0, true};
    for (std::size_t i = 0; i < groups[gi].values.size(); ++i) {
      res.max_rel_error = std::max(res.max_rel_error, rel_error(groups[gi].analytic(i), numeric(groups[gi].values[i])));
    }
    finish(res);
  }
  {
    GradCheckGroup res{"conv_bias", bias_slots.size(), 0.0, true};
    for (auto [g, f] : bias_slots) {
      res.max_rel_error = std::max(res.max_rel_error, rel_error(grads.conv_bias[g][f], numeric(model.conv[g].bias[f])));
    }
    finish(res);
  }
  for (; gi < groups.size(); ++gi) {
    GradCheckGroup res{groups[gi].name, groups[gi].values.size(), 0.0, true};
    for (std::size_t i = 0; i < groups[gi].values.size(); ++i) {
      res.max_rel_error = std::max(res.max_rel_error, rel_error(groups[gi].analytic(i), numeric(groups[gi].values[i])));
    }
    finish(res);
  }
  return report;
}

}  // namespace opcnn
