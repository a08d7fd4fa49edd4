// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.
//
// Data resolution: $RULKIT_DATA_DIR if set, else ./data; when the CMAPSS
// files are absent a deterministic synthesized corpus is generated under
// ./acceptance_data and used instead (the suite prints which corpus ran).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "rulkit/attention.hpp"
#include "rulkit/experiment.hpp"
#include "rulkit/gradcheck.hpp"
#include "rulkit/layers.hpp"
#include "rulkit/metrics.hpp"
#include "rulkit/model.hpp"
#include "rulkit/ops.hpp"
#include "rulkit/rng.hpp"
#include "rulkit/synth.hpp"

using namespace rulkit;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(const std::string& name, bool passed, const std::string& details = "") {
  std::cout << (passed ? "[PASS] " : "[FAIL] ") << name;
  if (!details.empty()) std::cout << " - " << details;
  std::cout << std::endl;
  if (!passed) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-1.0, 1.0);
  return Tensor::from_data(std::move(shape), std::move(values), requires_grad);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// ---------------------------------------------------------------- gradients

struct GradCase {
  std::string name;
  std::function<double(Rng&)> run;  // returns max relative error
};

double check_params(const std::function<Tensor()>& f, std::vector<Tensor> params,
                    double step = 1e-5) {
  return finite_diff_check(f, params, step).max_rel_err;
}

void run_gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<GradCase> cases;

  cases.push_back({"dense", [](Rng& rng) {
    const std::size_t in = 2 + rng.bounded(3), out = 1 + rng.bounded(7);
    DenseLayer layer(in, out, Activation::sigmoid, rng);
    Tensor x = random_tensor({2, in}, rng);
    return check_params([&] { return sum(square(layer.forward(x))); }, layer.parameters());
  }});

  cases.push_back({"srnn", [](Rng& rng) {
    const std::size_t hidden = 2 + rng.bounded(7), steps = 2 + rng.bounded(4);
    RecurrentCell cell = RecurrentCell::srnn(2, hidden, rng);
    std::vector<Tensor> inputs;
    for (std::size_t t = 0; t < steps; ++t) inputs.push_back(random_tensor({1, 2}, rng));
    auto f = [&] {
      Tensor h = Tensor::zeros({1, hidden});
      Tensor y;
      for (const Tensor& x : inputs) {
        auto [nh, ny] = cell.srnn_step(x, h);
        h = nh;
        y = ny;
      }
      return sum(square(y));
    };
    return check_params(f, cell.parameters());
  }});

  cases.push_back({"gru", [](Rng& rng) {
    const std::size_t hidden = 2 + rng.bounded(7), steps = 2 + rng.bounded(4);
    RecurrentCell cell = RecurrentCell::gru(2, hidden, rng);
    std::vector<Tensor> inputs;
    for (std::size_t t = 0; t < steps; ++t) inputs.push_back(random_tensor({1, 2}, rng));
    auto f = [&] {
      Tensor h = Tensor::zeros({1, hidden});
      for (const Tensor& x : inputs) h = cell.gru_step(x, h);
      return sum(square(h));
    };
    return check_params(f, cell.parameters());
  }});

  cases.push_back({"lstm", [](Rng& rng) {
    const std::size_t hidden = 2 + rng.bounded(7), steps = 2 + rng.bounded(4);
    RecurrentCell cell = RecurrentCell::lstm(2, hidden, rng);
    std::vector<Tensor> inputs;
    for (std::size_t t = 0; t < steps; ++t) inputs.push_back(random_tensor({1, 2}, rng));
    auto f = [&] {
      Tensor h = Tensor::zeros({1, hidden});
      Tensor c = Tensor::zeros({1, hidden});
      for (const Tensor& x : inputs) {
        auto [nh, nc] = cell.lstm_step(x, h, c);
        h = nh;
        c = nc;
      }
      return sum(square(h));
    };
    return check_params(f, cell.parameters());
  }});

  cases.push_back({"bilstm", [](Rng& rng) {
    const std::size_t hidden = 2 + rng.bounded(4), steps = 2 + rng.bounded(4);
    RecurrentCell fwd = RecurrentCell::lstm(2, hidden, rng);
    RecurrentCell bwd = RecurrentCell::lstm(2, hidden, rng);
    DenseLayer merge(2 * hidden, hidden, Activation::identity, rng);
    Tensor seq = random_tensor({steps, 2}, rng);
    std::vector<Tensor> params = fwd.parameters();
    for (Tensor& p : bwd.parameters()) params.push_back(p);
    for (Tensor& p : merge.parameters()) params.push_back(p);
    // the two-direction unroll has the largest loss magnitude of the suite;
    // a 1e-4 step keeps the difference quotient clear of cancellation noise
    return check_params(
        [&] { return sum(square(bilstm_forward(fwd, bwd, merge, seq))); }, params, 1e-4);
  }});

  cases.push_back({"conv1d", [](Rng& rng) {
    const std::size_t kernel = 2 + rng.bounded(3);
    Conv1DLayer layer(2, 3, kernel, 1 + rng.bounded(2), Padding::same, rng);
    Tensor seq = random_tensor({2, 5 + rng.bounded(4)}, rng, true);
    std::vector<Tensor> params = layer.parameters();
    params.push_back(seq);
    return check_params([&] { return sum(square(layer.forward(seq))); }, params);
  }});

  cases.push_back({"batchnorm_training", [](Rng& rng) {
    const std::size_t features = 2 + rng.bounded(6);
    BatchNormLayer bn(features);
    for (std::size_t j = 0; j < features; ++j) {
      bn.gamma.values()[j] = rng.uniform(0.5, 1.5);
      bn.beta.values()[j] = rng.uniform(-0.5, 0.5);
    }
    Tensor x = random_tensor({4, features}, rng, true);
    std::vector<Tensor> params = bn.parameters();
    params.push_back(x);
    return check_params([&] { return sum(square(bn.forward(x, true))); }, params);
  }});

  cases.push_back({"self_attention_soft", [](Rng& rng) {
    const std::size_t steps = 2 + rng.bounded(4), dim = 2 + rng.bounded(3);
    auto layer = SelfAttentionLayer::make(dim, 3, {}, rng);
    Tensor x = random_tensor({steps, dim}, rng, true);
    std::vector<Tensor> params = layer.parameters();
    params.push_back(x);
    return check_params([&] { return sum(square(layer.forward(x).context)); }, params);
  }});

  cases.push_back({"attention_regularizer", [](Rng& rng) {
    const std::size_t steps = 2 + rng.bounded(4);
    Tensor scores = random_tensor({steps, steps}, rng, true);
    std::vector<Tensor> params{scores};
    return check_params(
        [&] { return attention_regularizer(softmax_rows(scores), 1e-2); }, params);
  }});

  bool all_passed = true;
  for (const GradCase& grad_case : cases) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed * 7919);
      worst = std::max(worst, grad_case.run(rng));
    }
    const bool passed = worst < 1e-4;
    all_passed = all_passed && passed;
    criterion("gradient: " + grad_case.name, passed,
              "max rel err " + std::to_string(worst) + " over 5 seeds");
  }
  const double seconds = elapsed_s(start);
  criterion("gradient suite runtime < 2 min", seconds < 120.0,
            std::to_string(seconds) + " s");
  (void)all_passed;
}

// ------------------------------------------------------------------ metrics

void run_metric_oracles() {
  const double unit_penalty = std::exp(1.0) - 1.0;
  std::vector<double> truth{80.0};
  std::vector<double> late{90.0};
  std::vector<double> early{67.0};
  criterion("score(+10) = e - 1 within 1e-12",
            std::abs(score(late, truth) - unit_penalty) < 1e-12);
  criterion("score(-13) = e - 1 within 1e-12",
            std::abs(score(early, truth) - unit_penalty) < 1e-12);

  bool asymmetric = true;
  for (int d = 1; d <= 50; ++d) {
    std::vector<double> late_d{80.0 + d}, early_d{80.0 - d};
    asymmetric = asymmetric && score(late_d, truth) > score(early_d, truth);
  }
  criterion("score(+d) > score(-d) for d in 1..50", asymmetric);

  std::vector<double> pred{1.0, 2.0}, zeros{0.0, 0.0};
  criterion("rmse([1,2],[0,0]) = sqrt(2.5) within 1e-12",
            std::abs(rmse(pred, zeros) - std::sqrt(2.5)) < 1e-12);
}

// ------------------------------------------------------------ data pipeline

void run_data_pipeline(const fs::path& fd001_dir, const fs::path& fd003_dir) {
  for (Subset subset : {Subset::FD001, Subset::FD003}) {
    const fs::path& data_dir = subset == Subset::FD001 ? fd001_dir : fd003_dir;
    const auto records = parse_cmapss(train_file(data_dir, subset));
    const FeatureFrame frame = select_features(records, subset);

    if (subset == Subset::FD001) {
      criterion("FD001 selection yields exactly 17 feature columns",
                frame.n_columns() == 17, std::to_string(frame.n_columns()) + " columns");
    }

    std::size_t min_len = frame.units().front().length;
    for (const auto& span : frame.units()) min_len = std::min(min_len, span.length);
    criterion(std::string(to_string(subset)) + " minimum training-unit length > 120",
              min_len > 120, "min " + std::to_string(min_len));

    const auto targets = piecewise_rul(frame, 130);
    bool in_range = true, zero_at_failure = true;
    for (double t : targets) in_range = in_range && t >= 0.0 && t <= 130.0;
    for (const auto& span : frame.units())
      zero_at_failure = zero_at_failure && targets[span.first_row + span.length - 1] == 0.0;
    criterion(std::string(to_string(subset)) + " targets in [0,130], 0 at final cycle",
              in_range && zero_at_failure);

    std::size_t expected = 0;
    for (const auto& span : frame.units())
      expected += span.length >= 90 ? span.length - 89 : 0;
    const WindowBatch batch = generate_windows(frame, 90, targets);
    criterion(std::string(to_string(subset)) + " window count = sum(max(0, L - 89))",
              batch.count() == expected,
              std::to_string(batch.count()) + " vs " + std::to_string(expected));
  }
}

// ------------------------------------------------- softmax/attention checks

void run_attention_properties() {
  Rng rng(1234);
  bool stochastic = true;
  for (int trial = 0; trial < 1000 && stochastic; ++trial) {
    const std::size_t rows = 2 + rng.bounded(7);
    const std::size_t cols = 2 + rng.bounded(7);
    Tensor scores = random_tensor({rows, cols}, rng);
    Tensor weights = softmax_rows(scale(scores, 50.0));
    for (std::size_t i = 0; i < rows; ++i) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double w = weights.at(i, j);
        stochastic = stochastic && w >= 0.0;
        row_sum += w;
      }
      stochastic = stochastic && std::abs(row_sum - 1.0) <= 1e-9;
    }
  }
  criterion("softmax rows sum to 1 +/- 1e-9 on 1000 random score matrices", stochastic);

  AttentionConfig hard_config;
  hard_config.score_kind = ScoreKind::multiplicative;
  hard_config.mode = AttentionMode::hard;
  bool exact_rows = true;
  for (int trial = 0; trial < 50; ++trial) {
    auto layer = SelfAttentionLayer::make(3, 3, hard_config, rng);
    Tensor x = random_tensor({4, 3}, rng);
    auto out = layer.forward(x);
    for (std::size_t t = 0; t < 4 && exact_rows; ++t) {
      std::size_t chosen = 0;
      for (std::size_t s = 0; s < 4; ++s)
        if (out.weights.at(t, s) == 1.0) chosen = s;
      for (std::size_t j = 0; j < 3; ++j)
        exact_rows = exact_rows && out.context.at(t, j) == x.at(chosen, j);
    }
  }
  criterion("hard-mode context rows equal exactly one input row", exact_rows);

  bool means_match = true;
  for (int trial = 0; trial < 50; ++trial) {
    auto layer = SelfAttentionLayer::make(3, 4, {}, rng);
    for (Tensor* p : {&layer.W_t, &layer.W_x, &layer.W_a})
      for (double& v : p->values()) v = 0.0;
    Tensor x = random_tensor({5, 3}, rng);
    auto out = layer.forward(x);
    for (std::size_t j = 0; j < 3 && means_match; ++j) {
      double mean_j = 0.0;
      for (std::size_t t = 0; t < 5; ++t) mean_j += x.at(t, j);
      mean_j /= 5.0;
      for (std::size_t t = 0; t < 5; ++t)
        means_match = means_match && std::abs(out.context.at(t, j) - mean_j) <= 1e-12;
    }
  }
  criterion("uniform-score context equals the row mean within 1e-12", means_match);
}

// ------------------------------------------------------ end-to-end training

ExperimentConfig training_config(const fs::path& data_dir, const fs::path& out_dir,
                                 HeadMode mode, std::uint64_t seed) {
  ExperimentConfig config;
  config.subset = Subset::FD001;
  config.data_dir = data_dir;
  config.output_dir = out_dir;
  config.model.mode = mode;
  config.repeats = 3;
  config.train.seed = seed;
  return config;
}

void run_end_to_end(const fs::path& data_dir, const fs::path& work_dir) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult multi =
      run_experiment(training_config(data_dir, work_dir / "multi_fnn", HeadMode::multi_head, 0));
  const double multi_seconds = elapsed_s(start);

  const EvalReport& best = multi.best_report;
  criterion("multi-head FNN best-of-3 RMSE <= 18 within 30 epochs",
            best.rmse <= 18.0 && multi.config.train.epochs <= 30,
            "best rmse " + std::to_string(best.rmse) + " (seed " +
                std::to_string(best.seed) + ")");
  criterion("multi-head FNN best-of-3 Score <= 800",
            best.score <= 800.0, "best score " + std::to_string(best.score));
  criterion("multi-head FNN 3-seed budget <= 30 CPU-minutes", multi_seconds < 1800.0,
            std::to_string(multi_seconds) + " s");

  // directional claim, one fresh-seed re-run allowed
  auto directional = [&](std::uint64_t seed, const std::string& tag) {
    ExperimentResult single = run_experiment(
        training_config(data_dir, work_dir / ("single_fnn" + tag), HeadMode::single_head, seed));
    ExperimentResult multi_run =
        seed == 0 ? std::move(multi)
                  : run_experiment(training_config(data_dir, work_dir / ("multi_fnn" + tag),
                                                   HeadMode::multi_head, seed));
    std::cout << "  seed table (" << (tag.empty() ? "first run" : "re-run") << "):\n";
    for (const RepeatResult& rr : multi_run.repeats)
      std::cout << "    multi  seed " << rr.report.seed << ": rmse " << rr.report.rmse
                << " score " << rr.report.score << "\n";
    for (const RepeatResult& rr : single.repeats)
      std::cout << "    single seed " << rr.report.seed << ": rmse " << rr.report.rmse
                << " score " << rr.report.score << "\n";
    std::cout << "    multi mean rmse " << multi_run.mean_report.rmse
              << " vs single mean rmse " << single.mean_report.rmse << "\n";
    return multi_run.mean_report.rmse < single.mean_report.rmse;
  };

  bool ordered = directional(0, "");
  if (!ordered) {
    std::cout << "  first triple failed; taking the one allowed re-run with fresh seeds\n";
    ordered = directional(3, "_rerun");
  }
  criterion("mean-of-3 multi-head FNN RMSE < single-head FNN RMSE", ordered);
}

// -------------------------------------------------------------- determinism

void run_determinism(const fs::path& data_dir, const fs::path& work_dir) {
  auto make_config = [&](const fs::path& out) {
    ExperimentConfig config;
    config.subset = Subset::FD001;
    config.data_dir = data_dir;
    config.output_dir = out;
    config.train.epochs = 3;
    config.train.seed = 11;
    return config;
  };
  run_experiment(make_config(work_dir / "det_a"));
  run_experiment(make_config(work_dir / "det_b"));
  bool identical = true;
  for (const char* name : {"report.csv", "report.md", "history_seed11.csv",
                           "per_unit_seed11.csv"}) {
    identical = identical &&
                slurp(work_dir / "det_a" / name) == slurp(work_dir / "det_b" / name) &&
                !slurp(work_dir / "det_a" / name).empty();
  }
  criterion("identical config and seed give byte-identical result tables", identical);
}

// --------------------------------------------------------- parameter counts

void run_param_counts() {
  Rng rng(5);
  DenseLayer dense(3, 2, Activation::identity, rng);
  std::size_t dense_params = 0;
  for (const Tensor& p : dense.parameters()) dense_params += p.size();
  criterion("dense 3->2 has 8 parameters", dense_params == 8,
            std::to_string(dense_params));

  RecurrentCell lstm = RecurrentCell::lstm(2, 3, rng);
  std::size_t lstm_params = 0;
  for (const Tensor& p : lstm.parameters()) lstm_params += p.size();
  criterion("lstm 2->3 has 72 parameters", lstm_params == 72,
            std::to_string(lstm_params));

  ModelSpec spec;
  spec.mode = HeadMode::multi_head;
  spec.head.head_type = HeadType::fnn;
  spec.head.layer_sizes = {4};
  spec.trunk_sizes = {3};
  spec.n_signals = 5;
  spec.window_length = 7;
  Model model = build_model(spec);
  const std::size_t per_head = 7 * 4 + 4;
  const std::size_t trunk = (5 * 4) * 3 + 3 + 2 * 3 + (3 * 1 + 1);
  criterion("multi-head total = n_heads x head + trunk",
            count_params(model) == 5 * per_head + trunk,
            std::to_string(count_params(model)));
}

}  // namespace

int main() {
  std::cout << "rulkit acceptance suite\n";
  const auto started = std::chrono::steady_clock::now();

  fs::path data_dir = "data";
  if (const char* env = std::getenv("RULKIT_DATA_DIR")) data_dir = env;
  const fs::path fallback = "acceptance_data";
  fs::path fd001_dir, fd003_dir;
  try {
    fd001_dir = ensure_cmapss_data(data_dir, Subset::FD001, fallback);
    fd003_dir = ensure_cmapss_data(data_dir, Subset::FD003, fallback);
  } catch (const Error& e) {
    std::cerr << "data setup failed: " << e.what() << "\n";
    return 2;
  }
  std::cout << "FD001 dataset: "
            << (fd001_dir == data_dir ? "user-provided files in " : "synthesized corpus in ")
            << fd001_dir.string() << "\n";
  std::cout << "FD003 dataset: "
            << (fd003_dir == data_dir ? "user-provided files in " : "synthesized corpus in ")
            << fd003_dir.string() << "\n\n";

  const fs::path work_dir = "acceptance_runs";
  fs::remove_all(work_dir);
  fs::create_directories(work_dir);

  try {
    run_gradient_suite();
    run_metric_oracles();
    run_data_pipeline(fd001_dir, fd003_dir);
    run_attention_properties();
    run_param_counts();
    run_determinism(fd001_dir, work_dir);
    run_end_to_end(fd001_dir, work_dir);
  } catch (const std::exception& e) {
    std::cerr << "acceptance suite aborted: " << e.what() << "\n";
    return 2;
  }

  std::cout << "\ntotal: " << (g_failures == 0 ? "all criteria passed" :
                               std::to_string(g_failures) + " criteria failed")
            << " in " << elapsed_s(started) << " s\n";
  return g_failures == 0 ? 0 : 1;
}
