#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mixreg/dataset.hpp"
#include "mixreg/evaluate.hpp"
#include "mixreg/loss.hpp"
#include "mixreg/model.hpp"
#include "mixreg/regularization.hpp"

namespace mixreg {

enum class Method { Erm, Mixup, ErmModified, MixupApprox };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
std::vector<Method> all_methods();

struct TrainConfig {
  Method method = Method::Mixup;
  double alpha = 1.0;
  int epochs = 500;
  int batch_size = 50;
  double step_size = 5.0;
  std::uint64_t seed = 0;
  bool drop_r2 = true;
  double momentum = 0.0;
  double weight_decay = 0.0;
  bool shared_lambda = false;
  LossKind loss = LossKind::Logistic;
};

struct TraceRow {
  int epoch = 0;
  double objective = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double test_loss = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
};

struct TrainResult {
  Model model;
  TrainTrace trace;
  /// Training statistics for rescaled prediction; theta_bar is 1 for plain ERM.
  RescaleStats rescale;
};

/// Minibatch SGD. `train_set` outputs must match the loss (a single {0,1}
/// column for logistic); `test_set` may be one-hot or scalar.
TrainResult train(const Dataset& train_set, const Dataset& test_set, Model init, const TrainConfig& cfg);

/// Parameter gradient of the approximate Mixup objective over `rows`.
Vec approx_gradient(const RegularizationContext& ctx, std::span<const std::size_t> rows, const Model& model,
                    LossKind kind, bool drop_r2);

/// Class frequencies (1 - ybar, ybar) for a scalar target, ybar otherwise.
Vec class_mean(const Dataset& ds);

void save_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);

}  // namespace mixreg
