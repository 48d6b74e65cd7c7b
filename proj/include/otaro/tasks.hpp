// Copyright 2026 The otaro Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "otaro/models.hpp"

namespace otaro {

/// Recipe for one of the two toy tasks: data, initialization, and a short
/// unquantized pre-training run that the schedules then fine-tune.
struct TaskOptions {
  Architecture arch = Architecture::char_lm;
  std::uint64_t data_seed = 1;
  std::uint64_t init_seed = 7;
  std::uint64_t pretrain_seed = 3;
  std::size_t pretrain_epochs = 30;
  double pretrain_lr = 0.3;
  std::size_t batch_size = 32;
  std::size_t group_size = 64;
  Eigen::Index hidden = 32;

  // char_lm
  std::filesystem::path corpus = OTARO_DATA_DIR "/corpus.txt";
  std::size_t context = 3;
  double eval_fraction = 0.1;

  // mlp_regressor
  Eigen::Index inputs = 4;
  std::size_t train_batches = 64;
  std::size_t eval_batches = 16;

  /// Suggested fine-tuning step size and length for this task.
  double finetune_lr = 0.02;
  std::size_t finetune_epochs = 1;
};

TaskOptions default_task_options(Architecture arch);

struct PreparedTask {
  Dataset data;
  ToyModel model;
};

/// Builds the dataset and model, then pre-trains unquantized for
/// `pretrain_epochs` (none when zero).
PreparedTask prepare_task(const TaskOptions& options);

}  // namespace otaro
