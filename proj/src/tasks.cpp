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

#include "otaro/tasks.hpp"

#include "otaro/errors.hpp"
#include "otaro/trainer.hpp"

namespace otaro {

TaskOptions default_task_options(Architecture arch) {
  TaskOptions o;
  o.arch = arch;
  if (arch == Architecture::mlp_regressor) {
    o.pretrain_epochs = 60;
    o.pretrain_lr = 0.05;
    o.finetune_lr = 0.001;
    o.finetune_epochs = 3;
  }
  return o;
}

PreparedTask prepare_task(const TaskOptions& o) {
  if (o.batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  Dataset data = o.arch == Architecture::char_lm
                     ? make_char_dataset(load_text(o.corpus), o.context, o.batch_size,
                                         o.eval_fraction, o.data_seed)
                     : make_regression_dataset(o.inputs, o.train_batches, o.eval_batches,
                                               o.batch_size, o.data_seed);
  Rng rng(o.init_seed);
  ToyModel model =
      o.arch == Architecture::char_lm
          ? make_char_lm(static_cast<Eigen::Index>(o.context), data.output_dim, o.hidden, rng,
                         o.group_size)
          : make_mlp_regressor(data.input_dim, o.hidden, rng, o.group_size);
  if (o.pretrain_epochs == 0) return {std::move(data), std::move(model)};

  TrainConfig pc;
  pc.eta = o.pretrain_lr;
  pc.epochs = o.pretrain_epochs;
  pc.seed = o.pretrain_seed;
  pc.strategy = {StrategyKind::fp_baseline, std::nullopt};
  pc.evaluate_each_epoch = false;
  ToyModel trained = train(std::move(model), data.train, data.eval, pc).model;
  return {std::move(data), std::move(trained)};
}

}  // namespace otaro
