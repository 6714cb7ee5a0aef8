/*
 * Copyright 2026 The mtransfer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "mtransfer/checkpoint.hpp"
#include "mtransfer/config.hpp"
#include "mtransfer/crowd_labels.hpp"
#include "mtransfer/dataset.hpp"
#include "mtransfer/dtw.hpp"
#include "mtransfer/error.hpp"
#include "mtransfer/eval.hpp"
#include "mtransfer/features.hpp"
#include "mtransfer/hash.hpp"
#include "mtransfer/model.hpp"
#include "mtransfer/net.hpp"
#include "mtransfer/part_frame.hpp"
#include "mtransfer/stop_words.hpp"
#include "mtransfer/synthetic.hpp"
#include "mtransfer/task.hpp"
#include "mtransfer/trajectory.hpp"
#include "mtransfer/trajectory_io.hpp"
