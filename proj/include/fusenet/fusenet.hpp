// Copyright 2026 The FuseNet Authors.
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

// Convenience header pulling in the whole library.

#pragma once

#include "fusenet/data.hpp"
#include "fusenet/embed.hpp"
#include "fusenet/errors.hpp"
#include "fusenet/eval.hpp"
#include "fusenet/fusion.hpp"
#include "fusenet/nn.hpp"
#include "fusenet/numcore.hpp"
#include "fusenet/parallel.hpp"
#include "fusenet/pipeline.hpp"
#include "fusenet/synthetic.hpp"
#include "fusenet/textprep.hpp"
#include "fusenet/train.hpp"
