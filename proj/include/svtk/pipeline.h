// svtk/pipeline.h

// Copyright 2026 The svtk Authors
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

#ifndef SVTK_PIPELINE_H_
#define SVTK_PIPELINE_H_

#include <functional>
#include <map>
#include <string>

#include "svtk/scoring.h"
#include "svtk/training.h"
#include "svtk/upstream.h"

namespace svtk {

/// Runs fn(i) for i in [0, n) on up to jobs threads. The first exception is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Loads the model input for one manifest row.
ModelInput load_input(const ManifestRow& row, UpstreamMode mode);

/// Whole-utterance embeddings for every row, in manifest order.
EmbeddingStore embed_manifest(const SpeakerModel& model, const Manifest& manifest, int jobs = 1);

/// Utterance durations in seconds, from WAV headers or stack frame counts.
std::map<std::string, double> manifest_durations(const Manifest& manifest, UpstreamMode mode);

}  // namespace svtk

#endif  // SVTK_PIPELINE_H_
