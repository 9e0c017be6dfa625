// svtk/src/pipeline.cc

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

#include "svtk/pipeline.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "svtk/error.h"

namespace svtk {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ModelInput load_input(const ManifestRow& row, UpstreamMode mode) {
  if (mode == UpstreamMode::kImport) return load_stack(row.path);
  return read_wav(row.path);
}

EmbeddingStore embed_manifest(const SpeakerModel& model, const Manifest& manifest, int jobs) {
  std::vector<Eigen::RowVectorXd> out(manifest.rows.size());
  parallel_for(manifest.rows.size(), jobs, [&](std::size_t i) {
    const auto& row = manifest.rows[i];
    out[i] = model.embed(load_input(row, model.config().mode), row.speaker_id);
  });
  EmbeddingStore store(model.ecapa().config().embed_dim);
  for (std::size_t i = 0; i < out.size(); ++i) store.add(manifest.rows[i].utt_id, out[i]);
  return store;
}

std::map<std::string, double> manifest_durations(const Manifest& manifest, UpstreamMode mode) {
  std::map<std::string, double> out;
  for (const auto& row : manifest.rows) {
    if (mode == UpstreamMode::kImport) {
      const LayerStack s = load_stack(row.path);
      out[row.utt_id] = static_cast<double>(s.num_frames()) / s.frame_rate_hz;
    } else {
      out[row.utt_id] = static_cast<double>(wav_num_samples(row.path)) / kSampleRate;
    }
  }
  return out;
}

}  // namespace svtk
