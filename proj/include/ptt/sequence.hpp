/******************************************************************************
 * Copyright 2026 The PTTrack Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#ifndef PTT_SEQUENCE_HPP
#define PTT_SEQUENCE_HPP

#include <string>
#include <vector>

#include "ptt/geometry.hpp"

namespace ptt {

/// One frame of a tracklet: the scan plus the target's ground-truth box.
struct Frame {
  PointCloud cloud;
  OrientedBox3 gt_box;
};

/// Per-frame clouds and ground-truth boxes forming one SOT tracklet.
struct TrackSequence {
  std::string scene_id;
  std::vector<Frame> frames;

  std::size_t size() const { return frames.size(); }
  void validate() const;  // >= 2 frames, valid boxes
};

}  // namespace ptt

#endif  // PTT_SEQUENCE_HPP
