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
#ifndef PTT_PIPELINE_HPP
#define PTT_PIPELINE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ptt/autograd.hpp"
#include "ptt/backbone.hpp"
#include "ptt/geometry.hpp"
#include "ptt/sequence.hpp"
#include "ptt/transformer.hpp"

namespace ptt {

enum class TemplateMode { kFirstGt, kPreviousResult, kFirstAndPrevious, kAllPrevious };
enum class SearchMode { kPreviousResult, kPreviousGt, kCurrentGt };

TemplateMode template_mode_from_string(const std::string& s);
SearchMode search_mode_from_string(const std::string& s);
const char* template_mode_name(TemplateMode m);
const char* search_mode_name(SearchMode m);

struct TemplatePolicy {
  TemplateMode mode = TemplateMode::kFirstAndPrevious;
};

struct SearchAreaPolicy {
  SearchMode mode = SearchMode::kPreviousResult;
  double margin_x = 2.0;  // half-extent enlargement per axis, meters
  double margin_y = 2.0;
  double margin_z = 1.0;
};

struct Vote {
  Point3 center;              // seed coordinate + predicted offset
  std::vector<double> feat;   // [D]
  double objectness = 0.0;    // logit
};

struct Proposal {
  OrientedBox3 box;
  double score = 0.0;  // logit
  int cluster_id = 0;
};

enum class PttPlacement { kNone, kVoteOnly, kProposalOnly, kAll };
PttPlacement ptt_placement_from_string(const std::string& s);
const char* ptt_placement_name(PttPlacement p);

struct TrackerConfig {
  BackboneConfig backbone = BackboneConfig::defaults();
  PttConfig ptt;                       // dims filled from backbone in finalize()
  PttPlacement placement = PttPlacement::kAll;
  std::size_t template_budget = 512;
  std::size_t search_budget = 1024;
  std::size_t augment_hidden = 64;
  std::size_t vote_hidden = 64;
  std::size_t cluster_count = 16;
  double cluster_radius = 0.3;         // meters
  std::size_t cluster_cap = 8;
  std::size_t cluster_hidden = 64;
  std::size_t cluster_feat_dim = 64;
  std::size_t proposal_hidden = 64;

  bool ptt_in_vote() const {
    return placement == PttPlacement::kVoteOnly || placement == PttPlacement::kAll;
  }
  bool ptt_in_proposal() const {
    return placement == PttPlacement::kProposalOnly || placement == PttPlacement::kAll;
  }
  /// Fills derived PTT dims (input widths) and validates.
  void finalize();

  static TrackerConfig desk_defaults();   // paper-scale desk profile
  static TrackerConfig small_profile();   // fast profile for ablation sweeps
};

void init_tracker_params(ParamStore& store, const TrackerConfig& config, Rng& rng);

/// Fuses template context into each search seed: cosine-similarity row
/// against all template descriptors, concatenated with the best-matching
/// template descriptor and the seed's own descriptor, reduced by an MLP
/// back to width D.
Value augment_similarity_graph(Graph& g, Value search_feats, Value template_feats,
                               ParamStore& store, Value* similarity_out = nullptr);
SeedSet augment_similarity(const SeedSet& template_seeds, const SeedSet& search_seeds,
                           ParamStore& store);

/// Graph handles produced by one full forward pass over a (template, search)
/// pair; used both for tracking and for assembling the training loss.
struct StageOutputs {
  std::vector<Point3> seed_coords;   // [N] search seeds
  Value seed_logits;                 // [N] vote objectness
  Value vote_offsets;                // [N, 3]
  Value vote_centers;                // [N, 3] coords + offsets
  Value vote_feats;                  // [N, D]
  std::vector<std::int32_t> cluster_vote_ids;  // FPS-selected vote indices
  std::vector<Point3> cluster_centers;         // numeric copies of the centers
  Value cluster_centers_value;       // [C, 3]
  Value proposal_offsets;            // [C, 4] dx, dy, dz, dheading
  Value proposal_centers;            // [C, 3]
  Value proposal_headings;           // [C]
  Value proposal_logits;             // [C]
  Value vote_attention;              // [N, k, M] when PTT in vote, else invalid
  Value prop_attention;              // [C, k, M] when PTT in proposal, else invalid
};

StageOutputs tracker_forward_graph(Graph& g, const PointCloud& template_cloud,
                                   const PointCloud& search_cloud,
                                   const TrackerConfig& config, ParamStore& store);

/// Numeric voting wrapper over pre-augmented seeds.
std::vector<Vote> vote(const SeedSet& seeds, bool use_ptt, const TrackerConfig& config,
                       ParamStore& store);

/// Clusters votes (FPS centers + radius grouping), pools member features,
/// optionally refines with PTT over cluster centers, and decodes per-cluster
/// center/heading offsets and a score logit. `box_size` comes from the
/// first-frame ground truth.
std::vector<Proposal> generate_proposals(const std::vector<Vote>& votes, bool use_ptt,
                                         const TrackerConfig& config, ParamStore& store,
                                         const OrientedBox3& size_template);

/// Highest score logit; ties broken by lowest cluster id.
const Proposal& select_box(const std::vector<Proposal>& proposals);

struct TrackHistory {
  const TrackSequence* seq = nullptr;
  std::vector<OrientedBox3> results;  // predicted boxes for frames [0, t)
  std::size_t current_frame = 1;
};

/// Canonicalized, FPS-resampled template cloud per policy. Empty output
/// means every contributing crop was empty.
PointCloud build_template(const TrackHistory& history, TemplatePolicy policy,
                          std::size_t budget);

struct SearchArea {
  PointCloud cloud;                        // canonical frame of ref_box
  OrientedBox3 ref_box;                    // margin-free reference
  RigidTransform2DYaw world_from_canonical;
  bool empty = false;
};

SearchArea build_search_area(const PointCloud& frame_cloud, const OrientedBox3& ref_box,
                             const SearchAreaPolicy& policy, std::size_t budget);

struct FrameTrace {
  int frame = 0;
  OrientedBox3 box;
  double score = 0.0;
  double iou = 0.0;
  bool empty_search = false;
};

struct StageTimings {
  double prepare_ms = 0.0;
  double forward_ms = 0.0;
  double post_ms = 0.0;
  double total_ms = 0.0;
  std::size_t frames = 0;
  double fps() const { return total_ms > 0.0 ? 1000.0 * frames / total_ms : 0.0; }
};

/// Test/diagnostic overrides replacing the learned regressor.
struct TrackOverride {
  enum class Kind { kNone, kOracleGt, kCanonicalConstant };
  Kind kind = Kind::kNone;
  Point3 offset;      // canonical-frame bias for kCanonicalConstant
  double dyaw = 0.0;
};

struct TrackResult {
  std::vector<FrameTrace> frames;
  StageTimings timings;
};

/// Called after each full network forward during tracking (never for
/// override or coasted frames); used for attention dumps and diagnostics.
struct FrameObservation {
  int frame = 0;
  const Graph* graph = nullptr;
  const StageOutputs* outputs = nullptr;
  const SearchArea* search = nullptr;
};
using FrameObserver = std::function<void(const FrameObservation&)>;

/// Frame-to-frame loop: frame 0 emits the ground truth, later frames run
/// template -> search -> backbone -> augment -> vote -> propose -> select,
/// de-canonicalized to world coordinates. Box sizes are inherited from the
/// first-frame ground truth. Empty search areas coast on the previous box.
TrackResult track_sequence(const TrackSequence& seq, const TrackerConfig& config,
                           ParamStore& store, TemplatePolicy template_policy,
                           SearchAreaPolicy search_policy,
                           const TrackOverride& override_ = {},
                           const FrameObserver& observer = {});

}  // namespace ptt

#endif  // PTT_PIPELINE_HPP
