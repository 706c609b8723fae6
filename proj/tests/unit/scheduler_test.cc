/* Copyright 2026 The epd-sim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "epdsim/scheduler.h"

#include <algorithm>
#include <map>
#include <random>

#include "doctest.h"
#include "epdsim/error.h"

namespace epdsim {
namespace {

InstanceStatus row(int id, std::vector<Stage> stages, std::int64_t requests,
                   std::int64_t tokens = 0) {
  InstanceStatus s;
  s.instance_id = id;
  s.stages = std::move(stages);
  s.queued_requests = requests;
  s.queued_tokens = tokens;
  return s;
}

Request text_only() {
  Request r;
  r.text_tokens = 12;
  return r;
}

Request with_image(std::int64_t text) {
  Request r;
  r.text_tokens = text;
  ModalInput img;
  img.width = img.height = 280;
  img.visual_tokens = 100;
  r.inputs.push_back(img);
  return r;
}

const std::vector<Stage> kEPD = {Stage::kEncode, Stage::kPrefill,
                                 Stage::kDecode};
const std::vector<Stage> kPD = {Stage::kPrefill, Stage::kDecode};

TEST_CASE("routes depend only on modality") {
  CHECK(route(with_image(10)) == kEPD);
  CHECK(route(text_only()) == kPD);
  CHECK(route(with_image(0)) == kEPD);
  Request late = with_image(3);
  late.arrival_ms = 1e9;
  late.id = 77;
  CHECK(route(late) == route(with_image(3)));
}

TEST_CASE("least loaded instance wins") {
  const std::vector<InstanceStatus> t = {row(0, {Stage::kPrefill}, 3),
                                         row(1, {Stage::kPrefill}, 1),
                                         row(2, {Stage::kPrefill}, 2)};
  CHECK(select_instance(t, Stage::kPrefill, LoadMetric::kQueuedRequests) == 1);
}

TEST_CASE("ties go to the lowest instance id") {
  const std::vector<InstanceStatus> t = {row(0, {Stage::kDecode}, 1),
                                         row(1, {Stage::kDecode}, 1)};
  CHECK(select_instance(t, Stage::kDecode, LoadMetric::kQueuedRequests) == 0);
}

TEST_CASE("token metric can disagree with request metric") {
  const std::vector<InstanceStatus> t = {row(0, {Stage::kEncode}, 1, 4000),
                                         row(1, {Stage::kEncode}, 3, 300)};
  CHECK(select_instance(t, Stage::kEncode, LoadMetric::kQueuedRequests) == 0);
  CHECK(select_instance(t, Stage::kEncode, LoadMetric::kQueuedTokens) == 1);
}

TEST_CASE("only capable instances are considered") {
  const std::vector<InstanceStatus> t = {row(0, {Stage::kEncode}, 0),
                                         row(1, kPD, 5)};
  CHECK(select_instance(t, Stage::kDecode, LoadMetric::kQueuedRequests) == 1);
}

TEST_CASE("missing stage is a routing error naming it") {
  const std::vector<InstanceStatus> t = {row(0, {Stage::kEncode}, 0),
                                         row(1, {Stage::kPrefill}, 0)};
  try {
    select_instance(t, Stage::kDecode, LoadMetric::kQueuedRequests);
    FAIL("expected a routing error");
  } catch (const RoutingError& e) {
    CHECK(std::string(e.what()).find("decode") != std::string::npos);
  }
}

TEST_CASE("selection ignores the storage order of the table") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> load(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<InstanceStatus> t;
    for (int i = 0; i < 6; ++i)
      t.push_back(row(i, {Stage::kPrefill}, load(rng), load(rng) * 100));
    const int want =
        select_instance(t, Stage::kPrefill, LoadMetric::kQueuedTokens);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(t.begin(), t.end(), rng);
      REQUIRE(select_instance(t, Stage::kPrefill, LoadMetric::kQueuedTokens) ==
              want);
    }
  }
}

TEST_CASE("status updates") {
  StatusTable t(std::vector<InstanceStatus>{row(0, {Stage::kDecode}, 0)});
  update_status(t, {StatusEventKind::kEnqueue, 0, 50, 1.0});
  CHECK(t.at(0).queued_requests == 1);
  CHECK(t.at(0).queued_tokens == 50);
  CHECK(t.at(0).last_update == 1.0);

  update_status(t, {StatusEventKind::kDequeue, 0, 50, 2.0});
  update_status(t, {StatusEventKind::kComplete, 0, 50, 3.0});
  CHECK(t.at(0).queued_requests == 0);
  CHECK(t.at(0).queued_tokens == 0);
  CHECK(t.at(0).in_service_requests == 0);

  update_status(t, {StatusEventKind::kEnqueue, 0, 10, 4.0});
  update_status(t, {StatusEventKind::kEnqueue, 0, 20, 4.0});
  update_status(t, {StatusEventKind::kDequeue, 0, 10, 5.0});
  CHECK(t.at(0).queued_requests == 1);
  CHECK(t.at(0).load(LoadMetric::kQueuedRequests) == 2);

  CHECK_THROWS_AS(update_status(t, {StatusEventKind::kEnqueue, 9, 1, 0.0}),
                  LookupError);
  StatusTable fresh(std::vector<InstanceStatus>{row(0, {Stage::kDecode}, 0)});
  CHECK_THROWS_AS(update_status(fresh, {StatusEventKind::kDequeue, 0, 1, 0.0}),
                  InvalidInput);
}

TEST_CASE("status table built from a deployment lists every instance") {
  const StatusTable t(parse_deployment("(E-PD)×2"));
  REQUIRE(t.rows().size() == 4);
  CHECK(t.at(1).capable(Stage::kPrefill));
  CHECK(t.at(1).capable(Stage::kDecode));
  CHECK_FALSE(t.at(0).capable(Stage::kDecode));
}

TEST_CASE("identical replicas receive balanced assignments") {
  for (int k : {2, 3, 5, 8}) {
    std::vector<InstanceStatus> rows;
    for (int i = 0; i < k; ++i) rows.push_back(row(i, {Stage::kDecode}, 0));
    StatusTable t(rows);
    std::map<int, int> counts;
    for (int n = 0; n < 1000; ++n) {
      const int id = select_instance(t.rows(), Stage::kDecode,
                                     LoadMetric::kQueuedRequests);
      ++counts[id];
      update_status(t, {StatusEventKind::kEnqueue, id, 1, double(n)});
    }
    int lo = 1 << 30, hi = 0;
    for (int i = 0; i < k; ++i) {
      lo = std::min(lo, counts[i]);
      hi = std::max(hi, counts[i]);
    }
    CAPTURE(k);
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("default metrics per stage") {
  const SchedulerConfig c;
  CHECK(c.metric_for(Stage::kEncode) == LoadMetric::kQueuedTokens);
  CHECK(c.metric_for(Stage::kPrefill) == LoadMetric::kQueuedTokens);
  CHECK(c.metric_for(Stage::kDecode) == LoadMetric::kQueuedRequests);
  CHECK(parse_load_metric(load_metric_name(LoadMetric::kQueuedTokens)) ==
        LoadMetric::kQueuedTokens);
  CHECK_THROWS(parse_load_metric("gpu_util"));
}

}  // namespace
}  // namespace epdsim
