#include "race_sim.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

namespace racesim {

namespace {

struct Event {
  double time = 0.0;
  std::size_t lane = 0;
  std::size_t member = 0;
  bool success = false;
};

struct LaterEvent {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.lane != b.lane) return a.lane > b.lane;
    return a.member > b.member;
  }
};

}  // namespace

Result simulate(const std::vector<Lane>& lanes,
                const std::map<std::string, MemberOutcome>& outcomes,
                double baseline, bool free_slot_on_fast_failure) {
  std::priority_queue<Event, std::vector<Event>, LaterEvent> queue;
  std::vector<double> contributions(lanes.size(), baseline);
  std::vector<std::string> lane_winner(lanes.size());

  auto schedule = [&](std::size_t lane, std::size_t member, double start) {
    if (member >= lanes[lane].members.size()) return;  // lane exhausted
    const MemberOutcome& outcome =
        outcomes.at(lanes[lane].members[member]);
    const double slot = lanes[lane].slot;
    if (outcome.sat && outcome.time <= slot) {
      queue.push({start + outcome.time, lane, member, true});
    } else if (outcome.time <= slot && free_slot_on_fast_failure) {
      queue.push({start + outcome.time, lane, member, false});
    } else {
      queue.push({start + slot, lane, member, false});
    }
  };

  for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
    schedule(lane, 0, 0.0);
  }
  while (!queue.empty()) {
    const Event event = queue.top();
    queue.pop();
    if (event.success) {
      contributions[event.lane] = std::min(baseline, event.time);
      lane_winner[event.lane] = lanes[event.lane].members[event.member];
    } else {
      schedule(event.lane, event.member + 1, event.time);
    }
  }

  Result result;
  result.t_winner = baseline;
  result.winner = "baseline";
  result.contributions = contributions;
  for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
    if (!lane_winner[lane].empty() && contributions[lane] < result.t_winner) {
      result.t_winner = contributions[lane];
      result.winner = lane_winner[lane];
    }
  }
  return result;
}

}  // namespace racesim
