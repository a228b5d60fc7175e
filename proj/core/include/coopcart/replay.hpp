#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "coopcart/env.hpp"
#include "coopcart/rng.hpp"

namespace coopcart {

/// One stored transition, owned by a single agent. The full joint control is
/// kept (agents observe partner controls retrospectively), the reward is the
/// owning agent's own, and the exploration rate at collection time gates the
/// imagined-experience machinery later on.
struct Experience {
  CartPoleState state;
  JointControl joint_control;
  double reward = 0.0;
  CartPoleState next_state;
  bool terminal = false;
  std::uint64_t collect_step = 0;   // global environment step of collection
  double collect_epsilon = 1.0;     // owning agent's exploration rate then
};

/// Bounded FIFO store. Index 0 is always the oldest surviving experience.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return store_.size(); }
  bool empty() const { return store_.empty(); }

  /// Appends, evicting the oldest experience when full.
  void push(Experience experience);

  const Experience& operator[](std::size_t logical_index) const;

  /// Binary snapshot for run resumption (versioned header + packed
  /// fixed-width records; layout documented in docs/formats.md).
  void save(const std::filesystem::path& path) const;
  static ReplayMemory load(const std::filesystem::path& path);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // physical index of the oldest element
  std::vector<Experience> store_;
};

/// Two-stage temporal sampler parameters.
struct TerParams {
  int macro_batch = 256;         // stage-1 size bound
  int mini_batch = 80;           // stage-2 (returned) size
  double priority_offset = 0.0;  // additive floor on the temporal priority
};

/// Numerical floor applied under the configured priority offset. With a pure
/// exp(-age) priority every macro-batch entry of an old memory can underflow
/// to exactly zero, leaving the sampling distribution undefined; the floor
/// realizes the non-zero-probability guard the offset exists for. When every
/// priority sits at the floor, stage 2 degrades to uniform sampling.
inline constexpr double kPriorityFloor = 1e-8;

/// Exploration-coupled stage-1 size: round((B - t)(1 - eps) + t) clamped to
/// [t, B]. Early training (eps near 1) collapses the macro-batch onto the
/// mini-batch, making sampling uniform; as exploration decays the macro-batch
/// grows toward B and temporal prioritization takes over.
int macro_batch_size(int macro_batch, int mini_batch, double epsilon);

/// exp(-(now - collected)) + max(priority_offset, kPriorityFloor).
double temporal_priority(std::uint64_t now, std::uint64_t collected,
                         double priority_offset);

/// Two-stage TER draw. Stage 1 samples macro_batch_size(...) experiences
/// (capped at the memory size) uniformly without replacement; stage 2 draws
/// mini_batch of them without replacement with probability proportional to
/// their temporal priority at `now`. Returns logical indices into `memory`
/// in draw order, or nullopt when the memory holds fewer than mini_batch
/// experiences (the caller skips its update).
std::optional<std::vector<std::uint32_t>> sample_ter(const ReplayMemory& memory,
                                                     const TerParams& params,
                                                     double epsilon,
                                                     std::uint64_t now, Rng& rng);

}  // namespace coopcart
