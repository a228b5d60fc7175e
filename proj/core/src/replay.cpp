#include "coopcart/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace coopcart {

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
  store_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayMemory::push(Experience experience) {
  if (store_.size() < capacity_) {
    store_.push_back(std::move(experience));
    return;
  }
  store_[head_] = std::move(experience);
  head_ = (head_ + 1) % capacity_;
}

const Experience& ReplayMemory::operator[](std::size_t logical_index) const {
  if (logical_index >= store_.size())
    throw std::out_of_range("ReplayMemory: index out of range");
  return store_[(head_ + logical_index) % store_.size()];
}

int macro_batch_size(int macro_batch, int mini_batch, double epsilon) {
  const double scheduled =
      (macro_batch - mini_batch) * (1.0 - epsilon) + static_cast<double>(mini_batch);
  const int rounded = static_cast<int>(std::lround(scheduled));
  return std::clamp(rounded, mini_batch, macro_batch);
}

double temporal_priority(std::uint64_t now, std::uint64_t collected,
                         double priority_offset) {
  const double age = static_cast<double>(now - collected);
  return std::exp(-age) + std::max(priority_offset, kPriorityFloor);
}

namespace {

// Uniform sample of `count` distinct indices from [0, population), returned
// in uniformly random order. Floyd's subset draw followed by a Fisher-Yates
// shuffle; O(count) instead of O(population).
std::vector<std::uint32_t> uniform_without_replacement(std::uint64_t population,
                                                       std::size_t count, Rng& rng) {
  std::vector<std::uint32_t> picked;
  picked.reserve(count);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count * 2);
  for (std::uint64_t j = population - count; j < population; ++j) {
    const std::uint64_t r = rng.uniform_index(j + 1);
    if (seen.insert(r).second) {
      picked.push_back(static_cast<std::uint32_t>(r));
    } else {
      seen.insert(j);
      picked.push_back(static_cast<std::uint32_t>(j));
    }
  }
  for (std::size_t i = picked.size(); i > 1; --i)
    std::swap(picked[i - 1], picked[rng.uniform_index(i)]);
  return picked;
}

}  // namespace

std::optional<std::vector<std::uint32_t>> sample_ter(const ReplayMemory& memory,
                                                     const TerParams& params,
                                                     double epsilon,
                                                     std::uint64_t now, Rng& rng) {
  const std::size_t mini = static_cast<std::size_t>(params.mini_batch);
  if (memory.size() < mini) return std::nullopt;

  const std::size_t scheduled = static_cast<std::size_t>(
      macro_batch_size(params.macro_batch, params.mini_batch, epsilon));
  const std::size_t macro = std::min(scheduled, memory.size());

  std::vector<std::uint32_t> stage1 = uniform_without_replacement(memory.size(), macro, rng);
  if (macro == mini) return stage1;

  std::vector<double> priority(macro);
  double total = 0.0;
  for (std::size_t i = 0; i < macro; ++i) {
    priority[i] = temporal_priority(now, memory[stage1[i]].collect_step,
                                    params.priority_offset);
    total += priority[i];
  }

  std::vector<std::uint32_t> batch;
  batch.reserve(mini);
  for (std::size_t draw = 0; draw < mini; ++draw) {
    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    std::size_t chosen = macro;  // last not-yet-taken entry as rounding fallback
    for (std::size_t i = 0; i < macro; ++i) {
      if (priority[i] == 0.0) continue;
      cumulative += priority[i];
      chosen = i;
      if (target < cumulative) break;
    }
    batch.push_back(stage1[chosen]);
    total -= priority[chosen];
    priority[chosen] = 0.0;
  }
  return batch;
}

namespace {

constexpr char kSnapshotMagic[4] = {'C', 'C', 'R', 'M'};
constexpr std::uint32_t kSnapshotVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

void write_state(std::ofstream& out, const CartPoleState& x) {
  write_raw(out, x.position);
  write_raw(out, x.velocity);
  write_raw(out, x.angle);
  write_raw(out, x.angular_velocity);
  write_raw(out, x.step_index);
}

CartPoleState read_state(std::ifstream& in) {
  CartPoleState x;
  x.position = read_raw<double>(in);
  x.velocity = read_raw<double>(in);
  x.angle = read_raw<double>(in);
  x.angular_velocity = read_raw<double>(in);
  x.step_index = read_raw<std::int64_t>(in);
  return x;
}

}  // namespace

void ReplayMemory::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ReplayMemory::save: cannot open " + path.string());

  const std::uint32_t agents =
      empty() ? 0 : static_cast<std::uint32_t>((*this)[0].joint_control.size());
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  write_raw(out, kSnapshotVersion);
  write_raw(out, static_cast<std::uint64_t>(capacity_));
  write_raw(out, static_cast<std::uint64_t>(size()));
  write_raw(out, agents);
  for (std::size_t i = 0; i < size(); ++i) {
    const Experience& e = (*this)[i];
    write_state(out, e.state);
    for (double u : e.joint_control) write_raw(out, u);
    write_raw(out, e.reward);
    write_state(out, e.next_state);
    write_raw(out, static_cast<std::uint8_t>(e.terminal ? 1 : 0));
    write_raw(out, e.collect_step);
    write_raw(out, e.collect_epsilon);
  }
  if (!out) throw std::runtime_error("ReplayMemory::save: write failed for " + path.string());
}

ReplayMemory ReplayMemory::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ReplayMemory::load: cannot open " + path.string());

  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0)
    throw std::runtime_error("ReplayMemory::load: " + path.string() +
                             " is not a replay snapshot");
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kSnapshotVersion)
    throw std::runtime_error("ReplayMemory::load: unsupported snapshot version " +
                             std::to_string(version));

  const auto capacity = read_raw<std::uint64_t>(in);
  const auto count = read_raw<std::uint64_t>(in);
  const auto agents = read_raw<std::uint32_t>(in);

  ReplayMemory memory(static_cast<std::size_t>(capacity));
  for (std::uint64_t i = 0; i < count; ++i) {
    Experience e;
    e.state = read_state(in);
    e.joint_control.resize(agents);
    for (auto& u : e.joint_control) u = read_raw<double>(in);
    e.reward = read_raw<double>(in);
    e.next_state = read_state(in);
    e.terminal = read_raw<std::uint8_t>(in) != 0;
    e.collect_step = read_raw<std::uint64_t>(in);
    e.collect_epsilon = read_raw<double>(in);
    memory.push(std::move(e));
  }
  if (!in) throw std::runtime_error("ReplayMemory::load: truncated snapshot " + path.string());
  return memory;
}

}  // namespace coopcart
